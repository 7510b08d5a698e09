"""Key extraction from SRAM PUFs with convolutional codes."""

from .codec import CodeSpec, encode, lookup, parse_code, random_info, registry
from .fano import FanoConfig, FanoOutcome, fano_decode
from .helper_data import HelperData, ShortageError, enroll, key_digest, reconstruct
from .simulator import ExperimentConfig, ExperimentResult, run_experiment, run_sweep, run_trial
from .sram_model import ModelParams, SramCell
from .viterbi import build_trellis, hard_decode, list_decode, viterbi_decode

__version__ = "0.1.0"

__all__ = [
    "CodeSpec", "encode", "lookup", "parse_code", "random_info", "registry",
    "FanoConfig", "FanoOutcome", "fano_decode",
    "HelperData", "ShortageError", "enroll", "key_digest", "reconstruct",
    "ExperimentConfig", "ExperimentResult", "run_experiment", "run_sweep", "run_trial",
    "ModelParams", "SramCell",
    "build_trellis", "hard_decode", "list_decode", "viterbi_decode",
]
