"""Monte Carlo estimation of key-error rates.

Every trial draws its randomness from a Philox stream keyed by the
experiment seed and positioned by the trial index, so counts are identical
for any number of worker processes.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import beta

from .codec import CodeSpec, lookup, parse_code
from .fano import FanoConfig
from .helper_data import DECODERS, INPUT_MODES, KEY_LENGTH, enroll, reconstruct
from .sram_model import (
    DEFAULT_PARAMS,
    CellArray,
    ModelParams,
    estimate_cells,
    ignored_fraction,
    readouts,
    sample_cells,
)

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "trial_rng",
    "run_trial",
    "run_experiment",
    "run_sweep",
    "clopper_pearson",
    "ignored_fraction_report",
    "CSV_FIELDS",
    "results_to_csv",
    "results_to_json",
]

_MASK64 = (1 << 64) - 1
_STREAM_TRIAL = 0
_STREAM_DEVICE = 1

CSV_FIELDS = (
    "code", "mu", "pt", "decoder", "input", "list", "readouts",
    "trials", "errors", "ker", "ci_low", "ci_high", "seed", "wall_s",
)


@dataclass(frozen=True)
class ExperimentConfig:
    code: CodeSpec
    p_t: float | None = None
    decoder: str = "viterbi"
    input_mode: str = "soft"
    list_size: int = 1
    readouts: int = 1
    extractions: int = 1000
    seed: int = 0
    fano: FanoConfig | None = None
    info_length: int = KEY_LENGTH
    noise: bool = True
    fixed_device: bool = False
    enrollment_readouts: int = 0  # 0: enroll from the model's own reference bits
    params: ModelParams = field(default=DEFAULT_PARAMS)

    def __post_init__(self):
        if isinstance(self.code, str):
            object.__setattr__(self, "code", parse_code(self.code))
        if self.p_t is not None and not 0.0 < self.p_t <= 0.5:
            raise ValueError(f"p_t must lie in (0, 0.5], got {self.p_t}")
        if self.decoder not in DECODERS:
            raise ValueError(f"unknown decoder {self.decoder!r}")
        if self.input_mode not in INPUT_MODES:
            raise ValueError(f"unknown input mode {self.input_mode!r}")
        if self.list_size < 1 or self.readouts < 1 or self.extractions < 1:
            raise ValueError("list size, readouts and extractions must be positive")
        if self.decoder == "fano" and self.list_size != 1:
            raise ValueError("the Fano decoder supports list size 1 only")
        if self.enrollment_readouts < 0:
            raise ValueError("enrollment_readouts must be >= 0")


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    errors: int
    extractions: int
    ci_low: float
    ci_high: float
    mean_decoder_effort: float
    wall_time: float

    @property
    def ker(self) -> float:
        return self.errors / self.extractions

    @property
    def ker_text(self) -> str:
        """KER as printed; zero counts become an upper bound ``<1/trials``."""
        if self.errors == 0:
            return f"<{1.0 / self.extractions:.0e}"
        return f"{self.ker:.3e}"

    def row(self, timing: bool = True) -> dict:
        cfg = self.config
        return {
            "code": cfg.code.text,
            "mu": cfg.code.mu,
            "pt": "" if cfg.p_t is None else f"{cfg.p_t:g}",
            "decoder": cfg.decoder,
            "input": cfg.input_mode,
            "list": cfg.list_size,
            "readouts": cfg.readouts,
            "trials": self.extractions,
            "errors": self.errors,
            "ker": self.ker_text,
            "ci_low": f"{self.ci_low:.6e}",
            "ci_high": f"{self.ci_high:.6e}",
            "seed": cfg.seed,
            "wall_s": f"{self.wall_time:.3f}" if timing else "0",
        }


def clopper_pearson(errors: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    a = 1.0 - level
    lo = 0.0 if errors == 0 else float(beta.ppf(a / 2, errors, trials - errors + 1))
    hi = 1.0 if errors == trials else float(beta.ppf(1 - a / 2, errors + 1, trials - errors))
    return lo, hi


def trial_rng(seed: int, trial_index: int, stream: int = _STREAM_TRIAL) -> np.random.Generator:
    bitgen = np.random.Philox(key=[seed & _MASK64, stream], counter=[0, 0, trial_index, 0])
    return np.random.Generator(bitgen)


def _sample_device(rng, cfg: ExperimentConfig) -> CellArray:
    need = cfg.code.codeword_length(cfg.info_length)
    if cfg.p_t is None:
        return sample_cells(rng, need, cfg.params)
    chunk = _chunk_size(need, cfg.p_t, cfg.params)
    parts, have = [], 0
    while have < need:
        part = sample_cells(rng, chunk, cfg.params)
        parts.append(part.p_one)
        have += int(np.count_nonzero(part.p_e < cfg.p_t))
    return CellArray(np.concatenate(parts))


@functools.lru_cache(maxsize=64)
def _chunk_size(need: int, p_t: float, params: ModelParams) -> int:
    keep = 1.0 - float(ignored_fraction(p_t, params))
    return int(math.ceil(need / max(keep, 1e-3) * 1.1)) + 16


def _fixed_device(cfg: ExperimentConfig) -> CellArray:
    return _sample_device(trial_rng(cfg.seed, 0, _STREAM_DEVICE), cfg)


def _trial(cfg: ExperimentConfig, index: int, device: CellArray | None = None) -> tuple[bool, int]:
    rng = trial_rng(cfg.seed, index)
    cells = device if device is not None else _sample_device(rng, cfg)
    if cfg.enrollment_readouts:
        enrolled = estimate_cells(readouts(cells, rng, cfg.enrollment_readouts))
    else:
        enrolled = cells
    key, helper = enroll(
        enrolled, cfg.code, cfg.p_t, rng, info_length=cfg.info_length, readouts=cfg.readouts,
        decoder=cfg.decoder, list_size=cfg.list_size,
    )
    if cfg.noise:
        resp = readouts(cells, rng, cfg.readouts)
    else:
        resp = np.tile(enrolled.ref_bits, (cfg.readouts, 1))
    rec = reconstruct(
        resp, helper, enrolled.p_e, decoder=cfg.decoder, list_size=cfg.list_size,
        input_mode=cfg.input_mode, fano=cfg.fano,
        verify=lambda bits: np.array_equal(bits, key),
    )
    return (not rec.ok), rec.effort


def run_trial(cfg: ExperimentConfig, trial_index: int) -> bool:
    """One extraction; True when the key was not recovered."""
    device = _fixed_device(cfg) if cfg.fixed_device else None
    return _trial(cfg, trial_index, device)[0]


def _run_range(cfg: ExperimentConfig, start: int, stop: int) -> tuple[int, int]:
    device = _fixed_device(cfg) if cfg.fixed_device else None
    errors = effort = 0
    for i in range(start, stop):
        err, eff = _trial(cfg, i, device)
        errors += err
        effort += eff
    return errors, effort


def _chunks(total: int, parts: int) -> list[tuple[int, int]]:
    size = max(1, math.ceil(total / parts))
    return [(s, min(s + size, total)) for s in range(0, total, size)]


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    t0 = time.perf_counter()
    n = cfg.extractions
    if workers <= 1:
        errors, effort = _run_range(cfg, 0, n)
    else:
        spans = _chunks(n, workers * 4)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(_run_range, cfg, a, b) for a, b in spans]
            parts = [f.result() for f in futs]
        errors = sum(p[0] for p in parts)
        effort = sum(p[1] for p in parts)
    lo, hi = clopper_pearson(errors, n)
    return ExperimentResult(
        config=cfg, errors=int(errors), extractions=n, ci_low=lo, ci_high=hi,
        mean_decoder_effort=effort / n, wall_time=time.perf_counter() - t0,
    )


_AXES = ("pt", "readouts", "list", "code", "mu")


def axis_configs(base: ExperimentConfig, axis: str, values: Sequence) -> list[ExperimentConfig]:
    if axis not in _AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {', '.join(_AXES)}")
    if len(values) == 0:
        raise ValueError("sweep axis has no values")
    out = []
    for v in values:
        if axis == "pt":
            out.append(replace(base, p_t=None if v is None else float(v)))
        elif axis == "readouts":
            out.append(replace(base, readouts=int(v)))
        elif axis == "list":
            out.append(replace(base, list_size=int(v)))
        elif axis == "code":
            out.append(replace(base, code=v if isinstance(v, CodeSpec) else parse_code(v)))
        else:
            out.append(replace(base, code=lookup(base.code.n, int(v))))
    return out


def run_sweep(base: ExperimentConfig, axis: str, values: Sequence, workers: int = 1) -> list[ExperimentResult]:
    """One experiment per axis value, each with the base seed."""
    return [run_experiment(c, workers) for c in axis_configs(base, axis, values)]


def ignored_fraction_report(grid: Iterable[float], params: ModelParams = DEFAULT_PARAMS,
                            mc_cells: int = 0, seed: int = 0) -> list[dict]:
    """Analytic ignored-bit fraction per threshold, optionally with a sampled estimate."""
    grid = [float(g) for g in grid]
    if not grid:
        raise ValueError("empty p_t grid")
    p_e = None
    if mc_cells:
        p_e = sample_cells(trial_rng(seed, 0, _STREAM_DEVICE), mc_cells, params).p_e
    rows = []
    for pt in grid:
        row = {"pt": f"{pt:g}", "ignored_fraction": f"{float(ignored_fraction(pt, params)):.6f}"}
        if p_e is not None:
            row["mc_ignored_fraction"] = f"{float(np.mean(p_e >= pt)):.6f}"
        rows.append(row)
    return rows


def results_to_csv(results: Iterable[ExperimentResult], timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in results:
        w.writerow(r.row(timing))
    return buf.getvalue()


def results_to_json(results: Iterable[ExperimentResult], timing: bool = True) -> str:
    out = []
    for r in results:
        row = r.row(timing)
        row["ker_value"] = r.ker
        row["mean_decoder_effort"] = r.mean_decoder_effort
        out.append(row)
    return json.dumps(out, indent=2) + "\n"
