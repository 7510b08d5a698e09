"""Code-offset helper data: enrollment and key reconstruction.

Enrollment publishes ``offset = encode(key) xor r`` for the used cells plus a
SHA-256 digest of the key. Reconstruction decodes ``offset xor r'`` and, when
a candidate list is requested, returns the first candidate whose digest
matches.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .codec import CodeSpec, encode, random_info
from .fano import FanoConfig, fano_decode, llr_to_channel
from .sram_model import CellArray, combine_readouts, majority_vote, select_cells, soft_values
from .viterbi import (
    build_trellis,
    hard_to_soft,
    iter_candidates,
    rank_by_likelihood,
    viterbi_decode,
)

__all__ = [
    "KEY_LENGTH",
    "DECODERS",
    "INPUT_MODES",
    "ShortageError",
    "HelperData",
    "Reconstruction",
    "key_digest",
    "enroll",
    "reconstruct",
]

KEY_LENGTH = 256
DECODERS = ("viterbi", "fano")
INPUT_MODES = ("soft", "hard")


class ShortageError(ValueError):
    """Not enough usable cells to hold the codeword."""

    def __init__(self, required: int, available: int):
        super().__init__(f"need {required} usable cells, only {available} available")
        self.required = required
        self.available = available


def key_digest(bits) -> bytes:
    """SHA-256 over the key bits packed MSB-first."""
    return hashlib.sha256(np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()).digest()


@dataclass(frozen=True)
class HelperData:
    code: CodeSpec
    mask: np.ndarray
    offset: np.ndarray
    digest: bytes
    p_t: float | None = None
    readouts: int = 1
    decoder: str = "viterbi"
    list_size: int = 1
    info_length: int = KEY_LENGTH

    def __post_init__(self):
        expected = self.code.codeword_length(self.info_length)
        if self.offset.shape != (expected,):
            raise ValueError(f"offset has {self.offset.size} bits, code needs {expected}")
        if self.mask.shape != self.offset.shape:
            raise ValueError("mask and offset lengths differ")
        if len(self.digest) != 32:
            raise ValueError("digest must be 32 bytes")
        if self.decoder not in DECODERS:
            raise ValueError(f"unknown decoder {self.decoder!r}")
        if self.list_size < 1 or self.readouts < 1:
            raise ValueError("list size and readouts must be positive")


def _usable(cells: CellArray, need: int, p_t: float | None) -> np.ndarray:
    if p_t is None:
        idx = np.arange(min(need, len(cells)))
    else:
        idx = select_cells(cells, p_t)
    if idx.size < need:
        raise ShortageError(need, int(idx.size))
    return idx[:need]


def enroll(cells, spec: CodeSpec, p_t: float | None, rng: np.random.Generator, *,
           info_length: int = KEY_LENGTH, readouts: int = 1, decoder: str = "viterbi",
           list_size: int = 1, key=None) -> tuple[np.ndarray, HelperData]:
    """Draw a key and derive helper data from the cells' reference bits.

    With ``p_t`` the first cells whose error probability is below it are used;
    without it, the first ``n * (L + mu)`` cells.
    """
    if not isinstance(cells, CellArray):
        cells = CellArray.from_cells(cells)
    need = spec.codeword_length(info_length)
    mask = _usable(cells, need, p_t)
    if key is None:
        key = random_info(rng, info_length)
    key = np.asarray(key, dtype=np.uint8)
    if key.shape != (info_length,):
        raise ValueError(f"key must have {info_length} bits")
    offset = encode(key, spec) ^ cells.ref_bits[mask]
    helper = HelperData(
        code=spec, mask=mask, offset=offset, digest=key_digest(key), p_t=p_t,
        readouts=readouts, decoder=decoder, list_size=list_size, info_length=info_length,
    )
    return key, helper


@dataclass(frozen=True)
class Reconstruction:
    key: np.ndarray | None
    candidates_tried: int = 0
    effort: int = 0
    details: dict = field(default_factory=dict, compare=False)

    @property
    def ok(self) -> bool:
        return self.key is not None


def _digest_check(helper: HelperData) -> Callable[[np.ndarray], bool]:
    return lambda bits: key_digest(bits) == helper.digest


def reconstruct(responses, helper: HelperData, reliabilities, *, decoder: str | None = None,
                list_size: int | None = None, input_mode: str = "soft",
                fano: FanoConfig | None = None,
                verify: Callable[[np.ndarray], bool] | None = None) -> Reconstruction:
    """Regenerate the key from ``m`` readouts of the device.

    ``responses`` has shape ``(m, t)`` (or ``(t,)``) over all device cells and
    ``reliabilities`` holds per-cell error probabilities indexed like them.
    ``verify`` replaces the digest comparison, e.g. by direct key equality in
    simulations; both decide identically.
    """
    decoder = decoder or helper.decoder
    list_size = helper.list_size if list_size is None else list_size
    if decoder not in DECODERS:
        raise ValueError(f"unknown decoder {decoder!r}")
    if input_mode not in INPUT_MODES:
        raise ValueError(f"unknown input mode {input_mode!r}")
    if decoder == "fano" and list_size != 1:
        raise ValueError("the Fano decoder produces a single candidate; use list size 1")
    check = verify or _digest_check(helper)
    r = np.atleast_2d(np.asarray(responses, dtype=np.uint8))
    if r.shape[1] <= int(helper.mask.max()):
        raise ValueError("responses do not cover every cell in the selection mask")
    used = r[:, helper.mask]
    p_e = np.asarray(reliabilities, dtype=float)[helper.mask]
    spec = helper.code

    if input_mode == "soft":
        soft = combine_readouts([soft_values(helper.offset, row, p_e) for row in used])
    else:
        received = helper.offset ^ majority_vote(used)
        soft = hard_to_soft(received)

    if decoder == "fano":
        if input_mode == "soft":
            bits, p = llr_to_channel(soft)
        else:
            bits, p = received, np.full(received.shape, float(np.mean(p_e)))
        out = fano_decode(bits, p, spec, fano or FanoConfig())
        if out.ok and check(out.info_estimate):
            return Reconstruction(out.info_estimate, 1, out.visits, {"backtracks": out.backtracks})
        return Reconstruction(None, int(out.ok), out.visits, {"backtracks": out.backtracks})

    trellis = build_trellis(spec, helper.info_length)
    best = viterbi_decode(soft, trellis)
    if check(best.info_estimate):
        return Reconstruction(best.info_estimate, 1, 1)
    if list_size == 1:
        return Reconstruction(None, 1, 1)
    cands = []
    for cand in iter_candidates(soft, trellis):
        cands.append(cand)
        if len(cands) == list_size:
            break
    # unit soft values in hard mode give a constant p, i.e. Hamming order
    hard_bits, p = llr_to_channel(soft)
    ranked = rank_by_likelihood(cands, p, hard_bits, spec)
    tried = 1
    for rc in ranked:
        if np.array_equal(rc.candidate.info, best.info_estimate):
            continue
        tried += 1
        if check(rc.candidate.info):
            return Reconstruction(rc.candidate.info, tried, len(cands))
    return Reconstruction(None, tried, len(cands))
