"""Fano sequential decoding of terminated rate 1/n codes.

Branch scores use the per-bit Fano metric in base-2 units, with one crossover
probability per received bit (soft) or a single shared one (hard).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .codec import CodeSpec

__all__ = [
    "P_MIN",
    "FanoConfig",
    "FanoOutcome",
    "fano_bit_metric",
    "fano_metric_tables",
    "fano_decode",
    "llr_to_channel",
]

P_MIN = 1e-9
_P_MAX = 0.5 - 1e-12


@dataclass(frozen=True)
class FanoConfig:
    delta: float = 2.0
    initial_threshold: float = 0.0
    max_visits: int | None = None  # None: 10**4 * (L + mu)

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("threshold increment must be positive")
        if self.max_visits is not None and self.max_visits < 1:
            raise ValueError("max_visits must be positive")

    def budget(self, depth: int) -> int:
        if self.max_visits is None:
            return 10_000 * depth
        if self.max_visits < depth:
            raise ValueError(f"max_visits={self.max_visits} is below the tree depth {depth}")
        return self.max_visits


@dataclass(frozen=True)
class FanoOutcome:
    info_estimate: np.ndarray | None
    visits: int
    backtracks: int

    @property
    def ok(self) -> bool:
        return self.info_estimate is not None


def _clamp_p(p):
    return np.clip(np.asarray(p, dtype=float), P_MIN, _P_MAX)


def fano_bit_metric(match: bool, p_i: float, rate: float) -> float:
    p = float(_clamp_p(p_i))
    if match:
        return math.log2(2.0 * (1.0 - p)) - rate
    return math.log2(2.0 * p) - rate


def fano_metric_tables(per_bit_p, rate: float) -> tuple[np.ndarray, np.ndarray]:
    p = _clamp_p(per_bit_p)
    return np.log2(2.0 * (1.0 - p)) - rate, np.log2(2.0 * p) - rate


def llr_to_channel(llr) -> tuple[np.ndarray, np.ndarray]:
    """Hard decisions and crossover probabilities equivalent to combined LLRs."""
    llr = np.asarray(llr, dtype=float)
    bits = (llr < 0).astype(np.uint8)
    p = 1.0 / (1.0 + np.exp(np.abs(llr)))
    return bits, p


def _prepare(received_bits, per_bit_p, spec: CodeSpec):
    y = np.ascontiguousarray(received_bits, dtype=np.uint8).ravel()
    if y.shape[0] % spec.n:
        raise ValueError("received length is not a multiple of n")
    depth = y.shape[0] // spec.n
    info_len = depth - spec.mu
    if info_len < 1:
        raise ValueError("received word shorter than the termination tail")
    p = np.broadcast_to(np.asarray(per_bit_p, dtype=float), y.shape)
    match, mismatch = fano_metric_tables(p, spec.rate)
    return y, np.ascontiguousarray(match), np.ascontiguousarray(mismatch), info_len, depth


def fano_decode(received_bits, per_bit_p, spec: CodeSpec, cfg: FanoConfig = FanoConfig(),
                debug: bool = False) -> FanoOutcome:
    """Decode one received word; budget exhaustion yields a failed outcome.

    With ``debug`` a pure-Python walk of the same rules runs instead and
    asserts that no node is entered twice under one threshold between
    threshold decreases.
    """
    y, match, mismatch, info_len, depth = _prepare(received_bits, per_bit_p, spec)
    budget = cfg.budget(depth)
    if debug:
        return _fano_reference(y, match, mismatch, spec, info_len, cfg, budget)
    masks = np.array(spec.generators, dtype=np.int64)
    ok, path, visits, backtracks = _kernels.fano_search(
        y, match, mismatch, masks, spec.mu, info_len,
        float(cfg.delta), float(cfg.initial_threshold), int(budget),
    )
    est = path[:info_len].copy() if ok else None
    return FanoOutcome(info_estimate=est, visits=int(visits), backtracks=int(backtracks))


def _fano_reference(y, match, mismatch, spec, info_len, cfg, budget):
    mu, n = spec.mu, spec.n
    depth = info_len + mu
    gens = spec.generators
    delta = cfg.delta

    def children(state, d):
        out = []
        for b in ((0, 1) if d < info_len else (0,)):
            reg = (b << mu) | state
            m = 0.0
            for j in range(n):
                c = bin(reg & gens[j]).count("1") & 1
                i = d * n + j
                m += match[i] if c == y[i] else mismatch[i]
            out.append((m, b))
        if len(out) == 2 and out[1][0] > out[0][0]:
            out.reverse()
        return out

    T = cfg.initial_threshold
    path: list[int] = []
    states = [0]
    metric = [0.0]
    tried = [0]
    visits = backtracks = 0
    seen: set[tuple[int, tuple[int, ...], float]] = set()
    while True:
        d = len(path)
        kids = children(states[d], d)
        k = tried[d]
        if k < len(kids) and metric[d] + kids[k][0] >= T:
            bm, b = kids[k]
            mf = metric[d] + bm
            first = metric[d] < T + delta
            path.append(b)
            states.append((b << (mu - 1)) | (states[d] >> 1))
            metric.append(mf)
            tried.append(0)
            visits += 1
            node = (len(path), tuple(path), T)
            assert node not in seen, "node revisited under an unchanged threshold"
            seen.add(node)
            if len(path) == depth:
                return FanoOutcome(np.array(path[:info_len], np.uint8), visits, backtracks)
            if first:
                T = T + math.floor((mf - T) / delta) * delta
            if visits >= budget:
                return FanoOutcome(None, visits, backtracks)
            continue
        while True:
            d = len(path)
            if d == 0:
                T -= delta
                seen.clear()
                tried[0] = 0
                break
            if metric[d - 1] >= T:
                path.pop()
                states.pop()
                metric.pop()
                tried.pop()
                backtracks += 1
                tried[-1] += 1
                if tried[-1] < (2 if d - 1 < info_len else 1):
                    break
            else:
                T -= delta
                seen.clear()
                tried[d] = 0
                break
