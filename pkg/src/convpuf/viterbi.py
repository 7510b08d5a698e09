"""Viterbi and serial list-Viterbi decoding of terminated rate 1/n codes.

Soft inputs are LLR-style values, positive favouring code bit 0. The path
metric is the correlation ``sum(s_i * (1 - 2 c_i))``, maximised by the
decoder. On equal metrics at a merge, the survivor is the path whose dropped
register bit is 0; globally this picks, among all metric-maximising paths,
the info word that is smallest when read with its last bit most significant.
"""

from __future__ import annotations

import functools
import heapq
import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator

import numpy as np

from . import _kernels
from .codec import CodeSpec

__all__ = [
    "Trellis",
    "Candidate",
    "DecodeResult",
    "build_trellis",
    "viterbi_decode",
    "hard_decode",
    "hard_to_soft",
    "iter_candidates",
    "list_decode",
    "rank_by_likelihood",
    "RankedCandidate",
]


@dataclass(frozen=True, eq=False)
class Trellis:
    """Immutable terminated trellis for a code and an info length."""

    spec: CodeSpec
    info_length: int
    labels: np.ndarray = field(repr=False)  # (2**mu, 2) packed output bits

    @property
    def mu(self) -> int:
        return self.spec.mu

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def num_states(self) -> int:
        return 1 << self.spec.mu

    @property
    def num_segments(self) -> int:
        return self.info_length + self.spec.mu

    @property
    def codeword_length(self) -> int:
        return self.n * self.num_segments

    def next_state(self, state: int, bit: int) -> int:
        return (bit << (self.mu - 1)) | (state >> 1)

    def output(self, state: int, bit: int) -> tuple[int, ...]:
        lab = int(self.labels[state, bit])
        return tuple((lab >> j) & 1 for j in range(self.n))

    def inputs_allowed(self, segment: int) -> tuple[int, ...]:
        return (0, 1) if segment < self.info_length else (0,)

    @cached_property
    def reachable(self) -> list[frozenset[int]]:
        """State sets at time indices ``0 .. num_segments``."""
        sets = [frozenset({0})]
        for r in range(self.num_segments):
            nxt = {self.next_state(s, b) for s in sets[-1] for b in self.inputs_allowed(r)}
            sets.append(frozenset(nxt))
        return sets

    def edges(self, segment: int) -> list[tuple[int, int, int, tuple[int, ...]]]:
        """``(from_state, input, to_state, output)`` for every edge leaving a reachable state."""
        out = []
        for s in sorted(self.reachable[segment]):
            for b in self.inputs_allowed(segment):
                out.append((s, b, self.next_state(s, b), self.output(s, b)))
        return out


@functools.lru_cache(maxsize=32)
def build_trellis(spec: CodeSpec, info_length: int) -> Trellis:
    if info_length < 1:
        raise ValueError("info length must be positive")
    masks = np.array(spec.generators, dtype=np.int64)
    labels = _kernels.branch_labels(masks, spec.mu)
    labels.setflags(write=False)
    return Trellis(spec=spec, info_length=info_length, labels=labels)


@dataclass(frozen=True)
class Candidate:
    info: np.ndarray
    metric: float

    @property
    def key(self) -> bytes:
        return np.packbits(self.info).tobytes()


@dataclass(frozen=True)
class DecodeResult:
    info_estimate: np.ndarray
    path_metric: float
    candidates: tuple[Candidate, ...] = ()


def _as_soft(soft, trellis: Trellis) -> np.ndarray:
    s = np.ascontiguousarray(soft, dtype=np.float64).ravel()
    if s.shape[0] != trellis.codeword_length:
        raise ValueError(
            f"soft sequence has length {s.shape[0]}, trellis expects {trellis.codeword_length}"
        )
    if not np.all(np.isfinite(s)):
        raise ValueError("soft values must be finite")
    return s


_NO_SIDE = np.empty(0, np.int64)


def viterbi_decode(soft, trellis: Trellis) -> DecodeResult:
    s = _as_soft(soft, trellis)
    decision, metric, _ = _kernels.viterbi_forward(
        s, trellis.labels, trellis.mu, trellis.n, trellis.info_length, False
    )
    bits, _ = _kernels.trace_path(decision, trellis.mu, _NO_SIDE, _NO_SIDE)
    info = bits[: trellis.info_length].copy()
    return DecodeResult(info_estimate=info, path_metric=float(metric[0, 0]))


def hard_to_soft(received) -> np.ndarray:
    r = np.asarray(received, dtype=np.int64).ravel()
    if np.any((r != 0) & (r != 1)):
        raise ValueError("received word must be binary")
    return 1.0 - 2.0 * r


def hard_decode(received, trellis: Trellis) -> DecodeResult:
    """Reliability-blind decoding: minimum Hamming distance via unit soft values."""
    return viterbi_decode(hard_to_soft(received), trellis)


def iter_candidates(soft, trellis: Trellis) -> Iterator[Candidate]:
    """Lazily yield terminated paths in non-increasing metric order.

    Every path is the survivor tree plus a set of sidetracks (non-surviving
    incoming edges), each costing its stored metric difference. A path's
    children add one sidetrack earlier in time than all of its own, so each
    path is produced exactly once. The first yield is the Viterbi path.
    """
    s = _as_soft(soft, trellis)
    mu, n, L = trellis.mu, trellis.n, trellis.info_length
    decision, metric, delta = _kernels.viterbi_forward(s, trellis.labels, mu, n, L, True)
    T = trellis.num_segments
    tie = itertools.count()
    heap = [(-float(metric[T, 0]), next(tie), T, ())]
    while heap:
        neg, _, earliest, side = heapq.heappop(heap)
        segs = np.array([p[0] for p in side], dtype=np.int64)
        sts = np.array([p[1] for p in side], dtype=np.int64)
        bits, states = _kernels.trace_path(decision, mu, segs, sts)
        exact = _kernels.path_metric(s, trellis.labels, mu, n, bits)
        yield Candidate(info=bits[:L].copy(), metric=float(exact))
        if earliest == 0:
            continue
        r = np.arange(earliest)
        d = delta[r, states[r + 1]]
        ok = np.flatnonzero(np.isfinite(d))
        for i in ok[::-1]:
            seg = int(r[i])
            child = side + ((seg, int(states[seg + 1])),)
            heapq.heappush(heap, (neg + float(d[i]), next(tie), seg, child))


def list_decode(soft, trellis: Trellis, list_size: int) -> DecodeResult:
    """The ``list_size`` best terminated paths (fewer if the code has fewer)."""
    if list_size < 1:
        raise ValueError("list size must be at least 1")
    cands = list(itertools.islice(iter_candidates(soft, trellis), list_size))
    # exact recomputed metrics; a stable sort only repairs rounding-level inversions
    cands.sort(key=lambda c: -c.metric)
    best = cands[0]
    return DecodeResult(info_estimate=best.info, path_metric=best.metric, candidates=tuple(cands))


@dataclass(frozen=True)
class RankedCandidate:
    candidate: Candidate
    log_likelihood: float
    ratio_to_best: float


def rank_by_likelihood(candidates, per_bit_p, received, spec: CodeSpec) -> list[RankedCandidate]:
    """Order candidates by ``log p(c | r) = sum(log q_i)``.

    ``q_i`` is ``p_i`` where the candidate's code bit differs from the
    received bit and ``1 - p_i`` where it agrees. ``ratio_to_best`` is the
    likelihood ratio of the best candidate over this one.
    """
    from .codec import encode

    cands = list(candidates)
    if not cands:
        raise ValueError("no candidates to rank")
    p = np.asarray(per_bit_p, dtype=float).ravel()
    r = np.asarray(received, dtype=np.uint8).ravel()
    log_p = np.log(p)
    log_q = np.log1p(-p)
    scored = []
    for c in cands:
        code = encode(c.info, spec)
        if code.shape != r.shape:
            raise ValueError("candidate codeword and received word differ in length")
        mism = code != r
        scored.append(float(np.sum(np.where(mism, log_p, log_q))))
    order = sorted(range(len(cands)), key=lambda i: -scored[i])
    top = scored[order[0]]
    return [RankedCandidate(cands[i], scored[i], float(np.exp(top - scored[i]))) for i in order]
