"""Statistical power-up model of SRAM cells.

A cell's one-probability follows the distribution with cdf
``Phi(lambda1 * Phi^-1(x) - lambda2)``; its error probability is the distance
to the nearer of 0 and 1. Everything here is pure given an explicit
``numpy.random.Generator``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr, ndtri

__all__ = [
    "L_MAX",
    "ModelParams",
    "SramCell",
    "CellArray",
    "cdf_p_one",
    "pdf_p_one",
    "cdf_p_e",
    "pdf_p_e",
    "mean_p_e",
    "p_one_from_uniform",
    "sample_cell",
    "sample_cells",
    "readout",
    "readouts",
    "select_cells",
    "ignored_fraction",
    "soft_value",
    "soft_values",
    "combine_readouts",
    "majority_vote",
    "estimate_cells",
]

#: clamp on LLR magnitudes (natural log)
L_MAX = 40.0


@dataclass(frozen=True)
class ModelParams:
    lambda1: float = 0.51
    lambda2: float = 0.0

    def __post_init__(self):
        if not self.lambda1 > 0:
            raise ValueError(f"lambda1 must be positive, got {self.lambda1}")


DEFAULT_PARAMS = ModelParams()


@dataclass(frozen=True)
class SramCell:
    """One cell: probability of powering up as 1, plus derived fields."""

    p_one: float

    def __post_init__(self):
        if not 0.0 < self.p_one < 1.0:
            raise ValueError(f"p_one must lie in (0, 1), got {self.p_one}")

    @property
    def ref_bit(self) -> int:
        return int(self.p_one > 0.5)

    @property
    def p_e(self) -> float:
        return min(self.p_one, 1.0 - self.p_one)


@dataclass(frozen=True)
class CellArray:
    """Vectorised population of cells, used by the simulator and enrollment."""

    p_one: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p_one, dtype=float)
        if p.ndim != 1 or np.any((p <= 0.0) | (p >= 1.0)):
            raise ValueError("p_one must be a 1-d array with entries in (0, 1)")
        object.__setattr__(self, "p_one", p)

    @classmethod
    def from_cells(cls, cells: Sequence[SramCell]) -> "CellArray":
        return cls(np.array([c.p_one for c in cells], dtype=float))

    def __len__(self) -> int:
        return self.p_one.shape[0]

    def __getitem__(self, idx) -> "CellArray":
        return CellArray(self.p_one[idx])

    @property
    def ref_bits(self) -> np.ndarray:
        return (self.p_one > 0.5).astype(np.uint8)

    @property
    def p_e(self) -> np.ndarray:
        return np.minimum(self.p_one, 1.0 - self.p_one)

    def cells(self) -> list[SramCell]:
        return [SramCell(float(p)) for p in self.p_one]


def _check_open(x):
    x = np.asarray(x, dtype=float)
    if np.any((x <= 0.0) | (x >= 1.0)) or np.any(np.isnan(x)):
        raise ValueError("argument must lie in the open interval (0, 1)")
    return x


def _check_closed(x):
    x = np.asarray(x, dtype=float)
    if np.any((x < 0.0) | (x > 1.0)) or np.any(np.isnan(x)):
        raise ValueError("argument must lie in [0, 1]")
    return x


def _scalar(x, out):
    return float(out) if np.ndim(x) == 0 else out


def cdf_p_one(x, params: ModelParams = DEFAULT_PARAMS):
    x_ = _check_open(x)
    return _scalar(x, ndtr(params.lambda1 * ndtri(x_) - params.lambda2))


def pdf_p_one(x, params: ModelParams = DEFAULT_PARAMS):
    x_ = _check_open(x)
    z = ndtri(x_)
    # phi(a) / phi(z) evaluated in log space to stay finite in the tails
    a = params.lambda2 - params.lambda1 * z
    out = params.lambda1 * np.exp(0.5 * (z * z - a * a))
    return _scalar(x, out)


def _cdf_p_one_closed(x, params):
    # cdf_p_one extended continuously to [0, 1]
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return ndtr(params.lambda1 * ndtri(x) - params.lambda2)


def cdf_p_e(x, params: ModelParams = DEFAULT_PARAMS):
    """Distribution function of the error probability ``min(p_one, 1 - p_one)``."""
    x_ = _check_closed(x)
    xc = np.minimum(x_, 0.5)
    out = _cdf_p_one_closed(xc, params) + 1.0 - _cdf_p_one_closed(1.0 - xc, params)
    return _scalar(x, np.clip(out, 0.0, 1.0))


def pdf_p_e(x, params: ModelParams = DEFAULT_PARAMS):
    x_ = _check_closed(x)
    out = np.zeros_like(x_)
    inside = (x_ > 0.0) & (x_ < 0.5)
    xi = x_[inside]
    out[inside] = pdf_p_one(xi, params) + pdf_p_one(1.0 - xi, params)
    return _scalar(x, out)


def mean_p_e(params: ModelParams = DEFAULT_PARAMS) -> float:
    """E[P_e] by adaptive quadrature of ``x * pdf_p_e(x)`` on (0, 0.5)."""
    from scipy.integrate import quad

    val, _ = quad(lambda x: x * pdf_p_e(x, params), 0.0, 0.5, limit=200)
    return val


def p_one_from_uniform(u, params: ModelParams = DEFAULT_PARAMS):
    """Inverse of :func:`cdf_p_one`: maps uniform variates to one-probabilities.

    Results are kept inside the open unit interval; above ``1 - 2**-53`` the
    one-probability is not representable and saturates there.
    """
    u_ = _check_open(u)
    p = ndtr((ndtri(u_) + params.lambda2) / params.lambda1)
    p = np.clip(p, np.finfo(float).tiny, 1.0 - np.finfo(float).epsneg)
    return _scalar(u, p)


def _draw_unit(rng: np.random.Generator, size):
    u = rng.random(size)
    # rng.random is on [0, 1); reject the measure-zero endpoint
    bad = u == 0.0
    while np.any(bad):
        u[bad] = rng.random(int(bad.sum()))
        bad = u == 0.0
    return u


def sample_cells(rng: np.random.Generator, count: int,
                 params: ModelParams = DEFAULT_PARAMS) -> CellArray:
    p = p_one_from_uniform(_draw_unit(rng, count), params)
    return CellArray(np.asarray(p, dtype=float))


def sample_cell(rng: np.random.Generator, params: ModelParams = DEFAULT_PARAMS) -> SramCell:
    return SramCell(float(sample_cells(rng, 1, params).p_one[0]))


def readout(cell: SramCell, rng: np.random.Generator) -> int:
    return int(rng.random() < cell.p_one)


def readouts(cells: CellArray, rng: np.random.Generator, m: int = 1) -> np.ndarray:
    """``m`` independent power-ups of every cell, shape ``(m, len(cells))``."""
    return (rng.random((m, len(cells))) < cells.p_one).astype(np.uint8)


def select_cells(cells, p_t: float) -> np.ndarray:
    """Indices of cells with error probability strictly below ``p_t``."""
    if not 0.0 < p_t <= 0.5:
        raise ValueError(f"p_t must lie in (0, 0.5], got {p_t}")
    if isinstance(cells, CellArray):
        p_e = cells.p_e
    else:
        p_e = np.array([c.p_e for c in cells], dtype=float)
    return np.flatnonzero(p_e < p_t)


def ignored_fraction(p_t, params: ModelParams = DEFAULT_PARAMS):
    p = np.asarray(p_t, dtype=float)
    if np.any((p <= 0.0) | (p > 0.5)):
        raise ValueError("p_t must lie in (0, 0.5]")
    return _scalar(p_t, np.clip(1.0 - cdf_p_e(p, params), 0.0, 1.0))


def _llr_magnitude(p_e):
    with np.errstate(divide="ignore"):
        mag = np.log1p(-p_e) - np.log(p_e)
    return np.minimum(mag, L_MAX)


def soft_value(helper_bit: int, response_bit: int, p_e: float) -> float:
    sign = -1.0 if (helper_bit ^ response_bit) else 1.0
    return float(np.clip(sign * _llr_magnitude(float(p_e)), -L_MAX, L_MAX))


def soft_values(helper: np.ndarray, response: np.ndarray, p_e: np.ndarray) -> np.ndarray:
    """Vector form of :func:`soft_value`; positive values favour code bit 0."""
    x = np.bitwise_xor(np.asarray(helper, dtype=np.uint8), np.asarray(response, dtype=np.uint8))
    mag = _llr_magnitude(np.asarray(p_e, dtype=float))
    return np.clip(np.where(x == 0, mag, -mag), -L_MAX, L_MAX)


def combine_readouts(per_readout_soft) -> np.ndarray:
    """Sum LLRs of independent readouts and clamp to ``+-L_MAX``."""
    seqs = [np.asarray(s, dtype=float) for s in per_readout_soft]
    if not seqs:
        raise ValueError("need at least one readout")
    n = seqs[0].shape
    if any(s.shape != n for s in seqs):
        raise ValueError("soft sequences differ in length")
    return np.clip(np.sum(seqs, axis=0), -L_MAX, L_MAX)


def majority_vote(bits: np.ndarray) -> np.ndarray:
    """Per-position majority over the rows of ``bits``; ties resolve to 0."""
    bits = np.atleast_2d(np.asarray(bits, dtype=np.uint8))
    ones = bits.sum(axis=0, dtype=np.int64)
    return (2 * ones > bits.shape[0]).astype(np.uint8)


def estimate_cells(enrollment_readouts: np.ndarray) -> CellArray:
    """Empirical enrollment: Laplace-smoothed one-probabilities from ``E`` readouts.

    ``p_hat = (k + 1) / (E + 2)`` where ``k`` counts the ones seen per cell.
    """
    r = np.atleast_2d(np.asarray(enrollment_readouts, dtype=np.uint8))
    e = r.shape[0]
    k = r.sum(axis=0, dtype=np.int64)
    return CellArray((k + 1.0) / (e + 2.0))
