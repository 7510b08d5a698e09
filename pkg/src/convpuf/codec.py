"""Rate 1/n convolutional codes: registry, textual form and terminated encoder.

Generators are octal. The most significant bit of the ``mu + 1``-bit
polynomial taps the current input; the least significant bit taps the input
``mu`` steps back. Output bit ``j`` of each block comes from generator ``g_j``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "CodeSpec",
    "UnknownCodeError",
    "registry",
    "lookup",
    "parse_code",
    "encode",
    "random_info",
]


class UnknownCodeError(KeyError, ValueError):
    """Requested (n, mu) is not in the registry."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


@dataclass(frozen=True)
class CodeSpec:
    n: int
    mu: int
    generators: tuple[int, ...]  # g0, g1, ... as integers (written in octal)
    k: int = 1

    def __post_init__(self):
        if self.k != 1:
            raise ValueError("only k = 1 codes are supported")
        if self.n not in (2, 3):
            raise ValueError(f"n must be 2 or 3, got {self.n}")
        if self.mu < 1:
            raise ValueError("memory length must be at least 1")
        if len(self.generators) != self.n:
            raise ValueError(f"expected {self.n} generators, got {len(self.generators)}")
        top = 1 << self.mu
        for g in self.generators:
            if g <= 0 or g.bit_length() > self.mu + 1:
                raise ValueError(f"generator {g:o} does not fit memory length {self.mu}")
        if not any((g & top) and (g & 1) for g in self.generators):
            raise ValueError("no generator taps both the current and the oldest input")

    @property
    def rate(self) -> float:
        return self.k / self.n

    @property
    def name(self) -> str:
        return f"({self.n},{self.k},[{self.mu}])"

    @property
    def text(self) -> str:
        """``n,k,mu:g(n-1),...,g0`` with octal generators."""
        gens = ",".join(f"{g:o}" for g in reversed(self.generators))
        return f"{self.n},{self.k},{self.mu}:{gens}"

    def taps(self) -> np.ndarray:
        """Tap matrix of shape ``(n, mu + 1)``; column ``t`` multiplies input ``r - t``."""
        return np.array(
            [[(g >> (self.mu - t)) & 1 for t in range(self.mu + 1)] for g in self.generators],
            dtype=np.uint8,
        )

    def codeword_length(self, info_length: int) -> int:
        return self.n * (info_length + self.mu)

    def __str__(self) -> str:
        return self.name


# (n, mu) -> generators as listed g(n-1) ... g0
_TABLE = [
    (2, 2, ("5", "7")),
    (2, 6, ("133", "171")),
    (2, 7, ("247", "371")),
    (2, 10, ("3645", "2671")),
    (2, 14, ("63057", "44735")),
    (2, 16, ("313327", "231721")),
    (3, 6, ("133", "165", "171")),
    (3, 7, ("225", "331", "367")),
    (3, 8, ("557", "663", "711")),
    (3, 9, ("1117", "1365", "1633")),
    (3, 10, ("2353", "2671", "3175")),
]


def _from_listing(n, mu, listed):
    return CodeSpec(n=n, mu=mu, generators=tuple(int(g, 8) for g in reversed(listed)))


_REGISTRY = tuple(_from_listing(*row) for row in _TABLE)


def registry() -> list[CodeSpec]:
    return list(_REGISTRY)


def lookup(n: int, mu: int) -> CodeSpec:
    for spec in _REGISTRY:
        if spec.n == n and spec.mu == mu:
            return spec
    raise UnknownCodeError(f"no registered ({n},1,[{mu}]) code")


def parse_code(text: str) -> CodeSpec:
    """Parse ``2,1,7:247,371``, a registry reference ``2,1,7`` or ``(2,1,[7])``."""
    s = text.strip().replace(" ", "")
    head, _, tail = s.partition(":")
    head = head.strip("()").replace("[", "").replace("]", "")
    try:
        n, k, mu = (int(v) for v in head.split(","))
    except ValueError:
        raise ValueError(f"malformed code {text!r}; expected n,k,mu[:g(n-1),...,g0]") from None
    if k != 1:
        raise ValueError("only k = 1 codes are supported")
    if not tail:
        return lookup(n, mu)
    listed = tail.split(",")
    try:
        gens = tuple(int(g, 8) for g in reversed(listed))
    except ValueError:
        raise ValueError(f"generators must be octal in {text!r}") from None
    return CodeSpec(n=n, mu=mu, generators=gens)


def encode(info, spec: CodeSpec) -> np.ndarray:
    """Terminated encoding: ``mu`` zero tail bits, output length ``n * (L + mu)``."""
    u = np.asarray(info, dtype=np.uint8).ravel()
    if u.size == 0:
        raise ValueError("information word is empty")
    if np.any(u > 1):
        raise ValueError("information word must be binary")
    mu = spec.mu
    padded = np.concatenate([np.zeros(mu, np.uint8), u, np.zeros(mu, np.uint8)]).astype(np.int64)
    blocks = u.size + mu
    out = np.empty((blocks, spec.n), dtype=np.uint8)
    # np.convolve flips the kernel, so taps[0] meets the newest input
    for j, row in enumerate(spec.taps()):
        out[:, j] = np.convolve(padded, row.astype(np.int64), mode="valid") & 1
    return out.ravel()


def random_info(rng: np.random.Generator, length: int) -> np.ndarray:
    if length < 1:
        raise ValueError("length must be positive")
    return rng.integers(0, 2, size=length, dtype=np.uint8)
