"""Flat Rayleigh MIMO channel and its real-valued equivalent.

The complex model ``y~ = H~ x~ + w~`` with QPSK symbols is mapped to
``y = H x + w`` over the reals with BPSK symbols in {-1, +1}, where
``N = 2n`` and ``M = 2m``.  Complex arithmetic never leaves this module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import pseudo_inverse

__all__ = [
    "ComplexChannel",
    "RealSystem",
    "Observation",
    "sample_complex_channel",
    "real_matrix",
    "to_real_system",
    "noise_sigma_from_snr",
    "sample_transmit",
    "transmit",
    "draw_system",
]


@dataclass(frozen=True)
class ComplexChannel:
    """Complex path gains; ``entries[i, j]`` is transmit antenna j -> receive antenna i."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.array(self.entries, dtype=np.complex128)
        if e.ndim != 2 or e.shape[0] < 1 or e.shape[1] < 1:
            raise ValueError(f"channel must be a non-empty m x n matrix, got shape {e.shape}")
        if not np.all(np.isfinite(e)):
            raise ValueError("channel has non-finite entries")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class RealSystem:
    """Real-valued equivalent system.

    Attributes
    ----------
    H : (M, N) array
        ``[[Re H~, -Im H~], [Im H~, Re H~]]``.
    W : (N, M) array
        Moore-Penrose pseudo-inverse of ``H``.
    sigma_w2 : float
        Variance of the complex noise; each real noise component has
        variance ``sigma_w2 / 2``.
    """

    H: np.ndarray
    W: np.ndarray
    sigma_w2: float

    @property
    def M(self) -> int:
        return self.H.shape[0]

    @property
    def N(self) -> int:
        return self.H.shape[1]


@dataclass(frozen=True)
class Observation:
    x: np.ndarray
    y: np.ndarray


def sample_complex_channel(n: int, m: int, rng: np.random.Generator) -> ComplexChannel:
    """i.i.d. CN(0, 1) path gains: real and imaginary parts each N(0, 1/2)."""
    if n < 1 or m < 1:
        raise ValueError(f"antenna counts must be positive, got n={n}, m={m}")
    g = rng.standard_normal((2, m, n))
    return ComplexChannel((g[0] + 1j * g[1]) / np.sqrt(2.0))


def real_matrix(entries: np.ndarray) -> np.ndarray:
    re, im = entries.real, entries.imag
    return np.block([[re, -im], [im, re]])


def to_real_system(ch: ComplexChannel, sigma_w2: float) -> RealSystem:
    if not sigma_w2 >= 0:
        raise ValueError(f"sigma_w2 must be non-negative, got {sigma_w2}")
    H = real_matrix(ch.entries)
    W = pseudo_inverse(H)
    H.setflags(write=False)
    W.setflags(write=False)
    return RealSystem(H=H, W=W, sigma_w2=float(sigma_w2))


def noise_sigma_from_snr(snr_db: float, N: int) -> float:
    """Complex noise variance for ``SNR = N / sigma_w2`` given in dB."""
    if N < 1:
        raise ValueError(f"N must be positive, got {N}")
    return N / 10.0 ** (snr_db / 10.0)


def sample_transmit(N: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Equiprobable BPSK symbols, shape ``(N,)`` or ``(size, N)``."""
    if N < 1:
        raise ValueError(f"N must be positive, got {N}")
    shape = (N,) if size is None else (size, N)
    return 2.0 * rng.integers(0, 2, size=shape) - 1.0


def transmit(sys: RealSystem, x: np.ndarray, rng: np.random.Generator | None = None,
             noise: np.ndarray | None = None) -> Observation:
    """Pass ``x`` (``(N,)`` or ``(D, N)``) through the channel.

    Noise is drawn from ``rng`` with variance ``sigma_w2 / 2`` per component
    unless ``noise`` is given, in which case it is added as is.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != sys.N:
        raise ValueError(f"x has length {x.shape[-1]}, expected N={sys.N}")
    y = x @ sys.H.T
    if noise is not None:
        noise = np.asarray(noise, dtype=np.float64)
        if noise.shape != y.shape:
            raise ValueError(f"noise has shape {noise.shape}, expected {y.shape}")
        y = y + noise
    elif sys.sigma_w2 > 0:
        if rng is None:
            raise ValueError("rng is required to draw noise")
        y = y + np.sqrt(sys.sigma_w2 / 2.0) * rng.standard_normal(y.shape)
    return Observation(x=x, y=y)


def draw_system(n: int, m: int, snr_db: float, rng: np.random.Generator) -> RealSystem:
    """Fresh channel realization converted at the noise level for ``snr_db``."""
    ch = sample_complex_channel(n, m, rng)
    return to_real_system(ch, noise_sigma_from_snr(snr_db, 2 * n))
