"""TI-detector forward pass and the MMSE / ISTA baselines.

One TI-detector layer is

    r_t     = s_t + gamma_t * W (y - H s_t)
    s_{t+1} = tanh(r_t / |theta_t|)

started from ``s_1 = 0``.  All detectors accept a single observation of
shape ``(M,)`` or a batch of shape ``(D, M)`` sharing one channel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import RealSystem
from .linalg import as_matrix, solve_spd

__all__ = [
    "ParameterDomainError",
    "DetectorParams",
    "ForwardTrace",
    "ti_forward",
    "ti_detect",
    "hard_decision",
    "mmse_detect",
    "soft_threshold",
    "ista_step_size",
    "ista_detect",
    "ISTA_TAU",
    "ISTA_ITERS",
    "ISTA_POWER_STEPS",
]

# ISTA is only a reference baseline here; these defaults are ours.
ISTA_TAU = 0.1
ISTA_ITERS = 50
ISTA_POWER_STEPS = 20


class ParameterDomainError(ValueError):
    """A theta entry is zero (or a parameter is not finite)."""


@dataclass(frozen=True)
class DetectorParams:
    """Per-layer step sizes ``gamma`` and tanh scales ``theta`` (2T scalars).

    ``theta`` may be negative; only ``|theta|`` enters the recursion.
    """

    gamma: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        gamma = np.array(self.gamma, dtype=np.float64).reshape(-1)
        theta = np.array(self.theta, dtype=np.float64).reshape(-1)
        if gamma.size < 1 or gamma.shape != theta.shape:
            raise ValueError(f"gamma and theta must have equal length >= 1, got {gamma.size}, {theta.size}")
        if not (np.all(np.isfinite(gamma)) and np.all(np.isfinite(theta))):
            raise ParameterDomainError("parameters must be finite")
        if np.any(theta == 0):
            raise ParameterDomainError(f"theta must be nonzero (layer {int(np.argmax(theta == 0)) + 1})")
        gamma.setflags(write=False)
        theta.setflags(write=False)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "theta", theta)

    @property
    def T(self) -> int:
        return self.gamma.size

    @classmethod
    def ones(cls, T: int) -> "DetectorParams":
        return cls(np.ones(T), np.ones(T))

    def as_vector(self) -> np.ndarray:
        """``[gamma_1..gamma_T, theta_1..theta_T]``."""
        return np.concatenate([self.gamma, self.theta])

    @classmethod
    def from_vector(cls, v: np.ndarray) -> "DetectorParams":
        v = np.asarray(v, dtype=np.float64)
        T = v.size // 2
        return cls(v[:T], v[T:])


@dataclass
class ForwardTrace:
    """Intermediate vectors of one forward pass.

    ``s[0] .. s[depth]`` are s_1 .. s_{depth+1}, ``r[t]`` is r_{t+1}, and
    ``step[t] = W (y - H s[t])`` is kept so the backward pass need not
    recompute it.
    """

    y: np.ndarray
    s: list = field(default_factory=list)
    r: list = field(default_factory=list)
    step: list = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.r)

    @property
    def estimate(self) -> np.ndarray:
        return self.s[-1]


def _check_obs(sys: RealSystem, y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.shape[-1] != sys.M:
        raise ValueError(f"y has length {y.shape[-1]}, expected M={sys.M}")
    return y


def ti_forward(sys: RealSystem, y, params: DetectorParams, depth: int | None = None) -> ForwardTrace:
    """Run the first ``depth`` layers (all ``T`` by default) and keep the trace."""
    y = _check_obs(sys, y)
    depth = params.T if depth is None else depth
    if not 1 <= depth <= params.T:
        raise ValueError(f"depth must be in [1, {params.T}], got {depth}")
    theta_abs = np.abs(params.theta)
    if np.any(theta_abs[:depth] == 0):
        raise ParameterDomainError("theta must be nonzero")
    H, W = sys.H, sys.W
    trace = ForwardTrace(y=y)
    s = np.zeros(y.shape[:-1] + (sys.N,))
    trace.s.append(s)
    for t in range(depth):
        step = (y - s @ H.T) @ W.T
        r = s + params.gamma[t] * step
        s = np.tanh(r / theta_abs[t])
        trace.step.append(step)
        trace.r.append(r)
        trace.s.append(s)
    return trace


def ti_detect(sys: RealSystem, y, params: DetectorParams) -> np.ndarray:
    """Soft estimate ``s_{T+1}`` without retaining the trace."""
    y = _check_obs(sys, y)
    H, W = sys.H, sys.W
    theta_abs = np.abs(params.theta)
    s = np.zeros(y.shape[:-1] + (sys.N,))
    for gamma, th in zip(params.gamma, theta_abs):
        s = np.tanh((s + gamma * ((y - s @ H.T) @ W.T)) / th)
    return s


def hard_decision(s) -> np.ndarray:
    """Elementwise sign with ``sgn(z) = -1`` for ``z <= 0`` (including -0.0)."""
    s = np.asarray(s, dtype=np.float64)
    return np.where(s > 0, 1.0, -1.0)


def mmse_detect(sys: RealSystem, y) -> np.ndarray:
    """Linear MMSE estimate ``(H^T H + sigma_w2/2 I)^{-1} H^T y`` for unit-power symbols."""
    y = _check_obs(sys, y)
    H = sys.H
    gram = H.T @ H + (sys.sigma_w2 / 2.0) * np.eye(sys.N)
    # rows of y are observations; solve for all of them at once
    return solve_spd(gram, (y @ H).T).T


def soft_threshold(r, tau: float):
    """``sign(r) * max(|r| - tau, 0)``, elementwise."""
    if tau < 0:
        raise ValueError(f"tau must be non-negative, got {tau}")
    r = np.asarray(r, dtype=np.float64)
    out = np.sign(r) * np.maximum(np.abs(r) - tau, 0.0)
    return out if out.ndim else float(out)


def ista_step_size(A, steps: int = ISTA_POWER_STEPS) -> float:
    """``1 / lambda_max(A^T A)`` with the eigenvalue from ``steps`` power iterations.

    The start vector is all ones so the result is deterministic.
    """
    A = as_matrix(A, "A")
    v = np.ones(A.shape[1]) / np.sqrt(A.shape[1])
    lam = 0.0
    for _ in range(steps):
        w = A.T @ (A @ v)
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            raise ValueError("A^T A annihilates the power-iteration vector")
        v = w / lam
    return 1.0 / lam


def ista_detect(A, u, beta: float, tau: float, iters: int) -> np.ndarray:
    """Plain ISTA from ``s_1 = 0``; returns ``s_{iters+1}``."""
    A = as_matrix(A, "A")
    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    u = np.asarray(u, dtype=np.float64)
    if u.shape[-1] != A.shape[0]:
        raise ValueError(f"u has length {u.shape[-1]}, expected {A.shape[0]}")
    s = np.zeros(u.shape[:-1] + (A.shape[1],))
    for _ in range(iters):
        s = soft_threshold(s + beta * ((u - s @ A.T) @ A), tau)
    return s
