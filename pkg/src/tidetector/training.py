"""Incremental training of the TI-detector parameters.

Round ``t`` optimizes the first ``t`` layers' (gamma, theta) against the
squared error of ``s_{t+1}``.  Each mini-batch draws a fresh channel
(varying-channel scenario); gradients come from a hand-written reverse pass
through the unrolled recursion and feed an Adam update.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .channel import RealSystem, draw_system, sample_transmit, transmit
from .detectors import DetectorParams, ForwardTrace, ti_forward

__all__ = [
    "TrainConfig",
    "MiniBatch",
    "Gradients",
    "AdamState",
    "squared_loss",
    "ti_backward",
    "adam_step",
    "make_minibatch",
    "train_incremental",
    "TrainResult",
    "THETA_FLOOR",
]

logger = logging.getLogger(__name__)

THETA_FLOOR = 1e-6
LOSS_WINDOW = 10


@dataclass(frozen=True)
class TrainConfig:
    n: int
    m: int
    snr_db: float
    T: int
    D: int
    K: int
    lr: float
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("antenna counts must be positive")
        if self.T < 1 or self.D < 1 or self.K < 0:
            raise ValueError("need T >= 1, D >= 1, K >= 0")
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")


@dataclass(frozen=True)
class MiniBatch:
    sys: RealSystem
    xs: np.ndarray  # (D, N)
    ys: np.ndarray  # (D, M)


@dataclass(frozen=True)
class Gradients:
    dgamma: np.ndarray
    dtheta: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.dgamma, self.dtheta])


@dataclass(frozen=True)
class AdamState:
    step: int
    m1: np.ndarray
    m2: np.ndarray
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8

    @classmethod
    def zeros(cls, size: int, **kw) -> "AdamState":
        return cls(step=0, m1=np.zeros(size), m2=np.zeros(size), **kw)


def squared_loss(xs, xhats) -> float:
    """Mean over samples of ``||x - xhat||^2``; 1-D inputs count as one sample."""
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    xhats = np.atleast_2d(np.asarray(xhats, dtype=np.float64))
    if xs.shape != xhats.shape:
        raise ValueError(f"shape mismatch: {xs.shape} vs {xhats.shape}")
    return float(np.mean(np.sum((xs - xhats) ** 2, axis=-1)))


def ti_backward(sys: RealSystem, trace: ForwardTrace, x, params: DetectorParams,
                depth: int | None = None) -> Gradients:
    """Gradient of ``||x - s_{depth+1}||^2`` w.r.t. every gamma_t and theta_t.

    With a batch (``x`` of shape ``(D, N)``) the per-sample gradients are
    averaged, i.e. this is the gradient of :func:`squared_loss`.  Entries for
    layers beyond ``depth`` are zero.
    """
    depth = trace.depth if depth is None else depth
    if depth != trace.depth or depth > params.T:
        raise ValueError(f"trace depth {trace.depth} does not match depth {depth} / T={params.T}")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != trace.estimate.shape:
        raise ValueError(f"x has shape {x.shape}, expected {trace.estimate.shape}")
    batch = x.shape[0] if x.ndim == 2 else 1
    H, W = sys.H, sys.W
    dgamma = np.zeros(params.T)
    dtheta = np.zeros(params.T)

    g_s = -2.0 * (x - trace.estimate) / batch
    for t in range(depth - 1, -1, -1):
        theta = params.theta[t]
        a = abs(theta)
        s_next, r = trace.s[t + 1], trace.r[t]
        g_u = g_s * (1.0 - s_next * s_next)  # through tanh(u), u = r / |theta|
        g_r = g_u / a
        dtheta[t] = -np.sum(g_u * r) / (a * a) * (1.0 if theta >= 0 else -1.0)
        dgamma[t] = np.sum(g_r * trace.step[t])
        # dr_t/ds_t = I - gamma_t W H
        g_s = g_r - params.gamma[t] * ((g_r @ W) @ H)
    return Gradients(dgamma=dgamma, dtheta=dtheta)


def adam_step(state: AdamState, params: DetectorParams, grads: Gradients, lr: float,
              active: int | None = None) -> tuple[AdamState, DetectorParams]:
    """One bias-corrected Adam update; returns new ``(state, params)``.

    Only the first ``active`` layers (all by default) are updated; moments
    of the others are left as they were.  After the update every theta is
    kept at least ``THETA_FLOOR`` away from zero, preserving its sign.
    """
    T = params.T
    active = T if active is None else active
    g = grads.as_vector()
    if state.m1.shape != (2 * T,) or g.shape != (2 * T,):
        raise ValueError(f"state/gradient size does not match 2T={2 * T}")
    if not np.all(np.isfinite(g)):
        raise FloatingPointError("non-finite gradient; update rejected")

    mask = np.zeros(2 * T, dtype=bool)
    mask[:active] = True
    mask[T:T + active] = True

    step = state.step + 1
    m1 = state.m1.copy()
    m2 = state.m2.copy()
    m1[mask] = state.beta1 * m1[mask] + (1.0 - state.beta1) * g[mask]
    m2[mask] = state.beta2 * m2[mask] + (1.0 - state.beta2) * g[mask] ** 2
    m1_hat = m1[mask] / (1.0 - state.beta1 ** step)
    m2_hat = m2[mask] / (1.0 - state.beta2 ** step)

    v = params.as_vector()
    v[mask] -= lr * m1_hat / (np.sqrt(m2_hat) + state.eps_hat)
    theta = v[T:]
    sign = np.where(theta >= 0, 1.0, -1.0)
    v[T:] = sign * np.maximum(np.abs(theta), THETA_FLOOR)
    return replace(state, step=step, m1=m1, m2=m2), DetectorParams.from_vector(v)


def make_minibatch(cfg: TrainConfig, rng: np.random.Generator) -> MiniBatch:
    """One fresh channel plus ``cfg.D`` observations through it."""
    sys = draw_system(cfg.n, cfg.m, cfg.snr_db, rng)
    xs = sample_transmit(sys.N, rng, size=cfg.D)
    obs = transmit(sys, xs, rng)
    return MiniBatch(sys=sys, xs=obs.x, ys=obs.y)


@dataclass
class TrainResult:
    params: DetectorParams
    loss_log: list = field(default_factory=list)  # (round, mean loss over last batches)


def train_incremental(cfg: TrainConfig, init: DetectorParams | None = None,
                      reset_adam: bool = True,
                      on_round: Callable[[int, float], None] | None = None) -> TrainResult:
    """Layer-by-layer training; deterministic for a given ``cfg.seed``.

    Parameters
    ----------
    cfg : TrainConfig
    init : DetectorParams, optional
        Starting point; all ones by default.
    reset_adam : bool
        Start each round with zero Adam moments (default).  ``False`` carries
        the optimizer state across rounds.
    on_round : callable, optional
        Called as ``on_round(t, loss)`` after each round, where ``loss`` is
        the mean training loss of the round's last 10 mini-batches.
    """
    params = DetectorParams.ones(cfg.T) if init is None else init
    if params.T != cfg.T:
        raise ValueError(f"init has {params.T} layers, config has {cfg.T}")
    rng = np.random.default_rng(cfg.seed)
    state = AdamState.zeros(2 * cfg.T)
    result = TrainResult(params=params)

    for t in range(1, cfg.T + 1):
        if reset_adam:
            state = AdamState.zeros(2 * cfg.T)
        recent = deque(maxlen=LOSS_WINDOW)
        for _ in range(cfg.K):
            batch = make_minibatch(cfg, rng)
            trace = ti_forward(batch.sys, batch.ys, params, depth=t)
            recent.append(squared_loss(batch.xs, trace.estimate))
            grads = ti_backward(batch.sys, trace, batch.xs, params, depth=t)
            state, params = adam_step(state, params, grads, cfg.lr, active=t)
        loss = float(np.mean(recent)) if recent else float("nan")
        result.loss_log.append((t, loss))
        logger.debug("round %d loss %.6g", t, loss)
        if on_round is not None:
            on_round(t, loss)

    result.params = params
    return result
