"""Monte-Carlo BER estimation.

A channel is drawn, ``trials_per_channel`` fresh (x, w) pairs are detected
through it, and the channel is redrawn until enough bit errors (or bits)
have accumulated.  Channel draw ``k`` at SNR index ``i`` always consumes the
seed stream ``(seed, i, k)``, so results do not depend on how many workers
share the loop, and all detectors at one SNR see the same channels.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .channel import RealSystem, draw_system, sample_transmit, transmit
from .detectors import (
    ISTA_ITERS,
    ISTA_TAU,
    DetectorParams,
    hard_decision,
    ista_detect,
    ista_step_size,
    mmse_detect,
    ti_detect,
)

__all__ = [
    "DETECTORS",
    "BerRecord",
    "EvalConfig",
    "ChannelCount",
    "make_detector",
    "default_trials_per_channel",
    "count_channel",
    "estimate_ber",
    "snr_sweep",
    "write_csv",
    "format_csv",
    "CSV_HEADER",
]

DETECTORS = ("ista", "mmse", "oracle", "ti")
CSV_HEADER = ("snr_db", "detector", "bits", "errors", "ber", "ci95")

# mini-batch sizes used for training at the two reference sizes (N -> D)
_REFERENCE_BATCH = {200: 1250, 300: 1000}

Detector = Callable[[RealSystem, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class BerRecord:
    snr_db: float
    detector: str
    bits: int
    errors: int

    def __post_init__(self):
        if not 0 <= self.errors <= self.bits:
            raise ValueError(f"invalid counts: {self.errors} errors in {self.bits} bits")

    @property
    def ber(self) -> float:
        return self.errors / self.bits if self.bits else float("nan")

    @property
    def ci95(self) -> float:
        """Normal-approximation 95% half-width of the binomial estimate."""
        p = self.ber
        return 1.96 * math.sqrt(p * (1.0 - p) / self.bits) if self.bits else float("nan")


def default_trials_per_channel(N: int) -> int:
    return _REFERENCE_BATCH.get(N, 1000)


@dataclass(frozen=True)
class EvalConfig:
    n: int
    m: int
    snr_db: tuple = (20.0,)
    detectors: tuple = ("mmse",)
    params: tuple = ()  # one DetectorParams shared by all SNRs, or one per SNR
    trials_per_channel: int | None = None
    min_errors: int = 100
    max_bits: int = 10**8
    seed: int = 0
    workers: int = 1
    ista_tau: float = ISTA_TAU
    ista_iters: int = ISTA_ITERS

    def __post_init__(self):
        object.__setattr__(self, "snr_db", tuple(float(s) for s in np.atleast_1d(self.snr_db)))
        dets = (self.detectors,) if isinstance(self.detectors, str) else tuple(self.detectors)
        object.__setattr__(self, "detectors", dets)
        if isinstance(self.params, DetectorParams):
            object.__setattr__(self, "params", (self.params,))
        if self.trials_per_channel is None:
            object.__setattr__(self, "trials_per_channel", default_trials_per_channel(2 * self.n))
        if self.n < 1 or self.m < 1:
            raise ValueError("antenna counts must be positive")
        if not self.snr_db:
            raise ValueError("at least one SNR is required")
        for d in dets:
            if d not in DETECTORS:
                raise ValueError(f"unknown detector {d!r}; choose from {', '.join(DETECTORS)}")
        if self.trials_per_channel < 1 or self.min_errors < 1 or self.workers < 1:
            raise ValueError("trials_per_channel, min_errors and workers must be positive")
        if self.max_bits < 2 * self.n:
            raise ValueError(f"max_bits must be at least N={2 * self.n}")
        if "ti" in dets and len(self.params) not in (1, len(self.snr_db)):
            raise ValueError("ti detector needs one parameter set, or one per SNR")

    @property
    def N(self) -> int:
        return 2 * self.n

    def params_for(self, snr_index: int) -> DetectorParams | None:
        if not self.params:
            return None
        return self.params[0] if len(self.params) == 1 else self.params[snr_index]


def make_detector(name: str, params: DetectorParams | None = None, *,
                  ista_tau: float = ISTA_TAU, ista_iters: int = ISTA_ITERS) -> Detector:
    """Map a detector id to ``f(sys, Y) -> soft estimates``.

    ``oracle`` is a harness check: it needs the transmitted symbols and is
    special-cased by :func:`count_channel`.
    """
    if name == "ti":
        if params is None:
            raise ValueError("ti detector needs trained parameters")
        return lambda sys, y: ti_detect(sys, y, params)
    if name == "mmse":
        return mmse_detect
    if name == "ista":
        def ista(sys, y):
            return ista_detect(sys.H, y, ista_step_size(sys.H), ista_tau, ista_iters)
        return ista
    if name == "oracle":
        return _oracle
    raise ValueError(f"unknown detector {name!r}")


def _oracle(sys, y):
    raise RuntimeError("oracle detector is resolved inside count_channel")


@dataclass(frozen=True)
class ChannelCount:
    bits: int
    errors: int


def _channel_seed(seed: int, snr_index: int, k: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(snr_index, k))


def count_channel(cfg: EvalConfig, snr_db: float, detector: Detector,
                  seq: np.random.SeedSequence) -> ChannelCount:
    """Draw one channel from ``seq`` and count errors over its trials."""
    rng = np.random.default_rng(seq)
    sys = draw_system(cfg.n, cfg.m, snr_db, rng)
    xs = sample_transmit(sys.N, rng, size=cfg.trials_per_channel)
    obs = transmit(sys, xs, rng)
    soft = obs.x if detector is _oracle else detector(sys, obs.y)
    errors = int(np.count_nonzero(hard_decision(soft) != obs.x))
    return ChannelCount(bits=int(xs.size), errors=errors)


def estimate_ber(cfg: EvalConfig, snr_db: float, detector: str | Detector,
                 params: DetectorParams | None = None, snr_index: int = 0) -> BerRecord:
    """BER at one SNR, redrawing channels until the stopping rule fires.

    Stops once ``errors >= cfg.min_errors`` or ``bits >= cfg.max_bits``.
    ``detector`` is an id from :data:`DETECTORS` or a callable
    ``f(sys, Y) -> soft estimates``.  With ``cfg.workers > 1`` channels are
    counted in parallel chunks and merged in draw order; the stopping point,
    and hence the result, is the same as a serial run.
    """
    if isinstance(detector, str):
        name = detector
        fn = make_detector(name, params, ista_tau=cfg.ista_tau, ista_iters=cfg.ista_iters)
    else:
        name, fn = getattr(detector, "__name__", "custom"), detector

    bits = errors = 0
    k = 0
    pool = ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        while errors < cfg.min_errors and bits < cfg.max_bits:
            seqs = [_channel_seed(cfg.seed, snr_index, k + j) for j in range(cfg.workers)]
            if pool is None:
                counts = [count_channel(cfg, snr_db, fn, seqs[0])]
            else:
                counts = list(pool.map(lambda q: count_channel(cfg, snr_db, fn, q), seqs))
            for c in counts:
                k += 1
                bits += c.bits
                errors += c.errors
                if errors >= cfg.min_errors or bits >= cfg.max_bits:
                    break
    finally:
        if pool is not None:
            pool.shutdown()
    return BerRecord(snr_db=float(snr_db), detector=name, bits=bits, errors=errors)


def snr_sweep(cfg: EvalConfig) -> list[BerRecord]:
    """One record per (SNR, detector), sorted by SNR then detector id."""
    order = sorted(range(len(cfg.snr_db)), key=lambda i: cfg.snr_db[i])
    records = []
    for i in order:
        for name in sorted(cfg.detectors):
            params = cfg.params_for(i) if name == "ti" else None
            records.append(estimate_ber(cfg, cfg.snr_db[i], name, params, snr_index=i))
    return records


def _g6(v: float) -> str:
    return f"{v:.6g}"


def format_csv(records: Sequence[BerRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow([_g6(r.snr_db), r.detector, r.bits, r.errors, _g6(r.ber), _g6(r.ci95)])
    return buf.getvalue()


def write_csv(records: Sequence[BerRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(format_csv(records))
