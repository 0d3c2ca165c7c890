"""Command-line front end.

Subcommands::

    tidetector train --n 100 --m 64 --snr-db 20 --layers 50 --batch 1250 \\
        --rounds-batches 2000 --lr 0.025 --seed 7 --out params.tsv
    tidetector eval --detector ti --params params.tsv --snr-db 20 --out ber.csv
    tidetector sweep --n 100 --m 64 --snr-db 10 15 20 --detector mmse ti \\
        --params params.tsv --out sweep.csv
    tidetector export-trace --params params.tsv --out trace.tsv
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .channel import draw_system, sample_transmit, transmit
from .detectors import ISTA_ITERS, ISTA_TAU, ti_forward
from .evaluation import DETECTORS, EvalConfig, snr_sweep, write_csv
from .paramfile import ParamFile, read_params, write_params
from .training import TrainConfig, train_incremental

__all__ = ["Invocation", "build_parser", "parse_args", "run_command", "main", "export_trace"]

logger = logging.getLogger("tidetector")


def _number(kind, check, what):
    def convert(text: str):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid {kind.__name__} value: {text!r}") from None
        if isinstance(v, float) and not math.isfinite(v):
            raise argparse.ArgumentTypeError(f"must be finite, got {text!r}")
        if not check(v):
            raise argparse.ArgumentTypeError(f"must be {what}, got {text!r}")
        return v
    return convert


positive_int = _number(int, lambda v: v > 0, "a positive integer")
nonneg_int = _number(int, lambda v: v >= 0, "a non-negative integer")
positive_float = _number(float, lambda v: v > 0, "positive")
nonneg_float = _number(float, lambda v: v >= 0, "non-negative")
finite_float = _number(float, lambda v: True, "finite")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tidetector",
                                description="Train and evaluate the TI-detector for overloaded MIMO channels.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train TI-detector parameters")
    t.add_argument("--n", type=positive_int, required=True, help="transmit antennas")
    t.add_argument("--m", type=positive_int, required=True, help="receive antennas")
    t.add_argument("--snr-db", type=finite_float, required=True)
    t.add_argument("--layers", type=positive_int, required=True, help="T")
    t.add_argument("--batch", type=positive_int, required=True, help="mini-batch size D")
    t.add_argument("--rounds-batches", type=nonneg_int, required=True,
                   help="mini-batches per incremental round K")
    t.add_argument("--lr", type=positive_float, required=True, help="Adam learning rate")
    t.add_argument("--seed", type=nonneg_int, default=0)
    t.add_argument("--carry-adam", action="store_true",
                   help="keep Adam moments across rounds instead of resetting them")
    t.add_argument("--log", help="also write the per-round loss log to this file")
    t.add_argument("--out", required=True, help="parameter file to write")

    def eval_flags(q, multi: bool):
        nargs = "+" if multi else None
        q.add_argument("--n", type=positive_int, help="transmit antennas (default: from --params)")
        q.add_argument("--m", type=positive_int, help="receive antennas (default: from --params)")
        q.add_argument("--snr-db", type=finite_float, nargs=nargs, required=True)
        q.add_argument("--detector", choices=DETECTORS, nargs=nargs, required=True)
        q.add_argument("--params", nargs=nargs,
                       help="TI parameter file" + (" (one, or one per SNR)" if multi else ""))
        q.add_argument("--trials-per-channel", type=positive_int,
                       help="trials per channel draw (default 1250 for N=200, 1000 otherwise)")
        q.add_argument("--min-errors", type=positive_int, default=100)
        q.add_argument("--max-bits", type=positive_int, default=10**8)
        q.add_argument("--seed", type=nonneg_int, default=0)
        q.add_argument("--workers", type=positive_int, default=1)
        q.add_argument("--ista-tau", type=nonneg_float, default=ISTA_TAU)
        q.add_argument("--ista-iters", type=positive_int, default=ISTA_ITERS)
        q.add_argument("--out", required=True, help="BER CSV to write")

    eval_flags(sub.add_parser("eval", help="BER of one detector at one SNR"), multi=False)
    eval_flags(sub.add_parser("sweep", help="BER over SNRs and detectors"), multi=True)

    x = sub.add_parser("export-trace", help="per-layer parameters and error on one random instance")
    x.add_argument("--params", required=True)
    x.add_argument("--snr-db", type=finite_float, help="instance SNR (default: training SNR)")
    x.add_argument("--seed", type=nonneg_int, default=0)
    x.add_argument("--out", required=True)
    return p


@dataclass
class Invocation:
    command: str
    config: Any
    args: argparse.Namespace


def _eval_config(parser, args) -> EvalConfig:
    snrs = args.snr_db if isinstance(args.snr_db, list) else [args.snr_db]
    dets = args.detector if isinstance(args.detector, list) else [args.detector]
    files = args.params if isinstance(args.params, list) else ([args.params] if args.params else [])
    if "ti" in dets and not files:
        parser.error("argument --params: required for the ti detector")
    if files and len(files) not in (1, len(snrs)):
        parser.error("argument --params: give one file or one per --snr-db value")
    pfs = [read_params(f) for f in files]
    n, m = args.n, args.m
    for pf, f in zip(pfs, files):
        n = pf.n if n is None else n
        m = pf.m if m is None else m
        if (pf.n, pf.m) != (n, m):
            parser.error(f"argument --params: {f} was trained for n={pf.n}, m={pf.m}, not n={n}, m={m}")
    if n is None:
        parser.error("argument --n: required unless --params is given")
    if m is None:
        parser.error("argument --m: required unless --params is given")
    if args.max_bits < 2 * n:
        parser.error(f"argument --max-bits: must be at least N={2 * n}")
    return EvalConfig(
        n=n, m=m, snr_db=tuple(snrs), detectors=tuple(dets),
        params=tuple(pf.params for pf in pfs),
        trials_per_channel=args.trials_per_channel, min_errors=args.min_errors,
        max_bits=args.max_bits, seed=args.seed, workers=args.workers,
        ista_tau=args.ista_tau, ista_iters=args.ista_iters,
    )


def parse_args(argv: Sequence[str] | None = None) -> Invocation:
    """Parse and validate ``argv``; exits with status 2 on a usage error."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "train":
        cfg = TrainConfig(n=args.n, m=args.m, snr_db=args.snr_db, T=args.layers, D=args.batch,
                          K=args.rounds_batches, lr=args.lr, seed=args.seed)
    elif args.command in ("eval", "sweep"):
        try:
            cfg = _eval_config(parser, args)
        except (OSError, ValueError) as exc:
            parser.error(f"argument --params: {exc}")
    else:
        cfg = None
    return Invocation(args.command, cfg, args)


def export_trace(pf: ParamFile, snr_db: float | None = None, seed: int = 0) -> list[tuple]:
    """Rows ``(t, gamma_t, |theta_t|, ||x - s_{t+1}||)`` for one random instance."""
    rng = np.random.default_rng(seed)
    snr = pf.snr_db if snr_db is None else snr_db
    sys_ = draw_system(pf.n, pf.m, snr, rng)
    obs = transmit(sys_, sample_transmit(sys_.N, rng), rng)
    trace = ti_forward(sys_, obs.y, pf.params)
    p = pf.params
    return [(t + 1, p.gamma[t], abs(p.theta[t]), float(np.linalg.norm(obs.x - trace.s[t + 1])))
            for t in range(p.T)]


def _run_train(inv: Invocation) -> None:
    cfg, args = inv.config, inv.args
    log_fh = open(args.log, "w", newline="") if args.log else None

    def on_round(t, loss):
        line = f"round {t} loss {loss:.10g}"
        print(line, flush=True)
        if log_fh:
            log_fh.write(line + "\n")
            log_fh.flush()

    try:
        result = train_incremental(cfg, reset_adam=not args.carry_adam, on_round=on_round)
    finally:
        if log_fh:
            log_fh.close()
    write_params(ParamFile(result.params, n=cfg.n, m=cfg.m, snr_db=cfg.snr_db, seed=cfg.seed), args.out)


def _run_export(inv: Invocation) -> None:
    args = inv.args
    rows = export_trace(read_params(args.params), args.snr_db, args.seed)
    with open(args.out, "w", newline="") as fh:
        fh.write("t\tgamma\tabs_theta\terror\n")
        for t, g, a, e in rows:
            fh.write(f"{t}\t{g:.17g}\t{a:.17g}\t{e:.17g}\n")


def run_command(inv: Invocation) -> int:
    """Execute a parsed invocation; returns the process exit status."""
    try:
        if inv.command == "train":
            _run_train(inv)
        elif inv.command in ("eval", "sweep"):
            records = snr_sweep(inv.config)
            for r in records:
                logger.info("snr %g %s: %d errors / %d bits", r.snr_db, r.detector, r.errors, r.bits)
            write_csv(records, inv.args.out)
        elif inv.command == "export-trace":
            _run_export(inv)
        else:
            raise ValueError(f"unknown command {inv.command!r}")
    except Exception as exc:
        print(f"tidetector {inv.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    inv = parse_args(argv)
    logging.basicConfig(level=logging.INFO if inv.args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    return run_command(inv)


if __name__ == "__main__":
    sys.exit(main())
