"""Tab-separated parameter files.

Layout::

    # tidetector-params
    # format-version	1
    # n	100
    # m	64
    # T	50
    # snr_db	20
    # seed	7
    t	gamma	theta
    1	1.0249999999999999	0.97499999999999998
    ...

Values are written with 17 significant digits so they survive a text
round trip bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .detectors import DetectorParams

__all__ = ["ParamFile", "read_params", "write_params", "format_params", "parse_params", "FORMAT_VERSION"]

FORMAT_VERSION = 1
_MAGIC = "# tidetector-params"
_COLUMNS = "t\tgamma\ttheta"


def _f17(v: float) -> str:
    return f"{v:.17g}"


@dataclass(frozen=True)
class ParamFile:
    params: DetectorParams
    n: int
    m: int
    snr_db: float
    seed: int

    @property
    def T(self) -> int:
        return self.params.T


def format_params(pf: ParamFile) -> str:
    lines = [
        _MAGIC,
        f"# format-version\t{FORMAT_VERSION}",
        f"# n\t{pf.n}",
        f"# m\t{pf.m}",
        f"# T\t{pf.T}",
        f"# snr_db\t{_f17(pf.snr_db)}",
        f"# seed\t{pf.seed}",
        _COLUMNS,
    ]
    for t, (g, th) in enumerate(zip(pf.params.gamma, pf.params.theta), start=1):
        lines.append(f"{t}\t{_f17(g)}\t{_f17(th)}")
    return "\n".join(lines) + "\n"


def parse_params(text: str) -> ParamFile:
    lines = text.splitlines()
    if not lines or lines[0] != _MAGIC:
        raise ValueError("not a tidetector parameter file")
    header = {}
    body = []
    for line in lines[1:]:
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("\t")
            header[key] = value
        elif line == _COLUMNS or not line.strip():
            continue
        else:
            body.append(line.split("\t"))
    try:
        version = int(header["format-version"])
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported format version {version}")
        T = int(header["T"])
        n, m, seed = int(header["n"]), int(header["m"]), int(header["seed"])
        snr_db = float(header["snr_db"])
    except KeyError as exc:
        raise ValueError(f"parameter file header lacks {exc.args[0]!r}") from None
    if len(body) != T:
        raise ValueError(f"header says T={T} but file has {len(body)} rows")
    rows = np.array([[float(c) for c in row] for row in body]) if body else np.zeros((0, 3))
    if rows.shape[1] != 3 or not np.array_equal(rows[:, 0], np.arange(1, T + 1)):
        raise ValueError("rows must be (t, gamma, theta) with t = 1..T")
    return ParamFile(DetectorParams(rows[:, 1], rows[:, 2]), n=n, m=m, snr_db=snr_db, seed=seed)


def write_params(pf: ParamFile, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(format_params(pf))


def read_params(path) -> ParamFile:
    with open(path) as fh:
        return parse_params(fh.read())
