"""Point, label and summary files.

Text points: one observation per row, whitespace-separated decimals, ``#``
starts a comment. The dimension is taken from the first data row.

Binary points (little endian)::

    offset  size  content
    0       8     magic b"VMFPTS01"
    8       4     uint32 dimension D
    12      8     uint64 count N
    20      4*N*D float32 coordinates, row-major
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .sphere import DegenerateVector, normalize_rows

MAGIC = b"VMFPTS01"
HEADER = struct.Struct("<8sIQ")
NORM_TOL = 1e-6


class ParseError(ValueError):
    def __init__(self, msg: str, row: int | None = None):
        super().__init__(msg if row is None else f"row {row}: {msg}")
        self.row = row


class NormViolation(ValueError):
    def __init__(self, row: int, norm: float):
        super().__init__(f"row {row}: norm {norm:.9g} is not 1 (use auto-normalize)")
        self.row = row


def detect_format(path) -> str:
    with open(path, "rb") as fh:
        head = fh.read(len(MAGIC))
    return "bin" if head == MAGIC else "text"


def _read_text(path) -> tuple[np.ndarray, np.ndarray]:
    rows, lines = [], []
    dim = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            parts = body.split()
            if dim is None:
                dim = len(parts)
                if dim < 2:
                    raise ParseError("points need at least 2 coordinates", lineno)
            elif len(parts) != dim:
                raise ParseError(f"expected {dim} fields, found {len(parts)}", lineno)
            try:
                vals = [float(p) for p in parts]
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if not all(np.isfinite(vals)):
                raise ParseError("non-finite coordinate", lineno)
            rows.append(vals)
            lines.append(lineno)
    if not rows:
        raise ParseError("no data rows")
    return np.array(rows, dtype=np.float64), np.array(lines)


def _read_bin(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, "rb") as fh:
        head = fh.read(HEADER.size)
        if len(head) < HEADER.size:
            raise ParseError("truncated header")
        magic, dim, n = HEADER.unpack(head)
        if magic != MAGIC:
            raise ParseError("bad magic bytes")
        if dim < 2 or n < 1:
            raise ParseError(f"invalid header: D={dim}, N={n}")
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != dim * n:
        raise ParseError(f"header declares {n}x{dim} floats, file holds {data.size}")
    X = data.reshape(n, dim).astype(np.float64)
    bad = np.flatnonzero(~np.isfinite(X).all(axis=1))
    if bad.size:
        raise ParseError("non-finite coordinate", int(bad[0]) + 1)
    return X, np.arange(1, n + 1)


def read_points(path, auto_normalize: bool = False, fmt: str | None = None) -> np.ndarray:
    """Load a batch of unit vectors.

    Without ``auto_normalize`` every row must already have unit norm (to
    ``1e-6``); otherwise rows are rescaled and zero rows rejected.
    """
    fmt = fmt or detect_format(path)
    X, rows = _read_bin(path) if fmt == "bin" else _read_text(path)
    norms = np.linalg.norm(X, axis=1)
    if auto_normalize:
        try:
            return normalize_rows(X)
        except DegenerateVector:
            i = int(np.flatnonzero(~(norms > 1e-12))[0])
            raise DegenerateVector(f"row {rows[i]}: zero-length vector") from None
    bad = np.flatnonzero(np.abs(norms - 1.0) > NORM_TOL)
    if bad.size:
        raise NormViolation(int(rows[bad[0]]), float(norms[bad[0]]))
    return X


def write_points(path, X, fmt: str = "text") -> None:
    X = np.asarray(X, dtype=np.float64)
    if fmt == "bin":
        with open(path, "wb") as fh:
            fh.write(HEADER.pack(MAGIC, X.shape[1], X.shape[0]))
            fh.write(np.ascontiguousarray(X, dtype="<f4").tobytes())
    elif fmt == "text":
        # repr-precision decimals round-trip float64 exactly
        np.savetxt(path, X, fmt="%.17g")
    else:
        raise ValueError(f"unknown format {fmt!r}")


def write_labels(path, labels) -> None:
    np.savetxt(path, np.asarray(labels, dtype=np.int64), fmt="%d")


def read_labels(path) -> np.ndarray:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            try:
                out.append(int(body))
            except ValueError:
                raise ParseError(f"not an integer label: {body!r}", lineno) from None
    return np.array(out, dtype=np.int64)


def write_cluster_table(path, ids, means, sizes) -> None:
    with open(path, "w") as fh:
        D = np.asarray(means).shape[1] if len(means) else 0
        fh.write("# id " + " ".join(f"m{d}" for d in range(D)) + " size\n")
        for i, m, n in zip(ids, means, sizes):
            fh.write(f"{int(i)} " + " ".join(f"{v:.17g}" for v in m) + f" {int(n)}\n")


def read_cluster_table(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows = [ln.split() for ln in Path(path).read_text().splitlines()
            if ln.strip() and not ln.startswith("#")]
    ids = np.array([int(r[0]) for r in rows], dtype=np.int64)
    means = np.array([[float(v) for v in r[1:-1]] for r in rows])
    sizes = np.array([int(r[-1]) for r in rows], dtype=np.int64)
    return ids, means, sizes


@dataclass
class RunSummary:
    command: str
    K: int
    objective: float | None
    iterations: int
    restarts: int
    converged: bool
    config: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    timing_ms: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunSummary":
        return cls(**json.loads(text))


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())
