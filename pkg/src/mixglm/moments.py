"""Empirical cross-moments between the response and input score functions.

Two weighting modes exist: ``glm`` pairs the raw response with the scores,
``regression`` raises the response to the power matching the moment order
(y for M1, y^2 for M2, y^3 for M3), which restores third-order signal when
the activation's third derivative vanishes in expectation.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError
from .scores import ScoreModel
from .sums import DEFAULT_CHUNK
from .tensors import SymTensor3

MODES = ("glm", "regression")

_BIN_MAGIC = b"GLMM"


@dataclass(frozen=True)
class Dataset:
    """Labeled samples: inputs x (n, d) and responses y (n,)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
            raise DimensionMismatchError(
                f"x shape {x.shape} and y shape {y.shape} do not form a dataset"
            )
        if x.shape[0] < 1:
            raise ValueError("dataset needs at least one sample")
        if not (np.isfinite(x).all() and np.isfinite(y).all()):
            raise ValueError("dataset contains non-finite entries")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class MomentTensor:
    """Symmetric averaged third moment plus provenance."""

    tensor: SymTensor3
    mode: str
    n_samples: int

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")


def _check_dims(data: Dataset, score: ScoreModel):
    if data.dim != score.dim:
        raise DimensionMismatchError(
            f"dataset dim {data.dim} does not match score model dim {score.dim}"
        )


def _weights(data: Dataset, mode: str, power: int) -> np.ndarray:
    if mode == "glm":
        return data.y
    if mode == "regression":
        return data.y**power
    raise ValueError(f"mode must be one of {MODES}")


def empirical_m1(data: Dataset, score: ScoreModel, mode: str = "glm") -> np.ndarray:
    """Average of y * S1(x)."""
    _check_dims(data, score)
    w = _weights(data, mode, 1)
    return score.weighted_s1_sum(data.x, w) / data.n


def empirical_m2(data: Dataset, score: ScoreModel, mode: str = "glm") -> np.ndarray:
    """Average of y * S2(x) (y^2 in regression mode); subspace diagnostic only."""
    _check_dims(data, score)
    w = _weights(data, mode, 2)
    out = score.weighted_s2_sum(data.x, w) / data.n
    return 0.5 * (out + out.T)


def empirical_m3(data: Dataset, score: ScoreModel, mode: str = "glm",
                 chunk: int = DEFAULT_CHUNK) -> MomentTensor:
    """Average of y * S3(x) (y^3 in regression mode) as a MomentTensor.

    Accumulation is chunked with a balanced pairwise merge, so the result is
    deterministic for a fixed sample order and chunk size.
    """
    _check_dims(data, score)
    w = _weights(data, mode, 3)
    if not np.isfinite(w).all():
        raise ValueError("response weights overflowed; y^3 terms must stay finite")
    total = score.weighted_s3_sum(data.x, w, chunk)
    if not np.isfinite(total).all():
        raise ValueError("moment accumulation produced non-finite entries")
    return MomentTensor(
        tensor=SymTensor3.from_array(total / data.n),
        mode=mode,
        n_samples=data.n,
    )


def exact_cp_tensor(u: np.ndarray, coeffs) -> SymTensor3:
    """Noiseless sum of coeff_j * u_j^(x3) over the columns of u."""
    u = np.asarray(u, dtype=float)
    coeffs = np.asarray(coeffs, dtype=float)
    if u.ndim != 2 or coeffs.shape != (u.shape[1],):
        raise DimensionMismatchError(
            f"U shape {u.shape} incompatible with coefficients shape {coeffs.shape}"
        )
    arr = np.einsum("j,ij,kj,lj->ikl", coeffs, u, u, u)
    return SymTensor3.from_array(arr)


# ---------------------------------------------------------------------------
# dataset files: CSV with header x_1,..,x_d,y and a packed binary format


def save_dataset_csv(data: Dataset, path) -> None:
    header = ",".join([f"x_{i + 1}" for i in range(data.dim)] + ["y"])
    table = np.column_stack([data.x, data.y])
    np.savetxt(path, table, delimiter=",", header=header, comments="", fmt="%.17g")


def load_dataset_csv(path) -> Dataset:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        ncols = len(header)
        if ncols < 2:
            raise ValueError(f"{path}: header needs at least one x column and y")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != ncols:
                raise ValueError(f"{path}: line {lineno}: expected {ncols} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    table = np.asarray(rows, dtype=float)
    return Dataset(x=table[:, :-1], y=table[:, -1])


def save_dataset_binary(data: Dataset, path) -> None:
    """Little-endian f64 rows of (x_1..x_d, y) behind a 16-byte header."""
    header = struct.pack("<4sIII", _BIN_MAGIC, data.n, data.dim, 0)
    table = np.ascontiguousarray(np.column_stack([data.x, data.y]), dtype="<f8")
    with open(path, "wb") as f:
        f.write(header)
        f.write(table.tobytes())


def load_dataset_binary(path) -> Dataset:
    with open(path, "rb") as f:
        header = f.read(16)
        if len(header) != 16:
            raise ValueError(f"{path}: truncated header")
        magic, n, d, _ = struct.unpack("<4sIII", header)
        if magic != _BIN_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        payload = np.frombuffer(f.read(), dtype="<f8")
    if payload.size != n * (d + 1):
        raise ValueError(f"{path}: expected {n * (d + 1)} values, found {payload.size}")
    table = payload.reshape(n, d + 1).astype(float)
    return Dataset(x=table[:, :-1], y=table[:, -1])


def load_dataset(path) -> Dataset:
    path = str(path)
    if path.endswith(".bin"):
        return load_dataset_binary(path)
    return load_dataset_csv(path)
