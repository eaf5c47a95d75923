"""Dense symmetric order-3 tensor arithmetic.

Tensors are plain ``(d, d, d)`` float arrays; :class:`SymTensor3` wraps one
after explicit symmetrization and freezes it. Contractions follow the
multilinear-form convention ``T(M1, M2, M3)[a, b, c] =
sum_{ijk} T[i, j, k] M1[i, a] M2[j, b] M3[k, c]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError

_PERMS = ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0))


def _entries(t) -> np.ndarray:
    if isinstance(t, SymTensor3):
        return t.entries
    return np.asarray(t, dtype=float)


def symmetrize(t) -> np.ndarray:
    """Average over all six index permutations."""
    arr = _entries(t)
    if arr.ndim != 3 or len(set(arr.shape)) != 1:
        raise DimensionMismatchError(f"expected cubic order-3 array, got shape {arr.shape}")
    out = np.zeros_like(arr)
    for p in _PERMS:
        out += arr.transpose(p)
    out /= 6.0
    return out


def outer3(a, b, c) -> np.ndarray:
    """Rank-1 tensor a (x) b (x) c."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    if not (a.shape == b.shape == c.shape) or a.ndim != 1:
        raise DimensionMismatchError(
            f"outer3 needs three equal-length vectors, got {a.shape}, {b.shape}, {c.shape}"
        )
    return np.einsum("i,j,k->ijk", a, b, c)


def multilinear(t, m1, m2, m3) -> np.ndarray:
    """Contract each mode of ``t`` with the columns of a matrix."""
    arr = _entries(t)
    d = arr.shape[0]
    mats = []
    for k, m in enumerate((m1, m2, m3)):
        m = np.asarray(m, dtype=float)
        if m.ndim != 2 or m.shape[0] != d:
            raise DimensionMismatchError(
                f"mode-{k + 1} matrix has shape {m.shape}, needs {d} rows"
            )
        mats.append(m)
    return np.einsum("ijk,ia,jb,kc->abc", arr, *mats, optimize=True)


def slice_contract(t, theta) -> np.ndarray:
    """Weighted sum of slices: result[i, j] = sum_k T[i, j, k] theta[k]."""
    arr = _entries(t)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (arr.shape[0],):
        raise DimensionMismatchError(
            f"theta has shape {theta.shape}, tensor dim is {arr.shape[0]}"
        )
    return arr @ theta


def contract_two(t, a, b) -> np.ndarray:
    """T(I, a, b) as a length-d vector."""
    arr = _entries(t)
    return np.einsum("ijk,j,k->i", arr, a, b)


def contract_three(t, a, b, c) -> float:
    """Scalar T(a, b, c)."""
    arr = _entries(t)
    return float(np.einsum("ijk,i,j,k->", arr, a, b, c))


def matricize(t) -> np.ndarray:
    """Mode-1 unfolding, mapping entry (i, j, k) to (i, j*d + k)."""
    arr = _entries(t)
    d = arr.shape[0]
    return arr.reshape(d, d * d)


def frobenius(t) -> float:
    return float(np.linalg.norm(_entries(t)))


@dataclass(frozen=True)
class SymTensor3:
    """Immutable dense symmetric order-3 tensor."""

    entries: np.ndarray

    def __post_init__(self):
        arr = self.entries
        if arr.ndim != 3 or len(set(arr.shape)) != 1:
            raise DimensionMismatchError(f"expected (d, d, d) array, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("tensor entries must be finite")
        arr.flags.writeable = False

    @classmethod
    def from_array(cls, arr) -> "SymTensor3":
        """Symmetrize an arbitrary cubic array and freeze it."""
        return cls(symmetrize(arr))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def multilinear(self, m1, m2, m3) -> np.ndarray:
        return multilinear(self.entries, m1, m2, m3)

    def slice_contract(self, theta) -> np.ndarray:
        return slice_contract(self.entries, theta)

    def matricize(self) -> np.ndarray:
        return matricize(self.entries)

    def norm(self) -> float:
        return frobenius(self.entries)

    def __mul__(self, alpha: float) -> "SymTensor3":
        return SymTensor3(self.entries * float(alpha))

    __rmul__ = __mul__

    def __sub__(self, other) -> "SymTensor3":
        return SymTensor3(self.entries - _entries(other))

    def __add__(self, other) -> "SymTensor3":
        return SymTensor3(self.entries + _entries(other))
