"""Dense complex tensors plus the two higher-order product frameworks.

Everything here is built around a single storage convention, which is also
the normative layout of the DTF file format:

    mode-1-fastest ("Fortran" / column-major generalization).  The linear
    position of element ``(i_1, ..., i_n)`` (0-based) is
    ``i_1 + i_2*d_1 + i_3*d_1*d_2 + ...``.

With that layout, unfolding along ``L = {1}`` is a zero-copy
reinterpretation of the buffer.

Two product families are provided:

* direction unfolding with its inner/outer products -- flatten a tensor by
  splitting modes into a row set ``L`` and the complementary column set,
  then multiply against the unfolded matrix and fold back;
* transform-domain slice products -- apply an invertible mode-3 transform,
  multiply frontal slices pairwise, transform back.

All operations are pure functions; values are treated as immutable after
construction and are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Iterable, Sequence, Union

import numpy as np

__all__ = [
    "DenseTensor",
    "DirectionSet",
    "OrderSet",
    "TransformMatrix",
    "IDENTITY",
    "unfold",
    "fold",
    "dir_inner",
    "dir_outer",
    "seq_dir_inner",
    "mode3_product",
    "mode3_inverse",
    "star_m",
    "star_conj_transpose",
    "rotate",
    "rotate_inverse",
    "centralize",
]


class DenseTensor:
    """Arbitrary-order dense complex tensor stored mode-1-fastest.

    Real input is embedded with zero imaginary parts; there is a single
    complex code path throughout the package.
    """

    __slots__ = ("data",)

    def __init__(self, data, copy: bool = True):
        if isinstance(data, DenseTensor):
            data = data.data
        if copy:
            arr = np.array(data, dtype=np.complex128, order="F")
        else:
            arr = np.asfortranarray(np.asarray(data, dtype=np.complex128))
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if arr.size == 0:
            raise ValueError("every extent must be >= 1")
        self.data = arr

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def order(self) -> int:
        return self.data.ndim

    def norm(self) -> float:
        """Frobenius norm."""
        return float(np.linalg.norm(self.data))

    def conj(self) -> "DenseTensor":
        return DenseTensor(np.conj(self.data), copy=False)

    def __repr__(self) -> str:  # pragma: no cover
        return f"DenseTensor(shape={self.shape})"


TensorLike = Union[DenseTensor, np.ndarray]


def _as_array(t: TensorLike) -> np.ndarray:
    if isinstance(t, DenseTensor):
        return t.data
    return np.asarray(t, dtype=np.complex128)


@dataclass(frozen=True)
class DirectionSet:
    """Set of 1-based mode indices selecting the rows of an unfolding."""

    modes: tuple[int, ...]

    def __init__(self, modes: Iterable[int]):
        mm = tuple(int(m) for m in modes)
        if not mm:
            raise ValueError("direction set must be nonempty")
        if len(set(mm)) != len(mm):
            raise ValueError(f"duplicate modes in direction set: {mm}")
        if any(m < 1 for m in mm):
            raise ValueError(f"mode indices are 1-based, got {mm}")
        object.__setattr__(self, "modes", tuple(sorted(mm)))

    def validate_for(self, order: int) -> None:
        if self.modes[-1] > order:
            raise ValueError(
                f"mode index {self.modes[-1]} out of range for order-{order} tensor"
            )

    def complement(self, order: int) -> tuple[int, ...]:
        self.validate_for(order)
        return tuple(m for m in range(1, order + 1) if m not in self.modes)

    def __len__(self) -> int:
        return len(self.modes)

    def __iter__(self):
        return iter(self.modes)


ModesLike = Union[DirectionSet, Iterable[int]]


def _as_direction_set(modes: ModesLike) -> DirectionSet:
    if isinstance(modes, DirectionSet):
        return modes
    return DirectionSet(modes)


_SUPPORTED_PERMS = ((1, 3, 2), (2, 3, 1))


@dataclass(frozen=True)
class OrderSet:
    """Rotation order for third-order tensors; output extent k is input
    extent ``perm[k]``.  Only the two rotations used by the per-slice solver
    are supported."""

    perm: tuple[int, int, int]

    def __init__(self, perm: Sequence[int]):
        p = tuple(int(v) for v in perm)
        if sorted(p) != [1, 2, 3]:
            raise ValueError(f"order set must be a permutation of 1..3, got {p}")
        if p not in _SUPPORTED_PERMS:
            raise ValueError(f"unsupported permutation {p}; use (1,3,2) or (2,3,1)")
        object.__setattr__(self, "perm", p)


DIR1 = OrderSet((1, 3, 2))
DIR2 = OrderSet((2, 3, 1))


class TransformMatrix:
    """Invertible mode-3 transform.

    ``identity`` and ``dft`` are applied implicitly (no materialized matrix
    on the hot path); ``custom`` wraps an explicit square invertible matrix.
    The DFT convention is the unnormalized forward transform
    ``M[j, k] = exp(-2i*pi*j*k/p)`` with the ``1/p`` on the inverse.
    """

    __slots__ = ("kind", "side", "_matrix", "_inverse")

    def __init__(self, kind: str, side: int, matrix=None, inverse=None):
        self.kind = kind
        self.side = int(side)
        self._matrix = matrix
        self._inverse = inverse

    @classmethod
    def identity(cls, side: int) -> "TransformMatrix":
        return cls("identity", side)

    @classmethod
    def dft(cls, side: int) -> "TransformMatrix":
        return cls("dft", side)

    @classmethod
    def custom(cls, matrix) -> "TransformMatrix":
        m = np.asarray(matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"transform matrix must be square, got {m.shape}")
        p = m.shape[0]
        try:
            inv = np.linalg.inv(m)
        except np.linalg.LinAlgError as exc:
            raise ValueError("transform matrix is singular") from exc
        resid = np.linalg.norm(m @ inv - np.eye(p))
        if not np.isfinite(resid) or resid > 1e-10 * p:
            raise ValueError(f"transform matrix is numerically singular (residual {resid:.2e})")
        return cls("custom", p, m, inv)

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            if self.kind == "identity":
                self._matrix = np.eye(self.side, dtype=np.complex128)
            else:  # dft
                j = np.arange(self.side)
                self._matrix = np.exp(-2j * np.pi * np.outer(j, j) / self.side)
        return self._matrix

    @property
    def inverse(self) -> np.ndarray:
        if self._inverse is None:
            if self.kind == "identity":
                self._inverse = np.eye(self.side, dtype=np.complex128)
            else:  # dft
                self._inverse = self.matrix.conj() / self.side
        return self._inverse

    def forward(self, arr: np.ndarray) -> np.ndarray:
        """Apply the transform along the last axis."""
        if arr.shape[-1] != self.side:
            raise ValueError(
                f"transform side {self.side} does not match extent {arr.shape[-1]}"
            )
        if self.kind == "identity":
            return arr
        if self.kind == "dft":
            return np.fft.fft(arr, axis=-1)
        return arr @ self._matrix.T

    def backward(self, arr: np.ndarray) -> np.ndarray:
        if arr.shape[-1] != self.side:
            raise ValueError(
                f"transform side {self.side} does not match extent {arr.shape[-1]}"
            )
        if self.kind == "identity":
            return arr
        if self.kind == "dft":
            return np.fft.ifft(arr, axis=-1)
        return arr @ self._inverse.T


class _IdentityTensor:
    """Marker for the slice-product identity tensor, which is never
    materialized: every transform-domain frontal slice is an identity
    matrix, so products against it short-circuit."""

    def __repr__(self) -> str:  # pragma: no cover
        return "IDENTITY"


IDENTITY = _IdentityTensor()


def unfold(t: TensorLike, modes: ModesLike) -> np.ndarray:
    """Unfold a tensor into the ``prod(d_L) x prod(d_R)`` matrix whose row
    index runs over the direction-set modes (first listed fastest) and whose
    column index runs over the remaining modes in increasing order."""
    arr = _as_array(t)
    ds = _as_direction_set(modes)
    ds.validate_for(arr.ndim)
    rest = ds.complement(arr.ndim)
    axes = [m - 1 for m in ds.modes] + [m - 1 for m in rest]
    m1 = prod(arr.shape[m - 1] for m in ds.modes)
    m2 = prod(arr.shape[m - 1] for m in rest)
    return arr.transpose(axes).reshape((m1, m2), order="F")


def fold(matrix: np.ndarray, modes: ModesLike, shape: Sequence[int]) -> DenseTensor:
    """Inverse of :func:`unfold`: ``fold(unfold(t, L), L, t.shape) == t``
    bit-for-bit."""
    m = np.asarray(matrix, dtype=np.complex128)
    shape = tuple(int(d) for d in shape)
    ds = _as_direction_set(modes)
    ds.validate_for(len(shape))
    rest = ds.complement(len(shape))
    m1 = prod(shape[k - 1] for k in ds.modes)
    m2 = prod(shape[k - 1] for k in rest)
    if m.shape != (m1, m2):
        raise ValueError(f"matrix shape {m.shape} inconsistent with {shape} and L={ds.modes}")
    axes = [k - 1 for k in ds.modes] + [k - 1 for k in rest]
    permuted_shape = tuple(shape[a] for a in axes)
    inv = np.argsort(axes)
    arr = m.reshape(permuted_shape, order="F").transpose(inv)
    return DenseTensor(arr)


def dir_inner(t: TensorLike, u: TensorLike, modes: ModesLike) -> DenseTensor:
    """Direction-unfolding inner product ``t x_L u``.

    ``u`` has order ``q+1`` with shape ``(m, d_{l_1}, ..., d_{l_q})``; the
    result is ``fold(U_(1) @ T_L)`` with extent ``m`` on the first L-mode and
    1 on the remaining L-modes.
    """
    arr = _as_array(t)
    uarr = _as_array(u)
    ds = _as_direction_set(modes)
    ds.validate_for(arr.ndim)
    q = len(ds)
    if uarr.ndim != q + 1:
        raise ValueError(f"projector must have order {q + 1}, got {uarr.ndim}")
    expected = tuple(arr.shape[l - 1] for l in ds.modes)
    if uarr.shape[1:] != expected:
        raise ValueError(
            f"projector trailing extents {uarr.shape[1:]} do not match tensor extents "
            f"{expected} on modes {ds.modes}"
        )
    u1 = uarr.reshape((uarr.shape[0], -1), order="F")
    v = u1 @ unfold(arr, ds)
    out_shape = list(arr.shape)
    out_shape[ds.modes[0] - 1] = uarr.shape[0]
    for l in ds.modes[1:]:
        out_shape[l - 1] = 1
    return fold(v, ds, out_shape)


def dir_outer(v: TensorLike, u: TensorLike, modes: ModesLike) -> DenseTensor:
    """Direction-unfolding outer product: the reconstruction
    ``fold(U_(1)^H @ V_L)``, restoring the original extents on the L-modes."""
    varr = _as_array(v)
    uarr = _as_array(u)
    ds = _as_direction_set(modes)
    ds.validate_for(varr.ndim)
    q = len(ds)
    if uarr.ndim != q + 1:
        raise ValueError(f"projector must have order {q + 1}, got {uarr.ndim}")
    u1 = uarr.reshape((uarr.shape[0], -1), order="F")
    vl = unfold(varr, ds)
    if vl.shape[0] != u1.shape[0]:
        raise ValueError(
            f"compressed extent {vl.shape[0]} does not match projector rows {u1.shape[0]}"
        )
    out_shape = list(varr.shape)
    for pos, l in enumerate(ds.modes):
        out_shape[l - 1] = uarr.shape[1 + pos]
    return fold(u1.conj().T @ vl, ds, out_shape)


def seq_dir_inner(t: TensorLike, projectors: Sequence[tuple[TensorLike, ModesLike]]) -> DenseTensor:
    """Sequential inner products over pairwise disjoint direction sets.

    Disjointness makes the result order-independent; it is validated here.
    """
    seen: set[int] = set()
    for _, modes in projectors:
        ds = _as_direction_set(modes)
        if seen & set(ds.modes):
            raise ValueError("direction sets of a sequential product must be disjoint")
        seen |= set(ds.modes)
    out = DenseTensor(_as_array(t), copy=False)
    for u, modes in projectors:
        out = dir_inner(out, u, modes)
    return out


def _require_order3(arr: np.ndarray) -> None:
    if arr.ndim != 3:
        raise ValueError(f"third-order tensor required, got order {arr.ndim}")


def mode3_product(t: TensorLike, m: TransformMatrix) -> DenseTensor:
    """Mode-3 product with an invertible transform: the tensor in the
    transform domain."""
    arr = _as_array(t)
    _require_order3(arr)
    return DenseTensor(m.forward(arr), copy=False)


def mode3_inverse(t: TensorLike, m: TransformMatrix) -> DenseTensor:
    arr = _as_array(t)
    _require_order3(arr)
    return DenseTensor(m.backward(arr), copy=False)


def star_m(a: TensorLike, b, m: TransformMatrix) -> DenseTensor:
    """Slice product: frontal-slice matrix products in the transform domain,
    then inverse transform.  Orientation-dependent by construction.

    ``b`` (or ``a``) may be the :data:`IDENTITY` marker, which
    short-circuits to the other operand.
    """
    if isinstance(b, _IdentityTensor):
        arr = _as_array(a)
        _require_order3(arr)
        if arr.shape[2] != m.side:
            raise ValueError(f"transform side {m.side} does not match extent {arr.shape[2]}")
        return DenseTensor(arr)
    if isinstance(a, _IdentityTensor):
        arr = _as_array(b)
        _require_order3(arr)
        if arr.shape[2] != m.side:
            raise ValueError(f"transform side {m.side} does not match extent {arr.shape[2]}")
        return DenseTensor(arr)
    aa = _as_array(a)
    bb = _as_array(b)
    _require_order3(aa)
    _require_order3(bb)
    if aa.shape[2] != bb.shape[2]:
        raise ValueError(f"third extents differ: {aa.shape[2]} vs {bb.shape[2]}")
    if aa.shape[1] != bb.shape[0]:
        raise ValueError(f"inner dimensions differ: {aa.shape} vs {bb.shape}")
    ahat = m.forward(aa)
    bhat = m.forward(bb)
    chat = np.einsum("ijk,jlk->ilk", ahat, bhat)
    return DenseTensor(m.backward(chat), copy=False)


def star_conj_transpose(t: TensorLike, m: TransformMatrix) -> DenseTensor:
    """Conjugate transpose under the slice product: per-slice conjugate
    transpose in the transform domain."""
    arr = _as_array(t)
    _require_order3(arr)
    hat = m.forward(arr)
    hat_h = np.conj(np.einsum("ijk->jik", hat))
    return DenseTensor(m.backward(hat_h), copy=False)


def rotate(t: TensorLike, d: OrderSet) -> DenseTensor:
    """Permute the axes of a third-order tensor so that output extent ``k``
    equals input extent ``d.perm[k]``."""
    arr = _as_array(t)
    _require_order3(arr)
    axes = [p - 1 for p in d.perm]
    return DenseTensor(arr.transpose(axes))


def rotate_inverse(t: TensorLike, d: OrderSet) -> DenseTensor:
    """Undo :func:`rotate` with the same order set."""
    arr = _as_array(t)
    _require_order3(arr)
    axes = np.argsort([p - 1 for p in d.perm])
    return DenseTensor(arr.transpose(axes))


def centralize(samples: TensorLike, sample_mode: int) -> DenseTensor:
    """Subtract the per-feature mean across samples.

    ``sample_mode`` is the 1-based mode enumerating samples.
    """
    arr = _as_array(samples)
    if not 1 <= sample_mode <= arr.ndim:
        raise ValueError(f"sample mode {sample_mode} out of range for order {arr.ndim}")
    axis = sample_mode - 1
    if arr.shape[axis] < 2:
        raise ValueError("centralization requires at least 2 samples")
    return DenseTensor(arr - arr.mean(axis=axis, keepdims=True), copy=False)
