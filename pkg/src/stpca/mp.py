"""Per-slice sparse tensor PCA solver in a mode-3 transform domain.

The data tensor is rotated so its second mode enumerates samples, taken to
the transform domain, and each frontal slice gets its own independent convex
subproblem -- the same reweighted HPSD update loop the direction-set solver
uses, with the slice self-scatter as input.  Scores are per-slice column
norms of the inverse-transformed reconstruction matrices, assembled back
into the original sample geometry.

Note on the slice scatter: it is formed with the conjugate transpose,
``S = X_i X_i^H``, so it is Hermitian for complex data (a plain transpose
would break the HPSD machinery there).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from . import _kernels
from .dp import ScoreMap, _ranking, init_recon
from .tensor import (
    DIR1,
    OrderSet,
    TensorLike,
    TransformMatrix,
    _as_array,
    rotate,
)

__all__ = ["MpConfig", "MpModel", "prepare", "fit_slice", "fit", "score", "mp_objective"]


@dataclass
class MpConfig:
    """Per-slice solver configuration.

    ``lam`` / ``eta`` may be scalars (broadcast over slices) or one value per
    slice.  ``transform`` defaults to the identity sized at fit time.
    """

    order_set: OrderSet = DIR1
    transform: TransformMatrix | None = None
    lam: Union[float, Sequence[float]] = 1.0
    eta: Union[float, Sequence[float]] = 1.0
    eps1: float = 1e-12
    eps2: float = 1e-8
    tol: float = 1e-6
    max_iter: int = 200
    seed: int = 0

    def validate(self) -> None:
        if self.eps1 <= 0 or self.eps2 <= 0:
            raise ValueError("eps1 and eps2 must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")

    def per_slice(self, value, p: int, name: str) -> tuple[float, ...]:
        vals = (value,) * p if np.isscalar(value) else tuple(float(v) for v in value)
        if len(vals) != p:
            raise ValueError(f"{name} must broadcast over {p} slices")
        if any(v < 0 for v in vals):
            raise ValueError(f"{name} entries must be nonnegative")
        return tuple(float(v) for v in vals)


@dataclass
class MpModel:
    """Fitted model: the transform-domain stack of q x q HPSD slice
    reconstruction matrices, with per-slice convergence records."""

    slices: np.ndarray  # (q, q, p), transform domain
    traces: list[np.ndarray]
    converged: list[bool]
    iterations: list[int]
    order_set: OrderSet
    transform: TransformMatrix
    sample_shape: tuple[int, int]


def _resolve_transform(config: MpConfig, p: int) -> TransformMatrix:
    m = config.transform if config.transform is not None else TransformMatrix.identity(p)
    if m.side != p:
        raise ValueError(f"transform side {m.side} does not match rotated third extent {p}")
    return m


def prepare(data: TensorLike, config: MpConfig) -> tuple[np.ndarray, TransformMatrix]:
    """Rotate the (centralized) data tensor with the order set and apply the
    mode-3 transform; returns the ``(q, n, p)`` slice stack and the resolved
    transform."""
    arr = _as_array(data)
    if arr.ndim != 3:
        raise ValueError(f"third-order data tensor required, got order {arr.ndim}")
    rotated = rotate(arr, config.order_set).data
    m = _resolve_transform(config, rotated.shape[2])
    return m.forward(rotated), m


def fit_slice(
    slice_mat: np.ndarray,
    lam: float,
    eta: float,
    config: MpConfig,
    seed: int,
):
    """Solve one slice subproblem from its self-scatter.

    Returns ``(a_hat, trace, converged, n_iter)``; the recorded objective
    trace is nonincreasing (an increasing step is rejected and stops the
    loop).
    """
    x = np.asarray(slice_mat, dtype=np.complex128)
    if not np.all(np.isfinite(x)):
        raise np.linalg.LinAlgError("non-finite slice data")
    q = x.shape[0]
    s = x @ x.conj().T
    a0 = init_recon(q, seed)
    a, n_iter, trace = _kernels.solve_subproblem(
        s, lam, eta, config.eps1, config.eps2, a0,
        tol=config.tol, max_iter=config.max_iter, record_trace=True,
    )
    converged = n_iter < config.max_iter
    return a, np.asarray(trace), converged, n_iter


def fit(data: TensorLike, config: MpConfig) -> MpModel:
    """Solve all ``p`` slice subproblems.

    Subproblems are independent and seeded by slice index, so any execution
    order (or concurrent execution) produces the same model.
    """
    config.validate()
    stack, m = prepare(data, config)
    q, _, p = stack.shape
    lams = config.per_slice(config.lam, p, "lam")
    etas = config.per_slice(config.eta, p, "eta")

    slices = np.zeros((q, q, p), dtype=np.complex128, order="F")
    traces: list[np.ndarray] = [None] * p  # type: ignore[list-item]
    converged = [False] * p
    iterations = [0] * p
    for i in range(p):
        try:
            a, trace, conv, n_iter = fit_slice(stack[:, :, i], lams[i], etas[i], config, config.seed + i)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(f"slice {i}: {exc}") from exc
        slices[:, :, i] = a
        traces[i] = trace
        converged[i] = conv
        iterations[i] = n_iter

    arr = _as_array(data)
    return MpModel(slices, traces, converged, iterations, config.order_set, m,
                   (arr.shape[0], arr.shape[1]))


def score(model: MpModel, config: MpConfig, scenario: str = "tube-wise") -> ScoreMap:
    """Per-feature scores in the original sample geometry.

    The slice stack is inverse-transformed, per-slice column norms give one
    score vector per slice, and the rotation is undone so both order sets
    land in the same ``d1 x d2`` geometry.  Slice-wise data sums each row
    into per-dimension scores.
    """
    orig = model.transform.backward(model.slices)
    norms = np.linalg.norm(orig, axis=0)  # (q, p): column j of slice i -> norms[j, i]
    if model.order_set.perm == (1, 3, 2):
        element = norms  # rows are mode-1 dims, slices are mode-2 positions
    else:
        element = norms.T  # rows were mode-2 dims: transpose back
    if element.shape != model.sample_shape:
        raise ValueError(
            f"score map shape {element.shape} does not match sample shape {model.sample_shape}"
        )
    if scenario == "slice-wise":
        scores = element.sum(axis=1)
        return ScoreMap(scores, _ranking(scores), "per-dimension")
    flat = element.flatten(order="F")
    return ScoreMap(element, _ranking(flat), "per-element")


def mp_objective(data: TensorLike, model: MpModel, config: MpConfig) -> float:
    """Sum of the per-slice transform-domain objectives, recomputed from the
    data: residual norm plus the l2,1 and trace penalties of each slice."""
    config.validate()
    stack, _ = prepare(data, config)
    p = stack.shape[2]
    lams = config.per_slice(config.lam, p, "lam")
    etas = config.per_slice(config.eta, p, "eta")
    total = 0.0
    for i in range(p):
        x = stack[:, :, i]
        a = model.slices[:, :, i]
        total += float(np.linalg.norm(x - a @ x) ** 2)
        total += lams[i] * float(np.linalg.norm(a, axis=0).sum())
        total += etas[i] * float(np.trace(a).real)
    return total
