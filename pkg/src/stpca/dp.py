"""Direction-set sparse tensor PCA solver (variants 1sd, 2sd, md).

The model learns one square HPSD reconstruction matrix per direction set by
cycling convex subproblems: for the active set, apply the other sets'
reconstruction matrices to the samples, form the cross-scatter, and run the
reweighted HPSD update loop.  Feature scores are column norms of the
(Kronecker-accumulated) reconstruction matrices.

Samples are the frontal slices of the input tensor: for third-order data of
shape ``(d1, d2, t)`` there are ``t`` samples of size ``d1 x d2``, and
direction sets index the sample modes (1-based).  Input is expected to be
centralized across samples (see :func:`stpca.tensor.centralize`).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import prod
from typing import Sequence, Union

import numpy as np
from scipy.linalg import blas

from . import _kernels
from .hpsd import WeightDiagonal, project_hpsd
from .tensor import DirectionSet, TensorLike, _as_array, unfold

__all__ = [
    "DpConfig",
    "DpModel",
    "ScoreMap",
    "init_recon",
    "partial_reconstruct",
    "scatter",
    "update_recon",
    "dp_objective",
    "fit",
    "score",
]

# Canonical direction sets per variant for third-order data (sample modes 1, 2).
VARIANT_SETS = {
    "1sd": ((1,),),
    "2sd": ((1,), (2,)),
    "md": ((1, 2),),
}

# Relative slack above which an objective step counts as an increase; a sweep
# that increases the objective is rolled back and stops the fit.
_GUARD_RTOL = 1e-13


@dataclass
class DpConfig:
    """Solver configuration.

    ``lam`` / ``eta`` may be scalars (broadcast over direction sets) or one
    value per set.  ``direction_sets`` overrides the variant-derived sets.
    """

    variant: str = "1sd"
    direction_sets: tuple = ()
    lam: Union[float, Sequence[float]] = 1.0
    eta: Union[float, Sequence[float]] = 1.0
    eps1: float = 1e-12
    eps2: float = 1e-8
    tol: float = 1e-6
    max_iter: int = 200
    inner_tol: float = 1e-6
    inner_max_iter: int = 50
    seed: int = 0

    def resolve_sets(self, sample_order: int) -> tuple[DirectionSet, ...]:
        if self.direction_sets:
            sets = tuple(
                ds if isinstance(ds, DirectionSet) else DirectionSet(ds)
                for ds in self.direction_sets
            )
        else:
            if self.variant not in VARIANT_SETS:
                raise ValueError(f"unknown variant {self.variant!r}; expected 1sd, 2sd or md")
            sets = tuple(DirectionSet(m) for m in VARIANT_SETS[self.variant])
        seen: set[int] = set()
        for ds in sets:
            ds.validate_for(sample_order)
            if seen & set(ds.modes):
                raise ValueError("direction sets must be pairwise disjoint")
            seen |= set(ds.modes)
        return sets

    def per_set(self, value, n_sets: int, name: str, minimum: float) -> tuple[float, ...]:
        vals = (value,) * n_sets if np.isscalar(value) else tuple(float(v) for v in value)
        if len(vals) != n_sets:
            raise ValueError(f"{name} must broadcast over {n_sets} direction sets")
        if any(v < minimum for v in vals):
            raise ValueError(f"{name} entries must be >= {minimum}")
        return tuple(float(v) for v in vals)

    def validate(self) -> None:
        if self.eps1 <= 0 or self.eps2 <= 0:
            raise ValueError("eps1 and eps2 must be positive")
        if self.max_iter < 1 or self.inner_max_iter < 1:
            raise ValueError("iteration caps must be >= 1")


@dataclass
class DpModel:
    """Fitted model: one HPSD reconstruction matrix per direction set.

    ``halted_on_increase`` records that the fit stopped because a sweep
    would have increased the objective (the sweep was rolled back); the
    recorded trace is nonincreasing either way.
    """

    recon: tuple[np.ndarray, ...]
    direction_sets: tuple[DirectionSet, ...]
    objective_trace: np.ndarray
    converged: bool
    iterations: int
    sample_shape: tuple[int, ...]
    halted_on_increase: bool = False


@dataclass
class ScoreMap:
    """Nonnegative per-feature scores and the induced selection order.

    ``ranking`` holds flat feature indices sorted by descending score, ties
    broken by ascending index.  Per-element score maps are flattened
    mode-1-fastest.
    """

    scores: np.ndarray
    ranking: np.ndarray
    granularity: str

    def top(self, h: int) -> np.ndarray:
        return self.ranking[:h]


def _ranking(flat_scores: np.ndarray) -> np.ndarray:
    # stable sort on the negated scores keeps ascending index within ties
    return np.argsort(-flat_scores, kind="stable")


def init_recon(b: int, seed: int) -> np.ndarray:
    """Seeded random HPSD start: ``G G^H / b`` with standard complex-normal
    ``G``; strictly PSD and reproducible."""
    if b < 1:
        raise ValueError(f"matrix side must be >= 1, got {b}")
    rng = np.random.default_rng(seed)
    g = (rng.standard_normal((b, b)) + 1j * rng.standard_normal((b, b))) / np.sqrt(2.0)
    a = g @ g.conj().T / b
    return 0.5 * (a + a.conj().T)


def _sample_array(samples: TensorLike) -> np.ndarray:
    arr = _as_array(samples)
    if arr.ndim < 2:
        raise ValueError("need at least one sample mode plus one feature mode")
    return arr


def _apply_recon(arr: np.ndarray, a: np.ndarray, ds: DirectionSet) -> np.ndarray:
    """Apply one reconstruction matrix on the modes of its direction set,
    leaving the sample mode untouched.

    Equivalent to ``fold(a @ unfold(arr, ds), ds, arr.shape)`` but returns a
    transposed view of the product instead of forcing a Fortran-layout copy
    (this sits on the per-sweep hot path).
    """
    m = a @ unfold(arr, ds)
    rest = ds.complement(arr.ndim)
    axes = [k - 1 for k in ds.modes] + [k - 1 for k in rest]
    permuted_shape = tuple(arr.shape[ax] for ax in axes)
    return m.reshape(permuted_shape, order="F").transpose(np.argsort(axes))


def partial_reconstruct(samples: TensorLike, model: DpModel, e: int) -> np.ndarray:
    """Unfolded active-set input for subproblem ``e``: all other sets'
    reconstruction matrices applied, then unfolded along ``L_e``.  Samples
    are stacked along the columns; with a single direction set this is just
    the unfolded data."""
    arr = _sample_array(samples)
    y = arr
    for k, (a, ds) in enumerate(zip(model.recon, model.direction_sets)):
        if k != e:
            y = _apply_recon(y, a, ds)
    return unfold(y, model.direction_sets[e])


def scatter(x_unf: np.ndarray, y_unf: np.ndarray) -> np.ndarray:
    """Cross-scatter ``sum_i X^i Y^i{}^H`` of stacked unfoldings."""
    if x_unf.shape != y_unf.shape:
        raise ValueError(f"unfolding shapes differ: {x_unf.shape} vs {y_unf.shape}")
    x = np.asarray(x_unf, dtype=np.complex128)
    y = np.asarray(y_unf, dtype=np.complex128)
    # zgemm conjugate-transposes on the fly; x @ y.conj().T would
    # materialize a full conjugate copy of the wide operand
    return blas.zgemm(1.0, np.asfortranarray(x), np.asfortranarray(y), trans_b=2)


def update_recon(
    s: np.ndarray,
    w: WeightDiagonal,
    lam: float,
    eta: float,
    eps2: float,
) -> np.ndarray:
    """One closed-form update: HPSD projection of
    ``(S - eta/2 I)(S + lam W + eps2 I)^{-1}`` (computed by linear solve)."""
    if eps2 <= 0:
        raise ValueError("eps2 must be positive")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if np.any(w.diag <= 0):
        raise ValueError("weight diagonal must be positive")
    s = np.asarray(s, dtype=np.complex128)
    b = s.shape[0]
    c = s - 0.5 * eta * np.eye(b)
    bmat = s + np.diag(lam * w.diag) + eps2 * np.eye(b)
    # A B = C  <=>  B^T A^T = C^T
    a_raw = np.linalg.solve(bmat.T, c.T).T
    return project_hpsd(a_raw)


def _resolved(samples, config):
    arr = _sample_array(samples)
    config.validate()
    sets = config.resolve_sets(arr.ndim - 1)
    lams = config.per_set(config.lam, len(sets), "lam", 0.0)
    etas = config.per_set(config.eta, len(sets), "eta", 0.0)
    return arr, sets, lams, etas


def dp_objective(samples: TensorLike, model: DpModel, config: DpConfig) -> float:
    """Exact model objective: reconstruction error plus the l2,1 and trace
    penalties of every reconstruction matrix."""
    arr, sets, lams, etas = _resolved(samples, config)
    recon = arr
    for a, ds in zip(model.recon, sets):
        recon = _apply_recon(recon, a, ds)
    value = float(np.linalg.norm(arr - recon) ** 2)
    for a, lam_k, eta_k in zip(model.recon, lams, etas):
        value += lam_k * float(np.linalg.norm(a, axis=0).sum())
        value += eta_k * float(np.trace(a).real)
    return value


def fit(samples: TensorLike, config: DpConfig) -> DpModel:
    """Cycle the per-set subproblems until the relative objective change
    drops below ``config.tol`` (or ``max_iter`` sweeps).

    The recorded objective trace is nonincreasing: a sweep that would
    increase the objective is rolled back and stops the fit.
    """
    arr, sets, lams, etas = _resolved(samples, config)
    sample_shape = arr.shape[:-1]
    sides = [prod(arr.shape[m - 1] for m in ds.modes) for ds in sets]

    if np.linalg.norm(arr) == 0.0:
        warnings.warn("constant-zero data; returning the zero model", RuntimeWarning)
        recon = tuple(np.zeros((b, b), dtype=np.complex128) for b in sides)
        model = DpModel(recon, sets, np.zeros(1), True, 0, sample_shape)
        model.objective_trace = np.array([dp_objective(arr, model, config)])
        return model

    recons = [init_recon(b, config.seed + k) for k, b in enumerate(sides)]
    model = DpModel(tuple(recons), sets, np.empty(0), False, 0, sample_shape)
    converged = False
    halted = False
    x_unf = [unfold(arr, ds) for ds in sets]
    total_sq = float(np.linalg.norm(arr) ** 2)
    single = len(sets) == 1
    last = len(sets) - 1
    s_const = scatter(x_unf[0], x_unf[0]) if single else None

    def penalties() -> float:
        value = 0.0
        for a, lam_k, eta_k in zip(recons, lams, etas):
            value += lam_k * float(np.linalg.norm(a, axis=0).sum())
            value += eta_k * float(np.trace(a).real)
        return value

    def objective(s: np.ndarray, syy: np.ndarray) -> float:
        # reconstruction error via the last subproblem's scatters:
        # ||X_e - A_e Y_e||^2 = ||X||^2 - 2 Re tr(A S^H) + tr(A Syy A^H)
        a = recons[last]
        cross = 2.0 * float(np.einsum("ij,ij->", s.conj(), a).real)
        quad = float(np.einsum("ij,ij->", a @ syy, a.conj()).real)
        value = total_sq - cross + quad + penalties()
        if not np.isfinite(value):
            raise FloatingPointError("non-finite objective; check data scaling")
        return value

    if single:
        trace = [objective(s_const, s_const)]
    else:
        model.recon = tuple(recons)
        y0 = partial_reconstruct(arr, model, last)
        trace = [objective(scatter(x_unf[last], y0), scatter(y0, y0))]

    for _ in range(config.max_iter):
        snapshot = [a.copy() for a in recons]
        y_unf = x_unf[0]
        s = s_const
        for e in range(len(sets)):
            if not single:
                model.recon = tuple(recons)
                y_unf = partial_reconstruct(arr, model, e)
                s = scatter(x_unf[e], y_unf)
            recons[e], _, _ = _kernels.solve_subproblem(
                s, lams[e], etas[e], config.eps1, config.eps2, recons[e],
                tol=config.inner_tol, max_iter=config.inner_max_iter,
            )
        syy = s if single else scatter(y_unf, y_unf)
        obj = objective(s, syy)
        if obj - trace[-1] > _GUARD_RTOL * max(abs(trace[-1]), 1.0):
            recons = snapshot
            converged = True
            halted = True
            break
        trace.append(obj)
        if abs(trace[-2] - trace[-1]) <= config.tol * max(abs(trace[-2]), 1e-30):
            converged = True
            break

    model.recon = tuple(recons)
    model.objective_trace = np.asarray(trace)
    model.converged = converged
    model.iterations = len(trace) - 1
    model.halted_on_increase = halted
    return model


def _per_set_column_norms(model: DpModel) -> list[np.ndarray]:
    return [np.linalg.norm(a, axis=0) for a in model.recon]


def score(
    model: DpModel,
    config: DpConfig,
    sample_shape: Sequence[int],
    scenario: str = "slice-wise",
) -> ScoreMap:
    """Feature scores from the fitted reconstruction matrices.

    A single single-direction set scores that mode's dimensions directly.
    Otherwise per-element scores come from the column norms of the Kronecker
    product of the reconstruction matrices (last set slowest), reshaped to
    the sample geometry; slice-wise data then sums each row.
    """
    sample_shape = tuple(int(d) for d in sample_shape)
    norms = _per_set_column_norms(model)
    sets = model.direction_sets
    if len(sets) == 1 and len(sets[0]) == 1:
        scores = norms[0]
        return ScoreMap(scores, _ranking(scores), "per-dimension")

    if len(sample_shape) != 2:
        raise ValueError("element scoring is defined for third-order data tensors")
    d1, d2 = sample_shape
    modes = tuple(m for ds in sets for m in ds.modes)
    if modes != (1, 2):
        raise ValueError(f"element scoring requires direction sets covering modes (1, 2), got {modes}")
    if len(sets) == 2:
        # Kronecker accumulation A2 (x) A1: column (j2, j1) has norm s2[j2]*s1[j1]
        element = np.outer(norms[0], norms[1])
    else:
        element = norms[0].reshape((d1, d2), order="F")
    if scenario == "slice-wise":
        scores = element.sum(axis=1)
        return ScoreMap(scores, _ranking(scores), "per-dimension")
    flat = element.flatten(order="F")
    return ScoreMap(element, _ranking(flat), "per-element")
