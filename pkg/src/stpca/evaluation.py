"""Evaluation protocol: k-means with restarts, optimal label alignment,
clustering metrics (ACC / NMI), selection-stability metrics (POC / POTC),
complex-feature encoding, and the regularization grid-search harness.
"""

from __future__ import annotations

import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import dp, mp
from .synthdata import LabeledTensorDataset
from .tensor import DIR1, DIR2, centralize

__all__ = [
    "ClusteringResult",
    "GridSpec",
    "kmeans",
    "complex_encode",
    "kuhn_munkres_map",
    "acc",
    "nmi",
    "poc",
    "potc",
    "clustering_scores",
    "feature_matrix",
    "grid_run",
    "METHODS",
]

METHODS = ("dp-1sd", "dp-2sd", "dp-md", "mp-dir1", "mp-dir2")

ORBIT_GRID = tuple(10.0 ** k for k in range(-4, 5))
DEFAULT_GRID = tuple(10.0 ** k for k in range(-2, 3))


@dataclass(frozen=True)
class ClusteringResult:
    """Best-inertia clustering out of ``restarts`` seeded Lloyd runs."""

    assignments: np.ndarray
    restarts: int
    inertia: np.ndarray

    @property
    def best_inertia(self) -> float:
        return float(self.inertia.min())


def _lloyd(points: np.ndarray, k: int, rng: np.random.Generator,
           max_iter: int, tol: float) -> tuple[np.ndarray, float]:
    n = points.shape[0]
    centroids = points[rng.choice(n, size=k, replace=False)].copy()
    assign = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assign = d2.argmin(axis=1)
        new_centroids = np.empty_like(centroids)
        moved = 0.0
        for c in range(k):
            mask = assign == c
            if not mask.any():
                # re-seed an empty cluster from the farthest point
                far = d2.min(axis=1).argmax()
                new_centroids[c] = points[far]
            else:
                new_centroids[c] = points[mask].mean(axis=0)
            moved = max(moved, float(np.linalg.norm(new_centroids[c] - centroids[c])))
        centroids = new_centroids
        if moved <= tol:
            break
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    assign = d2.argmin(axis=1)
    inertia = float(d2[np.arange(n), assign].sum())
    return assign, inertia


def kmeans(points: np.ndarray, k: int, restarts: int = 30, seed: int = 0,
           max_iter: int = 300, tol: float = 1e-8) -> ClusteringResult:
    """Lloyd's algorithm from uniformly drawn sample points, best of
    ``restarts`` independent seeded runs."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("points must be a nonempty (samples x features) matrix")
    if not 1 <= k <= points.shape[0]:
        raise ValueError(f"k must be in [1, {points.shape[0]}], got {k}")
    best_assign = None
    best = np.inf
    inertias = np.empty(restarts)
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        assign, inertia = _lloyd(points, k, rng, max_iter, tol)
        inertias[r] = inertia
        if inertia < best:
            best = inertia
            best_assign = assign
    return ClusteringResult(best_assign, restarts, inertias)


def complex_encode(features: np.ndarray) -> np.ndarray:
    """Represent each complex feature by amplitude and phase angle: column
    ``j`` becomes columns ``(|z_j|, arg z_j)`` with the angle in (-pi, pi]."""
    z = np.asarray(features)
    out = np.empty((z.shape[0], 2 * z.shape[1]), dtype=np.float64)
    out[:, 0::2] = np.abs(z)
    out[:, 1::2] = np.angle(z)
    return out


def kuhn_munkres_map(pseudo: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Relabel clusters by the agreement-maximizing one-to-one assignment;
    unmatched clusters keep fresh labels beyond the truth's range."""
    pseudo = np.asarray(pseudo)
    truth = np.asarray(truth)
    if pseudo.shape != truth.shape:
        raise ValueError("labelings must have equal length")
    p_vals, p_inv = np.unique(pseudo, return_inverse=True)
    t_vals, t_inv = np.unique(truth, return_inverse=True)
    confusion = np.zeros((p_vals.size, t_vals.size), dtype=np.int64)
    np.add.at(confusion, (p_inv, t_inv), 1)
    rows, cols = linear_sum_assignment(confusion, maximize=True)
    mapping = {}
    for r, c in zip(rows, cols):
        mapping[r] = t_vals[c]
    fresh = int(t_vals.max()) + 1 if t_vals.size else 0
    for r in range(p_vals.size):
        if r not in mapping:
            mapping[r] = fresh
            fresh += 1
    return np.asarray([mapping[r] for r in p_inv])


def acc(mapped: np.ndarray, truth: np.ndarray) -> float:
    mapped = np.asarray(mapped)
    truth = np.asarray(truth)
    if mapped.shape != truth.shape:
        raise ValueError("labelings must have equal length")
    return float(np.mean(mapped == truth))


def _entropy(counts: np.ndarray) -> float:
    p = counts / counts.sum()
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def nmi(a: np.ndarray, b: np.ndarray) -> float:
    """Normalized mutual information with natural-log entropies and sqrt
    normalization; 0 (with a warning) when either labeling is constant."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError("labelings must have equal length")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    joint = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.float64)
    np.add.at(joint, (ai, bi), 1.0)
    n = joint.sum()
    ha = _entropy(joint.sum(axis=1))
    hb = _entropy(joint.sum(axis=0))
    if ha == 0.0 or hb == 0.0:
        warnings.warn("constant labeling; defining NMI as 0", RuntimeWarning)
        return 0.0
    pij = joint / n
    pa = joint.sum(axis=1) / n
    pb = joint.sum(axis=0) / n
    mask = pij > 0
    mi = float((pij[mask] * np.log(pij[mask] / np.outer(pa, pb)[mask])).sum())
    return mi / np.sqrt(ha * hb)


def poc(selections: Sequence[Sequence[int]], truth_set: Sequence[int], h: int) -> float:
    """Proportion of correctly selected features over all runs: total
    correct picks divided by ``h * g``."""
    if h < 1:
        raise ValueError("h must be >= 1")
    truth = set(int(v) for v in truth_set)
    total = sum(len(truth & set(int(v) for v in sel)) for sel in selections)
    return total / (h * len(selections))


def potc(selections: Sequence[Sequence[int]], truth_set: Sequence[int]) -> float:
    """Proportion of runs that selected every correct feature."""
    truth = set(int(v) for v in truth_set)
    hits = sum(1 for sel in selections if truth <= set(int(v) for v in sel))
    return hits / len(selections)


def clustering_scores(points: np.ndarray, truth: np.ndarray, k: int,
                      repeats: int = 30, restarts: int = 1, seed: int = 0) -> dict:
    """Mean +/- std of ACC and NMI over ``repeats`` independent clusterings
    (each the best of ``restarts`` Lloyd runs), after optimal label
    alignment."""
    accs = np.empty(repeats)
    nmis = np.empty(repeats)
    for rep in range(repeats):
        result = kmeans(points, k, restarts=restarts, seed=seed + 1_000_003 * (rep + 1))
        mapped = kuhn_munkres_map(result.assignments, truth)
        accs[rep] = acc(mapped, truth)
        nmis[rep] = nmi(mapped, truth)
    return {
        "acc_mean": float(accs.mean()),
        "acc_std": float(accs.std()),
        "nmi_mean": float(nmis.mean()),
        "nmi_std": float(nmis.std()),
    }


@dataclass(frozen=True)
class GridSpec:
    """Regularization grid plus the number of selected features per run."""

    lam_grid: tuple[float, ...] = ORBIT_GRID
    eta_grid: tuple[float, ...] = ORBIT_GRID
    h: int = 1

    def __post_init__(self) -> None:
        if not self.lam_grid or not self.eta_grid:
            raise ValueError("grids must be nonempty")
        if self.h < 1:
            raise ValueError("h must be >= 1")

    @property
    def combos(self) -> tuple[tuple[float, float], ...]:
        return tuple((l, e) for l in self.lam_grid for e in self.eta_grid)


def feature_matrix(dataset_arr: np.ndarray, selection: Sequence[int], scenario: str) -> np.ndarray:
    """Per-sample feature matrix for the selected features.

    Slice-wise: each selected mode-1 dimension contributes its full row
    slice.  Tube-wise: each selected flat element contributes one column.
    Complex data is amplitude/phase encoded.
    """
    arr = np.asarray(dataset_arr)
    t = arr.shape[-1]
    sel = np.asarray(list(selection), dtype=np.int64)
    if scenario == "slice-wise":
        picked = arr[sel, ...].reshape(sel.size * int(np.prod(arr.shape[1:-1])), t, order="F")
    else:
        picked = arr.reshape(int(np.prod(arr.shape[:-1])), t, order="F")[sel]
    points = picked.T
    if np.iscomplexobj(points) and np.abs(points.imag).max(initial=0.0) > 0:
        return complex_encode(points)
    return np.ascontiguousarray(points.real)


def fit_and_score(data_centered, method: str, lam: float, eta: float, scenario: str,
                  seed: int = 0, base_dp: Optional[dp.DpConfig] = None,
                  base_mp: Optional[mp.MpConfig] = None):
    """Fit one method at one regularization combo; returns (model, ScoreMap)."""
    if method.startswith("dp-"):
        base = base_dp or dp.DpConfig()
        config = dp.DpConfig(
            variant=method[3:], lam=lam, eta=eta, eps1=base.eps1, eps2=base.eps2,
            tol=base.tol, max_iter=base.max_iter, inner_tol=base.inner_tol,
            inner_max_iter=base.inner_max_iter, seed=seed,
        )
        model = dp.fit(data_centered, config)
        smap = dp.score(model, config, model.sample_shape, scenario)
        return model, smap
    if method.startswith("mp-"):
        order_set = DIR1 if method == "mp-dir1" else DIR2
        base = base_mp or mp.MpConfig()
        config = mp.MpConfig(
            order_set=order_set, transform=base.transform, lam=lam, eta=eta,
            eps1=base.eps1, eps2=base.eps2, tol=base.tol, max_iter=base.max_iter,
            seed=seed,
        )
        model = mp.fit(data_centered, config)
        smap = mp.score(model, config, scenario)
        return model, smap
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def _n_workers() -> int:
    env = os.environ.get("STPCA_THREADS")
    if env:
        return max(1, int(env))
    return min(2, os.cpu_count() or 1)


def grid_run(dataset: LabeledTensorDataset, method: str, grid: GridSpec,
             seed: int = 0, with_clustering: bool = False, repeats: int = 30,
             base_dp: Optional[dp.DpConfig] = None, base_mp: Optional[mp.MpConfig] = None,
             workers: Optional[int] = None) -> dict:
    """Fit a method over the whole regularization grid.

    Returns per-combo records plus aggregate POC / POTC (when the dataset
    carries ground-truth features) and mean clustering metrics (when
    requested).  Combos are independent and run concurrently; per-combo
    failures are recorded, not fatal.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    data = centralize(dataset.tensor, sample_mode=dataset.tensor.order)
    arr = dataset.tensor.data
    truth = dataset.true_features
    k = dataset.n_classes
    combos = grid.combos

    def run_combo(idx: int) -> dict:
        lam, eta = combos[idx]
        record: dict = {"method": method, "variant": method.split("-", 1)[1],
                        "lambda": lam, "eta": eta, "h": grid.h}
        start = time.perf_counter()
        try:
            _, smap = fit_and_score(data, method, lam, eta, dataset.scenario, seed=seed,
                                    base_dp=base_dp, base_mp=base_mp)
            selection = [int(v) for v in smap.top(grid.h)]
            record["selection"] = selection
            if truth.size:
                record["poc"] = poc([selection], truth, grid.h)
                record["potc"] = potc([selection], truth)
            if with_clustering:
                points = feature_matrix(arr, selection, dataset.scenario)
                record.update(clustering_scores(points, dataset.labels, k,
                                                repeats=repeats, seed=seed))
        except (np.linalg.LinAlgError, FloatingPointError) as exc:
            record["error"] = str(exc)
        record["wall_time_s"] = time.perf_counter() - start
        return record

    n_workers = workers if workers is not None else _n_workers()
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            records = list(pool.map(run_combo, range(len(combos))))
    else:
        records = [run_combo(i) for i in range(len(combos))]

    out: dict = {"method": method, "h": grid.h, "g": len(combos), "records": records}
    ok = [r for r in records if "error" not in r]
    if truth.size and ok:
        out["poc"] = float(np.mean([r["poc"] for r in ok]))
        out["potc"] = float(np.mean([r["potc"] for r in ok]))
    if with_clustering and ok:
        for key in ("acc_mean", "acc_std", "nmi_mean", "nmi_std"):
            out[key] = float(np.mean([r[key] for r in ok]))
    out["n_failed"] = len(records) - len(ok)
    return out
