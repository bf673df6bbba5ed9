"""Pure-numpy subproblem solver: the reweighted HPSD regression loop.

Given the cross-scatter ``S`` of a convex subproblem, alternate the
closed-form reconstruction-matrix update

    A <- P_+((S - eta/2 * I) (S + lam*W + eps2*I)^{-1})

with the column reweighting ``W_jj = 1 / (2*sqrt(|a_j|^2 + eps1))`` until
the iterate stalls.  ``P_+`` is projection onto the Hermitian PSD cone.

This module is the reference semantics; ``_subproblem_cy`` is a compiled
twin that must match it.
"""

from __future__ import annotations

import numpy as np

__all__ = ["solve_subproblem", "subproblem_objective"]

# Any recorded-objective increase beyond this relative slack stops the loop
# (the previous iterate is kept); keeps traces monotone by construction.
_GUARD_RTOL = 1e-13


def subproblem_objective(a: np.ndarray, s: np.ndarray, lam: float, eta: float) -> float:
    """Objective of one subproblem at iterate ``a``:
    ``tr(S) - 2 tr(AS) + tr(A S A^H) + lam*||A||_{2,1} + eta*tr(A)``.

    For self-scatter ``S = X X^H`` the first three terms equal the
    reconstruction error ``||X - AX||_F^2`` exactly.
    """
    g = a @ s
    lin = float(np.trace(g).real)
    quad = float(np.einsum("ij,ij->", g, a.conj()).real)
    l21 = float(np.linalg.norm(a, axis=0).sum())
    tra = float(np.trace(a).real)
    return float(np.trace(s).real) - 2.0 * lin + quad + lam * l21 + eta * tra


def solve_subproblem(
    s: np.ndarray,
    lam: float,
    eta: float,
    eps1: float,
    eps2: float,
    a0: np.ndarray,
    tol: float = 1e-6,
    max_iter: int = 50,
    record_trace: bool = False,
):
    """Run the reweighted update loop from ``a0``.

    Returns ``(a, n_iter, trace)``; ``trace`` is a float list of
    per-iteration objective values starting at ``a0`` (``None`` unless
    ``record_trace``).  Recorded traces are nonincreasing: an increasing
    step is rejected and ends the loop.
    """
    s = np.asarray(s, dtype=np.complex128)
    b = s.shape[0]
    if not np.all(np.isfinite(s)):
        raise np.linalg.LinAlgError("non-finite scatter matrix")
    s = 0.5 * (s + s.conj().T)
    a = np.array(a0, dtype=np.complex128)
    c = s.copy()
    c[np.diag_indices(b)] -= 0.5 * eta

    trace = None
    prev_obj = None
    if record_trace:
        prev_obj = subproblem_objective(a, s, lam, eta)
        trace = [prev_obj]

    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        col_sq = np.einsum("ij,ij->j", a.real, a.real) + np.einsum("ij,ij->j", a.imag, a.imag)
        w = 1.0 / (2.0 * np.sqrt(col_sq + eps1))
        bmat = s.copy()
        bmat[np.diag_indices(b)] += lam * w + eps2
        # z = B^{-1} C = (C B^{-1})^H, so the Hermitian part of z matches the
        # Hermitian part of the raw update C B^{-1}
        z = np.linalg.solve(bmat, c)
        h = 0.5 * (z + z.conj().T)
        evals, evecs = np.linalg.eigh(h)
        pos = evals > 0.0
        if pos.any():
            v = evecs[:, pos]
            a_new = (v * evals[pos]) @ v.conj().T
            a_new = 0.5 * (a_new + a_new.conj().T)
        else:
            a_new = np.zeros_like(h)
        if record_trace:
            obj = subproblem_objective(a_new, s, lam, eta)
            if obj - prev_obj > _GUARD_RTOL * max(abs(prev_obj), 1.0):
                break
            trace.append(obj)
            prev_obj = obj
        delta = np.linalg.norm(a_new - a) / max(np.linalg.norm(a), 1e-30)
        a = a_new
        if delta <= tol:
            break
    return a, n_iter, trace
