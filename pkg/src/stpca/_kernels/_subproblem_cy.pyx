# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twin of ``_subproblem_py.solve_subproblem``.

Same semantics, but the whole reweighted loop runs in C against LAPACK
(zgesv / zheevd / zgemm), which removes the per-iteration Python overhead
that dominates at the small matrix sizes both solvers mostly see.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt
from libc.string cimport memcpy
from scipy.linalg.cython_blas cimport zgemm
from scipy.linalg.cython_lapack cimport zgesv, zheevd

cnp.import_array()

ctypedef double complex zcplx

cdef double _GUARD_RTOL = 1e-13


cdef double _objective(int b, zcplx* a, zcplx* s, zcplx* g,
                       double lam, double eta, double tr_s) noexcept nogil:
    # tr(S) - 2 tr(AS) + tr(A S A^H) + lam*l21(A) + eta*tr(A)
    cdef zcplx one = 1.0
    cdef zcplx zero = 0.0
    cdef char cn = b'N'
    zgemm(&cn, &cn, &b, &b, &b, &one, a, &b, s, &b, &zero, g, &b)
    cdef double lin = 0.0, quad = 0.0, l21 = 0.0, tra = 0.0, csum
    cdef int i, j
    cdef zcplx aij
    for i in range(b):
        lin += g[i + i * b].real
        tra += a[i + i * b].real
    for j in range(b):
        csum = 0.0
        for i in range(b):
            aij = a[i + j * b]
            quad += g[i + j * b].real * aij.real + g[i + j * b].imag * aij.imag
            csum += aij.real * aij.real + aij.imag * aij.imag
        l21 += sqrt(csum)
    return tr_s - 2.0 * lin + quad + lam * l21 + eta * tra


def solve_subproblem(s, double lam, double eta, double eps1, double eps2, a0,
                     double tol=1e-6, int max_iter=50, bint record_trace=False):
    """See ``_subproblem_py.solve_subproblem``; identical contract."""
    s_in = np.asarray(s, dtype=np.complex128)
    if s_in.ndim != 2 or s_in.shape[0] != s_in.shape[1]:
        raise ValueError(f"square scatter matrix required, got shape {s_in.shape}")
    cdef int b = s_in.shape[0]
    if not np.all(np.isfinite(s_in)):
        raise np.linalg.LinAlgError("non-finite scatter matrix")
    s_np = np.asfortranarray(0.5 * (s_in + s_in.conj().T))
    a_np = np.asfortranarray(np.asarray(a0, dtype=np.complex128)).copy(order="F")
    if a_np.shape[0] != b or a_np.shape[1] != b:
        raise ValueError("initial matrix shape does not match scatter")

    c_np = s_np.copy(order="F")
    cdef Py_ssize_t j0
    for j0 in range(b):
        c_np[j0, j0] -= 0.5 * eta

    b_np = np.empty((b, b), dtype=np.complex128, order="F")
    z_np = np.empty((b, b), dtype=np.complex128, order="F")
    v2_np = np.empty((b, b), dtype=np.complex128, order="F")
    anew_np = np.empty((b, b), dtype=np.complex128, order="F")
    g_np = np.empty((b, b), dtype=np.complex128, order="F")
    evals_np = np.empty(b, dtype=np.float64)
    w_np = np.empty(b, dtype=np.float64)
    ipiv_np = np.empty(b, dtype=np.intc)
    trace_np = np.empty(max_iter + 1, dtype=np.float64)

    cdef zcplx[::1, :] S = s_np
    cdef zcplx[::1, :] C = c_np
    cdef zcplx[::1, :] A = a_np
    cdef zcplx[::1, :] B = b_np
    cdef zcplx[::1, :] Z = z_np
    cdef zcplx[::1, :] V2 = v2_np
    cdef zcplx[::1, :] An = anew_np
    cdef zcplx[::1, :] G = g_np
    cdef double[::1] evals = evals_np
    cdef double[::1] w = w_np
    cdef int[::1] ipiv = ipiv_np
    cdef double[::1] trace = trace_np

    # zheevd workspace query
    cdef char jobz = b'V'
    cdef char uplo = b'L'
    cdef char cn = b'N'
    cdef char cc = b'C'
    cdef int info = 0, lwork = -1, lrwork = -1, liwork = -1
    cdef zcplx zwq
    cdef double rwq
    cdef int iwq
    zheevd(&jobz, &uplo, &b, &B[0, 0], &b, &evals[0], &zwq, &lwork,
           &rwq, &lrwork, &iwq, &liwork, &info)
    if info != 0:
        raise np.linalg.LinAlgError(f"eigendecomposition workspace query failed (info={info})")
    lwork = <int>zwq.real
    lrwork = <int>rwq
    liwork = iwq
    zwork_np = np.empty(lwork, dtype=np.complex128)
    rwork_np = np.empty(lrwork, dtype=np.float64)
    iwork_np = np.empty(liwork, dtype=np.intc)
    cdef zcplx[::1] zwork = zwork_np
    cdef double[::1] rwork = rwork_np
    cdef int[::1] iwork = iwork_np

    cdef double tr_s = 0.0
    cdef int i, j
    for i in range(b):
        tr_s += S[i, i].real

    cdef int n_trace = 0
    cdef double prev_obj = 0.0, obj = 0.0
    cdef zcplx one = 1.0
    cdef zcplx zero = 0.0
    cdef zcplx val, dz
    cdef double csum, ev, num, den, delta
    cdef int it = 0
    cdef int err = 0  # 1: solve failed, 2: eigh failed

    cdef size_t nbytes = <size_t>b * <size_t>b * sizeof(zcplx)

    with nogil:
        if record_trace:
            prev_obj = _objective(b, &A[0, 0], &S[0, 0], &G[0, 0], lam, eta, tr_s)
            trace[0] = prev_obj
            n_trace = 1
        while it < max_iter:
            it += 1
            for j in range(b):
                csum = eps1
                for i in range(b):
                    csum += A[i, j].real * A[i, j].real + A[i, j].imag * A[i, j].imag
                w[j] = 1.0 / (2.0 * sqrt(csum))
            memcpy(&B[0, 0], &S[0, 0], nbytes)
            for j in range(b):
                B[j, j] = B[j, j] + lam * w[j] + eps2
            memcpy(&Z[0, 0], &C[0, 0], nbytes)
            zgesv(&b, &b, &B[0, 0], &b, &ipiv[0], &Z[0, 0], &b, &info)
            if info != 0:
                err = 1
                break
            # Hermitian part of Z = B^{-1}C, which equals the Hermitian part
            # of the raw update C B^{-1}; eigendecompose in place (reuse B)
            for j in range(b):
                for i in range(b):
                    B[i, j] = 0.5 * (Z[i, j] + Z[j, i].conjugate())
            zheevd(&jobz, &uplo, &b, &B[0, 0], &b, &evals[0], &zwork[0], &lwork,
                   &rwork[0], &lrwork, &iwork[0], &liwork, &info)
            if info != 0:
                err = 2
                break
            for j in range(b):
                ev = evals[j]
                if ev > 0.0:
                    for i in range(b):
                        V2[i, j] = B[i, j] * ev
                else:
                    for i in range(b):
                        V2[i, j] = 0.0
            zgemm(&cn, &cc, &b, &b, &b, &one, &V2[0, 0], &b, &B[0, 0], &b,
                  &zero, &An[0, 0], &b)
            for j in range(b):
                for i in range(j + 1):
                    val = 0.5 * (An[i, j] + An[j, i].conjugate())
                    An[i, j] = val
                    An[j, i] = val.conjugate()
            if record_trace:
                obj = _objective(b, &An[0, 0], &S[0, 0], &G[0, 0], lam, eta, tr_s)
                den = fabs(prev_obj)
                if den < 1.0:
                    den = 1.0
                if obj - prev_obj > _GUARD_RTOL * den:
                    break
                trace[n_trace] = obj
                n_trace += 1
                prev_obj = obj
            num = 0.0
            den = 0.0
            for j in range(b):
                for i in range(b):
                    dz = An[i, j] - A[i, j]
                    num += dz.real * dz.real + dz.imag * dz.imag
                    den += A[i, j].real * A[i, j].real + A[i, j].imag * A[i, j].imag
            memcpy(&A[0, 0], &An[0, 0], nbytes)
            den = sqrt(den)
            if den < 1e-30:
                den = 1e-30
            if sqrt(num) <= tol * den:
                break

    if err == 1:
        raise np.linalg.LinAlgError("linear solve failed in subproblem update")
    if err == 2:
        raise np.linalg.LinAlgError("eigendecomposition failed in subproblem update")

    trace_out = [float(x) for x in trace_np[:n_trace]] if record_trace else None
    return a_np, it, trace_out
