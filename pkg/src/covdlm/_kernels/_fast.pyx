# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels.

Mirrors ``covdlm._kernels._pure`` function for function: same signatures,
same status codes, same flooring rules.  Spectral decompositions go
through LAPACK ``dsyev``; the per-step loops run without the GIL.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport isfinite, sqrt
from libc.string cimport memcpy, memset

from scipy.linalg.cython_lapack cimport dsyev

cnp.import_array()

STATUS_OK = 0
STATUS_NONFINITE = 1
STATUS_NOT_PSD = 2
STATUS_SINGULAR = 3

cdef double EIGEN_FLOOR_REL
cdef double SAMPLE_CLAMP_REL
from ..matops import EIGEN_FLOOR_REL as _floor_rel
from ._pure import SAMPLE_CLAMP_REL as _clamp_rel
EIGEN_FLOOR_REL = _floor_rel
SAMPLE_CLAMP_REL = _clamp_rel

cdef enum:
    C_OK = 0
    C_NONFINITE = 1
    C_NOT_PSD = 2
    C_SINGULAR = 3


# ------------------------------------------------------------ small BLAS

cdef inline void _mm(const double* a, const double* b, double* c,
                     int m, int k, int n) noexcept nogil:
    # c(m,n) = a(m,k) @ b(k,n), row-major
    cdef int i, j, l
    cdef double s
    for i in range(m):
        for j in range(n):
            s = 0.0
            for l in range(k):
                s += a[i * k + l] * b[l * n + j]
            c[i * n + j] = s


cdef inline void _mm_nt(const double* a, const double* b, double* c,
                        int m, int k, int n) noexcept nogil:
    # c(m,n) = a(m,k) @ b(n,k)'
    cdef int i, j, l
    cdef double s
    for i in range(m):
        for j in range(n):
            s = 0.0
            for l in range(k):
                s += a[i * k + l] * b[j * k + l]
            c[i * n + j] = s


cdef inline void _mm_tn(const double* a, const double* b, double* c,
                        int m, int k, int n) noexcept nogil:
    # c(m,n) = a(k,m)' @ b(k,n)
    cdef int i, j, l
    cdef double s
    for i in range(m):
        for j in range(n):
            s = 0.0
            for l in range(k):
                s += a[l * m + i] * b[l * n + j]
            c[i * n + j] = s


cdef inline void _mv(const double* a, const double* x, double* out,
                     int m, int n) noexcept nogil:
    # out(m) = a(m,n) @ x(n)
    cdef int i, j
    cdef double s
    for i in range(m):
        s = 0.0
        for j in range(n):
            s += a[i * n + j] * x[j]
        out[i] = s


cdef inline void _mv_t(const double* a, const double* x, double* out,
                       int m, int n) noexcept nogil:
    # out(n) = a(m,n)' @ x(m)
    cdef int i, j
    for j in range(n):
        out[j] = 0.0
    for i in range(m):
        for j in range(n):
            out[j] += a[i * n + j] * x[i]


cdef inline void _symmetrize(double* a, int n) noexcept nogil:
    cdef int i, j
    cdef double v
    for i in range(n):
        for j in range(i + 1, n):
            v = 0.5 * (a[i * n + j] + a[j * n + i])
            a[i * n + j] = v
            a[j * n + i] = v


cdef inline bint _all_finite(const double* a, int size) noexcept nogil:
    cdef int i
    for i in range(size):
        if not isfinite(a[i]):
            return 0
    return 1


# ------------------------------------------------------------ spectral ops

cdef int _eig_sym(const double* m, double* vecs, double* w, double* work,
                  int lwork, int n) noexcept nogil:
    # Symmetrized copy of m goes into vecs; dsyev overwrites it with the
    # eigenvectors.  In the row-major view, row k of vecs is eigenvector k.
    cdef int i, j, info = 0, nn = n
    cdef char jobz = b'V', uplo = b'L'
    for i in range(n):
        for j in range(n):
            vecs[i * n + j] = 0.5 * (m[i * n + j] + m[j * n + i])
    if not _all_finite(vecs, n * n):
        return C_NONFINITE
    dsyev(&jobz, &uplo, &nn, vecs, &nn, w, work, &lwork, &info)
    if info != 0:
        return C_NONFINITE
    return C_OK


cdef inline void _reconstruct(const double* vecs, const double* f,
                              double* out, int n) noexcept nogil:
    # out = sum_k f[k] * v_k v_k'
    cdef int i, j, k
    cdef double c, vki
    memset(out, 0, n * n * sizeof(double))
    for k in range(n):
        c = f[k]
        if c == 0.0:
            continue
        for i in range(n):
            vki = vecs[k * n + i]
            for j in range(n):
                out[i * n + j] += c * vki * vecs[k * n + j]


cdef int _sqrt_floored(const double* m, double* out, double* vecs, double* w,
                       double* f, double* work, int lwork, int n) noexcept nogil:
    cdef int k, st
    cdef double wmax, floor
    st = _eig_sym(m, vecs, w, work, lwork, n)
    if st != C_OK:
        return st
    wmax = 0.0
    for k in range(n):
        if w[k] > wmax:
            wmax = w[k]
        if -w[k] > wmax:
            wmax = -w[k]
    floor = EIGEN_FLOOR_REL * (wmax if wmax > 1.0 else 1.0)
    for k in range(n):
        if w[k] < -floor:
            return C_NOT_PSD
    for k in range(n):
        f[k] = sqrt(w[k] if w[k] > floor else floor)
    _reconstruct(vecs, f, out, n)
    return C_OK


cdef int _inv_sqrt_floored(const double* m, double* out, double* vecs, double* w,
                           double* f, double* work, int lwork, int n) noexcept nogil:
    cdef int k, st
    cdef double wmax, floor
    st = _eig_sym(m, vecs, w, work, lwork, n)
    if st != C_OK:
        return st
    wmax = 0.0
    for k in range(n):
        if w[k] > wmax:
            wmax = w[k]
        if -w[k] > wmax:
            wmax = -w[k]
    floor = EIGEN_FLOOR_REL * (wmax if wmax > 1.0 else 1.0)
    for k in range(n):
        if w[k] < -floor:
            return C_NOT_PSD
        if w[k] <= floor:
            return C_SINGULAR
    for k in range(n):
        f[k] = 1.0 / sqrt(w[k])
    _reconstruct(vecs, f, out, n)
    return C_OK


cdef int _sample_root(const double* m, double* out, double* vecs, double* w,
                      double* f, double* work, int lwork, int n) noexcept nogil:
    # PSD root for sampling: tiny eigenvalues become exactly zero
    cdef int k, st
    cdef double wmax, scale
    st = _eig_sym(m, vecs, w, work, lwork, n)
    if st != C_OK:
        return st
    wmax = 0.0
    for k in range(n):
        if w[k] > wmax:
            wmax = w[k]
        if -w[k] > wmax:
            wmax = -w[k]
    scale = wmax if wmax > 1.0 else 1.0
    for k in range(n):
        if w[k] < -1e-6 * scale:
            return C_NOT_PSD
    for k in range(n):
        f[k] = sqrt(w[k]) if w[k] > SAMPLE_CLAMP_REL * scale else 0.0
    _reconstruct(vecs, f, out, n)
    return C_OK


cdef int _query_lwork(int n):
    cdef double wk = 0.0
    cdef double dummy_a = 0.0, dummy_w = 0.0
    cdef int info = 0, nn = n, lwork = -1
    cdef char jobz = b'V', uplo = b'L'
    dsyev(&jobz, &uplo, &nn, &dummy_a, &nn, &dummy_w, &wk, &lwork, &info)
    if info != 0 or wk < 3 * n:
        return max(1, 34 * n)
    return <int> wk


# ------------------------------------------------------------ filter_run

def filter_run(y, F, G, omega, delta, m0, P0, S0, n0, update_s=True):
    """See ``covdlm._kernels._pure.filter_run``."""
    cdef double[:, ::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef int T = yv.shape[0]
    cdef int p = yv.shape[1]

    Fa = np.ascontiguousarray(F, dtype=np.float64)
    cdef bint per_time = Fa.ndim == 3
    cdef int d = Fa.shape[1] if per_time else Fa.shape[0]
    cdef double[:, :, ::1] F3 = Fa if per_time else Fa.reshape((1,) + Fa.shape)

    cdef bint use_g = G is not None
    cdef double[:, ::1] Gv = np.ascontiguousarray(G if use_g else np.empty((0, 0)),
                                                  dtype=np.float64)
    cdef bint use_delta = delta is not None
    cdef double dlt = float(delta) if use_delta else 1.0
    cdef double[:, ::1] Ov = np.ascontiguousarray(
        omega if not use_delta else np.empty((0, 0)), dtype=np.float64)

    cdef double[::1] m = np.array(m0, dtype=np.float64).copy()
    cdef double[:, ::1] P = np.ascontiguousarray(
        (np.asarray(P0, dtype=np.float64) + np.asarray(P0, dtype=np.float64).T) / 2.0)
    cdef double[:, ::1] S = np.ascontiguousarray(
        (np.asarray(S0, dtype=np.float64) + np.asarray(S0, dtype=np.float64).T) / 2.0)
    cdef double n = float(n0)
    cdef bint do_s = bool(update_s)

    means = np.empty((T, d))
    errors = np.empty((T, p))
    fcovs = np.empty((T, p, p))
    scovs = np.empty((T, p, p))
    cdef double[:, ::1] means_v = means
    cdef double[:, ::1] errors_v = errors
    cdef double[:, :, ::1] fcovs_v = fcovs
    cdef double[:, :, ::1] scovs_v = scovs

    # scratch
    cdef int nmax = d if d > p else p
    cdef int lwork = _query_lwork(nmax)
    cdef double[::1] work = np.empty(lwork)
    cdef double[::1] ew = np.empty(nmax)
    cdef double[::1] ef = np.empty(nmax)
    cdef double[:, ::1] evecs = np.empty((nmax, nmax))
    cdef double[:, ::1] R = np.empty((d, d))
    cdef double[:, ::1] GP = np.empty((d, d))
    cdef double[:, ::1] RF = np.empty((d, p))
    cdef double[:, ::1] A = np.empty((d, p))
    cdef double[:, ::1] AQ = np.empty((d, p))
    cdef double[:, ::1] Q = np.empty((p, p))
    cdef double[:, ::1] Qis = np.empty((p, p))
    cdef double[:, ::1] Qinv = np.empty((p, p))
    cdef double[:, ::1] Ss = np.empty((p, p))
    cdef double[::1] a = np.empty(d)
    cdef double[::1] fvec = np.empty(p)
    cdef double[::1] e = np.empty(p)
    cdef double[::1] u = np.empty(p)
    cdef double[::1] wv = np.empty(p)

    cdef int t, i, j, status = C_OK, fail_t = -1
    cdef const double* Fp

    with nogil:
        for t in range(T):
            Fp = &F3[t if per_time else 0, 0, 0]

            # prior: R = G P G' + omega   (or G P G'/delta)
            if use_g:
                _mm(&Gv[0, 0], &P[0, 0], &GP[0, 0], d, d, d)       # GP = G P
                _mm_nt(&GP[0, 0], &Gv[0, 0], &R[0, 0], d, d, d)    # R = GP G'
                _symmetrize(&R[0, 0], d)
                _mv(&Gv[0, 0], &m[0], &a[0], d, d)
            else:
                memcpy(&R[0, 0], &P[0, 0], d * d * sizeof(double))
                memcpy(&a[0], &m[0], d * sizeof(double))
            if use_delta:
                for i in range(d * d):
                    (&R[0, 0])[i] /= dlt
            else:
                for i in range(d):
                    for j in range(d):
                        R[i, j] += Ov[i, j]
                _symmetrize(&R[0, 0], d)

            # one-step forecast
            _mv_t(Fp, &a[0], &fvec[0], d, p)                       # f = F' a
            _mm(&R[0, 0], Fp, &RF[0, 0], d, d, p)                  # RF = R F
            _mm_tn(Fp, &RF[0, 0], &Q[0, 0], p, d, p)               # Q = F' RF
            for i in range(p):
                for j in range(p):
                    Q[i, j] += S[i, j]
            _symmetrize(&Q[0, 0], p)
            if not _all_finite(&Q[0, 0], p * p):
                status = C_NONFINITE
                fail_t = t
                break
            for i in range(p):
                e[i] = yv[t, i] - fvec[i]

            status = _inv_sqrt_floored(&Q[0, 0], &Qis[0, 0], &evecs[0, 0],
                                       &ew[0], &ef[0], &work[0], lwork, p)
            if status != C_OK:
                fail_t = t
                break
            _mm(&Qis[0, 0], &Qis[0, 0], &Qinv[0, 0], p, p, p)
            _mm(&RF[0, 0], &Qinv[0, 0], &A[0, 0], d, p, p)         # A = R F Q^{-1}

            # posterior state: m = a + A e  (a still holds the prior mean)
            _mv(&A[0, 0], &e[0], &m[0], d, p)
            for i in range(d):
                m[i] += a[i]
            _mm(&A[0, 0], &Q[0, 0], &AQ[0, 0], d, p, p)
            _mm_nt(&AQ[0, 0], &A[0, 0], &GP[0, 0], d, p, d)        # GP = A Q A'
            for i in range(d):
                for j in range(d):
                    P[i, j] = R[i, j] - GP[i, j]
            _symmetrize(&P[0, 0], d)

            # covariance estimate
            if do_s:
                status = _sqrt_floored(&S[0, 0], &Ss[0, 0], &evecs[0, 0],
                                       &ew[0], &ef[0], &work[0], lwork, p)
                if status != C_OK:
                    fail_t = t
                    break
                _mv(&Qis[0, 0], &e[0], &u[0], p, p)
                _mv(&Ss[0, 0], &u[0], &wv[0], p, p)
                for i in range(p):
                    for j in range(p):
                        S[i, j] = (n * S[i, j] + wv[i] * wv[j]) / (n + 1.0)
                _symmetrize(&S[0, 0], p)
            n += 1.0

            for i in range(d):
                means_v[t, i] = m[i]
            for i in range(p):
                errors_v[t, i] = e[i]
                for j in range(p):
                    fcovs_v[t, i, j] = Q[i, j]
                    scovs_v[t, i, j] = S[i, j]

    return means, errors, fcovs, scovs, np.asarray(P), int(status), int(fail_t)


# ------------------------------------------------------------ kalman_run

def kalman_run(y, F, G, omega, sigma, m0, P0):
    """See ``covdlm._kernels._pure.kalman_run``."""
    cdef double[:, ::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef int T = yv.shape[0]
    cdef int p = yv.shape[1]
    cdef double[:, ::1] Fv = np.ascontiguousarray(F, dtype=np.float64)
    cdef int d = Fv.shape[0]
    cdef bint use_g = G is not None
    cdef double[:, ::1] Gv = np.ascontiguousarray(G if use_g else np.empty((0, 0)),
                                                  dtype=np.float64)
    cdef double[:, ::1] Ov = np.ascontiguousarray(omega, dtype=np.float64)
    cdef double[:, ::1] Sg = np.ascontiguousarray(
        (np.asarray(sigma, dtype=np.float64) + np.asarray(sigma, dtype=np.float64).T) / 2.0)

    m = np.empty((T + 1, d))
    P = np.empty((T + 1, d, d))
    aout = np.zeros((T + 1, d))
    Rout = np.zeros((T + 1, d, d))
    e = np.empty((T, p))
    Q = np.empty((T, p, p))
    cdef double[:, ::1] m_v = m
    cdef double[:, :, ::1] P_v = P
    cdef double[:, ::1] a_v = aout
    cdef double[:, :, ::1] R_v = Rout
    cdef double[:, ::1] e_v = e
    cdef double[:, :, ::1] Q_v = Q

    m[0] = np.array(m0, dtype=np.float64)
    P[0] = (np.asarray(P0, dtype=np.float64) + np.asarray(P0, dtype=np.float64).T) / 2.0

    cdef int nmax = d if d > p else p
    cdef int lwork = _query_lwork(nmax)
    cdef double[::1] work = np.empty(lwork)
    cdef double[::1] ew = np.empty(nmax)
    cdef double[::1] ef = np.empty(nmax)
    cdef double[:, ::1] evecs = np.empty((nmax, nmax))
    cdef double[:, ::1] GP = np.empty((d, d))
    cdef double[:, ::1] RF = np.empty((d, p))
    cdef double[:, ::1] A = np.empty((d, p))
    cdef double[:, ::1] AQ = np.empty((d, p))
    cdef double[:, ::1] Qt = np.empty((p, p))
    cdef double[:, ::1] Qis = np.empty((p, p))
    cdef double[:, ::1] Qinv = np.empty((p, p))
    cdef double[::1] fvec = np.empty(p)
    cdef double[::1] et = np.empty(p)
    cdef double[::1] tmp_d = np.empty(d)

    cdef int t, i, j, status = C_OK, fail_t = -1

    with nogil:
        for t in range(1, T + 1):
            if use_g:
                _mv(&Gv[0, 0], &m_v[t - 1, 0], &a_v[t, 0], d, d)
                _mm(&Gv[0, 0], &P_v[t - 1, 0, 0], &GP[0, 0], d, d, d)
                _mm_nt(&GP[0, 0], &Gv[0, 0], &R_v[t, 0, 0], d, d, d)
                _symmetrize(&R_v[t, 0, 0], d)
            else:
                memcpy(&a_v[t, 0], &m_v[t - 1, 0], d * sizeof(double))
                memcpy(&R_v[t, 0, 0], &P_v[t - 1, 0, 0], d * d * sizeof(double))
            for i in range(d):
                for j in range(d):
                    R_v[t, i, j] += Ov[i, j]
            _symmetrize(&R_v[t, 0, 0], d)

            _mv_t(&Fv[0, 0], &a_v[t, 0], &fvec[0], d, p)
            _mm(&R_v[t, 0, 0], &Fv[0, 0], &RF[0, 0], d, d, p)
            _mm_tn(&Fv[0, 0], &RF[0, 0], &Qt[0, 0], p, d, p)
            for i in range(p):
                for j in range(p):
                    Qt[i, j] += Sg[i, j]
            _symmetrize(&Qt[0, 0], p)
            if not _all_finite(&Qt[0, 0], p * p):
                status = C_NONFINITE
                fail_t = t - 1
                break

            status = _inv_sqrt_floored(&Qt[0, 0], &Qis[0, 0], &evecs[0, 0],
                                       &ew[0], &ef[0], &work[0], lwork, p)
            if status != C_OK:
                fail_t = t - 1
                break
            _mm(&Qis[0, 0], &Qis[0, 0], &Qinv[0, 0], p, p, p)
            _mm(&RF[0, 0], &Qinv[0, 0], &A[0, 0], d, p, p)

            for i in range(p):
                et[i] = yv[t - 1, i] - fvec[i]
            _mv(&A[0, 0], &et[0], &tmp_d[0], d, p)
            for i in range(d):
                m_v[t, i] = a_v[t, i] + tmp_d[i]
            _mm(&A[0, 0], &Qt[0, 0], &AQ[0, 0], d, p, p)
            _mm_nt(&AQ[0, 0], &A[0, 0], &GP[0, 0], d, p, d)
            for i in range(d):
                for j in range(d):
                    P_v[t, i, j] = R_v[t, i, j] - GP[i, j]
            _symmetrize(&P_v[t, 0, 0], d)

            for i in range(p):
                e_v[t - 1, i] = et[i]
                for j in range(p):
                    Q_v[t - 1, i, j] = Qt[i, j]

    return m, P, aout, Rout, e, Q, int(status), int(fail_t)


# ------------------------------------------------------------ backward_draw

def backward_draw(m, P, a, R, G, z):
    """See ``covdlm._kernels._pure.backward_draw``."""
    cdef double[:, ::1] m_v = np.ascontiguousarray(m, dtype=np.float64)
    cdef double[:, :, ::1] P_v = np.ascontiguousarray(P, dtype=np.float64)
    cdef double[:, ::1] a_v = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, :, ::1] R_v = np.ascontiguousarray(R, dtype=np.float64)
    cdef double[:, ::1] z_v = np.ascontiguousarray(z, dtype=np.float64)
    cdef int T = m_v.shape[0] - 1
    cdef int d = m_v.shape[1]
    cdef bint use_g = G is not None
    cdef double[:, ::1] Gv = np.ascontiguousarray(G if use_g else np.empty((0, 0)),
                                                  dtype=np.float64)

    states = np.empty((T + 1, d))
    cdef double[:, ::1] st = states

    cdef int lwork = _query_lwork(d)
    cdef double[::1] work = np.empty(lwork)
    cdef double[::1] ew = np.empty(d)
    cdef double[::1] ef = np.empty(d)
    cdef double[:, ::1] evecs = np.empty((d, d))
    cdef double[:, ::1] root = np.empty((d, d))
    cdef double[:, ::1] Rinv_s = np.empty((d, d))
    cdef double[:, ::1] Rinv = np.empty((d, d))
    cdef double[:, ::1] GP = np.empty((d, d))
    cdef double[:, ::1] B = np.empty((d, d))
    cdef double[:, ::1] H = np.empty((d, d))
    cdef double[::1] diff = np.empty(d)
    cdef double[::1] tmp = np.empty(d)

    cdef int t, i, j, status = C_OK, fail_t = -1

    with nogil:
        status = _sample_root(&P_v[T, 0, 0], &root[0, 0], &evecs[0, 0],
                              &ew[0], &ef[0], &work[0], lwork, d)
        if status != C_OK:
            fail_t = T
        else:
            _mv(&root[0, 0], &z_v[T, 0], &tmp[0], d, d)
            for i in range(d):
                st[T, i] = m_v[T, i] + tmp[i]

            for t in range(T - 1, -1, -1):
                status = _inv_sqrt_floored(&R_v[t + 1, 0, 0], &Rinv_s[0, 0],
                                           &evecs[0, 0], &ew[0], &ef[0],
                                           &work[0], lwork, d)
                if status != C_OK:
                    fail_t = t
                    break
                _mm(&Rinv_s[0, 0], &Rinv_s[0, 0], &Rinv[0, 0], d, d, d)
                if use_g:
                    _mm(&Gv[0, 0], &P_v[t, 0, 0], &GP[0, 0], d, d, d)
                else:
                    memcpy(&GP[0, 0], &P_v[t, 0, 0], d * d * sizeof(double))
                _mm_tn(&GP[0, 0], &Rinv[0, 0], &B[0, 0], d, d, d)   # B = GP' Rinv
                for i in range(d):
                    diff[i] = st[t + 1, i] - a_v[t + 1, i]
                _mv(&B[0, 0], &diff[0], &tmp[0], d, d)
                for i in range(d):
                    tmp[i] += m_v[t, i]
                _mm(&B[0, 0], &GP[0, 0], &H[0, 0], d, d, d)
                for i in range(d):
                    for j in range(d):
                        H[i, j] = P_v[t, i, j] - H[i, j]
                _symmetrize(&H[0, 0], d)
                status = _sample_root(&H[0, 0], &root[0, 0], &evecs[0, 0],
                                      &ew[0], &ef[0], &work[0], lwork, d)
                if status != C_OK:
                    fail_t = t
                    break
                _mv(&root[0, 0], &z_v[t, 0], &diff[0], d, d)
                for i in range(d):
                    st[t, i] = tmp[i] + diff[i]

    return states, int(status), int(fail_t)
