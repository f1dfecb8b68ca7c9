"""Pure NumPy kernels: the reference backend.

The compiled extension (``_fast``) mirrors these functions one for one;
both are selected through ``covdlm._kernels``.  Functions return status
codes instead of raising so the drivers can attach model context to the
error.  Flooring rules are shared with :mod:`covdlm.matops`.
"""

from __future__ import annotations

import numpy as np

from ..matops import EIGEN_FLOOR_REL, symmetrize

STATUS_OK = 0
STATUS_NONFINITE = 1
STATUS_NOT_PSD = 2
STATUS_SINGULAR = 3

# Sampling roots clamp small eigenvalues to exactly zero so degenerate
# conditionals collapse to their mean instead of acquiring floor noise.
SAMPLE_CLAMP_REL = 1e-12


def _spectral(m):
    try:
        w, v = np.linalg.eigh(symmetrize(m))
    except np.linalg.LinAlgError:
        return None, None, STATUS_NONFINITE
    return w, v, STATUS_OK


def _sqrt_floored(m):
    """Floored symmetric PSD root; status NOT_PSD beyond tolerance."""
    w, v, status = _spectral(m)
    if status != STATUS_OK:
        return None, status
    floor = EIGEN_FLOOR_REL * max(1.0, np.max(np.abs(w)))
    if np.any(w < -floor):
        return None, STATUS_NOT_PSD
    w = np.maximum(w, floor)
    return symmetrize((v * np.sqrt(w)) @ v.T), STATUS_OK


def _inv_sqrt_floored(m):
    """Floored symmetric inverse root; status SINGULAR when clamping hit."""
    w, v, status = _spectral(m)
    if status != STATUS_OK:
        return None, status
    floor = EIGEN_FLOOR_REL * max(1.0, np.max(np.abs(w)))
    if np.any(w < -floor):
        return None, STATUS_NOT_PSD
    if np.any(w <= floor):
        return None, STATUS_SINGULAR
    return symmetrize((v / np.sqrt(w)) @ v.T), STATUS_OK


def _sample_sqrt(m):
    """PSD root for drawing from N(mean, M); tiny eigenvalues become 0."""
    w, v, status = _spectral(m)
    if status != STATUS_OK:
        return None, status
    scale = max(1.0, np.max(np.abs(w)) if w.size else 1.0)
    if np.any(w < -1e-6 * scale):
        return None, STATUS_NOT_PSD
    w = np.where(w > SAMPLE_CLAMP_REL * scale, w, 0.0)
    return (v * np.sqrt(w)) @ v.T, STATUS_OK


def filter_run(y, F, G, omega, delta, m0, P0, S0, n0, update_s=True):
    """Run the covariance-estimating filter over a whole observation block.

    Parameters
    ----------
    y : (T, p) observations, one row per time point.
    F : (d, p) fixed design or (T, d, p) per-time designs.
    G : (d, d) transition or None for the identity.
    omega : (d, d) evolution covariance, or None when discounting.
    delta : discount factor in (0, 1], or None when omega is given.
    m0, P0, S0, n0 : priors.
    update_s : when False the observation covariance stays frozen at S0
        (plain Kalman recursion with known noise covariance).

    Returns
    -------
    (means, errors, fcovs, scovs, P_last, status, fail_t)
    """
    y = np.asarray(y, dtype=float)
    T, p = y.shape
    per_time = F.ndim == 3
    d = F.shape[-2]

    m = np.asarray(m0, dtype=float).copy()
    P = symmetrize(P0)
    S = symmetrize(S0)
    n = float(n0)

    means = np.empty((T, d))
    errors = np.empty((T, p))
    fcovs = np.empty((T, p, p))
    scovs = np.empty((T, p, p))

    for t in range(T):
        Ft = F[t] if per_time else F
        if G is None:
            a = m
            GP = P
        else:
            a = G @ m
            GP = symmetrize(G @ P @ G.T)
        R = GP / delta if delta is not None else GP + omega
        R = symmetrize(R)

        f = Ft.T @ a
        Q = symmetrize(Ft.T @ R @ Ft + S)
        if not np.all(np.isfinite(Q)):
            return means, errors, fcovs, scovs, P, STATUS_NONFINITE, t
        e = y[t] - f

        Qis, status = _inv_sqrt_floored(Q)
        if status != STATUS_OK:
            return means, errors, fcovs, scovs, P, status, t
        Qinv = Qis @ Qis
        A = (R @ Ft) @ Qinv
        m = a + A @ e
        P = symmetrize(R - A @ Q @ A.T)

        if update_s:
            Ss, status = _sqrt_floored(S)
            if status != STATUS_OK:
                return means, errors, fcovs, scovs, P, status, t
            w = Ss @ (Qis @ e)
            S = symmetrize((n * S + np.outer(w, w)) / (n + 1.0))
        n += 1.0

        means[t] = m
        errors[t] = e
        fcovs[t] = Q
        scovs[t] = S

    return means, errors, fcovs, scovs, P, STATUS_OK, -1


def kalman_run(y, F, G, omega, sigma, m0, P0):
    """Kalman filter with known observation covariance, storing the full
    prior/posterior trajectory needed for backward sampling.

    Returns (m, P, a, R, e, Q, status, fail_t) where m, P have T+1 slots
    (slot 0 is the prior) and a, R have T+1 slots with slot 0 unused.
    """
    y = np.asarray(y, dtype=float)
    T, p = y.shape
    d = F.shape[0]

    m = np.empty((T + 1, d))
    P = np.empty((T + 1, d, d))
    a = np.zeros((T + 1, d))
    R = np.zeros((T + 1, d, d))
    e = np.empty((T, p))
    Q = np.empty((T, p, p))

    m[0] = np.asarray(m0, dtype=float)
    P[0] = symmetrize(P0)
    sigma = symmetrize(sigma)

    for t in range(1, T + 1):
        if G is None:
            a[t] = m[t - 1]
            GP = P[t - 1]
        else:
            a[t] = G @ m[t - 1]
            GP = symmetrize(G @ P[t - 1] @ G.T)
        R[t] = symmetrize(GP + omega)

        f = F.T @ a[t]
        Qt = symmetrize(F.T @ R[t] @ F + sigma)
        if not np.all(np.isfinite(Qt)):
            return m, P, a, R, e, Q, STATUS_NONFINITE, t - 1
        Qis, status = _inv_sqrt_floored(Qt)
        if status != STATUS_OK:
            return m, P, a, R, e, Q, status, t - 1
        Qinv = Qis @ Qis

        et = y[t - 1] - f
        A = (R[t] @ F) @ Qinv
        m[t] = a[t] + A @ et
        P[t] = symmetrize(R[t] - A @ Qt @ A.T)
        e[t - 1] = et
        Q[t - 1] = Qt

    return m, P, a, R, e, Q, STATUS_OK, -1


def backward_draw(m, P, a, R, G, z):
    """Draw one state trajectory given filtered moments and the standard
    normal innovations ``z`` of shape (T+1, d).

    Starts from the final posterior and walks backwards through the
    conditional distributions of each state given its successor.
    Returns (states, status, fail_t).
    """
    T = m.shape[0] - 1
    d = m.shape[1]
    states = np.empty((T + 1, d))

    root, status = _sample_sqrt(P[T])
    if status != STATUS_OK:
        return states, status, T
    states[T] = m[T] + root @ z[T]

    for t in range(T - 1, -1, -1):
        Rinv_s, status = _inv_sqrt_floored(R[t + 1])
        if status != STATUS_OK:
            return states, status, t
        Rinv = Rinv_s @ Rinv_s
        GP = P[t] if G is None else G @ P[t]
        B = GP.T @ Rinv  # = P G' R^{-1}, P symmetric
        h = m[t] + B @ (states[t + 1] - a[t + 1])
        H = symmetrize(P[t] - B @ GP)
        root, status = _sample_sqrt(H)
        if status != STATUS_OK:
            return states, status, t
        states[t] = h + root @ z[t]

    return states, STATUS_OK, -1
