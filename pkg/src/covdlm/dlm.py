"""Filtering core for conditionally Gaussian state-space models.

The model is the standard dynamic linear model

    y_t = F' theta_t + eps_t,      eps_t ~ N_p(0, Sigma)
    theta_t = G theta_{t-1} + w_t, w_t   ~ N_d(0, Omega)

with Sigma unknown.  Alongside the Kalman recursion for the state, the
filter keeps a running estimate S of Sigma: at every step the one-step
forecast error is whitened with the symmetric inverse root of its
forecast covariance, re-coloured with the symmetric root of the current
estimate, and the resulting rank-one term is averaged into S with weight
1/(n0 + t).  ``covariance_sum_form`` evaluates the same estimator
non-recursively and is used as an oracle in the tests.

State evolution noise may be given explicitly (Omega) or through a
discount factor delta, which inflates the prior as G P G' / delta.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import matops
from ._kernels import (
    STATUS_NONFINITE,
    STATUS_NOT_PSD,
    STATUS_SINGULAR,
    backend,
)
from .errors import (
    DimensionMismatch,
    InsufficientData,
    InvalidDimension,
    InvalidDiscount,
    InvalidScale,
    NonFiniteInput,
    NotPositiveDefinite,
    Singular,
    TimeVaryingDesign,
    UnsupportedHorizon,
)

DesignFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ModelSpec:
    """Structural description of one model.

    Exactly one of ``design`` (fixed d x p matrix) and ``design_fn``
    (callable building F_t from the ``warmup`` most recent observations,
    newest first) must be set, and exactly one of ``evolution`` and
    ``discount``.  ``transition=None`` means the identity.
    """

    p: int
    d: int
    transition: np.ndarray | None = None
    design: np.ndarray | None = None
    evolution: np.ndarray | None = None
    discount: float | None = None
    design_fn: DesignFn | None = None
    warmup: int = 0

    def __post_init__(self):
        if self.p < 1 or self.d < 1:
            raise InvalidDimension(f"need p >= 1 and d >= 1, got p={self.p}, d={self.d}")
        if (self.design is None) == (self.design_fn is None):
            raise DimensionMismatch("exactly one of design and design_fn must be set")
        if (self.evolution is None) == (self.discount is None):
            raise DimensionMismatch("exactly one of evolution and discount must be set")
        if self.discount is not None and not (0.0 < self.discount <= 1.0):
            raise InvalidDiscount(f"discount must lie in (0, 1], got {self.discount}")
        if self.design is not None:
            f = np.asarray(self.design, dtype=float)
            if f.shape != (self.d, self.p):
                raise DimensionMismatch(
                    f"design must be {self.d}x{self.p}, got {f.shape}"
                )
            object.__setattr__(self, "design", f)
        if self.transition is not None:
            g = np.asarray(self.transition, dtype=float)
            if g.shape != (self.d, self.d):
                raise DimensionMismatch(
                    f"transition must be {self.d}x{self.d}, got {g.shape}"
                )
            object.__setattr__(self, "transition", g)
        if self.evolution is not None:
            w = np.asarray(self.evolution, dtype=float)
            if w.shape != (self.d, self.d):
                raise DimensionMismatch(
                    f"evolution must be {self.d}x{self.d}, got {w.shape}"
                )
            object.__setattr__(self, "evolution", matops.symmetrize(w))

    @property
    def transition_matrix(self) -> np.ndarray:
        return np.eye(self.d) if self.transition is None else self.transition


@dataclass(frozen=True)
class FilterState:
    """Posterior after t updates: state mean/covariance, the running
    observation-covariance estimate and its evidence count n = n0 + t."""

    t: int
    mean: np.ndarray
    cov: np.ndarray
    obs_cov: np.ndarray
    n: float
    error: np.ndarray | None = None
    forecast_cov: np.ndarray | None = None


@dataclass(frozen=True)
class ForecastResult:
    horizon: int
    mean: np.ndarray
    cov: np.ndarray


@dataclass(frozen=True)
class FilterRun:
    """Trace of one filtering pass: arrays are indexed by scored step
    (the first ``warmup`` observations only seed lag buffers)."""

    warmup: int
    means: np.ndarray        # (T, d) posterior state means
    errors: np.ndarray       # (T, p) one-step forecast errors
    forecast_covs: np.ndarray  # (T, p, p)
    obs_covs: np.ndarray     # (T, p, p) estimate after each update
    final: FilterState

    @property
    def n_scored(self) -> int:
        return self.errors.shape[0]

    def times(self) -> np.ndarray:
        """Absolute 1-based observation indices of the scored steps."""
        return np.arange(self.warmup + 1, self.warmup + self.n_scored + 1)


def _check_psd(m: np.ndarray, name: str) -> np.ndarray:
    m = matops.symmetrize(m)
    w = np.linalg.eigvalsh(m)
    if np.any(w < -matops.eigen_floor(w)):
        raise NotPositiveDefinite(f"{name} has eigenvalue {w.min():.3e} < 0")
    return m


def init_state(
    spec: ModelSpec,
    m0: np.ndarray,
    P0: np.ndarray,
    S0: np.ndarray,
    n0: float,
) -> FilterState:
    """Wrap the priors into the t=0 filter state, validating shapes."""
    m0 = np.asarray(m0, dtype=float)
    if m0.shape != (spec.d,):
        raise DimensionMismatch(f"m0 must have length {spec.d}, got {m0.shape}")
    P0 = np.asarray(P0, dtype=float)
    if P0.shape != (spec.d, spec.d):
        raise DimensionMismatch(f"P0 must be {spec.d}x{spec.d}, got {P0.shape}")
    S0 = np.asarray(S0, dtype=float)
    if S0.shape != (spec.p, spec.p):
        raise DimensionMismatch(f"S0 must be {spec.p}x{spec.p}, got {S0.shape}")
    if not np.isfinite(n0) or n0 <= 0:
        raise InvalidScale(f"n0 must be positive, got {n0}")
    return FilterState(
        t=0,
        mean=m0,
        cov=_check_psd(P0, "P0"),
        obs_cov=_check_psd(S0, "S0"),
        n=float(n0),
    )


def filter_step(
    state: FilterState,
    y: np.ndarray,
    design: np.ndarray,
    transition: np.ndarray | None = None,
    *,
    evolution: np.ndarray | None = None,
    discount: float | None = None,
    update_s: bool = True,
) -> FilterState:
    """One posterior update.

    Computes, in order: the evolved state prior R, the one-step forecast
    (f, Q) with Q built from the *previous* covariance estimate, the gain,
    the new state moments, and (unless ``update_s`` is False) the new
    covariance estimate from the whitened/re-coloured error outer product.
    """
    y = np.asarray(y, dtype=float)
    F = np.asarray(design, dtype=float)
    d, p = F.shape
    if y.shape != (p,):
        raise DimensionMismatch(f"observation must have length {p}, got {y.shape}")
    if state.mean.shape != (d,):
        raise DimensionMismatch(
            f"design rows ({d}) do not match state dimension ({state.mean.shape[0]})"
        )
    if not np.all(np.isfinite(y)):
        raise NonFiniteInput("observation contains non-finite entries")
    if (evolution is None) == (discount is None):
        raise DimensionMismatch("exactly one of evolution and discount must be set")

    G = transition
    if G is None:
        a = state.mean
        GP = state.cov
    else:
        a = G @ state.mean
        GP = matops.symmetrize(G @ state.cov @ G.T)
    R = matops.symmetrize(GP / discount if discount is not None else GP + evolution)

    f = F.T @ a
    Q = matops.symmetrize(F.T @ R @ F + state.obs_cov)
    if not np.all(np.isfinite(Q)):
        raise NonFiniteInput("forecast covariance became non-finite")
    e = y - f

    Qis = matops.symmetric_inv_sqrt(Q)
    Qinv = Qis @ Qis
    A = (R @ F) @ Qinv
    mean = a + A @ e
    cov = matops.symmetrize(R - A @ Q @ A.T)

    if update_s:
        Ss = matops.symmetric_sqrt(state.obs_cov)
        w = Ss @ (Qis @ e)
        S = matops.symmetrize((state.n * state.obs_cov + np.outer(w, w)) / (state.n + 1.0))
    else:
        S = state.obs_cov

    return FilterState(
        t=state.t + 1,
        mean=mean,
        cov=cov,
        obs_cov=S,
        n=state.n + 1.0,
        error=e,
        forecast_cov=Q,
    )


def covariance_sum_form(
    S0: np.ndarray,
    n0: float,
    history: Sequence[tuple[np.ndarray, np.ndarray, np.ndarray]],
) -> np.ndarray:
    """Non-recursive form of the covariance estimate.

    ``history`` holds one (e_i, Q_i, S_{i-1}) triple per step.  Used as a
    test oracle for the recursive update in :func:`filter_step`.
    """
    S0 = matops.symmetrize(np.asarray(S0, dtype=float))
    acc = float(n0) * S0
    count = 0
    for e, Q, S_prev in history:
        e = np.asarray(e, dtype=float)
        Qis = matops.symmetric_inv_sqrt(Q)
        Ss = matops.symmetric_sqrt(S_prev)
        w = Ss @ (Qis @ e)
        acc = acc + np.outer(w, w)
        count += 1
    return matops.symmetrize(acc / (float(n0) + count))


def forecast(
    state: FilterState,
    spec: ModelSpec,
    h: int,
    design: np.ndarray | None = None,
) -> ForecastResult:
    """h-step-ahead forecast mean and covariance.

    For per-time designs only h=1 is defined (future designs depend on
    unobserved data); pass the one-step design built from the current
    lags via ``design``.  Under discounting the implied one-step evolution
    covariance (1/delta - 1) G P G' is held fixed across the horizon.
    """
    if h < 1:
        raise UnsupportedHorizon(f"horizon must be >= 1, got {h}")
    if spec.design is None and h > 1:
        raise TimeVaryingDesign("multi-step forecasts need a fixed design matrix")
    if design is None:
        if spec.design is None:
            raise TimeVaryingDesign(
                "per-time model: pass the one-step design built from current lags"
            )
        F = spec.design
    else:
        F = np.asarray(design, dtype=float)
        if F.shape != (spec.d, spec.p):
            raise DimensionMismatch(f"design must be {spec.d}x{spec.p}, got {F.shape}")

    G = spec.transition_matrix
    if spec.evolution is not None:
        omega = spec.evolution
    else:
        omega = (1.0 / spec.discount - 1.0) * matops.symmetrize(G @ state.cov @ G.T)

    Gh = np.linalg.matrix_power(G, h)
    mean = F.T @ (Gh @ state.mean)
    cov = F.T @ (Gh @ state.cov @ Gh.T) @ F
    Gi = np.eye(spec.d)
    for _ in range(h):
        cov = cov + F.T @ (Gi @ omega @ Gi.T) @ F
        Gi = G @ Gi
    cov = matops.symmetrize(cov + state.obs_cov)
    return ForecastResult(horizon=h, mean=mean, cov=cov)


def standardized_errors(e: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Whiten a forecast error with the symmetric inverse root of its
    forecast covariance."""
    return matops.symmetric_inv_sqrt(Q) @ np.asarray(e, dtype=float)


def _raise_for_status(status: int, t: int, what: str) -> None:
    if status == STATUS_NONFINITE:
        raise NonFiniteInput(f"{what} became non-finite at step {t}")
    if status == STATUS_NOT_PSD:
        raise NotPositiveDefinite(f"{what} lost positive definiteness at step {t}")
    if status == STATUS_SINGULAR:
        raise Singular(f"{what} numerically singular at step {t}")


def build_designs(spec: ModelSpec, data: np.ndarray) -> np.ndarray:
    """Materialize the per-time design matrices for a data panel.

    Returns a (N - warmup, d, p) stack; step i uses the ``warmup``
    observations before row warmup+i, newest first.
    """
    n = data.shape[0]
    T = n - spec.warmup
    F = np.empty((T, spec.d, spec.p))
    for i in range(T):
        t = spec.warmup + i
        lags = data[t - spec.warmup : t][::-1]
        F[i] = spec.design_fn(lags)
    return F


def run_filter(
    spec: ModelSpec,
    data: np.ndarray,
    m0: np.ndarray,
    P0: np.ndarray,
    S0: np.ndarray,
    n0: float,
    update_s: bool = True,
) -> FilterRun:
    """Filter a whole observation panel through the selected kernel
    backend.  The first ``spec.warmup`` rows only seed the lag buffer."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[1] != spec.p:
        raise DimensionMismatch(
            f"data must be (N, {spec.p}), got {data.shape}"
        )
    if not np.all(np.isfinite(data)):
        raise NonFiniteInput("data contains non-finite entries")
    if data.shape[0] <= spec.warmup:
        raise InsufficientData(
            f"need more than {spec.warmup} observations, got {data.shape[0]}"
        )
    state0 = init_state(spec, m0, P0, S0, n0)

    F = spec.design if spec.design is not None else build_designs(spec, data)
    means, errors, fcovs, scovs, P_last, status, fail_t = backend().filter_run(
        data[spec.warmup :],
        F,
        spec.transition,
        spec.evolution,
        spec.discount,
        state0.mean,
        state0.cov,
        state0.obs_cov,
        state0.n,
        update_s,
    )
    _raise_for_status(status, spec.warmup + fail_t + 1, "a filter covariance")

    T = errors.shape[0]
    final = FilterState(
        t=T,
        mean=means[-1],
        cov=P_last,
        obs_cov=scovs[-1],
        n=float(n0) + T,
        error=errors[-1],
        forecast_cov=fcovs[-1],
    )
    return FilterRun(
        warmup=spec.warmup,
        means=means,
        errors=errors,
        forecast_covs=fcovs,
        obs_covs=scovs,
        final=final,
    )
