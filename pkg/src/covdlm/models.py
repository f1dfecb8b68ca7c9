"""Builders mapping named model families onto :class:`~covdlm.dlm.ModelSpec`.

Families: local level, linear trend, seasonal (single harmonic), vector
autoregression of order ``ell`` (static coefficients), its time-varying
variant with random-walk coefficient drift controlled by a discount
factor, and the discounted level-plus-drift random-walk regression
(``dwr_model``).  Plus the companion-matrix stationarity check and the
conjugate rank-one covariance update of the matrix-variate special case.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matops
from .dlm import ModelSpec
from .errors import DimensionMismatch, InvalidDimension, InvalidScale


def _evolution_args(d, evolution, discount):
    """Normalize builder evolution arguments; default is the identity."""
    if evolution is not None and discount is not None:
        raise DimensionMismatch("pass either evolution or discount, not both")
    if discount is not None:
        return None, float(discount)
    if evolution is None:
        return np.eye(d), None
    if np.isscalar(evolution):
        return float(evolution) * np.eye(d), None
    return np.asarray(evolution, dtype=float), None


def local_level(p, evolution=None, discount=None) -> ModelSpec:
    """Random-walk level per series: F = G = I_p."""
    if p < 1:
        raise InvalidDimension(f"p must be >= 1, got {p}")
    omega, delta = _evolution_args(p, evolution, discount)
    return ModelSpec(p=p, d=p, transition=None, design=np.eye(p),
                     evolution=omega, discount=delta)


def linear_trend(p, evolution=None, discount=None) -> ModelSpec:
    """Level-plus-slope block per series; only the level is observed."""
    if p < 1:
        raise InvalidDimension(f"p must be >= 1, got {p}")
    block = np.array([[1.0, 1.0], [0.0, 1.0]])
    G = np.kron(np.eye(p), block)
    F = np.kron(np.eye(p), np.array([[1.0], [0.0]]))
    omega, delta = _evolution_args(2 * p, evolution, discount)
    return ModelSpec(p=p, d=2 * p, transition=G, design=F,
                     evolution=omega, discount=delta)


def seasonal(p, period=12, evolution=None, discount=None) -> ModelSpec:
    """Single-harmonic seasonal block per series (rotation by 2*pi/period)."""
    if p < 1:
        raise InvalidDimension(f"p must be >= 1, got {p}")
    if period < 2:
        raise InvalidDimension(f"period must be >= 2, got {period}")
    ang = 2.0 * np.pi / period
    rot = np.array([[np.cos(ang), np.sin(ang)], [-np.sin(ang), np.cos(ang)]])
    G = np.kron(np.eye(p), rot)
    F = np.kron(np.eye(p), np.array([[1.0], [0.0]]))
    omega, delta = _evolution_args(2 * p, evolution, discount)
    return ModelSpec(p=p, d=2 * p, transition=G, design=F,
                     evolution=omega, discount=delta)


def var_design(lag_buffer, p, order) -> np.ndarray:
    """Design matrix for the regression form of a VAR step.

    ``lag_buffer`` stacks the last ``order`` observation vectors, newest
    first; the returned F_t = X_t (x) I_p satisfies
    F_t' vec(Phi) = Phi X_t for every p x (p*order) coefficient matrix Phi.
    """
    x = np.asarray(lag_buffer, dtype=float).ravel()
    if x.size != p * order:
        raise DimensionMismatch(
            f"lag buffer must hold {p * order} values, got {x.size}"
        )
    return np.kron(x.reshape(-1, 1), np.eye(p))


@dataclass(frozen=True)
class VarSpec:
    """Lag bookkeeping for VAR-type designs.

    The state stacks vec(Phi) of the p x (p*order) coefficient matrix, so
    the state dimension is p^2 * order.
    """

    p: int
    order: int
    time_varying: bool = False
    discount: float | None = None

    def design_from_lags(self, lags: np.ndarray) -> np.ndarray:
        return var_design(lags, self.p, self.order)

    @property
    def state_dim(self) -> int:
        return self.p * self.p * self.order


def var_model(p, order) -> ModelSpec:
    """Static-coefficient VAR(order) in regression state-space form.

    Identity transition on the stacked coefficients, zero evolution
    noise; the first ``order`` observations only seed the lag buffer.
    """
    if p < 1 or order < 1:
        raise InvalidDimension(f"need p >= 1 and order >= 1, got p={p}, order={order}")
    vs = VarSpec(p=p, order=order)
    d = vs.state_dim
    return ModelSpec(p=p, d=d, transition=None, evolution=np.zeros((d, d)),
                     design_fn=vs.design_from_lags, warmup=order)


def tvvar_model(p, order, discount) -> ModelSpec:
    """VAR(order) with random-walk coefficient drift, discount-controlled."""
    if p < 1 or order < 1:
        raise InvalidDimension(f"need p >= 1 and order >= 1, got p={p}, order={order}")
    vs = VarSpec(p=p, order=order, time_varying=True, discount=discount)
    d = vs.state_dim
    if discount == 1.0:
        # reduces to the static model: discounting with delta=1 and zero
        # evolution noise give identical recursions
        return ModelSpec(p=p, d=d, transition=None, evolution=np.zeros((d, d)),
                         design_fn=vs.design_from_lags, warmup=order)
    return ModelSpec(p=p, d=d, transition=None, discount=discount,
                     design_fn=vs.design_from_lags, warmup=order)


def dwr_model(p, discount) -> ModelSpec:
    """Random-walk level plus drift regression.

    State is (1, psi_t) with the leading component frozen at one (pair it
    with :func:`dwr_prior` so its prior variance is exactly zero); the
    per-time design reads [y_{t-1}  I_p]'.
    """
    if p < 1:
        raise InvalidDimension(f"p must be >= 1, got {p}")

    def design_fn(lags: np.ndarray) -> np.ndarray:
        return np.vstack([lags[0][None, :], np.eye(p)])

    return ModelSpec(p=p, d=p + 1, transition=None, discount=discount,
                     design_fn=design_fn, warmup=1)


def dwr_prior(p, scale=1000.0):
    """Prior (m0, P0) for :func:`dwr_model`: unit frozen component with
    zero variance, diffuse drift block."""
    m0 = np.zeros(p + 1)
    m0[0] = 1.0
    P0 = scale * np.eye(p + 1)
    P0[0, 0] = 0.0
    return m0, P0


@dataclass(frozen=True)
class StationarityResult:
    stationary: bool
    max_root_modulus: float


def companion_matrix(coeffs) -> np.ndarray:
    """Companion matrix of the coefficient matrices of a VAR."""
    coeffs = [np.asarray(c, dtype=float) for c in coeffs]
    p = coeffs[0].shape[0]
    for c in coeffs:
        if c.shape != (p, p):
            raise DimensionMismatch("all coefficient matrices must be p x p")
    top = np.hstack(coeffs)
    ell = len(coeffs)
    if ell == 1:
        return top
    lower = np.hstack([np.eye(p * (ell - 1)), np.zeros((p * (ell - 1), p))])
    return np.vstack([top, lower])


def stationarity_check(coeffs) -> StationarityResult:
    """Stationarity verdict via companion-matrix eigenvalues.

    Stationary iff every eigenvalue modulus is below 1 - 1e-9, which is
    the same as all roots of the characteristic matrix polynomial lying
    outside the unit circle.
    """
    ev = np.linalg.eigvals(companion_matrix(coeffs))
    max_mod = float(np.max(np.abs(ev))) if ev.size else 0.0
    return StationarityResult(stationary=max_mod < 1.0 - 1e-9,
                              max_root_modulus=max_mod)


def mvdlm_cov_update(S_prev, n_prev, e, U) -> np.ndarray:
    """Conjugate covariance update of the matrix-variate special case,
    where the forecast covariance is a scalar multiple U of the current
    estimate: S_new = (n_prev * S_prev + e e' / U) / (n_prev + 1).

    Agrees with the general whitened update whenever Q = U * S_prev.
    """
    if U <= 0:
        raise InvalidScale(f"scale factor must be positive, got {U}")
    S_prev = matops.symmetrize(S_prev)
    e = np.asarray(e, dtype=float)
    return matops.symmetrize(
        (n_prev * S_prev + np.outer(e, e) / U) / (n_prev + 1.0)
    )
