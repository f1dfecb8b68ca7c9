"""Blocked Gibbs sampler for the model with unknown observation
covariance: forward filtering with the covariance held fixed, backward
sampling of a full state trajectory, then an inverted-Wishart draw of
the covariance given the sampled states.

This iterative sampler is the gold standard the on-line estimator is
checked against; it is deterministic given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import backend
from .dlm import ModelSpec, _raise_for_status
from .errors import (
    DimensionMismatch,
    Singular,
    TimeVaryingDesign,
    ValidationError,
)
from .matops import symmetrize


@dataclass(frozen=True)
class GibbsConfig:
    """Chain settings and priors.

    ``n0`` is the prior degrees of freedom and ``s0`` the prior estimate
    of the observation covariance; ``m0``/``p0`` the state prior.
    """

    iterations: int
    burn_in: int
    n0: float
    s0: np.ndarray
    m0: np.ndarray
    p0: np.ndarray
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1 or not (0 <= self.burn_in < self.iterations):
            raise ValidationError(
                f"need 0 <= burn_in < iterations, got {self.burn_in}, {self.iterations}"
            )
        if self.n0 <= 0:
            raise ValidationError(f"n0 must be positive, got {self.n0}")


@dataclass(frozen=True)
class GibbsDraw:
    """One sweep's output: a state trajectory (index 0 is time 0) and a
    covariance draw."""

    states: np.ndarray
    sigma: np.ndarray


@dataclass(frozen=True)
class ForwardFiltered:
    """Filtered moments with the observation covariance fixed; slot 0 of
    ``means``/``covs`` holds the prior, ``prior_means``/``prior_covs``
    start at slot 1."""

    means: np.ndarray        # (N+1, d)
    covs: np.ndarray         # (N+1, d, d)
    prior_means: np.ndarray  # (N+1, d), slot 0 unused
    prior_covs: np.ndarray   # (N+1, d, d), slot 0 unused
    errors: np.ndarray       # (N, p)
    forecast_covs: np.ndarray  # (N, p, p)


def _require_invariant(spec: ModelSpec) -> None:
    if spec.design is None:
        raise TimeVaryingDesign("the sampler needs a fixed design matrix")
    if spec.evolution is None:
        raise ValidationError("the sampler needs an explicit evolution covariance")


def forward_filter(
    data: np.ndarray,
    spec: ModelSpec,
    sigma: np.ndarray,
    m0: np.ndarray,
    P0: np.ndarray,
) -> ForwardFiltered:
    """Kalman filter with the observation covariance fixed at ``sigma``,
    keeping the full prior/posterior trajectory."""
    _require_invariant(spec)
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[1] != spec.p:
        raise DimensionMismatch(f"data must be (N, {spec.p}), got {data.shape}")
    m, P, a, R, e, Q, status, fail_t = backend().kalman_run(
        data,
        spec.design,
        spec.transition,
        spec.evolution,
        np.asarray(sigma, dtype=float),
        np.asarray(m0, dtype=float),
        np.asarray(P0, dtype=float),
    )
    _raise_for_status(status, fail_t + 1, "forecast covariance")
    return ForwardFiltered(m, P, a, R, e, Q)


def backward_sample(
    filtered: ForwardFiltered,
    spec: ModelSpec,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw one state trajectory from the joint smoothing distribution.

    The final state is drawn from its posterior; earlier states from the
    conditional of each state given its successor, whose covariance is
    P_t - P_t G' R_{t+1}^{-1} G P_t.  Returns states of shape (N+1, d).
    """
    n_plus_1 = filtered.means.shape[0]
    z = rng.standard_normal((n_plus_1, spec.d))
    states, status, fail_t = backend().backward_draw(
        filtered.means,
        filtered.covs,
        filtered.prior_means,
        filtered.prior_covs,
        spec.transition,
        z,
    )
    _raise_for_status(status, fail_t, "smoothing covariance")
    return states


def invwishart_draw(rng: np.random.Generator, df: float, scale: np.ndarray) -> np.ndarray:
    """One inverted-Wishart draw with mean scale / (df - p - 1).

    Uses the Bartlett factorization of the Wishart on the inverse scale,
    then inverts the draw.
    """
    scale = symmetrize(scale)
    p = scale.shape[0]
    if df <= p - 1:
        raise ValidationError(f"degrees of freedom must exceed p - 1, got {df}")
    try:
        inv_scale = np.linalg.inv(scale)
        L = np.linalg.cholesky(symmetrize(inv_scale))
    except np.linalg.LinAlgError:
        raise Singular("inverted-Wishart scale matrix is not positive definite")
    A = np.zeros((p, p))
    for i in range(p):
        A[i, i] = np.sqrt(rng.chisquare(df - i))
        for j in range(i):
            A[i, j] = rng.standard_normal()
    LA = L @ A
    W = LA @ LA.T
    return symmetrize(np.linalg.inv(W))


def sigma_draw(
    states: np.ndarray,
    data: np.ndarray,
    design: np.ndarray,
    n0: float,
    s0: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Covariance draw given a sampled state trajectory.

    Residuals are y_t - F' theta_t; the draw is inverted Wishart with
    degrees of freedom n0 + N + 2p and scale N * Sigma_hat + n0 * S0.
    """
    data = np.asarray(data, dtype=float)
    states = np.asarray(states, dtype=float)
    n_obs, p = data.shape
    if states.shape[0] != n_obs + 1:
        raise DimensionMismatch(
            f"states must have {n_obs + 1} rows (including time 0), got {states.shape[0]}"
        )
    resid = data - states[1:] @ design
    sigma_hat = (resid.T @ resid) / n_obs
    df = float(n0) + n_obs + 2 * p
    scale = n_obs * sigma_hat + float(n0) * symmetrize(s0)
    return invwishart_draw(rng, df, scale)


@dataclass(frozen=True)
class GibbsResult:
    sigma_mean: np.ndarray     # (p, p) posterior mean over kept sweeps
    sigma_draws: np.ndarray    # (kept, p, p)
    state_means: np.ndarray    # (N+1, d) mean sampled trajectory

    @property
    def kept(self) -> int:
        return self.sigma_draws.shape[0]


def gibbs_sweep(
    data: np.ndarray,
    spec: ModelSpec,
    sigma: np.ndarray,
    config: GibbsConfig,
    rng: np.random.Generator,
) -> GibbsDraw:
    """One full sweep: filter forward at the current covariance, sample a
    trajectory backwards, then draw the covariance given it."""
    filtered = forward_filter(data, spec, sigma, config.m0, config.p0)
    states = backward_sample(filtered, spec, rng)
    new_sigma = sigma_draw(states, data, spec.design, config.n0, config.s0, rng)
    return GibbsDraw(states=states, sigma=new_sigma)


def gibbs_run(data: np.ndarray, spec: ModelSpec, config: GibbsConfig) -> GibbsResult:
    """Alternate forward filtering, backward sampling and the covariance
    draw; discard burn-in and average the rest."""
    _require_invariant(spec)
    data = np.asarray(data, dtype=float)
    rng = np.random.default_rng(config.seed)
    sigma = symmetrize(np.asarray(config.s0, dtype=float))

    kept = config.iterations - config.burn_in
    p = spec.p
    sigma_draws = np.empty((kept, p, p))
    state_sum = np.zeros((data.shape[0] + 1, spec.d))

    for sweep in range(config.iterations):
        draw = gibbs_sweep(data, spec, sigma, config, rng)
        sigma = draw.sigma
        if sweep >= config.burn_in:
            sigma_draws[sweep - config.burn_in] = sigma
            state_sum += draw.states

    return GibbsResult(
        sigma_mean=sigma_draws.mean(axis=0),
        sigma_draws=sigma_draws,
        state_means=state_sum / kept,
    )
