"""Forecast-quality measures: mean squared standardized errors (MSSE),
mean absolute percentage errors (MAPE), correlation extraction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DivisionByZero, NotPositiveDefinite, Singular
from .matops import EIGEN_FLOOR_REL


@dataclass(frozen=True)
class MetricsReport:
    msse: np.ndarray
    mape: np.ndarray
    count: int

    def to_dict(self) -> dict:
        return {
            "msse": [float(x) for x in self.msse],
            "mape": [float(x) for x in self.mape],
            "count": int(self.count),
        }


def whiten_errors(errors: np.ndarray, covs: np.ndarray) -> np.ndarray:
    """Standardize each error vector with the symmetric inverse root of
    its forecast covariance (batched over time)."""
    errors = np.asarray(errors, dtype=float)
    covs = np.asarray(covs, dtype=float)
    if errors.ndim != 2 or covs.shape != errors.shape + (errors.shape[1],):
        raise DimensionMismatch(
            f"errors {errors.shape} and covariances {covs.shape} do not align"
        )
    covs = (covs + np.swapaxes(covs, 1, 2)) / 2.0
    w, v = np.linalg.eigh(covs)
    floor = EIGEN_FLOOR_REL * np.maximum(1.0, np.abs(w).max(axis=1))
    if np.any(w < -floor[:, None]):
        raise NotPositiveDefinite("a forecast covariance has a negative eigenvalue")
    if np.any(w <= floor[:, None]):
        raise Singular("a forecast covariance is numerically singular")
    # z_t = V diag(w^{-1/2}) V' e_t
    proj = np.einsum("tij,ti->tj", v, errors)
    proj /= np.sqrt(w)
    return np.einsum("tij,tj->ti", v, proj)


def msse(errors: np.ndarray, covs: np.ndarray) -> np.ndarray:
    """Componentwise mean of the squared standardized one-step errors.

    Under a correctly specified model each component has expectation one.
    """
    z = whiten_errors(errors, covs)
    return (z ** 2).mean(axis=0)


def mape(errors: np.ndarray, actuals: np.ndarray) -> np.ndarray:
    """Componentwise mean of |e_it| / |y_it|."""
    errors = np.asarray(errors, dtype=float)
    actuals = np.asarray(actuals, dtype=float)
    if errors.shape != actuals.shape:
        raise DimensionMismatch(
            f"errors {errors.shape} and actuals {actuals.shape} do not align"
        )
    zero = np.argwhere(actuals == 0.0)
    if zero.size:
        t, i = zero[0]
        raise DivisionByZero(
            f"actual value is zero at time index {int(t)}, component {int(i)}"
        )
    return np.abs(errors / actuals).mean(axis=0)


def correlations(S: np.ndarray) -> np.ndarray:
    """Correlation matrix of a covariance matrix; unit diagonal."""
    S = np.asarray(S, dtype=float)
    sd = np.sqrt(np.diag(S))
    if np.any(~np.isfinite(sd)) or np.any(sd <= 0.0):
        raise Singular("zero or negative variance on the diagonal")
    rho = S / np.outer(sd, sd)
    np.fill_diagonal(rho, 1.0)
    return rho


def report(errors: np.ndarray, covs: np.ndarray, actuals: np.ndarray) -> MetricsReport:
    """Bundle MSSE and MAPE over one scored window."""
    return MetricsReport(
        msse=msse(errors, covs),
        mape=mape(errors, actuals),
        count=int(errors.shape[0]),
    )
