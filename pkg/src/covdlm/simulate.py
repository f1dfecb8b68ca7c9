"""Data generation from a model spec and the Monte Carlo replication
harness used to study the covariance estimator.

Replications are independent units of work: per-replication generators
derive from the master seed through ``SeedSequence.spawn``, so a study
can be split by replication index and merged without changing the
result.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import _pure
from .dlm import ModelSpec, run_filter
from .errors import (
    DimensionMismatch,
    NotPositiveDefinite,
    Singular,
    ValidationError,
)
from .matops import symmetrize
from .metrics import whiten_errors
from .models import linear_trend, local_level, seasonal

STUDY_FAMILIES = ("LL", "LT", "SE")


def _sample_root(cov, name):
    root, status = _pure._sample_sqrt(np.asarray(cov, dtype=float))
    if status != _pure.STATUS_OK:
        raise NotPositiveDefinite(f"{name} is not positive semi-definite")
    return root


def generate(
    spec: ModelSpec,
    sigma: np.ndarray,
    n_steps: int,
    seed,
    m0: np.ndarray,
    P0: np.ndarray,
    omega: np.ndarray | None = None,
):
    """Draw one series from the model: the initial state comes from
    N(m0, P0), then states and observations are iterated forward.

    Gaussian draws use the symmetric PSD root of each covariance (exact
    zeros stay zero, so degenerate directions carry no noise).  Returns
    (observations (N, p), states (N+1, d)); deterministic per seed.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if omega is None:
        omega = spec.evolution
    if omega is None:
        raise DimensionMismatch(
            "generation needs an explicit evolution covariance; discount-only "
            "specs must pass omega"
        )
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (spec.d, spec.d):
        raise DimensionMismatch(f"omega must be {spec.d}x{spec.d}, got {omega.shape}")
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (spec.p, spec.p):
        raise DimensionMismatch(f"sigma must be {spec.p}x{spec.p}, got {sigma.shape}")
    m0 = np.asarray(m0, dtype=float)
    if m0.shape != (spec.d,):
        raise DimensionMismatch(f"m0 must have length {spec.d}, got {m0.shape}")

    root_p0 = _sample_root(P0, "P0")
    root_om = _sample_root(omega, "omega")
    root_sig = _sample_root(sigma, "sigma")
    G = spec.transition

    states = np.empty((n_steps + 1, spec.d))
    obs = np.empty((n_steps, spec.p))
    states[0] = m0 + root_p0 @ rng.standard_normal(spec.d)
    for t in range(1, n_steps + 1):
        drift = states[t - 1] if G is None else G @ states[t - 1]
        states[t] = drift + root_om @ rng.standard_normal(spec.d)
        if spec.design is not None:
            F = spec.design
        else:
            lags = np.zeros((spec.warmup, spec.p))
            have = min(spec.warmup, t - 1)
            if have:
                lags[:have] = obs[t - 1 - have : t - 1][::-1]
            F = spec.design_fn(lags)
        obs[t - 1] = F.T @ states[t] + root_sig @ rng.standard_normal(spec.p)
    return obs, states


@dataclass(frozen=True)
class SimConfig:
    """Settings for one replication study."""

    family: str
    sigma: np.ndarray
    omega: float | np.ndarray = 1.0
    n_steps: int = 500
    n_reps: int = 1000
    s0: np.ndarray | None = None
    n0: float = 1.0
    p0_scale: float = 1000.0
    seed: int = 0
    snapshots: tuple[int, ...] = (100, 500)
    period: int = 12

    def __post_init__(self):
        if self.family not in STUDY_FAMILIES:
            raise ValidationError(
                f"family must be one of {STUDY_FAMILIES}, got {self.family!r}"
            )
        sig = symmetrize(np.asarray(self.sigma, dtype=float))
        if np.linalg.eigvalsh(sig).min() <= 0:
            raise ValidationError("sigma must be positive definite")
        object.__setattr__(self, "sigma", sig)
        if self.n_steps < 1 or self.n_reps < 1:
            raise ValidationError("n_steps and n_reps must be >= 1")
        if any(t < 1 or t > self.n_steps for t in self.snapshots):
            raise ValidationError(
                f"snapshot times must lie in [1, {self.n_steps}], got {self.snapshots}"
            )
        if self.s0 is not None:
            object.__setattr__(self, "s0", symmetrize(np.asarray(self.s0, dtype=float)))

    @property
    def p(self) -> int:
        return self.sigma.shape[0]


def build_study_model(cfg: SimConfig) -> ModelSpec:
    p = cfg.p
    if cfg.family == "LL":
        make = lambda omega: local_level(p, evolution=omega)
    elif cfg.family == "LT":
        make = lambda omega: linear_trend(p, evolution=omega)
    else:
        make = lambda omega: seasonal(p, cfg.period, evolution=omega)
    d = make(1.0).d
    omega = cfg.omega * np.eye(d) if np.isscalar(cfg.omega) else np.asarray(cfg.omega)
    return make(omega)


@dataclass(frozen=True)
class StudyReport:
    """Replication-averaged results.

    ``s_bar_trace[t-1]`` is the covariance estimate at time t averaged
    over replications; MSSE vectors are averaged over replications and
    scored time points, once with the estimated covariance and once with
    the filter run at the true one.
    """

    family: str
    n_reps: int
    n_steps: int
    snapshot_times: tuple[int, ...]
    s_bar_trace: np.ndarray       # (N, p, p)
    s_bar_overall: np.ndarray     # (p, p)
    snapshots: dict[int, np.ndarray]
    corr_trace: np.ndarray        # (N, p, p)
    msse_estimated: np.ndarray    # (p,)
    msse_known: np.ndarray        # (p,)

    def to_dict(self) -> dict:
        out = {
            "family": self.family,
            "n_reps": self.n_reps,
            "n_steps": self.n_steps,
            "s_bar_overall": self.s_bar_overall.tolist(),
            "snapshots": {str(t): s.tolist() for t, s in self.snapshots.items()},
            "snapshot_correlations": {
                str(t): self.corr_trace[t - 1].tolist() for t in self.snapshot_times
            },
            "msse_estimated": self.msse_estimated.tolist(),
            "msse_known": self.msse_known.tolist(),
        }
        return out

    def trace_rows(self):
        """Long-format rows (time, entry, value) of the averaged
        covariance and correlation traces."""
        p = self.s_bar_trace.shape[1]
        for t in range(self.n_steps):
            for j in range(p):
                for i in range(j, p):
                    yield t + 1, f"s{i + 1}{j + 1}", self.s_bar_trace[t, i, j]
            for j in range(p):
                for i in range(j + 1, p):
                    yield t + 1, f"r{i + 1}{j + 1}", self.corr_trace[t, i, j]


def _corr_trace(trace: np.ndarray) -> np.ndarray:
    sd = np.sqrt(np.einsum("tii->ti", trace))
    if np.any(sd <= 0.0):
        raise Singular("averaged estimate has a non-positive variance")
    corr = trace / (sd[:, :, None] * sd[:, None, :])
    p = trace.shape[1]
    corr[:, np.arange(p), np.arange(p)] = 1.0
    return corr


def _finalize(family, n_reps, n_steps, snapshot_times, trace, msse_est, msse_known):
    return StudyReport(
        family=family,
        n_reps=n_reps,
        n_steps=n_steps,
        snapshot_times=tuple(snapshot_times),
        s_bar_trace=trace,
        s_bar_overall=trace.mean(axis=0),
        snapshots={t: trace[t - 1].copy() for t in snapshot_times},
        corr_trace=_corr_trace(trace),
        msse_estimated=msse_est,
        msse_known=msse_known,
    )


def replication_study(cfg: SimConfig, rep_range: range | None = None) -> StudyReport:
    """Run the study: generate, filter (estimating and with the true
    covariance frozen), and average across replications.

    ``rep_range`` restricts to a slice of the replication indices; the
    per-index generators do not depend on the slicing, so partial reports
    merge exactly (see :func:`merge_reports`).
    """
    spec = build_study_model(cfg)
    p, d = cfg.p, spec.d
    m0 = np.zeros(d)
    P0 = cfg.p0_scale * np.eye(d)
    S0 = np.eye(p) if cfg.s0 is None else cfg.s0

    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_reps)
    reps = range(cfg.n_reps) if rep_range is None else rep_range

    s_sum = np.zeros((cfg.n_steps, p, p))
    msse_est_sum = np.zeros(p)
    msse_known_sum = np.zeros(p)
    count = 0
    for i in reps:
        rng = np.random.default_rng(children[i])
        y, _ = generate(spec, cfg.sigma, cfg.n_steps, rng, m0, P0)
        est = run_filter(spec, y, m0, P0, S0, cfg.n0)
        known = run_filter(spec, y, m0, P0, cfg.sigma, cfg.n0, update_s=False)
        s_sum += est.obs_covs
        z = whiten_errors(est.errors, est.forecast_covs)
        msse_est_sum += (z ** 2).mean(axis=0)
        zk = whiten_errors(known.errors, known.forecast_covs)
        msse_known_sum += (zk ** 2).mean(axis=0)
        count += 1

    return _finalize(
        cfg.family,
        count,
        cfg.n_steps,
        cfg.snapshots,
        s_sum / count,
        msse_est_sum / count,
        msse_known_sum / count,
    )


def merge_reports(a: StudyReport, b: StudyReport) -> StudyReport:
    """Combine two partial reports over disjoint replication slices."""
    if (a.family, a.n_steps, a.snapshot_times) != (b.family, b.n_steps, b.snapshot_times):
        raise ValidationError("reports come from different study configurations")
    n = a.n_reps + b.n_reps
    wa, wb = a.n_reps / n, b.n_reps / n
    return _finalize(
        a.family,
        n,
        a.n_steps,
        a.snapshot_times,
        wa * a.s_bar_trace + wb * b.s_bar_trace,
        wa * a.msse_estimated + wb * b.msse_estimated,
        wa * a.msse_known + wb * b.msse_known,
    )
