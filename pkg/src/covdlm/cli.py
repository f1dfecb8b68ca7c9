"""Command-line front end.

Subcommands:

* ``study``        -- Monte Carlo replication study of the estimator.
* ``fit``          -- filter one model over a CSV panel, emit traces and metrics.
* ``scan``         -- fit a grid of VAR/TVVAR orders and discounts, one row each.
* ``mcmc-compare`` -- simulate one series and compare the on-line estimate
                      against the Gibbs sampler at growing sample sizes.

All commands are deterministic given their seed and write byte-identical
files across re-runs.  Floats are serialized with 12 significant digits.
On failure a machine-readable JSON error goes to stderr and the exit code
is nonzero.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .dlm import ModelSpec, run_filter
from .errors import (
    CovDlmError,
    InsufficientData,
    NonFiniteInput,
    NotPositiveDefinite,
    ParseError,
    Singular,
    ValidationError,
)
from .matops import unvech
from .mcmc import GibbsConfig, gibbs_run
from .metrics import correlations, mape, msse
from .models import (
    dwr_model,
    dwr_prior,
    linear_trend,
    local_level,
    seasonal,
    tvvar_model,
    var_model,
)
from .simulate import SimConfig, generate, replication_study

FIT_FAMILIES = ("LL", "LT", "SE", "VAR", "TVVAR", "DWR")


def _fmt(x: float) -> str:
    return f"{float(x):.12g}"


def _round12(obj):
    """Round every float in a JSON-ready structure to 12 significant digits."""
    if isinstance(obj, float):
        return float(_fmt(obj))
    if isinstance(obj, dict):
        return {k: _round12(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round12(v) for v in obj]
    return obj


def _emit_error(exc: Exception) -> None:
    payload = {"error": {"type": type(exc).__name__, "message": str(exc)}}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


def _outdir(args) -> str:
    out = args.outdir or os.environ.get("COVDLM_OUTDIR") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(path: str, obj) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(_round12(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def parse_vech(text: str, field: str) -> np.ndarray:
    """Parse comma-separated lower-triangle entries into a symmetric matrix."""
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise ValidationError(f"{field}: entries must be numeric, got {text!r}")
    k = len(values)
    p = int(round((np.sqrt(8 * k + 1) - 1) / 2))
    if p * (p + 1) // 2 != k:
        raise ValidationError(
            f"{field}: {k} entries do not fill a lower triangle "
            f"(need p*(p+1)/2 values, e.g. 3 for a 2x2 matrix)"
        )
    return unvech(np.array(values), p)


def parse_floats(text: str, field: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v != ""]
    except ValueError:
        raise ValidationError(f"{field}: entries must be numeric, got {text!r}")


def parse_ints(text: str, field: str) -> list[int]:
    """Parse '1,2,3' or a range '1-10'."""
    text = text.strip()
    try:
        if "-" in text and "," not in text:
            lo, hi = text.split("-")
            return list(range(int(lo), int(hi) + 1))
        return [int(v) for v in text.split(",") if v != ""]
    except ValueError:
        raise ValidationError(f"{field}: expected integers, got {text!r}")


def read_panel(path: str) -> np.ndarray:
    """Read a numeric CSV panel: one observation vector per row, optional
    header, comma delimiter."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ParseError(f"cannot open {path}: {exc}")
    with fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InsufficientData(f"{path} is empty")

    start = 0
    try:
        [float(v) for v in rows[0]]
    except ValueError:
        start = 1  # header row

    data = []
    width = None
    for r, row in enumerate(rows[start:], start=start + 1):
        if not row or all(v.strip() == "" for v in row):
            continue
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(
                f"row {r}: expected {width} columns, found {len(row)}"
            )
        parsed = []
        for c, v in enumerate(row, start=1):
            try:
                parsed.append(float(v))
            except ValueError:
                raise ParseError(f"row {r}, column {c}: {v!r} is not numeric")
        data.append(parsed)
    if not data:
        raise InsufficientData(f"{path} has a header but no data rows")
    return np.asarray(data, dtype=float)


def _build_fit_model(family, p, order, delta, period, omega):
    if family == "LL":
        return local_level(p, evolution=omega) if delta is None else local_level(p, discount=delta)
    if family == "LT":
        return linear_trend(p, evolution=omega) if delta is None else linear_trend(p, discount=delta)
    if family == "SE":
        return seasonal(p, period, evolution=omega) if delta is None else seasonal(p, period, discount=delta)
    if family == "VAR":
        return var_model(p, order)
    if family == "TVVAR":
        if delta is None:
            raise ValidationError("delta: required for the TVVAR family")
        return tvvar_model(p, order, delta)
    if family == "DWR":
        return dwr_model(p, 0.9 if delta is None else delta)
    raise ValidationError(f"model: unknown family {family!r}")


def _fit_priors(spec: ModelSpec, family: str, p: int, s0, p0_scale: float, n0: float):
    if family == "DWR":
        m0, P0 = dwr_prior(p, p0_scale)
    else:
        m0 = np.zeros(spec.d)
        P0 = p0_scale * np.eye(spec.d)
    S0 = np.eye(p) if s0 is None else s0
    return m0, P0, S0, n0


def _fit_panel(family, data, order, delta, period, s0, p0_scale, n0, omega):
    p = data.shape[1]
    spec = _build_fit_model(family, p, order, delta, period, omega)
    m0, P0, S0, n0 = _fit_priors(spec, family, p, s0, p0_scale, n0)
    run = run_filter(spec, data, m0, P0, S0, n0)
    return spec, run


def _trace_rows(run):
    p = run.obs_covs.shape[1]
    times = run.times()
    for idx in range(run.n_scored):
        t = int(times[idx])
        s = run.obs_covs[idx]
        for j in range(p):
            for i in range(j, p):
                yield t, f"s{i + 1}{j + 1}", _fmt(s[i, j])
        rho = correlations(s)
        for j in range(p):
            for i in range(j + 1, p):
                yield t, f"r{i + 1}{j + 1}", _fmt(rho[i, j])


# ---------------------------------------------------------------- study

def cmd_study(args) -> int:
    sigma = parse_vech(args.sigma, "sigma")
    s0 = parse_vech(args.s0, "s0") if args.s0 else None
    snapshots = tuple(parse_ints(args.snapshots, "snapshots")) if args.snapshots \
        else tuple(t for t in (100, 500) if t <= args.len) or (args.len,)
    cfg = SimConfig(
        family=args.family,
        sigma=sigma,
        omega=args.omega,
        n_steps=args.len,
        n_reps=args.reps,
        s0=s0,
        n0=args.n0,
        p0_scale=args.p0_scale,
        seed=args.seed,
        snapshots=snapshots,
        period=args.period,
    )
    report = replication_study(cfg)

    out = _outdir(args)
    _write_json(os.path.join(out, "study.json"), report.to_dict())
    _write_csv(
        os.path.join(out, "study_trace.csv"),
        ["time", "entry", "value"],
        ((t, entry, _fmt(v)) for t, entry, v in report.trace_rows()),
    )

    p = sigma.shape[0]
    times = list(report.snapshot_times)
    print(f"family {args.family}: averaged estimates over {report.n_reps} replications")
    header = ["entry", "overall"] + [f"t={t}" for t in times]
    print("  ".join(f"{h:>10}" for h in header))
    for j in range(p):
        for i in range(j, p):
            row = [f"s{i + 1}{j + 1}", _fmt(report.s_bar_overall[i, j])]
            row += [_fmt(report.snapshots[t][i, j]) for t in times]
            print("  ".join(f"{v:>10}" for v in row))
    overall_corr = correlations(report.s_bar_overall)
    for j in range(p):
        for i in range(j + 1, p):
            row = [f"rho{i + 1}{j + 1}", _fmt(overall_corr[i, j])]
            row += [_fmt(report.corr_trace[t - 1][i, j]) for t in times]
            print("  ".join(f"{v:>10}" for v in row))
    print("msse (estimated):", " ".join(_fmt(v) for v in report.msse_estimated))
    print("msse (known):    ", " ".join(_fmt(v) for v in report.msse_known))
    return 0


# ---------------------------------------------------------------- fit

def cmd_fit(args) -> int:
    data = read_panel(args.csv)
    s0 = None
    if args.s0 and args.s0_diag:
        raise ValidationError("s0: pass either --s0 or --s0-diag, not both")
    if args.s0:
        s0 = parse_vech(args.s0, "s0")
    elif args.s0_diag:
        s0 = np.diag(parse_floats(args.s0_diag, "s0-diag"))
    spec, run = _fit_panel(
        args.model, data, args.order, args.delta, args.period,
        s0, args.p0_scale, args.n0, args.omega,
    )
    rep_msse = msse(run.errors, run.forecast_covs)
    rep_mape = mape(run.errors, data[spec.warmup :])

    out = _outdir(args)
    _write_csv(
        os.path.join(out, "fit_trace.csv"),
        ["time", "entry", "value"],
        _trace_rows(run),
    )
    _write_csv(
        os.path.join(out, "fit_states.csv"),
        ["time"] + [f"theta{i + 1}" for i in range(spec.d)],
        (
            [int(t)] + [_fmt(v) for v in run.means[idx]]
            for idx, t in enumerate(run.times())
        ),
    )
    payload = {
        "model": args.model,
        "order": args.order,
        "delta": args.delta,
        "n_scored": run.n_scored,
        "msse": rep_msse.tolist(),
        "mape": rep_mape.tolist(),
        "final_obs_cov": run.final.obs_cov.tolist(),
        "final_correlations": correlations(run.final.obs_cov).tolist(),
    }
    if args.model == "DWR":
        payload["note"] = (
            "observation covariance estimated with the same on-line update "
            "as the other families, not a likelihood-based estimator"
        )
    _write_json(os.path.join(out, "fit_metrics.json"), payload)
    print(f"{args.model} fit over {run.n_scored} scored points")
    print("msse:", " ".join(_fmt(v) for v in rep_msse))
    print("mape:", " ".join(_fmt(v) for v in rep_mape))
    return 0


# ---------------------------------------------------------------- scan

def scan_grid(data, orders, deltas, s0, p0_scale, n0):
    """Fit every (order, delta) cell; delta=1 rows are the static model.
    Numerical breakdowns are recorded per cell, not raised."""
    if not orders:
        raise ValidationError("orders: at least one order is required")
    if not deltas:
        raise ValidationError("deltas: at least one discount is required")
    deltas = sorted(set(float(d) for d in deltas) | {1.0})
    p = data.shape[1]
    rows = []
    for order in orders:
        for delta in deltas:
            label = f"VAR({order})" if delta == 1.0 else f"TVVAR({order})"
            try:
                _, run = _fit_panel(
                    "VAR" if delta == 1.0 else "TVVAR",
                    data, order, None if delta == 1.0 else delta,
                    12, s0, p0_scale, n0, None,
                )
                cell_msse = msse(run.errors, run.forecast_covs)
                cell_mape = mape(run.errors, data[order:])
                rows.append({
                    "model": label,
                    "order": order,
                    "delta": delta,
                    "status": "ok",
                    "msse": cell_msse.tolist(),
                    "mape": cell_mape.tolist(),
                })
            except (Singular, NotPositiveDefinite, NonFiniteInput,
                    InsufficientData) as exc:
                rows.append({
                    "model": label,
                    "order": order,
                    "delta": delta,
                    "status": f"failed: {type(exc).__name__}",
                    "msse": [float("nan")] * p,
                    "mape": [float("nan")] * p,
                })
    return rows


def cmd_scan(args) -> int:
    data = read_panel(args.csv)
    orders = parse_ints(args.orders, "orders")
    deltas = parse_floats(args.deltas, "deltas") if args.deltas is not None else \
        [round(0.1 + 0.05 * i, 2) for i in range(18)]
    s0 = np.diag(parse_floats(args.s0_diag, "s0-diag")) if args.s0_diag else None
    rows = scan_grid(data, orders, deltas, s0, args.p0_scale, args.n0)

    p = data.shape[1]
    out = _outdir(args)
    header = (["model", "order", "delta", "status"]
              + [f"msse_{i + 1}" for i in range(p)]
              + [f"mape_{i + 1}" for i in range(p)])
    _write_csv(
        os.path.join(out, "scan.csv"),
        header,
        (
            [r["model"], r["order"], _fmt(r["delta"]), r["status"]]
            + [_fmt(v) for v in r["msse"]]
            + [_fmt(v) for v in r["mape"]]
            for r in rows
        ),
    )
    _write_json(os.path.join(out, "scan.json"), {"rows": rows})
    ok = sum(1 for r in rows if r["status"] == "ok")
    print(f"scan wrote {len(rows)} rows ({ok} ok, {len(rows) - ok} failed)")
    return 0


# ---------------------------------------------------------------- mcmc-compare

def cmd_mcmc_compare(args) -> int:
    sigma = parse_vech(args.sigma, "sigma")
    p = sigma.shape[0]
    if args.iterations < 1:
        raise ValidationError("iterations: must be >= 1")
    checkpoints = parse_ints(args.checkpoints, "checkpoints") if args.checkpoints \
        else [n for n in range(100, args.len + 1, 50)]
    if not checkpoints:
        raise ValidationError("checkpoints: at least one checkpoint is required")
    if max(checkpoints) > args.len:
        raise ValidationError(
            f"checkpoints: {max(checkpoints)} exceeds series length {args.len}"
        )
    s0 = parse_vech(args.s0, "s0") if args.s0 else np.eye(p)

    spec = local_level(p, evolution=args.omega * np.eye(p))
    m0 = np.zeros(p)
    P0 = args.p0_scale * np.eye(p)
    y, _ = generate(spec, sigma, args.len, args.seed, m0, P0)

    online = run_filter(spec, y, m0, P0, s0, args.n0)

    results = []
    for idx, n in enumerate(checkpoints):
        cfg = GibbsConfig(
            iterations=args.iterations,
            burn_in=args.burn_in,
            n0=args.n0,
            s0=s0,
            m0=m0,
            p0=P0,
            seed=args.seed + 1000 * (idx + 1),
        )
        chain = gibbs_run(y[:n], spec, cfg)
        online_s = online.obs_covs[n - 1]
        mcmc_s = chain.sigma_mean
        gap = np.linalg.norm(online_s - mcmc_s) / np.linalg.norm(mcmc_s)

        # forecast errors under the chain's estimate: refilter with it frozen
        frozen = run_filter(spec, y[:n], m0, P0, mcmc_s, args.n0, update_s=False)
        results.append({
            "n": n,
            "real": sigma.tolist(),
            "mcmc": mcmc_s.tolist(),
            "online": online_s.tolist(),
            "gap_rel": float(gap),
            "last_error_online": online.errors[n - 1].tolist(),
            "last_error_mcmc": frozen.errors[-1].tolist(),
            "mean_sq_error_online": (online.errors[:n] ** 2).mean(axis=0).tolist(),
            "mean_sq_error_mcmc": (frozen.errors ** 2).mean(axis=0).tolist(),
        })

    out = _outdir(args)
    _write_json(os.path.join(out, "mcmc_compare.json"), {"checkpoints": results})
    rows = []
    for r in results:
        for j in range(p):
            for i in range(j, p):
                rows.append([r["n"], f"s{i + 1}{j + 1}", _fmt(r["real"][i][j]),
                             _fmt(r["mcmc"][i][j]), _fmt(r["online"][i][j])])
        rows.append([r["n"], "gap_rel", "", "", _fmt(r["gap_rel"])])
    _write_csv(
        os.path.join(out, "mcmc_compare.csv"),
        ["n", "entry", "real", "mcmc", "online"],
        rows,
    )

    print(f"{'n':>5} {'entry':>8} {'real':>12} {'mcmc':>12} {'online':>12}")
    for r in results:
        for j in range(p):
            for i in range(j, p):
                print(f"{r['n']:>5} {f's{i + 1}{j + 1}':>8} "
                      f"{_fmt(r['real'][i][j]):>12} {_fmt(r['mcmc'][i][j]):>12} "
                      f"{_fmt(r['online'][i][j]):>12}")
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covdlm",
        description="On-line covariance estimation for multivariate "
                    "Gaussian state-space models",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--outdir", default=None,
                        help="output directory (default: $COVDLM_OUTDIR or .)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--n0", type=float, default=1.0,
                        help="prior evidence count")
        sp.add_argument("--p0-scale", type=float, default=1000.0,
                        help="diffuse state prior scale")

    p_study = sub.add_parser("study", help="Monte Carlo replication study")
    p_study.add_argument("--family", choices=("LL", "LT", "SE"), default="LL")
    p_study.add_argument("--sigma", required=True,
                         help="true covariance, lower-triangle entries (e.g. 2,3,5)")
    p_study.add_argument("--s0", default=None,
                         help="prior covariance estimate, lower-triangle entries")
    p_study.add_argument("--omega", type=float, default=1.0,
                         help="state evolution variance (scalar times identity)")
    p_study.add_argument("--reps", type=int, default=1000)
    p_study.add_argument("--len", type=int, default=500)
    p_study.add_argument("--snapshots", default=None, help="e.g. 100,500")
    p_study.add_argument("--period", type=int, default=12)
    add_common(p_study)
    p_study.set_defaults(func=cmd_study)

    p_fit = sub.add_parser("fit", help="fit one model over a CSV panel")
    p_fit.add_argument("csv")
    p_fit.add_argument("--model", choices=FIT_FAMILIES, default="TVVAR")
    p_fit.add_argument("--order", type=int, default=1, help="VAR/TVVAR order")
    p_fit.add_argument("--delta", type=float, default=None, help="discount factor")
    p_fit.add_argument("--period", type=int, default=12)
    p_fit.add_argument("--omega", type=float, default=1.0,
                       help="evolution variance for LL/LT/SE when no delta given")
    p_fit.add_argument("--s0", default=None,
                       help="prior covariance estimate, lower-triangle entries")
    p_fit.add_argument("--s0-diag", default=None,
                       help="rough variances for a diagonal prior estimate")
    add_common(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_scan = sub.add_parser("scan", help="grid of VAR/TVVAR fits")
    p_scan.add_argument("csv")
    p_scan.add_argument("--orders", default="1-10", help="e.g. 1-10 or 1,2,3")
    p_scan.add_argument("--deltas", default=None,
                        help="discount grid (default 0.1..0.95 step 0.05); "
                             "1.0 rows are the static model")
    p_scan.add_argument("--s0-diag", default=None,
                        help="rough variances for a diagonal prior estimate")
    add_common(p_scan)
    p_scan.set_defaults(func=cmd_scan)

    p_cmp = sub.add_parser("mcmc-compare",
                           help="on-line estimate vs Gibbs sampler on one series")
    p_cmp.add_argument("--sigma", required=True,
                       help="true covariance, lower-triangle entries")
    p_cmp.add_argument("--s0", default=None)
    p_cmp.add_argument("--omega", type=float, default=1.0)
    p_cmp.add_argument("--len", type=int, default=500)
    p_cmp.add_argument("--checkpoints", default=None, help="e.g. 100,300,500")
    p_cmp.add_argument("--iterations", type=int, default=5000)
    p_cmp.add_argument("--burn-in", type=int, default=1000)
    add_common(p_cmp)
    p_cmp.set_defaults(func=cmd_mcmc_compare)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CovDlmError as exc:
        _emit_error(exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
