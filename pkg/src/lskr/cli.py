"""Command-line entry point.

Subcommands: simulate | fit | transfer | cv | empirical | rates. Every
command that writes files puts them in one output directory together
with a manifest naming each artifact and the digest of the resolved
configuration, so identical configurations are checkable byte for byte.
Data CSVs use full round-trip float formatting.

Exit codes: 0 success, 2 configuration or validation error, 3 data
error, 4 numeric or infeasibility error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict

import numpy as np

from . import __version__
from .bandwidth import CvPlan, cv_select, default_grid
from .datagen import (
    BIAS_FAMILIES,
    ESTIMATOR_IDS,
    SimConfig,
    load_sim_config,
    run_sweep,
)
from .empirical import load_series, run_empirical
from .errors import ConfigError, LskrError
from .estimators import Domain, KernelFit, Method, Sample, fit_surface
from .kernels import Bandwidth, KernelSpec
from .metrics import GridSpec, reports_to_csv
from .transfer import fit_transfer, oracle_rate, residual_sample, tl_surface

DESK_SCALE = dict(t0=500, t1=5000, replications=20)
PAPER_SCALE = dict(t0=2000, t1=20000, replications=50)


def _fmt(x: float) -> str:
    return repr(float(x))


class _Manifest:
    def __init__(self, command: str, out_dir: str, seed: int, resolved_config: dict):
        self.command = command
        self.out_dir = out_dir
        self.seed = seed
        self.config = resolved_config
        self.started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        self.outputs: dict[str, str] = {}
        os.makedirs(out_dir, exist_ok=True)

    def write_text(self, name: str, text: str) -> str:
        path = os.path.join(self.out_dir, name)
        data = text.encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(data)
        self.outputs[name] = hashlib.sha256(data).hexdigest()
        return path

    def finish(self) -> str:
        digest = hashlib.sha256(
            json.dumps(self.config, sort_keys=True).encode("utf-8")
        ).hexdigest()
        manifest = {
            "command": self.command,
            "config_digest": digest,
            "seed": self.seed,
            "tool_version": __version__,
            "started_at": self.started,
            "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "outputs": self.outputs,
        }
        path = os.path.join(self.out_dir, "manifest.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def _load_sample_csv(path: str, label: Domain) -> Sample:
    """Read a u,x,y CSV into a sample (one covariate axis)."""
    import csv as _csv

    u, x, y = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = _csv.DictReader(fh)
        need = {"u", "x", "y"}
        if reader.fieldnames is None or not need.issubset(reader.fieldnames):
            raise ConfigError(f"{path}: expected header with columns u,x,y")
        for row in reader:
            u.append(float(row["u"]))
            x.append(float(row["x"]))
            y.append(float(row["y"]))
    order = np.argsort(np.asarray(u), kind="stable")
    return Sample(
        u=np.asarray(u)[order], x=np.asarray(x)[order], y=np.asarray(y)[order], domain_label=label
    )


def _surface_csv(surface) -> str:
    lines = ["u,x,value,missing"]
    un, xn = surface.axes
    for i, uv in enumerate(un):
        for j, xv in enumerate(xn):
            miss = bool(surface.missing[i, j])
            val = "" if miss else _fmt(surface.values[i, j])
            lines.append(f"{_fmt(uv)},{_fmt(xv)},{val},{int(miss)}")
    return "\n".join(lines) + "\n"


def _bandwidth_args(parser: argparse.ArgumentParser, prefix: str):
    parser.add_argument(f"--{prefix}-time", type=float, default=None)
    parser.add_argument(f"--{prefix}-x", type=float, default=None)


def _resolve_bw(args, prefix: str) -> Bandwidth | None:
    ht = getattr(args, f"{prefix}_time")
    hx = getattr(args, f"{prefix}_x")
    if ht is None and hx is None:
        return None
    if ht is None or hx is None:
        raise ConfigError(f"--{prefix}-time and --{prefix}-x must be given together")
    return Bandwidth(ht, (hx,))


def _common(parser: argparse.ArgumentParser, with_out=True):
    parser.add_argument("--seed", type=int, default=0, help="base seed (64-bit)")
    parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    if with_out:
        parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--config", default=None, help="flat key=value config file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lskr",
        description="Kernel regression and transfer learning for locally stationary series",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the replicated bias-sweep experiment")
    _common(p)
    p.add_argument("--t0", type=int, default=None)
    p.add_argument("--t1", type=int, default=None)
    p.add_argument("--noise-sd", type=float, default=None)
    p.add_argument("--gamma-min", type=float, default=None)
    p.add_argument("--gamma-max", type=float, default=None)
    p.add_argument("--gamma-step", type=float, default=None)
    p.add_argument("--families", default=None, help="comma list from: " + ",".join(BIAS_FAMILIES))
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--grid-n", type=int, default=None)
    p.add_argument("--paper-scale", action="store_true", help="T0=2000, T1=20000, 50 replications")
    p.add_argument("--estimators", default=",".join(ESTIMATOR_IDS))
    p.add_argument("--cv-per-axis", type=int, default=5)
    p.add_argument("--cv-folds", type=int, default=10)

    p = sub.add_parser("fit", help="fit one estimator and write its surface")
    _common(p)
    p.add_argument("--data", required=True, help="u,x,y CSV")
    p.add_argument("--method", choices=["nw", "ll"], required=True)
    _bandwidth_args(p, "h")
    p.add_argument("--cv", action="store_true", help="select bandwidths by cross-validation")
    p.add_argument("--grid-n", type=int, default=50)
    p.add_argument("--cv-per-axis", type=int, default=8)
    p.add_argument("--cv-folds", type=int, default=10)

    p = sub.add_parser("transfer", help="fit the transfer estimator and write surfaces")
    _common(p)
    p.add_argument("--target", required=True, help="target u,x,y CSV")
    p.add_argument("--source", required=True, help="source u,x,y CSV")
    p.add_argument("--method", choices=["nw", "ll"], required=True)
    _bandwidth_args(p, "h1")
    _bandwidth_args(p, "htl")
    p.add_argument("--cv", action="store_true")
    p.add_argument("--grid-n", type=int, default=50)
    p.add_argument("--cv-per-axis", type=int, default=8)
    p.add_argument("--cv-folds", type=int, default=10)

    p = sub.add_parser("cv", help="cross-validate bandwidths on a sample")
    _common(p)
    p.add_argument("--data", required=True, help="u,x,y CSV")
    p.add_argument("--method", choices=["nw", "ll"], required=True)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--per-axis", type=int, default=8)

    p = sub.add_parser("empirical", help="run the two-domain prediction experiment")
    _common(p)
    p.add_argument("--target-response", required=True, help="weekly date,value CSV")
    p.add_argument("--source-response", required=True, help="daily date,value CSV")
    p.add_argument("--crude", default=None, help="daily date,value CSV shared covariate")
    p.add_argument("--source-covariate", default=None, help="daily related-series CSV")
    p.add_argument("--target-covariate", default=None, help="weekly related-series CSV")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--cv-per-axis", type=int, default=8)

    p = sub.add_parser("rates", help="oracle bandwidth and rate calculator")
    p.add_argument("--t0", type=int, required=True)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--eta2", type=float, required=True)
    return parser


def cmd_simulate(args) -> int:
    base = dict(DESK_SCALE)
    if args.config:
        cfg = load_sim_config(args.config)
        base = dict(
            t0=cfg.t0,
            t1=cfg.t1,
            noise_sd=cfg.noise_sd,
            gamma_sweep=cfg.gamma_sweep,
            families=cfg.families,
            replications=cfg.replications,
            grid_n=cfg.grid_n,
            base_seed=cfg.base_seed,
        )
    if args.paper_scale:
        base.update(PAPER_SCALE)
    for key, flag in (
        ("t0", args.t0),
        ("t1", args.t1),
        ("noise_sd", args.noise_sd),
        ("replications", args.replications),
        ("grid_n", args.grid_n),
    ):
        if flag is not None:
            base[key] = flag
    if args.families is not None:
        base["families"] = tuple(f.strip() for f in args.families.split(",") if f.strip())
    if any(v is not None for v in (args.gamma_min, args.gamma_max, args.gamma_step)):
        lo = args.gamma_min if args.gamma_min is not None else -10.0
        hi = args.gamma_max if args.gamma_max is not None else 10.0
        step = args.gamma_step if args.gamma_step is not None else 2.0
        if step <= 0 or hi < lo:
            raise ConfigError("need gamma_step > 0 and gamma_max >= gamma_min")
        n = int(np.floor((hi - lo) / step + 1e-9))
        base["gamma_sweep"] = tuple(lo + k * step for k in range(n + 1))
    base["base_seed"] = args.seed
    cfg = SimConfig(**base)

    suite = tuple(e.strip() for e in args.estimators.split(",") if e.strip())
    resolved = {
        **{k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(cfg).items()},
        "estimators": list(suite),
        "cv_per_axis": args.cv_per_axis,
        "cv_folds": args.cv_folds,
    }
    man = _Manifest("simulate", args.out, args.seed, resolved)
    result = run_sweep(
        cfg,
        suite=suite,
        jobs=args.jobs,
        cv_folds=args.cv_folds,
        cv_per_axis=args.cv_per_axis,
    )
    man.write_text("errors.csv", reports_to_csv(result.reports))
    summary = ["estimator,family,gamma,mean_median_sq_err,n_replications"]
    for rep in result.reports:
        summary.append(
            f"{rep.estimator_id},{rep.family},{_fmt(rep.gamma)},"
            f"{_fmt(rep.mean_of_medians)},{len(rep.per_replication_median)}"
        )
    man.write_text("summary.csv", "\n".join(summary) + "\n")
    if result.failures:
        man.write_text("failures.txt", "\n".join(result.failures) + "\n")
    man.finish()
    print(f"wrote {len(result.reports)} configuration summaries to {args.out}")
    return 0


def _cv_on(sample: Sample, spec: KernelSpec, method: Method, folds: int, per_axis: int):
    plan = CvPlan(
        grid=tuple(default_grid(sample, per_axis=per_axis)), folds=folds, method=method
    )
    return cv_select(sample, spec, plan)


def cmd_fit(args) -> int:
    spec = KernelSpec()
    sample = _load_sample_csv(args.data, Domain.TARGET)
    method = Method(args.method)
    bw = _resolve_bw(args, "h")
    if bw is None:
        if not args.cv:
            raise ConfigError("give --h-time/--h-x or --cv")
        bw = _cv_on(sample, spec, method, args.cv_folds, args.cv_per_axis).best
    resolved = {
        "data": os.path.abspath(args.data),
        "method": method.value,
        "h_time": bw.h_time,
        "h_x": bw.h_cov[0],
        "grid_n": args.grid_n,
    }
    man = _Manifest("fit", args.out, args.seed, resolved)
    lo, hi = float(sample.x.min()), float(sample.x.max())
    grid = GridSpec(args.grid_n, (0.0, 1.0), ((lo, hi),))
    surf = fit_surface(sample, spec, bw, grid, method)
    man.write_text("surface.csv", _surface_csv(surf))
    man.finish()
    print(f"fitted {method.value} surface with h_time={bw.h_time}, h_x={bw.h_cov[0]}")
    return 0


def cmd_transfer(args) -> int:
    spec = KernelSpec()
    target = _load_sample_csv(args.target, Domain.TARGET)
    source = _load_sample_csv(args.source, Domain.SOURCE)
    method = Method(args.method)
    h1 = _resolve_bw(args, "h1")
    h_tl = _resolve_bw(args, "htl")
    if h1 is None or h_tl is None:
        if not args.cv:
            raise ConfigError("give --h1-*/--htl-* bandwidths or --cv")
        if h1 is None:
            h1 = _cv_on(source, spec, method, args.cv_folds, args.cv_per_axis).best
        if h_tl is None:
            resid, _ = residual_sample(target, KernelFit(source, spec, h1, method))
            h_tl = _cv_on(resid, spec, method, args.cv_folds, args.cv_per_axis).best
    resolved = {
        "target": os.path.abspath(args.target),
        "source": os.path.abspath(args.source),
        "method": method.value,
        "h1": [h1.h_time, h1.h_cov[0]],
        "h_tl": [h_tl.h_time, h_tl.h_cov[0]],
        "grid_n": args.grid_n,
    }
    man = _Manifest("transfer", args.out, args.seed, resolved)
    fit = fit_transfer(target, source, spec, h1, h_tl, method)
    lo = float(min(target.x.min(), source.x.min()))
    hi = float(max(target.x.max(), source.x.max()))
    grid = GridSpec(args.grid_n, (0.0, 1.0), ((lo, hi),))
    man.write_text("surface.csv", _surface_csv(tl_surface(fit, grid)))
    man.write_text("bias_surface.csv", _surface_csv(fit.bias_fit.surface(grid)))
    man.finish()
    print(
        f"transfer fit done; {fit.n_residual_skipped} target residuals skipped; "
        f"h1=({h1.h_time}, {h1.h_cov[0]}), h_tl=({h_tl.h_time}, {h_tl.h_cov[0]})"
    )
    return 0


def cmd_cv(args) -> int:
    spec = KernelSpec()
    sample = _load_sample_csv(args.data, Domain.TARGET)
    method = Method(args.method)
    result = _cv_on(sample, spec, method, args.folds, args.per_axis)
    resolved = {
        "data": os.path.abspath(args.data),
        "method": method.value,
        "folds": args.folds,
        "per_axis": args.per_axis,
    }
    man = _Manifest("cv", args.out, args.seed, resolved)
    lines = ["h_time,h_x,score,selected"]
    for cand, score in result.scores.items():
        sel = int(cand == result.best)
        lines.append(f"{_fmt(cand.h_time)},{_fmt(cand.h_cov[0])},{_fmt(score)},{sel}")
    man.write_text("scores.csv", "\n".join(lines) + "\n")
    man.finish()
    print(
        f"selected h_time={result.best.h_time}, h_x={result.best.h_cov[0]} "
        f"({result.n_skipped} held-out points skipped)"
    )
    return 0


def cmd_empirical(args) -> int:
    if args.crude is None and (args.source_covariate is None or args.target_covariate is None):
        raise ConfigError("give --crude, or both --source-covariate and --target-covariate")
    mode = "crude" if args.crude is not None else "related"
    resolved = {
        "mode": mode,
        "target_response": os.path.abspath(args.target_response),
        "source_response": os.path.abspath(args.source_response),
        "folds": args.folds,
        "cv_per_axis": args.cv_per_axis,
    }
    man = _Manifest("empirical", args.out, args.seed, resolved)
    result = run_empirical(
        target_response=load_series(args.target_response),
        source_response=load_series(args.source_response),
        mode=mode,
        crude=load_series(args.crude) if args.crude else None,
        source_related=load_series(args.source_covariate) if args.source_covariate else None,
        target_related=load_series(args.target_covariate) if args.target_covariate else None,
        folds=args.folds,
        cv_per_axis=args.cv_per_axis,
    )

    table = ["estimator,nw_l2,nw_linf,ll_l2,ll_linf"]
    names = {"baseline": "Baseline", "transfer": "Transfer Learning", "pooled": "Pooled"}
    for row in ("baseline", "transfer", "pooled"):
        nw = result.scores[(row, "nw")]
        ll = result.scores[(row, "ll")]
        table.append(
            f"{names[row]},{_fmt(nw.l2)},{_fmt(nw.linf)},{_fmt(ll.l2)},{_fmt(ll.linf)}"
        )
    man.write_text("results.csv", "\n".join(table) + "\n")

    triple_lines = ["u,x,y,split"]
    for sample, split in ((result.train, "train"), (result.test, "test")):
        for u, x, y in zip(sample.u, sample.x[:, 0], sample.y):
            triple_lines.append(f"{_fmt(u)},{_fmt(x)},{_fmt(y)},{split}")
    man.write_text("triples_target.csv", "\n".join(triple_lines) + "\n")
    src_lines = ["u,x,y,split"]
    for u, x, y in zip(result.source.u, result.source.x[:, 0], result.source.y):
        src_lines.append(f"{_fmt(u)},{_fmt(x)},{_fmt(y)},source")
    man.write_text("triples_source.csv", "\n".join(src_lines) + "\n")

    for method, preds in result.predictions.items():
        lines = ["u,x,y_true,y_baseline,y_transfer,y_pooled"]
        for i in range(len(preds["u"])):
            cells = [
                _fmt(preds["u"][i]),
                _fmt(preds["x"][i]),
                _fmt(preds["y_true"][i]),
            ]
            for col in ("y_baseline", "y_transfer", "y_pooled"):
                v = preds[col][i]
                cells.append("" if not np.isfinite(v) else _fmt(v))
            lines.append(",".join(cells))
        man.write_text(f"predictions_{method}.csv", "\n".join(lines) + "\n")
    man.finish()
    print("\n".join(table))
    return 0


def cmd_rates(args) -> int:
    result = oracle_rate(args.t0, args.d, args.r, args.eta2)
    print(f"Case {result.case}")
    print(f"bandwidth_order {_fmt(result.h_order)} (T0 exponent {_fmt(result.h_exponent)})")
    print(f"rate_order {_fmt(result.rate_order)} (T0 exponent {_fmt(result.rate_exponent)})")
    return 0


_HANDLERS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "transfer": cmd_transfer,
    "cv": cmd_cv,
    "empirical": cmd_empirical,
    "rates": cmd_rates,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except LskrError as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(payload), file=sys.stderr)
        return exc.exit_code
    except (ValueError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
