"""Command-line front end: ``usrd {bounds,curve,simulate,compare} --model FILE ...``.

Exit codes: 0 ok, 2 model error, 3 every grid point infeasible,
4 simulation precondition failed, 5 ordering/shape violation found.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import estimation_sim as sim
from .errors import ModelError, SignalingImpossible, UnknownTau
from .reports import (
    BELOW_MIN,
    SAMPLER_ORDER,
    SamplerSpec,
    compare_samplers,
    sweep,
    to_json,
    write_csv,
)
from .source_model import SourceModel, load_model, subsets_of_size
from .usrdf_fixed import BAYES, NONBAYES, normalize_setting

EXIT_OK, EXIT_MODEL, EXIT_INFEASIBLE, EXIT_SIM, EXIT_VIOLATION = 0, 2, 3, 4, 5
AUTO_POINTS = 17


@dataclass
class RunConfig:
    command: str
    model: str
    sampler: str | None
    setting: str
    k: int | None
    delta: str
    out: str | None
    seed: int
    trials: int
    fmt: str
    n: str
    tau: str | None
    tol_gap: float
    threads: int


def threads_from_env() -> int:
    """USRD_THREADS caps parallelism (0 = auto).  Work currently runs serially either way."""
    raw = os.environ.get("USRD_THREADS", "0").strip() or "0"
    n = int(raw)
    if n < 0:
        raise ValueError("USRD_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def parse_grid(spec: str, bounds: tuple[float, float] | None = None) -> np.ndarray:
    """``min:max:count``, a comma list, a single value, or ``auto`` (17 points across ``bounds``)."""
    spec = str(spec).strip()
    if spec == "auto":
        if bounds is None:
            raise ValueError("auto grid needs bounds")
        return np.linspace(bounds[0], bounds[1], AUTO_POINTS)
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError("grid spec must be min:max:count")
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise ValueError("grid count must be >= 1")
        return np.array([lo]) if count == 1 else np.linspace(lo, hi, count)
    vals = [float(v) for v in spec.split(",") if v.strip()]
    if not vals:
        raise ValueError("empty grid")
    return np.array(sorted(vals))


def _settings(setting: str) -> list[str]:
    return [BAYES, NONBAYES] if setting == "both" else [normalize_setting(setting)]


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _need_k(cfg: RunConfig, default: int = 1) -> int:
    return int(cfg.k) if cfg.k is not None else default


# -- commands ------------------------------------------------------------------
def cmd_bounds(cfg: RunConfig, model: SourceModel) -> int:
    k = _need_k(cfg)
    if cfg.sampler:
        specs = [SamplerSpec.parse(cfg.sampler, k)]
    else:
        specs = [SamplerSpec("fs", A, k) for A in subsets_of_size(model.m, k)]
        specs += [SamplerSpec("irs", None, k), SamplerSpec("mrs", None, k)]
    rows = []
    for spec in specs:
        for s in _settings(cfg.setting):
            lo, hi = spec.bounds(model, s)
            rows.append({"sampler": spec.label, "k": spec.k, "setting": s, "delta_min": lo, "delta_max": hi})
    if cfg.fmt == "json":
        _emit(to_json(rows), cfg.out)
    else:
        lines = ["sampler,k,setting,delta_min,delta_max"]
        lines += [f"{r['sampler']},{r['k']},{r['setting']},{r['delta_min']!r},{r['delta_max']!r}" for r in rows]
        _emit("\n".join(lines), cfg.out)
    return EXIT_OK


def cmd_curve(cfg: RunConfig, model: SourceModel) -> int:
    spec = SamplerSpec.parse(cfg.sampler or "fs:1", cfg.k)
    if spec.kind != "fs" and spec.k is None:
        spec = SamplerSpec(spec.kind, None, 1)
    curves = []
    for s in _settings(cfg.setting):
        grid = parse_grid(cfg.delta, spec.bounds(model, s) if cfg.delta == "auto" else None)
        curves.append(sweep(model, spec, s, grid))
    _emit(write_csv(curves) if cfg.fmt == "csv" else to_json(curves if len(curves) > 1 else curves[0]), cfg.out)
    if all(p.status == BELOW_MIN for c in curves for p in c.points):
        print("error: every grid point is infeasible", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def _tau(model: SourceModel, text):
    if text is None:
        return None
    for cand in (text, _maybe_int(text)):
        if cand in model.theta:
            return cand
    raise UnknownTau(f"unknown parameter label {text!r}")


def _maybe_int(text):
    try:
        return int(text)
    except ValueError:
        return text


def cmd_simulate(cfg: RunConfig, model: SourceModel) -> int:
    ns = [int(v) for v in str(cfg.n).split(",") if v.strip()]
    tau = _tau(model, cfg.tau)
    sampler = (cfg.sampler or "full").lower()
    k = _need_k(cfg)
    if sampler.startswith("fs:"):
        rep = sim.simulate_fs_ml(model, SamplerSpec.parse(sampler).A, tau, ns, cfg.trials, cfg.seed)
    elif sampler == "irs":
        rep = sim.simulate_irs_phase1(model, k, tau, ns, cfg.trials, cfg.seed)
    elif sampler == "mrs":
        rep = sim.simulate_mrs_signaling(model, tau, ns, cfg.trials, cfg.seed, k=k)
    elif sampler == "full":
        rep = sim.simulate_full_ml(model, tau, ns, cfg.trials, cfg.seed)
    else:
        raise ValueError(f"unknown simulation sampler {sampler!r}; use fs:<set>, irs, mrs or full")
    if cfg.fmt == "csv":
        lines = ["n,error,trials,seed,scheme"]
        lines += [f"{n},{e!r},{rep.trials},{rep.seed},{rep.descriptor['scheme']}" for n, e in zip(rep.ns, rep.errors)]
        _emit("\n".join(lines), cfg.out)
    else:
        _emit(to_json(rep.as_dict()), cfg.out)
    return EXIT_OK


def cmd_compare(cfg: RunConfig, model: SourceModel) -> int:
    k = _need_k(cfg)
    if cfg.delta == "auto":
        lo, hi = np.inf, -np.inf
        for s in _settings(cfg.setting):
            for name in SAMPLER_ORDER:
                b = SamplerSpec(name, None, k).bounds(model, s)
                lo, hi = min(lo, b[0]), max(hi, b[1])
        grid = parse_grid("auto", (lo, hi))
    else:
        grid = parse_grid(cfg.delta)
    report = compare_samplers(model, k, cfg.setting, grid, tol=cfg.tol_gap)
    if cfg.fmt == "csv":
        _emit(write_csv(list(report.curves.values())), cfg.out)
    else:
        _emit(to_json(report), cfg.out)
    if report.violations:
        for v in report.violations:
            print("violation: " + json.dumps(v, default=float), file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


COMMANDS = {"bounds": cmd_bounds, "curve": cmd_curve, "simulate": cmd_simulate, "compare": cmd_compare}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="usrd", description="Universal sampling rate-distortion toolkit")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("bounds", "feasible distortion range per sampler and setting"),
                        ("curve", "sweep one sampler class over a distortion grid"),
                        ("simulate", "Monte Carlo parameter-estimation error"),
                        ("compare", "MRS vs IRS vs best fixed set, with ordering checks")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--model", required=True, help="model JSON file")
        p.add_argument("--sampler", default=None, help="fs:<comma-set> | bestfs | irs | mrs (simulate also: full)")
        p.add_argument("--setting", default="both" if name in ("bounds", "compare") else "bayes",
                       choices=["bayes", "nonbayes", "both"])
        p.add_argument("--k", type=int, default=None, help="sampling set size (default 1)")
        p.add_argument("--delta", default="auto", help="min:max:count | comma list | auto")
        p.add_argument("--out", default=None, help="output file (default stdout)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--trials", type=int, default=sim.DEFAULT_TRIALS)
        p.add_argument("--format", dest="fmt", choices=["csv", "json"],
                       default="json" if name == "simulate" else "csv")
        p.add_argument("--n", default="20,200,2000", help="blocklengths for simulate")
        p.add_argument("--tau", default=None, help="true parameter label (default: drawn from the prior)")
        p.add_argument("--tol-gap", type=float, default=1e-6,
                       help="tolerance for ordering/shape checks (a negative value forces violations)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        threads = threads_from_env()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    cfg = RunConfig(args.command, args.model, args.sampler, args.setting, args.k, args.delta, args.out,
                    args.seed, args.trials, args.fmt, args.n, args.tau, args.tol_gap, threads)
    if cfg.trials < 1:
        print("error: --trials must be >= 1", file=sys.stderr)
        return 1
    try:
        model = load_model(cfg.model)
    except ModelError as exc:
        print(f"error: {type(exc).__name__} (field: {exc.field}): {exc}", file=sys.stderr)
        return EXIT_MODEL
    except OSError as exc:
        print(f"error: MalformedModel (field: model): cannot read {cfg.model}: {exc.strerror}", file=sys.stderr)
        return EXIT_MODEL
    try:
        return COMMANDS[cfg.command](cfg, model)
    except SignalingImpossible as exc:
        print(f"error: SignalingImpossible: {exc}", file=sys.stderr)
        return EXIT_SIM
    except (UnknownTau, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
