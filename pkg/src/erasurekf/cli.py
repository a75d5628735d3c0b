"""Command line entry point: ``erasurekf {analyze,simulate,sweep,sample,staticgain}``.

Exit codes: 0 success, 1 input error, 2 exact enumeration beyond its cap.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import DEFAULT_SEED, AnalysisConfig, SimConfig, StaticGainConfig
from .model import SystemSpec
from .sampling import (
    JITTER_MODES,
    ContinuousSpec,
    continuous_critical,
    discretize_nonuniform,
    sample_jitter,
    uniform_sampled_spec,
    uniform_vs_nonuniform_report,
)
from .sim import TimeVaryingModel, run_ensemble, sweep_threshold
from .specfile import SpecError, SpecFile, finite_json, parse_spec
from .spectral import (
    EnumerationCapError,
    ParallelSpec,
    bound_sandwich,
    critical_erasure,
    parallel_stability_margin,
)
from .staticgain import max_static_gain_erasure

EXIT_OK, EXIT_INPUT, EXIT_CAP = 0, 1, 2


def parse_grid(text: str) -> list[float]:
    """``"0.05,0.1,0.2"`` or ``"start:stop:step"`` (stop inclusive)."""
    text = text.strip()
    if ":" in text:
        parts = [float(x) for x in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ValueError(f"bad grid range {text!r}")
        start, stop, step = parts
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(n)]
    return [float(x) for x in text.split(",") if x.strip()]


def _analysis_cfg(sf: SpecFile, args) -> AnalysisConfig:
    cfg = sf.analysis_config()
    if args.tol is not None:
        cfg = replace(cfg, rel_tol=args.tol)
    if args.max_period is not None:
        cfg = replace(cfg, max_period=args.max_period)
    return cfg


def _sim_cfg(sf: SpecFile, args) -> SimConfig:
    c = sf.config
    pick = lambda flag, key, default: flag if flag is not None else c.get(key, default)
    return SimConfig(trials=pick(args.trials, "trials", SimConfig.trials),
                     horizon=pick(args.horizon, "horizon", SimConfig.horizon),
                     seed=pick(args.seed, "seed", DEFAULT_SEED),
                     workers=args.workers)


def _write(out_dir: Path, name: str, text: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(text)
    return path


def _json(obj) -> str:
    return json.dumps(finite_json(obj), indent=2) + "\n"


def _sim_model(sf: SpecFile, args, horizon: int, seed: int) -> TimeVaryingModel:
    spec = sf.spec
    if isinstance(spec, SystemSpec):
        return TimeVaryingModel.from_spec(spec)
    if isinstance(spec, ContinuousSpec):
        mode = args.jitter_mode or spec.jitter_mode
        jit = sample_jitter(mode, horizon + 1, spec.T, seed, spec.jitter_density)
        return discretize_nonuniform(spec, jit, horizon).model
    raise SpecError("simulation needs a discrete or continuous spec")


def cmd_analyze(sf: SpecFile, args) -> dict:
    cfg = _analysis_cfg(sf, args)
    spec = sf.spec
    if isinstance(spec, ParallelSpec):
        return {"kind": "parallel", "parallel_stability_margin":
                parallel_stability_margin(spec, config=cfg).to_dict()}
    if isinstance(spec, ContinuousSpec):
        rep = critical_erasure(uniform_sampled_spec(spec, cfg), config=cfg)
        out = {"kind": "continuous", "uniform": rep.to_dict(),
               "nonuniform": continuous_critical(spec.with_mode(
                   spec.jitter_mode if spec.jitter_mode != "none" else "weyl_sqrt2"), cfg.rel_tol)}
        return out
    rep = critical_erasure(spec, config=cfg)
    out = {"kind": "discrete", **rep.to_dict()}
    lower, upper = bound_sandwich(spec)
    out["bounds"] = {"lower": lower, "upper": upper}
    return out


def cmd_simulate(sf: SpecFile, args) -> str:
    cfg = _sim_cfg(sf, args)
    model = _sim_model(sf, args, cfg.horizon, cfg.seed)
    summ = run_ensemble(model, args.pe, cfg).summary()
    lines = ["step,mean_trace,q10,q90"]
    for n in range(cfg.horizon):
        lines.append(f"{n},{summ['mean'][n]!r},{summ['q10'][n]!r},{summ['q90'][n]!r}")
    return "\n".join(lines) + "\n"


def cmd_sweep(sf: SpecFile, args):
    cfg = _sim_cfg(sf, args)
    model = _sim_model(sf, args, cfg.horizon, cfg.seed)
    res = sweep_threshold(model, parse_grid(args.grid), cfg)
    return res.csv(), res.interval_dict()


def cmd_sample(sf: SpecFile, args) -> dict:
    if not isinstance(sf.spec, ContinuousSpec):
        raise SpecError("sample needs a continuous spec")
    cfg = _sim_cfg(sf, args)
    return uniform_vs_nonuniform_report(sf.spec, parse_grid(args.grid), cfg, args.jitter_mode,
                                        _analysis_cfg(sf, args))


def cmd_staticgain(sf: SpecFile, args) -> dict:
    if not isinstance(sf.spec, SystemSpec):
        raise SpecError("staticgain needs a discrete spec")
    seed = args.seed if args.seed is not None else sf.config.get("seed", DEFAULT_SEED)
    return max_static_gain_erasure(sf.spec, cfg=StaticGainConfig(seed=seed)).to_dict()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="erasurekf", description="Kalman filtering under erased observations")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("spec", help="spec JSON file")
        sp.add_argument("--out-dir", default=".", help="directory for report files")
        sp.add_argument("--tol", type=float, help="relative rank tolerance")
        sp.add_argument("--max-period", type=int, help="largest cycle period searched exactly")
        sp.add_argument("--seed", type=int)

    def simflags(sp):
        sp.add_argument("--trials", type=int)
        sp.add_argument("--horizon", type=int)
        sp.add_argument("--workers", type=int, help="worker processes (default from ERASUREKF_WORKERS)")
        sp.add_argument("--jitter-mode", choices=JITTER_MODES)

    common(sub.add_parser("analyze", help="exact critical erasure probability"))
    sp = sub.add_parser("simulate", help="covariance trajectories at one p_e")
    common(sp)
    simflags(sp)
    sp.add_argument("--pe", type=float, required=True)
    sp = sub.add_parser("sweep", help="empirical threshold over a p_e grid")
    common(sp)
    simflags(sp)
    sp.add_argument("--grid", required=True, help="comma list or start:stop:step")
    sp = sub.add_parser("sample", help="uniform vs jittered sampling of a continuous plant")
    common(sp)
    simflags(sp)
    sp.add_argument("--grid", required=True)
    common(sub.add_parser("staticgain", help="static-gain lower bound"))
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = Path(args.out_dir)
    try:
        sf = parse_spec(args.spec)
        stem = Path(args.spec).stem
        if args.command == "analyze":
            text = _json(cmd_analyze(sf, args))
            _write(out_dir, f"{stem}_analyze.json", text)
            sys.stdout.write(text)
        elif args.command == "simulate":
            path = _write(out_dir, f"{stem}_simulate.csv", cmd_simulate(sf, args))
            print(path)
        elif args.command == "sweep":
            csv, interval = cmd_sweep(sf, args)
            print(_write(out_dir, f"{stem}_sweep.csv", csv))
            print(_write(out_dir, f"{stem}_sweep_interval.json", _json(interval)))
        elif args.command == "sample":
            text = _json(cmd_sample(sf, args))
            _write(out_dir, f"{stem}_sample.json", text)
            sys.stdout.write(text)
        elif args.command == "staticgain":
            text = _json(cmd_staticgain(sf, args))
            _write(out_dir, f"{stem}_staticgain.json", text)
            sys.stdout.write(text)
    except EnumerationCapError as exc:
        print(f"enumeration infeasible: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (SpecError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
