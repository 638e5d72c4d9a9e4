"""Command line scenario runner.

    twohol list
    twohol <scenario> [--steps N] [--seed S] [--tolerance T] [--format plain|records] [--config FILE]
    twohol run --config FILE

Exit status: 0 when every check passes, 1 when any check fails, 2 on a
usage or configuration error.  Config files are key = value text in a
``[run]`` section; command line flags override them.
"""
from __future__ import annotations

import argparse
import configparser
import sys
from dataclasses import dataclass
from typing import Callable, Dict, Optional

from . import checks
from .numerics import StepSpec
from .report import Report, emit_report


@dataclass(frozen=True)
class Scenario:
    runner: Callable
    summary: str
    steps: int
    tolerance: Optional[float]


def _verify(r, spec, tol, seed, workers, flux):
    checks.run_verify(r, spec, seed)


SCENARIOS: Dict[str, Scenario] = {
    "trivial": Scenario(lambda r, spec, tol, seed, workers, flux: checks.run_trivial(r, spec, tol),
                        "trivial module and bundle: Hol = 1", 64, 1e-12),
    "abelian-stokes": Scenario(lambda r, spec, tol, seed, workers, flux: checks.run_abelian_stokes(r, spec, tol, seed),
                               "single chart abelian pair: H and u against Stokes quadratures", 64, 1e-6),
    "inner-annulus": Scenario(lambda r, spec, tol, seed, workers, flux:
                              checks.run_inner_annulus(r, spec, tol, workers, seed=seed),
                              "two-chart inner bundle on an annulus: cylinders and gluing invariance", 64, 1e-5),
    "sphere-gerbe": Scenario(lambda r, spec, tol, seed, workers, flux: checks.run_sphere_gerbe(r, flux, spec, tol, workers),
                             "abelian gerbe on the sphere, two charts: flux and kernel", 64, 1e-5),
    "reparam-shear": Scenario(lambda r, spec, tol, seed, workers, flux:
                              checks.run_reparam_shear(r, spec, tol, workers, seed),
                              "shear reparametrization of sphere surfaces", 128, 1e-4),
    "refinement-sweep": Scenario(lambda r, spec, tol, seed, workers, flux:
                                 checks.run_refinement_sweep(r, spec, tol, workers=workers, seed=seed),
                                 "inner-annulus on 4x4, 8x8 and 16x16 meshes", 64, 1e-5),
    "verify": Scenario(_verify, "algebra, transport, surface and bundle verifier suites", 128, None),
    "sweep": Scenario(lambda r, spec, tol, seed, workers, flux: checks.run_sweep(r, spec, workers=workers, seed=seed),
                      "step-halving order of the glued holonomy (starts at --steps)", 16, None),
}

CONFIG_KEYS = {"scenario": str, "steps": int, "seed": int, "tolerance": float, "format": str, "flux": float,
               "workers": int, "timing": bool}


class UsageError(ValueError):
    pass


def load_config(path: str) -> dict:
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise UsageError(f"config: cannot read {path}: {exc}") from exc
    except configparser.Error as exc:
        raise UsageError(f"config: {exc}") from exc
    if not parser.has_section("run"):
        raise UsageError("config: missing [run] section")
    out = {}
    for key, raw in parser.items("run"):
        if key not in CONFIG_KEYS:
            raise UsageError(f"config: run.{key}: unknown key")
        kind = CONFIG_KEYS[key]
        try:
            out[key] = parser.getboolean("run", key) if kind is bool else kind(raw)
        except ValueError as exc:
            raise UsageError(f"config: run.{key}: expected {kind.__name__}, got {raw!r}") from exc
    return out


def _validate(opts: dict):
    if opts["scenario"] not in SCENARIOS:
        raise UsageError(f"scenario: unknown {opts['scenario']!r}; see 'twohol list'")
    if opts["steps"] is not None and opts["steps"] < 1:
        raise UsageError("steps: must be a positive integer")
    if opts["tolerance"] is not None and not opts["tolerance"] > 0:
        raise UsageError("tolerance: must be positive")
    if opts["format"] not in ("plain", "records"):
        raise UsageError("format: must be 'plain' or 'records'")
    if opts["workers"] < 1:
        raise UsageError("workers: must be at least 1")


def run_scenario(opts: dict) -> Report:
    sc = SCENARIOS[opts["scenario"]]
    steps = opts["steps"] or sc.steps
    tol = opts["tolerance"] if opts["tolerance"] is not None else sc.tolerance
    header = {"scenario": opts["scenario"], "seed": opts["seed"], "steps_per_unit": steps}
    if opts["scenario"] == "sphere-gerbe":
        header["flux"] = opts["flux"]
    if tol is not None:
        header["tolerance"] = tol
    r = Report(header)
    sc.runner(r, StepSpec(steps), tol, opts["seed"], opts["workers"], opts["flux"])
    return r


def list_scenarios() -> str:
    w = max(len(k) for k in SCENARIOS)
    return "".join(f"{k:<{w}}  {v.summary}\n" for k, v in SCENARIOS.items())


def _common(p: argparse.ArgumentParser):
    p.add_argument("--steps", type=int, help="RK4 steps per unit parameter length")
    p.add_argument("--seed", type=int, help="seed offset for the random fields (default 0)")
    p.add_argument("--tolerance", type=float, help="override the scenario tolerance")
    p.add_argument("--format", choices=("plain", "records"), help="output format (default plain)")
    p.add_argument("--config", help="key = value config file with a [run] section")
    p.add_argument("--workers", type=int, help="threads for cell transports (results do not depend on it)")
    p.add_argument("--timing", action="store_true", default=None, help="fill the millis field")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="twohol", description="2-holonomy scenario runner")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="list scenarios")
    for name, sc in SCENARIOS.items():
        p = sub.add_parser(name, help=sc.summary)
        _common(p)
        if name == "sphere-gerbe":
            p.add_argument("--flux", type=float, help="flux quantum n (default 1)")
    p = sub.add_parser("run", help="run the scenario named in --config")
    _common(p)
    p.add_argument("--flux", type=float)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) if exc.code in (0, None) else 2
    if args.command == "list":
        sys.stdout.write(list_scenarios())
        return 0
    opts = {"scenario": None if args.command == "run" else args.command, "steps": None, "seed": 0,
            "tolerance": None, "format": "plain", "flux": 1.0, "workers": 1, "timing": False}
    try:
        if args.config:
            cfg = load_config(args.config)
            if args.command != "run" and cfg.get("scenario", args.command) != args.command:
                raise UsageError(f"config: run.scenario={cfg['scenario']!r} conflicts with subcommand {args.command!r}")
            opts.update(cfg)
        for key in ("steps", "seed", "tolerance", "format", "workers", "timing"):
            val = getattr(args, key)
            if val is not None:
                opts[key] = val
        if getattr(args, "flux", None) is not None:
            opts["flux"] = args.flux
        if opts["scenario"] is None:
            raise UsageError("run: the config must name a scenario (run.scenario)")
        _validate(opts)
    except UsageError as exc:
        print(f"twohol: {exc}", file=sys.stderr)
        return 2
    rep = run_scenario(opts)
    sys.stdout.write(emit_report(rep, opts["format"], opts["timing"]))
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
