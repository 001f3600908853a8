"""Command-line entry point.

Exit status: 0 on success or a passing experiment, 1 when an experiment,
path certificate or vessel check fails, 2 on a configuration error.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from brownliq.config import EXPERIMENTS, ConfigError, RunConfig, parse_config, set_dotted, _parse_value
from brownliq.records import write_csv, write_jsonl

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="TOML or JSON run file")
    common.add_argument("--seed", type=int, help="master seed (overrides the file)")
    common.add_argument("--output-dir", help="parent directory for run directories")
    common.add_argument("--run-name", help="run directory name (default: <UTC timestamp>_seed<seed>)")
    common.add_argument("--jobs", type=int, help="worker processes for replica chains")
    common.add_argument("--replicas", type=int, help="independent chains per setting")
    common.add_argument("--backend", choices=["auto", "cython", "python"], help="kernel backend")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key, e.g. --set model.N=20 (value parsed as JSON)")

    p = argparse.ArgumentParser(prog="brownliq", description="Hard discs with drift: sampling, dynamics, "
                                "packing and experiments.  Precedence: defaults < --config file < flags.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("sample", parents=[common], help="Metropolis chain; JSONL snapshots + CSV summary")
    sub.add_parser("simulate", parents=[common], help="time-stepped dynamics; JSONL snapshots + CSV summary")
    sub.add_parser("anneal", parents=[common], help="estimate the infimum of the weighted center of mass")
    ex = sub.add_parser("experiment", parents=[common], help="run a named experiment and report")
    ex.add_argument("name", choices=EXPERIMENTS)
    ex.add_argument("--mode", choices=["float", "sink"], help="archimedes mode")
    sub.add_parser("pack", parents=[common], help="honeycomb packing in a region")
    sub.add_parser("path", parents=[common], help="certified path between two configurations")
    sub.add_parser("check-vessel", parents=[common], help="integrability check for the cylinder")
    return p


def _overrides(args) -> dict:
    over: dict = {}
    for flag, key in (("seed", "seed"), ("output_dir", "output_dir"), ("run_name", "run_name"),
                      ("jobs", "jobs"), ("replicas", "replicas"), ("backend", "backend")):
        val = getattr(args, flag, None)
        if val is not None:
            over[key] = val
    if getattr(args, "mode", None):
        set_dotted(over, "experiment.archimedes.mode", args.mode)
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        set_dotted(over, key.strip(), _parse_value(val.strip()))
    return over


def run_dir(cfg: RunConfig) -> Path:
    name = cfg["run_name"] or time.strftime("%Y%m%dT%H%M%SZ", time.gmtime()) + f"_seed{cfg.seed}"
    out = Path(cfg["output_dir"]) / name
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_sample(cfg: RunConfig, out: Path) -> int:
    from brownliq.sampler import diagnostics, initial_configuration, make_rng, replica_seeds, run_chain

    spec = cfg.model_spec()
    s = cfg["sampler"]
    rows = []
    diag = []
    for r, child in enumerate(replica_seeds(cfg.seed, cfg["replicas"])):
        init = initial_configuration(spec, make_rng(child.spawn(1)[0]))
        run = run_chain(spec, init, s["sweeps"], s["thin"], s["burn_in"], seed=child, inertia=s["inertia"],
                        backend=cfg.backend)
        write_jsonl(out / f"snapshots_r{r}.jsonl", run.snapshots, {"replica": r})
        rows.extend([r, sn.index, sn.wcm, sn.surface] for sn in run.snapshots)
        d = {"replica": r, "burn_in": run.burn_in, "acceptance": run.state.acceptance_rate}
        if len(run.snapshots) >= 100:
            d.update({k: v for k, v in diagnostics(run).items() if k != "acceptance"})
        diag.append(d)
    write_csv(out / "summary.csv", ["replica", "sweep", "wcm", "surface"], rows)
    (out / "diagnostics.json").write_text(json.dumps(diag, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return EXIT_OK


def _cmd_simulate(cfg: RunConfig, out: Path) -> int:
    from brownliq.dynamics import DynamicsParams, simulate
    from brownliq.sampler import initial_configuration, make_rng, replica_seeds

    spec = cfg.model_spec()
    dy = cfg["dynamics"]
    params = DynamicsParams(dt=dy["dt"] or None, projection_tol=dy["projection_tol"],
                            max_projection_iters=dy["max_projection_iters"], inertia_mode=dy["inertia"])
    rows = []
    for r, child in enumerate(replica_seeds(cfg.seed, cfg["replicas"])):
        init = initial_configuration(spec, make_rng(child.spawn(1)[0]))
        run = simulate(spec, init, params, dy["T"], dy["observe_every"], seed=child, backend=cfg.backend)
        write_jsonl(out / f"trajectory_r{r}.jsonl", run.snapshots, {"replica": r})
        rows.extend([r, sn.index, sn.wcm, sn.surface] for sn in run.snapshots)
    write_csv(out / "summary.csv", ["replica", "t", "wcm", "surface"], rows)
    return EXIT_OK


def _cmd_anneal(cfg: RunConfig, out: Path) -> int:
    from brownliq.packing import c1_estimate, default_schedule

    spec = cfg.model_spec()
    a = cfg["anneal"]
    est = c1_estimate(spec, restarts=a["restarts"], schedule=default_schedule(spec, a["stages"]),
                      sweeps_per_stage=a["sweeps_per_stage"], seed=cfg.seed, backend=cfg.backend)
    res = {"c1": est.value, "restart_values": est.restart_values, "lattice_value": est.lattice_value}
    (out / "c1.json").write_text(json.dumps(res, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out / "argmin.json").write_text(est.argmin.to_json(spec) + "\n", encoding="utf-8")
    return EXIT_OK


def _cmd_experiment(cfg: RunConfig, out: Path, name: str) -> int:
    from brownliq import experiments as ex

    p = cfg["experiment"][name]
    seed = cfg.seed
    if name == "archimedes":
        plan = cfg.plan()
        rep = ex.archimedes_experiment(p["rho"], p["N"], p["gamma_ratio"], p["lam"], p["delta"], p["mode"],
                                       m1=p["m1"], threshold=p["threshold"], plan=plan, seed=seed,
                                       start=p["start"], half_width=p["half_width"])
    else:
        spec = cfg.model_spec()
        plan = cfg.plan()
        if name == "concentration":
            rep = ex.concentration_experiment(spec, p["b_list"], p["eps"], c1=p["c1"] or None,
                                              threshold=p["threshold"], plan=plan, seed=seed, start=p["start"])
        elif name == "surface":
            rep = ex.surface_experiment(spec, p["delta"], p["lam_list"], c1=p["c1"] or None,
                                        threshold=p["threshold"], plan=plan, seed=seed,
                                        hole_samples=p["hole_samples"], start=p["start"])
        else:
            rep = ex.centrifuge_experiment(spec, p["delta"], p["lam_list"], max_violation=p["max_violation"],
                                           plan=plan, seed=seed)
    rep.write(out)
    print(f"{rep.name}: {'PASS' if rep.passed else 'FAIL'} {json.dumps(rep.checks, sort_keys=True)}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def _cmd_pack(cfg: RunConfig, out: Path) -> int:
    from brownliq.geometry import Box
    from brownliq.packing import HONEYCOMB_DENSITY, HoneycombSpec, covered_fraction, honeycomb_in_region

    p = cfg["pack"]
    rho = p["rho"]
    if p["region"] == "box":
        lo, hi = p["lo"], p["hi"]
        pts = honeycomb_in_region(HoneycombSpec(rho, anchor=(lo[0] + rho * (1 + 1e-9), lo[1] + rho * (1 + 1e-9))),
                                  Box(tuple(lo), tuple(hi)), p["count"] or None)
        frac = covered_fraction(pts, rho, lo, hi)
    elif p["region"] == "cylinder":
        spec = cfg.model_spec()
        if not p["count"]:
            raise ConfigError("pack.count is required for region = 'cylinder'")
        w = spec.vessel.half_width
        pts = honeycomb_in_region(HoneycombSpec(rho, anchor=(rho * (1 + 1e-9), -w + rho * (1 + 1e-9))),
                                  spec.vessel, p["count"])
        frac = float("nan")
    else:
        raise ConfigError("pack.region must be 'box' or 'cylinder'")
    write_csv(out / "centers.csv", ["x1", "x2"], pts.tolist())
    res = {"count": len(pts), "covered_fraction": frac, "honeycomb_density": HONEYCOMB_DENSITY}
    (out / "pack.json").write_text(json.dumps(res, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return EXIT_OK


def _load_cfg_file(path: str, spec):
    from brownliq.configuration import Configuration

    cfg, radii = Configuration.from_json(Path(path).read_text(encoding="utf-8"))
    if radii.shape != spec.radii.shape or not np.allclose(radii, spec.radii):
        raise ConfigError(f"radii in {path} do not match the model")
    return cfg


def _cmd_path(cfg: RunConfig, out: Path) -> int:
    from brownliq.paths import connectivity_path
    from brownliq.sampler import initial_configuration, make_rng

    spec = cfg.model_spec()
    p = cfg["path"]
    rng = make_rng(cfg.seed)
    a = _load_cfg_file(p["from"], spec) if p["from"] else initial_configuration(spec, rng)
    b = _load_cfg_file(p["to"], spec) if p["to"] else initial_configuration(spec, rng)
    try:
        path = connectivity_path(spec, a, b, p["samples_per_segment"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    path.to_csv(out / "path.csv")
    res = {"certificate": path.certificate, "failure": path.failure, "segments": path.n_segments,
           "samples_checked": path.samples_checked}
    (out / "certificate.json").write_text(json.dumps(res, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"path: {path.n_segments} segments, certificate {'valid' if path.certificate else 'FAILED'}")
    return EXIT_OK if path.certificate else EXIT_FAIL


def _cmd_check_vessel(cfg: RunConfig, out: Path) -> int:
    from brownliq.experiments import check_vessel

    spec = cfg.model_spec()
    p = cfg["check_vessel"]
    res = check_vessel(spec.vessel, p["a"], p["b_max"] or None, p["grid"], d=spec.d)
    write_csv(out / "vessel_table.csv", ["b", "section", "product"], res.table)
    body = {k: v for k, v in res.to_dict().items() if k != "table"}
    (out / "vessel_check.json").write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"condition_holds={str(res.condition_holds).lower()} b0_found={str(res.b0_found).lower()}")
    for note in res.notes:
        print(f"note: {note}")
    return EXIT_OK if res.condition_holds else EXIT_FAIL


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(args.config, _overrides(args))
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = run_dir(cfg)
    (out / "config.json").write_text(cfg.echo(), encoding="utf-8")
    try:
        if args.command == "sample":
            return _cmd_sample(cfg, out)
        if args.command == "simulate":
            return _cmd_simulate(cfg, out)
        if args.command == "anneal":
            return _cmd_anneal(cfg, out)
        if args.command == "experiment":
            return _cmd_experiment(cfg, out, args.name)
        if args.command == "pack":
            return _cmd_pack(cfg, out)
        if args.command == "path":
            return _cmd_path(cfg, out)
        return _cmd_check_vessel(cfg, out)
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
