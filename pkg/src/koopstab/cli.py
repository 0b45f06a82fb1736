"""Command-line interface.

Subcommands: simulate | collect | edmd | lift | synthesize | closedloop |
reproduce-paper | validate. Exit codes: 0 ok, 2 config error, 3 numerical
failure, 4 acceptance failure.
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import pipeline
from .config import ExperimentConfig, load_config, serialize_config
from .errors import (EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK,
                     KoopstabError, ParameterError)
from .plant import simulate as plant_simulate
from .spatial import StateProfile


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="koopstab",
        description="Data-driven Koopman stabilization of a boundary-controlled "
                    "reaction-diffusion system")
    parser.add_argument("--config", type=Path, help="config file (dotted key = value)")
    parser.add_argument("--seed", type=int, help="override data.seed")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("--stage", help="with reproduce-paper: stop after this stage")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", help="open-loop simulation from the nominal IC")
    sub.add_parser("collect", help="generate the snapshot dataset")
    sub.add_parser("edmd", help="regress the Koopman matrix and its spectrum")
    sub.add_parser("lift", help="estimate rho and fit the bilinear input map")
    sub.add_parser("synthesize", help="pole placement and the linearizing map")
    sub.add_parser("closedloop", help="closed-loop runs and figure data")
    sub.add_parser("reproduce-paper", help="full pipeline with acceptance gates")
    sub.add_parser("validate", help="property suite (oracle checks)")
    return parser


def _load(args):
    cfg = ExperimentConfig()
    if args.config is not None:
        cfg = load_config(args.config, base=cfg)
    if args.seed is not None:
        cfg.data_seed = args.seed
    if args.out is not None:
        cfg.out_dir = str(args.out)
    return cfg


def _out_dir(cfg):
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(cfg):
    ws = pipeline.make_workspace(cfg)
    out = _out_dir(cfg)
    t_eval = np.arange(0.0, cfg.sim_horizon + cfg.sim_profile_dt / 2, cfg.sim_profile_dt)
    traj = plant_simulate(ws.plant, ws.g, None, cfg.sim_horizon, t_eval=t_eval,
                          **ws.sim_kwargs)
    traj.export(out / "trajectory.dat")
    note = f"blow-up at t = {traj.blowup:.4g}" if traj.blowup is not None else "no blow-up"
    print(f"simulated nominal IC for t in [0, {cfg.sim_horizon}]: {note}; "
          f"wrote {out / 'trajectory.dat'}")
    return EXIT_OK


def cmd_collect(cfg):
    ws = pipeline.make_workspace(cfg)
    out = _out_dir(cfg)
    dataset, stats = pipeline.run_collect(ws)
    pipeline.save_dataset(out / "dataset.dat", dataset)
    print(f"collected {stats['m']} snapshot pairs (t_s = {stats['t_s']}, "
          f"seed = {stats['seed']}); wrote {out / 'dataset.dat'}")
    return EXIT_OK


def cmd_edmd(cfg):
    ws = pipeline.make_workspace(cfg)
    out = _out_dir(cfg)
    dataset = pipeline.load_dataset(out / "dataset.dat", ws.grid)
    model, fig1_errors, stats = pipeline.run_edmd(ws, dataset)
    pipeline.save_koopman(out / "koopman.dat", model)
    pipeline.write_fig1(out, model, fig1_errors)
    lams = ", ".join(f"{v:.5f}" for v in stats["principal_lambda"])
    print(f"Koopman regression rank {stats['rank']}, principal eigenvalues: {lams}; "
          f"wrote {out / 'fig1_spectrum.csv'}")
    return EXIT_OK


def cmd_lift(cfg):
    ws = pipeline.make_workspace(cfg)
    out = _out_dir(cfg)
    dataset = pipeline.load_dataset(out / "dataset.dat", ws.grid)
    model = pipeline.load_koopman(out / "koopman.dat")
    bilin, stats = pipeline.run_lift(ws, dataset, model)
    pipeline.save_bilinear(out / "bilinear.dat", bilin)
    print(f"rho = {stats['rho']:.5f}, |E_u|_F = {stats['fit_error']:.5g}; "
          f"wrote {out / 'bilinear.dat'}")
    return EXIT_OK


def cmd_synthesize(cfg):
    ws = pipeline.make_workspace(cfg)
    out = _out_dir(cfg)
    bilin = pipeline.load_bilinear(out / "bilinear.dat")
    dataset = None
    if (out / "dataset.dat").exists():
        dataset = pipeline.load_dataset(out / "dataset.dat", ws.grid)
    lmap, stats = pipeline.run_synthesize(ws, bilin, dataset)
    pipeline.save_map(out / "map.dat", lmap)
    print(f"k = {np.array2string(np.asarray(stats['k']), precision=4)}, "
          f"placed eigenvalues {stats['eig_a_target']}, "
          f"PDE residual = {stats['residual_norm']:.4g}; wrote {out / 'map.dat'}")
    return EXIT_OK


def cmd_closedloop(cfg):
    ws = pipeline.make_workspace(cfg)
    out = _out_dir(cfg)
    bilin = pipeline.load_bilinear(out / "bilinear.dat")
    lmap = pipeline.load_map(out / "map.dat")
    loop = pipeline.run_closedloop(ws, bilin, lmap)
    pipeline.write_fig2(out, loop)
    pipeline.write_fig3(out, loop)
    print(f"closed-loop final sup norm {loop['pde_cl_final_norm']:.4g} "
          f"(initial {loop['pde_cl_initial_norm']:.4g}); figure data in {out}")
    return EXIT_OK


def cmd_reproduce_paper(cfg, stage=None):
    out = _out_dir(cfg)
    if stage is not None:
        order = ["collect", "edmd", "lift", "synthesize", "closedloop"]
        if stage not in order:
            raise ParameterError(f"unknown stage {stage!r}; pick one of {order}")
        for name in order[: order.index(stage) + 1]:
            code = {"collect": cmd_collect, "edmd": cmd_edmd, "lift": cmd_lift,
                    "synthesize": cmd_synthesize, "closedloop": cmd_closedloop}[name](cfg)
            if code != EXIT_OK:
                return code
        print(f"stopped after stage {stage!r}")
        return EXIT_OK
    t0 = time.perf_counter()
    manifest, criteria = pipeline.reproduce_paper(cfg, out)
    wall = time.perf_counter() - t0
    hard_fail = False
    for row in criteria:
        status = "PASS" if row["passed"] else ("soft-fail" if row["soft"] else "FAIL")
        if not row["passed"] and not row["soft"]:
            hard_fail = True
        print(f"[{status:>9}] {row['id']:4s} {row['description']}: "
              f"value {row['value']:.6g} vs threshold {row['threshold']:.6g}")
    print(f"reproduction finished in {wall:.1f} s; manifest at {out / 'manifest.json'}")
    return EXIT_ACCEPTANCE if hard_fail else EXIT_OK


def cmd_validate(cfg):
    from . import validation
    report = validation.run_property_suite(cfg)
    width = max(len(r["name"]) for r in report)
    ok = True
    for r in report:
        status = "PASS" if r["passed"] else "FAIL"
        ok = ok and r["passed"]
        print(f"[{status}] {r['name']:<{width}}  {r['detail']}")
    return EXIT_OK if ok else EXIT_ACCEPTANCE


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load(args)
    except (KoopstabError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    handlers = {
        "simulate": cmd_simulate,
        "collect": cmd_collect,
        "edmd": cmd_edmd,
        "lift": cmd_lift,
        "synthesize": cmd_synthesize,
        "closedloop": cmd_closedloop,
        "validate": cmd_validate,
    }
    try:
        if args.command == "reproduce-paper":
            return cmd_reproduce_paper(cfg, stage=args.stage)
        return handlers[args.command](cfg)
    except ParameterError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KoopstabError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
