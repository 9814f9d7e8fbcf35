"""Command-line interface.

Subcommands map onto the experiment drivers; every run writes its outputs
plus a manifest (config echo, seed, code version, SHA-256 digests) into the
output directory.  Configuration is a flat JSON object; any CLI flag
overrides the corresponding config key, and unknown keys are rejected.

Environment variables with the prefix ``GFEX_`` override config defaults
too (e.g. ``GFEX_SEED=7``), between the config file and explicit flags.

Exit codes: 0 ok; 2 configuration error; 3 numeric failure; 4 statistical
failure (an acceptance criterion or in-run assertion failed).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import analytics, cells, levy
from .bridges import sample_excursion
from .config import GridSpec, LevyConfig, TruncationSpec
from .errors import GfexError, InvalidParameterError
from .levelcut import fragments_at_level, locally_largest
from .reporting import RunManifest, fmt17, write_csv, write_json, write_jsonl
from .rng import derive_key

EXPERIMENTS = (
    "sample-excursion", "cut", "locally-largest", "simulate-gf", "cumulant",
    "martingales", "compare-theorem1", "mu-check", "derivative-martingale",
    "acceptance",
)

# the flat config schema: key -> (type, default, help)
SCHEMA = {
    "experiment": (str, None, "one of " + ", ".join(EXPERIMENTS)),
    "z": (float, 1.0, "initial size / excursion endpoint"),
    "a": (float, 0.3, "cutting level"),
    "levels": (str, "", "comma-separated cutting levels (overrides a)"),
    "C": (float, 4.0, "truncation constant for the derivative martingale"),
    "N": (int, 1000, "number of replicas / samples"),
    "dt": (float, 1e-4, "path time step"),
    "level_da": (float, 1e-3, "level grid spacing"),
    "eps": (float, 1e-3, "small-jump cutoff of the Levy simulator"),
    "s_min": (float, 1e-3, "smallest simulated child size"),
    "G": (int, 6, "maximum simulated generation"),
    "A": (float, math.inf, "level horizon of the cell system"),
    "seed": (int, 20260809, "master seed"),
    "replica_index": (int, 0, "replica offset"),
    "out": (str, "gfex-out", "output directory"),
    "workers": (int, 1, "worker count (reserved; execution is deterministic)"),
    "profile": (str, "full", "acceptance profile: full or desk"),
}


def load_config(args) -> dict:
    cfg = {k: v[1] for k, v in SCHEMA.items()}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            user = json.load(fh)
        for k, v in user.items():
            if k not in SCHEMA:
                raise InvalidParameterError(f"unknown config key: {k!r}")
            cfg[k] = SCHEMA[k][0](v) if v is not None else v
    for k in SCHEMA:
        env = os.environ.get("GFEX_" + k.upper().replace("-", "_"))
        if env is not None:
            cfg[k] = SCHEMA[k][0](env)
    for k in ("z", "a", "C", "N", "dt", "s_min", "G", "A", "seed", "out",
              "eps", "level_da", "levels", "workers", "profile"):
        v = getattr(args, k.replace("-", "_"), None)
        if v is not None:
            cfg[k] = v
    if args.experiment:
        cfg["experiment"] = args.experiment
    if cfg["experiment"] not in EXPERIMENTS:
        raise InvalidParameterError(f"unknown experiment: {cfg['experiment']!r}")
    return cfg


def _levels(cfg) -> list:
    if cfg["levels"]:
        return [float(v) for v in str(cfg["levels"]).split(",")]
    return [cfg["a"]]


def run_experiment(cfg: dict) -> int:
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    man = RunManifest(cfg["experiment"], cfg, cfg["seed"])
    name = cfg["experiment"]
    exit_code = 0

    if name == "sample-excursion":
        for i in range(cfg["N"]):
            grid = GridSpec(dt=cfg["dt"], level_da=cfg["level_da"],
                            seed=cfg["seed"], replica_index=cfg["replica_index"] + i)
            p = sample_excursion(cfg["z"], grid, max_points=2_000_000)
            path = os.path.join(out, f"excursion_{i:05d}.csv")
            write_csv(path, ["t", "x", "y"], [p.times, p.x, p.y])
            man.add(path)
            assert p.x[0] == 0.0 and p.x[-1] == cfg["z"]

    elif name == "cut":
        records = []
        for i in range(cfg["N"]):
            grid = GridSpec(dt=cfg["dt"], seed=cfg["seed"],
                            replica_index=cfg["replica_index"] + i)
            p = sample_excursion(cfg["z"], grid, max_points=2_000_000)
            for a in _levels(cfg):
                fs = fragments_at_level(p, a)
                records.append({"excursion_id": i, "level": a,
                                "sizes": fs.sizes.tolist(),
                                "n_fragments": fs.n_fragments})
        path = os.path.join(out, "fragments.jsonl")
        write_jsonl(path, records)
        man.add(path)

    elif name == "locally-largest":
        grid = GridSpec(dt=cfg["dt"], level_da=cfg["level_da"],
                        seed=cfg["seed"], replica_index=cfg["replica_index"])
        p = sample_excursion(cfg["z"], grid, max_points=2_000_000)
        ll = locally_largest(p, grid)
        path1 = os.path.join(out, "locally_largest.csv")
        write_csv(path1, ["a", "xi"], [ll.levels, ll.values])
        path2 = os.path.join(out, "locally_largest_jumps.csv")
        write_csv(path2, ["a_i", "z_i"], [ll.jump_levels, ll.jump_sizes])
        man.add(path1)
        man.add(path2)

    elif name == "simulate-gf":
        horizon = cfg["A"] if math.isfinite(cfg["A"]) else 0.5
        trunc = TruncationSpec(s_min=max(cfg["s_min"], 1e-2), G=min(cfg["G"], 4),
                               A=horizon)
        records = []
        for i in range(cfg["N"]):
            cs = cells.simulate_cell_system(
                cfg["z"], horizon, trunc, LevyConfig(eps=cfg["eps"]),
                seed=derive_key(cfg["seed"], i),
            )
            for c in cs.cells:
                records.append({
                    "system": i,
                    "label": ".".join(str(v) for v in c.label) or "eve",
                    "b_u": c.birth_level, "size0": c.size0,
                    "zeta_u": c.zeta, "censored": c.censored,
                })
        path = os.path.join(out, "cells.jsonl")
        write_jsonl(path, records)
        man.add(path)

    elif name == "cumulant":
        from .experiments import exp_cumulant

        q_csv = None
        qfile = os.path.join(out, "q_input.csv")
        if os.path.exists(qfile):
            q_csv = np.loadtxt(qfile, skiprows=1, ndmin=1)
        rep = exp_cumulant(cfg["seed"], q_csv=q_csv)
        path = os.path.join(out, "cumulant.csv")
        write_csv(path, ["q", "kappa_numeric", "kappa_closed"],
                  [rep["q"], rep["kappa_numeric"], rep["kappa_closed"]])
        man.add(path)
        if q_csv is not None:
            path = os.path.join(out, "psi_batch.csv")
            write_csv(path, ["q", "psi"], [rep["psi_batch_q"], rep["psi_batch"]])
            man.add(path)
        ok = (rep["max_abs_diff"] <= 1e-6
              and abs(rep["omega_minus"] - 1.5) <= 1e-6
              and abs(rep["omega_plus"] - 2.5) <= 1e-6)
        path = os.path.join(out, "report.json")
        write_json(path, {k: rep[k] for k in
                          ("max_abs_diff", "omega_minus", "omega_plus",
                           "kappa_2", "phi_half")} | {"passed": ok})
        man.add(path)
        exit_code = 0 if ok else 4

    elif name == "martingales":
        from .experiments import master_excursion_bundle, exp_martingale

        bundle = master_excursion_bundle(
            cfg["N"], z=cfg["z"], dt=cfg["dt"], seed=cfg["seed"],
            xi_subset=0, max_points=2_000_000,
        )
        reps = exp_martingale(bundle, seed=cfg["seed"])
        payload = {}
        ok = True
        for a, r in reps.items():
            tol = max(3 * r.ci.se, 0.05 * r.target)
            good = abs(r.mean - r.target) <= tol
            ok &= good
            payload[str(a)] = {"mean": r.mean, "se": r.ci.se,
                               "ci": [r.ci.lo, r.ci.hi], "target": r.target,
                               "n": r.n, "frac_alive": r.frac_alive,
                               "passed": good}
        path = os.path.join(out, "martingales.json")
        write_json(path, payload)
        man.add(path)
        exit_code = 0 if ok else 4

    elif name == "compare-theorem1":
        from .experiments import master_excursion_bundle, exp_theorem1

        bundle = master_excursion_bundle(
            cfg["N"], z=cfg["z"], dt=cfg["dt"], seed=cfg["seed"],
            xi_level=cfg["a"], xi_subset=0, levels=(0.25, cfg["a"], 0.5),
            max_points=2_000_000,
        )
        rep = exp_theorem1(bundle, cfg["N"], seed=derive_key(cfg["seed"], 5),
                           s_min=cfg["s_min"], G=cfg["G"])
        path = os.path.join(out, "theorem1.json")
        write_json(path, {"ks": rep["ks"], "alive_exc": rep["alive_exc"],
                          "alive_cells": rep["alive_cells"],
                          "level": rep["level"]})
        man.add(path)
        exit_code = 0 if all(v["p"] > 0.01 for v in rep["ks"].values()) else 4

    elif name == "mu-check":
        from .experiments import master_excursion_bundle, exp_mu_check

        bundle = master_excursion_bundle(
            cfg["N"], z=cfg["z"], dt=cfg["dt"], seed=cfg["seed"],
            xi_subset=0, max_points=2_000_000,
        )
        rep = exp_mu_check(bundle, cfg["N"], seed=derive_key(cfg["seed"], 10),
                           dt=cfg["dt"])
        path = os.path.join(out, "mu_check.json")
        write_json(path, rep)
        man.add(path)
        exit_code = 0 if rep["ks"]["p"] > 0.01 else 4

    elif name == "derivative-martingale":
        from .experiments import master_excursion_bundle, exp_derivative_martingale

        bundle = master_excursion_bundle(
            cfg["N"], z=cfg["z"], dt=cfg["dt"], seed=cfg["seed"],
            C=cfg["C"], xi_subset=0, max_points=2_000_000,
        )
        rep = exp_derivative_martingale(bundle, cfg["N"],
                                        seed=derive_key(cfg["seed"], 8),
                                        C=cfg["C"], s_min=cfg["s_min"])
        path = os.path.join(out, "derivative_martingale.json")
        write_json(path, rep)
        man.add(path)
        exit_code = 0 if all(v["ok"] for v in rep["pairwise"].values()) and rep["dc0_ok"] else 4

    elif name == "acceptance":
        from .experiments import run_acceptance

        res = run_acceptance(cfg["profile"], seed=cfg["seed"], out_dir=out)
        for fname in ("acceptance_report.json", "acceptance_table.txt"):
            man.add(os.path.join(out, fname))
        exit_code = 0 if res["passed"] else 4

    man.write(out)
    return exit_code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gfex",
        description="Monte Carlo lab for the growth-fragmentation carried by "
                    "half-plane excursions",
        epilog="Defaults: " + "; ".join(
            f"{k}={v[1]}" for k, v in SCHEMA.items() if v[1] is not None),
    )
    ap.add_argument("experiment", nargs="?", choices=EXPERIMENTS)
    ap.add_argument("--config", help="flat JSON config file")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out")
    ap.add_argument("--workers", type=int)
    ap.add_argument("--z", type=float)
    ap.add_argument("--a", type=float)
    ap.add_argument("--levels")
    ap.add_argument("--C", type=float)
    ap.add_argument("--N", type=int)
    ap.add_argument("--dt", type=float)
    ap.add_argument("--level-da", dest="level_da", type=float)
    ap.add_argument("--eps", type=float)
    ap.add_argument("--s-min", dest="s_min", type=float)
    ap.add_argument("--G", type=int)
    ap.add_argument("--A", type=float)
    ap.add_argument("--profile", choices=("full", "desk"))
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except (InvalidParameterError, OSError, json.JSONDecodeError) as e:
        print(json.dumps({"error": "config", "message": str(e)}), file=sys.stderr)
        return 2
    try:
        return run_experiment(cfg)
    except GfexError as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}),
              file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
