"""Command-line entry point.

Exit codes: 0 all checks passed, 1 runtime failure, 2 a check failed.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
from pathlib import Path

import numpy as np

from ..field import GridSpec, write_field
from ..forward import dtn_assemble, write_dtn
from .config import ConfigError, load_config
from .experiments import run_appendix_oracles, run_decay_experiment, run_stability_experiment
from .generators import make_dini_conductivity


def _parser():
    p = argparse.ArgumentParser(prog="calderon-dini", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (merged over defaults)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, help="worker threads, 0 = auto")
    common.add_argument("--seed", type=int, help="seed for sampled seminorms and random cases")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("decay", parents=[common], help="CGO decay sweep")
    sub.add_parser("stability", parents=[common], help="DtN stability sweep")
    sub.add_parser("oracles", parents=[common], help="analytic oracle checks")
    d = sub.add_parser("dtn", parents=[common], help="assemble one DtN matrix")
    d.add_argument("--t", type=float, default=None, help="amplitude (default: first family amplitude)")
    g = sub.add_parser("gen", parents=[common], help="write a conductivity field file")
    g.add_argument("--t", type=float, default=None, help="amplitude (default: first family amplitude)")
    return p


def _report(checks: dict) -> int:
    for name, ok in checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return 0 if all(checks.values()) else 2


def _conductivity(cfg, t):
    fam = cfg["family"]
    grid = GridSpec(cfg["grid"]["N"], cfg["grid"]["L"])
    t = fam["amplitudes"][0] if t is None else t
    return make_dini_conductivity(fam["alpha"], t, complex(*fam["center"]), tuple(fam["radii"]), grid,
                                  fam["epsilon"], seed=cfg["seed"])


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config, out=args.out, threads=args.threads, seed=args.seed)
        if cfg["threads"] < 0:
            raise ConfigError("threads must be >= 0")
        out = Path(cfg["out"])
        if args.command == "decay":
            _, _, checks = run_decay_experiment(cfg)
        elif args.command == "stability":
            _, fit, checks = run_stability_experiment(cfg)
            if fit:
                print(f"V fit: C1={fit['C1']:.6g} C2={fit['C2']:.6g} a={fit['a']:.6g}")
        elif args.command == "oracles":
            _, checks = run_appendix_oracles(cfg)
        elif args.command == "dtn":
            c = _conductivity(cfg, args.t)
            dc = cfg["dtn"]
            lam = dtn_assemble(c, dc["modes"], (dc["mesh_r"], dc["mesh_theta"]), dc["richardson"])
            out.mkdir(parents=True, exist_ok=True)
            write_dtn(out / "dtn.bin", lam)
            checks = {"asymmetry_small": lam.asymmetry() <= 1e-8,
                      "constants_null": float(np.max(np.abs(lam.entries[:, dc["modes"]]))) <= 1e-8}
        else:
            c = _conductivity(cfg, args.t)
            out.mkdir(parents=True, exist_ok=True)
            write_field(out / "conductivity.field", c.gamma, "conductivity")
            (out / "conductivity.json").write_text(json.dumps(
                {"config": json.loads(cfg.dumps()), "seminorm": c.seminorm.value,
                 "method": c.seminorm.method, "pairs": c.seminorm.pair_count}, indent=2, sort_keys=True) + "\n")
            t = cfg["family"]["amplitudes"][0] if args.t is None else args.t
            checks = {"seminorm_within_factor_2": abs(t) / 2 <= c.seminorm.value <= 2 * abs(t) or t == 0}
    except (ConfigError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if os.environ.get("CALDERON_DINI_DEBUG"):
            traceback.print_exc()
        return 1
    return _report(checks)


if __name__ == "__main__":
    sys.exit(main())
