"""Command line entry point: ``cfmmw drop | campaign | validate``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from .config import SimConfig, load_config
from .harness import env_defaults, prepare_drop, optimize_drop, run_campaign, \
    write_campaign_outputs, write_drops_csv, run_drop
from .kernels import BACKEND


def _config(args) -> SimConfig:
    overrides = {}
    for item in args.set or []:
        key, _, raw = item.partition("=")
        overrides[key] = yaml.safe_load(raw)
    if args.seed is not None:
        overrides["seed"] = args.seed
    return load_config(args.config, profile=args.profile, **overrides)


def _parse_values(raw: str):
    return [yaml.safe_load(v) for v in raw.split(",") if v.strip()]


def cmd_drop(args) -> int:
    cfg = _config(args)
    res = run_drop(cfg, cfg.seed)
    if args.verbose and not res.discarded:
        prep = prepare_drop(cfg, cfg.seed)
        dl, ul = optimize_drop(prep)
        for name, st in (("dl", dl), ("ul", ul)):
            for i, r in enumerate(st.trace, start=1):
                print(f"{name} iter {i}: min_rate={r:.6g}")
    print(json.dumps(res.row(), indent=2))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_drops_csv([res], out / "drop.csv")
    return 0 if not res.discarded else 1


def cmd_campaign(args) -> int:
    cfg = _config(args)
    values = _parse_values(args.sweep_values) if args.sweep_key else [None]
    report = run_campaign(cfg, args.sweep_key, values, n_drops=args.n_drops,
                          seed=cfg.seed, workers=args.workers)
    for pt in report.points:
        dl, ul = pt["dl"], pt["ul"]
        n_bad = sum(d.discarded for d in pt["drops"])
        print(f"{args.sweep_key or 'point'}={pt['value']}: n={dl['n']} discarded={n_bad} "
              f"DL mean={dl['mean']:.4f}±{dl['se']:.4f} p5={dl['p5']:.4f} | "
              f"UL mean={ul['mean']:.4f}±{ul['se']:.4f} p5={ul['p5']:.4f}")
    if args.out:
        for p in write_campaign_outputs(report, args.out):
            print(f"wrote {p}")
    return 0


def _check(name: str, ok: bool) -> bool:
    print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return ok


def cmd_validate(args) -> int:
    """Quick invariant checks on one desk drop."""
    from .rates import build_zf, stack
    cfg = _config(args)
    prep = prepare_drop(cfg, cfg.seed)
    results = []
    R = prep.rf.R_rf
    results.append(_check("RF covariances Hermitian",
                          np.allclose(R, np.conj(np.swapaxes(R, -1, -2)))))
    served = prep.rf.served_mask
    results.append(_check("each AP serves at most L MSs",
                          bool(np.all(served.sum(axis=1) <= cfg.l_active))))
    results.append(_check("every MS served", bool(np.all(served.any(axis=0)))))
    rng = np.random.default_rng(cfg.seed)
    from .rates import draw_equivalent_channels
    G = stack(draw_equivalent_channels(prep.context, rng) * served[:, None, :])
    zf = build_zf(G, cfg.l_active)
    results.append(_check("ZF identity", float(np.abs(zf.G_hat.T @ zf.W_d
                                                        - np.eye(cfg.K)).max()) < 1e-8))
    dl, ul = optimize_drop(prep)
    used = dl.power_used
    results.append(_check("DL power budgets", bool(np.all(used <= cfg.ap_power_w * (1 + 1e-6)))))
    results.append(_check("UL box constraints", bool(np.all((ul.powers >= 0)
                                                            & (ul.powers <= 1 + 1e-9)))))
    for name, st, cap in (("DL", dl, cfg.fronthaul_dl), ("UL", ul, cfg.fronthaul_ul)):
        results.append(_check(f"{name} fronthaul within capacity",
                              bool(np.all(st.fronthaul_bits <= cap * (1 + 1e-6)))))
    print(f"backend: {BACKEND}")
    return 0 if all(results) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cfmmw", description=__doc__)
    p.add_argument("-q", "--quiet", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    env = env_defaults()

    def common(sp):
        sp.add_argument("--config", help="YAML config file")
        sp.add_argument("--profile", default="desk", choices=["full", "desk"])
        sp.add_argument("--seed", type=int)
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config field (repeatable)")
        sp.add_argument("--out", default=env.get("out"), help="output directory")

    d = sub.add_parser("drop", help="run one drop")
    common(d)
    d.add_argument("-v", "--verbose", action="store_true", help="print the BCD trace")
    d.set_defaults(func=cmd_drop)

    c = sub.add_parser("campaign", help="run a Monte Carlo sweep")
    common(c)
    c.add_argument("--n-drops", type=int, default=20)
    c.add_argument("--sweep-key")
    c.add_argument("--sweep-values", default="", help="comma-separated values")
    c.add_argument("--workers", type=int, default=env.get("workers", 1))
    c.set_defaults(func=cmd_campaign)

    v = sub.add_parser("validate", help="check invariants on one drop")
    common(v)
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "campaign" and args.sweep_key and not args.sweep_values:
        print("--sweep-values is required with --sweep-key", file=sys.stderr)
        return 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
