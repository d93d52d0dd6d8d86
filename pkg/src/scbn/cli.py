"""Command-line front end for scenario generation, runs, sweeps and audits.

Exit codes: 0 on success, 1 on runtime failure (bad config contents,
infeasible input, I/O trouble), 2 on usage errors (unknown command or
flags, courtesy of argparse).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import __version__
from .baselines import best_effort_allocate, random_allocate
from .experiments import (
    SCHEMES,
    load_sweep_config,
    oracle_compare_rows,
    stability_audit,
    sweep_budget_price,
    sweep_config_to_doc,
    sweep_k,
    sweep_n1,
    write_budget_price_csv,
    write_k_csv,
    write_manifest,
    write_n1_csv,
    write_oracle_csv,
)
from .matching import run_matching, save_matching_csv
from .propagation import realize_channels, save_channels_csv
from .scenario import (
    ConfigError,
    GenerationConfig,
    ScenarioFormatError,
    generate_scenario,
    load_scenario,
    save_scenario,
    validate_scenario,
)


def _load_generation_config(path: str | None) -> GenerationConfig:
    if path is None:
        return GenerationConfig()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: not valid JSON (line {exc.lineno}, column {exc.colno}): {exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    fields = {f.name for f in dataclasses.fields(GenerationConfig)}
    for key in doc:
        if key not in fields:
            raise ConfigError(f"{path}: unknown field '{key}'")
    return GenerationConfig(**doc)


def _cmd_generate(args) -> int:
    cfg = _load_generation_config(args.params)
    scenario = generate_scenario(cfg, seed=args.seed)
    problems = validate_scenario(scenario)
    if problems:
        raise ConfigError("generated scenario is invalid: " + "; ".join(problems))
    save_scenario(scenario, args.out)
    print(f"wrote scenario with {len(scenario.stations)} stations to {args.out}")
    return 0


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    os.makedirs(args.out, exist_ok=True)
    rng = np.random.default_rng([args.channel_seed, 0xC4A])
    ch = realize_channels(scenario, rng)
    schemes = args.schemes.split(",")
    for scheme in schemes:
        if scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme '{scheme}' (choices: {', '.join(SCHEMES)})")
    if args.dump_channels:
        save_channels_csv(ch, os.path.join(args.out, "channels.csv"))
    for scheme in schemes:
        if scheme == "matching":
            m = run_matching(scenario, ch, args.zeta)
        elif scheme == "best_effort":
            m = best_effort_allocate(scenario, ch)
        else:
            m = random_allocate(scenario, ch, rng)
        path = os.path.join(args.out, f"matching_{scheme}.csv")
        save_matching_csv(m, scenario, ch, path)
        total_rate = sum(m.rate_bps.values())
        total_cost = sum(m.cost.values())
        print(
            f"{scheme}: total rate {total_rate / 1e6:.2f} Mbit/s, "
            f"total cost {total_cost:.2f}, rounds {m.rounds}, proposals {m.proposals}"
        )
    write_manifest(
        args.out,
        "run",
        {
            "scenario": args.scenario,
            "channel_seed": args.channel_seed,
            "zeta": args.zeta,
            "schemes": schemes,
        },
        seed=args.channel_seed,
    )
    return 0


def _cmd_sweep(args) -> int:
    cfg = load_sweep_config(args.config)
    os.makedirs(args.out, exist_ok=True)
    if args.axis == "n1":
        result = sweep_n1(cfg)
        out_csv = os.path.join(args.out, "results_n1.csv")
        write_n1_csv(result, out_csv)
    elif args.axis == "budget-price":
        result = sweep_budget_price(cfg)
        out_csv = os.path.join(args.out, "results_budget_price.csv")
        write_budget_price_csv(result, out_csv)
    else:
        result = sweep_k(cfg)
        out_csv = os.path.join(args.out, "results_k.csv")
        write_k_csv(result, out_csv)
    write_manifest(args.out, f"sweep {args.axis}", sweep_config_to_doc(cfg), cfg.seed)
    print(f"wrote {out_csv} ({len(result.points)} sweep points, {cfg.trials} trials each)")
    return 0


def _cmd_oracle_compare(args) -> int:
    rows = oracle_compare_rows(args.trials, args.seed)
    os.makedirs(args.out, exist_ok=True)
    out_csv = os.path.join(args.out, "oracle_compare.csv")
    write_oracle_csv(rows, out_csv)
    write_manifest(args.out, "oracle-compare", {"trials": args.trials}, args.seed)
    feasible = sum(r["feasible"] for r in rows)
    bad_gap = sum(
        1 for r in rows if r["gap"] == r["gap"] and r["gap"] < -1e-9
    )
    bad_constraints = sum(1 for r in rows if not r["constraints_3c_3f_ok"])
    print(
        f"{len(rows)} instances, {feasible} feasible, "
        f"{bad_gap} below oracle cost, {bad_constraints} constraint violations"
    )
    if bad_gap or bad_constraints:
        print("oracle comparison FAILED", file=sys.stderr)
        return 1
    return 0


def _cmd_stability_audit(args) -> int:
    gen_cfg = _load_generation_config(args.params)
    summary = stability_audit(args.trials, args.seed, gen_cfg, zeta=args.zeta)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "stability_audit.json"), "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2)
            fh.write("\n")
        write_manifest(
            args.out, "stability-audit", {"trials": args.trials, "zeta": args.zeta}, args.seed
        )
    print(
        f"trials={summary['trials']} blocking_pairs_total={summary['blocking_pairs_total']} "
        f"max_rounds={summary['max_rounds']} (bound {summary['rounds_bound']}) "
        f"max_proposals={summary['max_proposals']} (bound {summary['proposals_bound']})"
    )
    if summary["blocking_pairs_total"]:
        print("stability audit FAILED: blocking pairs found", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scbn",
        description="Small-cell backhaul allocation simulator",
    )
    parser.add_argument("--version", action="version", version=f"scbn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a random scenario file")
    p.add_argument("--params", help="JSON file of generation parameters", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output scenario JSON path")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("run", help="run allocation schemes on one scenario")
    p.add_argument("--scenario", required=True, help="scenario JSON path")
    p.add_argument("--channel-seed", type=int, default=0)
    p.add_argument("--zeta", type=float, default=1e6, help="price weight in bit/s per unit")
    p.add_argument("--schemes", default="matching,best_effort,random")
    p.add_argument("--dump-channels", action="store_true")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="run a Monte Carlo parameter sweep")
    p.add_argument("axis", choices=["n1", "budget-price", "k"])
    p.add_argument("--config", required=True, help="sweep config JSON path")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser(
        "oracle-compare", help="compare the matching against the exhaustive oracle"
    )
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_oracle_compare)

    p = sub.add_parser(
        "stability-audit", help="count blocking pairs over many seeded trials"
    )
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--zeta", type=float, default=1e6)
    p.add_argument("--params", help="JSON file of generation parameters", default=None)
    p.add_argument("--out", default=None, help="optional output directory")
    p.set_defaults(func=_cmd_stability_audit)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ScenarioFormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
