"""Command-line interface.

    sandwichbf optimize  --f-p 0.01 --f-n 0.5 --b 8 [--alpha 0.5 | --backend NAME]
    sandwichbf model     --f-p 0.01 --f-n 0.5 --b1 0 --b2 8   (or --b 8 --optimal)
    sandwichbf build     --config cfg.json --structure sandwiched --b 8 --out s.bin
    sandwichbf query     --structure-file s.bin --keys keys.txt
    sandwichbf measure   --config cfg.json --structure sandwiched --b 8
    sandwichbf sweep     --config cfg.json --csv out.csv [--json out.json]
    sandwichbf calibrate --config cfg.json

Exit codes: 0 success, 2 configuration error, 3 contract violation
(a structure rejected one of its own keys).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from dataclasses import asdict
from pathlib import Path

from sandwichbf.config import backend_of, load_config
from sandwichbf.errors import ConfigError, ContractViolation, FormatError
from sandwichbf.experiment import build_structure, finite, model_params, oracle_for, workload_for
from sandwichbf.filters import Filter
from sandwichbf.filters.keys import KeyBatch
from sandwichbf.harness import (
    Structure,
    format_table,
    measure_fpr,
    reports_to_csv,
    reports_to_json,
    sweep,
)
from sandwichbf.oracle import measure_profile
from sandwichbf.planner import (
    ModelParams,
    PlannerWarning,
    crossover_level,
    grid_search_allocation,
    model_false_positive_rate,
    optimize_backup_bits,
)
from sandwichbf.sandwich import load_structure

EXIT_OK, EXIT_CONFIG, EXIT_CONTRACT = 0, 2, 3


def _alpha(args) -> float:
    if args.alpha is not None:
        return args.alpha
    return backend_of(args.backend).alpha


def _params(args, b: float = 0.0) -> ModelParams:
    try:
        return ModelParams(_alpha(args), args.f_p, args.f_n, b)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _emit(values: dict, as_json: bool) -> None:
    if as_json:
        print(json.dumps(values, indent=2))
        return
    for k, v in values.items():
        print(f"{k} = {v:.10g}" if isinstance(v, float) else f"{k} = {v}")


def cmd_optimize(args) -> int:
    params = _params(args, args.b)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", PlannerWarning)
        plan = optimize_backup_bits(params)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    out = {"alpha": params.alpha, "f_p": params.f_p, "f_n": params.f_n,
           "b": plan.b, "b1": plan.b1, "b2": plan.b2, "model_fpr": plan.fpr}
    if 0.0 < params.f_n < 1.0:
        out["crossover_level"] = crossover_level(params)
    out["learned_only_fpr"] = model_false_positive_rate(params, 0.0, args.b, limit_convention=True)
    if args.grid_step:
        grid = grid_search_allocation(params, args.grid_step)
        out["grid_b2"] = grid.b2
        out["grid_model_fpr"] = grid.fpr
    _emit(out, args.json)
    return EXIT_OK


def cmd_model(args) -> int:
    if args.optimal:
        if args.b is None:
            raise ConfigError("--optimal needs --b")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", PlannerWarning)
            plan = optimize_backup_bits(_params(args, args.b))
        b1, b2 = plan.b1, plan.b2
    else:
        if args.b1 is None or args.b2 is None:
            raise ConfigError("give --b1 and --b2, or --b with --optimal")
        b1, b2 = args.b1, args.b2
    try:
        fpr = model_false_positive_rate(_params(args), b1, b2, limit_convention=args.limit_convention)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    _emit({"b1": b1, "b2": b2, "model_fpr": fpr}, args.json)
    return EXIT_OK


def cmd_build(args) -> int:
    cfg = load_config(args.config)
    kind = Structure(args.structure)
    wl = workload_for(cfg, negatives=False)
    structure = build_structure(cfg, wl, kind, args.b)
    data = structure.to_bytes()
    Path(args.out).write_bytes(data)
    print(f"wrote {kind.value} over {len(wl.positives)} keys ({len(data)} bytes) to {args.out}")
    return EXIT_OK


def _read_keys(path: str, encoding: str) -> tuple[list[str], list[bytes]]:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if encoding == "hex":
        try:
            return lines, [bytes.fromhex(ln.strip()) for ln in lines]
        except ValueError as exc:
            raise ConfigError(f"{path}: not hex-encoded keys ({exc})") from exc
    return lines, [ln.encode() for ln in lines]


def _load_structure(path: str):
    try:
        return load_structure(Path(path).read_bytes())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except FormatError as exc:
        raise ConfigError(f"{path}: {exc.code}: {exc}") from exc


def cmd_query(args) -> int:
    structure = _load_structure(args.structure_file)
    labels, keys = _read_keys(args.keys, args.encoding)
    batch = KeyBatch(keys)
    answers = structure.contains_many(batch) if isinstance(structure, Filter) else structure.query_many(batch)
    for label, yes in zip(labels, answers.tolist()):
        print(f"{label}\t{'true' if yes else 'false'}")
    return EXIT_OK


def cmd_measure(args) -> int:
    cfg = load_config(args.config)
    wl = workload_for(cfg)
    profile = None
    if args.structure_file:
        structure = _load_structure(args.structure_file)
        if not isinstance(structure, Filter):
            _, profile = oracle_for(cfg, wl)
    else:
        kind = Structure(args.structure)
        oracle = None
        if kind is not Structure.PLAIN_BLOOM:
            oracle, profile = oracle_for(cfg, wl)
        structure = build_structure(cfg, wl, kind, args.b, oracle, profile)
    report = measure_fpr(structure, wl.test_negatives, wl.positives, profile=profile,
                         workers=args.workers)
    if args.json:
        print(json.dumps(report.to_json(), indent=2))
    else:
        print(format_table([report]))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    wl = workload_for(cfg)
    oracle, profile = oracle_for(cfg, wl)
    params = model_params(cfg, profile)
    reports = sweep(cfg.budgets, params, wl, cfg.backend, oracle=oracle, profile=profile,
                    seed=cfg.seed, workers=args.workers)
    timing = not args.no_timing
    if args.csv:
        Path(args.csv).write_text(reports_to_csv(reports, timing))
    if args.json:
        Path(args.json).write_text(reports_to_json(reports, timing))
    print(format_table(reports))
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg = load_config(args.config)
    wl = workload_for(cfg)
    oracle, profile = oracle_for(cfg, wl)
    # rates on the fresh test stream, next to the profile that drives planning
    measured = measure_profile(oracle, wl.positives, wl.test_negatives)
    out = {"kind": cfg.oracle.kind, "tau": oracle.tau, **asdict(profile),
           "test_f_p": measured.f_p, "test_f_n": measured.f_n}
    plans = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PlannerWarning)
        for b in cfg.budgets:
            p = optimize_backup_bits(ModelParams(cfg.backend.alpha, profile.f_p, profile.f_n, b))
            plans.append({"b": b, "b1": p.b1, "b2": p.b2, "model_fpr": finite(p.fpr)})
    out["plans"] = plans
    print(json.dumps(out, indent=2))
    return EXIT_OK


def _model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--f-p", type=float, required=True, help="oracle false-positive probability")
    p.add_argument("--f-n", type=float, required=True, help="oracle false-negative fraction")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--alpha", type=float, help="per-bit FPR decay of the filter backend")
    g.add_argument("--backend", default="fingerprint", help="fingerprint (alpha 1/2) or bloom")
    p.add_argument("--json", action="store_true")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sandwichbf", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="optimal bit split for given oracle rates")
    _model_args(p)
    p.add_argument("--b", type=float, required=True, help="total bits per key")
    p.add_argument("--grid-step", type=float, help="also run the brute-force grid at this step")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("model", help="evaluate the modeled false-positive rate")
    _model_args(p)
    p.add_argument("--b1", type=float)
    p.add_argument("--b2", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--optimal", action="store_true", help="use the optimal split of --b")
    p.add_argument("--limit-convention", action="store_true",
                   help="allow f_n = 0 with b2 > 0 (backup term taken as 0)")
    p.set_defaults(func=cmd_model)

    structures = [s.value for s in Structure]

    p = sub.add_parser("build", help="build a structure and write it to a file")
    p.add_argument("--config", required=True)
    p.add_argument("--structure", choices=structures, default="sandwiched")
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", help="answer membership for keys in a file")
    p.add_argument("--structure-file", required=True)
    p.add_argument("--keys", required=True, help="one key per line")
    p.add_argument("--encoding", choices=["hex", "utf8"], default="hex")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("measure", help="empirical FPR of one structure")
    p.add_argument("--config", required=True)
    p.add_argument("--structure", choices=structures, default="sandwiched")
    p.add_argument("--structure-file", help="measure a previously built structure instead")
    p.add_argument("--b", type=float, default=8.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("sweep", help="plain / learned / sandwiched at every budget")
    p.add_argument("--config", required=True)
    p.add_argument("--csv")
    p.add_argument("--json")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-timing", action="store_true",
                   help="leave ns_per_query empty so output is byte-reproducible")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("calibrate", help="profile the configured oracle")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ContractViolation as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
