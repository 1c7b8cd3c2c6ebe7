"""Command-line entry point: ``eqneg generate|run|fit|report|dump-defaults``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .emotions import EMOTIONS, PayoffMatrix
from .experiment import (
    EXIT_CONFIG, EXIT_FAILED, EXIT_OK, ConfigError, ExperimentConfig, exit_code,
    fit_from_transcripts, report_from_dir, run_experiment,
)
from .hmm import CONTAGION_TABLE, POLICY_TRANSITION_TABLE, HmmParams
from .scenarios import ScenarioBounds, generate_scenarios, save_scenarios


def default_tables() -> dict:
    """Built-in matrices as published, plus the normalised HMM parameters in use."""
    emo = [e.value for e in EMOTIONS]

    def labelled(rows) -> dict:
        return {r: dict(zip(emo, row)) for r, row in zip(emo, rows)}

    return {
        "emotions": emo,
        "policy_transition": labelled(POLICY_TRANSITION_TABLE),
        "contagion": labelled(CONTAGION_TABLE),
        "payoff": PayoffMatrix.default().to_dict()["rows"],
        "hmm_params": HmmParams.default().to_dict(),
    }


def _cmd_generate(args) -> int:
    bounds = ScenarioBounds()
    if args.config:
        bounds = ExperimentConfig.load(args.config).bounds
    scenarios = generate_scenarios(args.seed, args.count, bounds)
    save_scenarios(args.out, scenarios)
    print(f"wrote {len(scenarios)} scenarios to {args.out}")
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    overrides = {
        "seed": args.seed, "output_dir": args.out, "scenario_count": args.count,
        "workers": args.workers, "scenarios_path": args.scenarios, "run_id": args.run_id,
    }
    if args.personas:
        overrides["personas"] = [p.strip() for p in args.personas.split(",") if p.strip()]
    doc = {**{k: getattr(cfg, k) for k in cfg.__dataclass_fields__},
           **{k: v for k, v in overrides.items() if v is not None}}
    cfg = ExperimentConfig(**doc)
    report = run_experiment(cfg)
    sys.stdout.write(report.table())
    code = exit_code(report)
    if code != EXIT_OK:
        print(f"{report.failed_cells} of {len(report.cells)} cells failed", file=sys.stderr)
    return code


def _collect(paths: list[str]) -> list[Path]:
    out = []
    for p in map(Path, paths):
        out.extend(sorted(p.rglob("*.jsonl")) if p.is_dir() else [p])
    return out


def _cmd_fit(args) -> int:
    files = _collect(args.transcripts)
    if not files:
        raise ConfigError("no transcript files found")
    init = HmmParams.load(args.init) if args.init else HmmParams.default()
    result = fit_from_transcripts(
        files, init, max_iters=args.max_iters, tol=args.tol, smoothing=args.smoothing,
        fit_contagion=args.fit_contagion, out_path=args.out,
    )
    lls = result.log_likelihoods
    print(f"fitted {len(files)} transcripts in {result.iterations} iterations: "
          f"log-likelihood {lls[0]:.6f} -> {lls[-1]:.6f}; wrote {args.out}")
    return EXIT_OK


def _cmd_report(args) -> int:
    report = report_from_dir(args.dir)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        sys.stdout.write(report.table())
    return EXIT_OK


def _cmd_dump_defaults(args) -> int:
    text = json.dumps(default_tables(), indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eqneg", description="Emotion-aware credit negotiation experiments.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write seeded synthetic scenarios")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--count", type=int, default=100)
    g.add_argument("--config", help="take scenario bounds from this experiment config")
    g.add_argument("--out", default="scenarios.json")
    g.set_defaults(func=_cmd_generate)

    r = sub.add_parser("run", help="run an experiment batch")
    r.add_argument("--config", help="JSON or YAML experiment config")
    r.add_argument("--seed", type=int)
    r.add_argument("--count", type=int, help="number of scenarios")
    r.add_argument("--scenarios", help="scenario JSON file to use instead of generating")
    r.add_argument("--personas", help="comma-separated persona list, e.g. vanilla,fixed:anger")
    r.add_argument("--workers", type=int)
    r.add_argument("--run-id")
    r.add_argument("--out", help="output directory")
    r.set_defaults(func=_cmd_run)

    f = sub.add_parser("fit", help="fit HMM parameters from transcripts")
    f.add_argument("transcripts", nargs="+", help="transcript files or directories")
    f.add_argument("--init", help="initial parameter JSON (defaults to built-ins)")
    f.add_argument("--out", default="params.json")
    f.add_argument("--max-iters", type=int, default=100)
    f.add_argument("--tol", type=float, default=1e-6)
    f.add_argument("--smoothing", type=float, default=0.01)
    f.add_argument("--fit-contagion", action="store_true")
    f.set_defaults(func=_cmd_fit)

    rep = sub.add_parser("report", help="rebuild the report table from a run directory")
    rep.add_argument("dir")
    rep.add_argument("--json", action="store_true")
    rep.set_defaults(func=_cmd_report)

    d = sub.add_parser("dump-defaults", help="print built-in matrices as JSON")
    d.add_argument("--out")
    d.set_defaults(func=_cmd_dump_defaults)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
