"""Command line entry point: ``decmarl run``, ``decmarl matrix``, ``decmarl dump-tables``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import (
    AGENT_TYPES,
    DIFFICULTIES,
    ENV_SIZES,
    NOVELTY_MODES,
    ConfigurationError,
    MatrixSpec,
    ScenarioConfig,
    load_config_file,
)
from .encoding import build_tables
from .gridworld import load_layout
from .harness import (
    describe,
    episodes_csv,
    learning_curve_csv,
    metrics_csv,
    run,
    run_label,
    run_matrix,
    sessions_csv,
    write_run_outputs,
)

log = logging.getLogger("decmarl")

# CLI flag -> ScenarioConfig field
_FLAG_FIELDS = {
    "env": "env_size",
    "difficulty": "difficulty",
    "scenario": "scenario",
    "agent_type": "agent_type",
    "seed": "seed",
    "episodes": "episodes",
    "max_steps": "max_steps",
    "alpha": "alpha",
    "beta": "beta",
    "novelty": "novelty_mode",
    "obs_radius": "obs_radius",
    "p_toggle": "p_toggle",
    "n_agents": "n_agents",
}


def _add_common(p: argparse.ArgumentParser, multi: bool) -> None:
    action = "append" if multi else "store"
    p.add_argument("--env", choices=ENV_SIZES, action=action)
    p.add_argument("--difficulty", choices=DIFFICULTIES, action=action)
    p.add_argument("--scenario", type=int, choices=(1, 2), action=action)
    p.add_argument("--agent-type", choices=sorted(AGENT_TYPES), action=action)
    p.add_argument("--seed", type=int, help="seed (matrix: first seed)")
    p.add_argument("--episodes", type=int)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--novelty", choices=NOVELTY_MODES)
    p.add_argument("--obs-radius", type=int)
    p.add_argument("--p-toggle", type=float)
    p.add_argument("--n-agents", type=int)
    p.add_argument("--config", type=Path, help="YAML/JSON file of ScenarioConfig fields")
    p.add_argument("--out", type=Path, default=Path("results"))


class _Parser(argparse.ArgumentParser):
    # bad flags are configuration errors (exit 1), not argparse's usual exit 2
    def error(self, message: str):
        raise ConfigurationError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="decmarl", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="train one configuration")
    _add_common(p_run, multi=False)
    p_run.add_argument("--diagnostics", action="store_true", help="also write per-step diagnostics.csv")
    p_run.add_argument("--audit", action="store_true",
                       help="check after every session that only peer packets touched the parameters")

    p_mat = sub.add_parser("matrix", help="run the env x difficulty x scenario x agent-type grid")
    _add_common(p_mat, multi=True)
    p_mat.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds")
    p_mat.add_argument("--workers", type=int, default=1)

    p_dump = sub.add_parser("dump-tables", help="write the embedding tables as CSV")
    p_dump.add_argument("--env", choices=ENV_SIZES, default="base")
    p_dump.add_argument("--seed", type=int, default=0)
    p_dump.add_argument("--out", type=Path)
    return parser


def config_from_args(args: argparse.Namespace, multi: bool = False) -> ScenarioConfig:
    """Defaults, then the --config file, then explicit flags."""
    values: dict = {}
    if args.config is not None:
        values.update(load_config_file(args.config))
    for flag, fld in _FLAG_FIELDS.items():
        v = getattr(args, flag, None)
        if v is None or (multi and isinstance(v, list)):
            continue
        values[fld] = v
    try:
        return ScenarioConfig(**values)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc


def _cmd_run(args: argparse.Namespace) -> None:
    config = config_from_args(args)
    result = run(config, audit=args.audit, diagnostics=args.diagnostics)
    write_run_outputs(result, args.out)
    stats = dict(vars(result.stats))
    (args.out / "protocol.json").write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n")
    (args.out / "config.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
    print(describe([result]))


def _cmd_matrix(args: argparse.Namespace) -> None:
    base = config_from_args(args, multi=True)
    spec = MatrixSpec(
        env_sizes=tuple(args.env or ENV_SIZES),
        difficulties=tuple(args.difficulty or DIFFICULTIES),
        scenarios=tuple(args.scenario or (1, 2)),
        agent_types=tuple(args.agent_type or AGENT_TYPES),
        seeds=tuple(range(base.seed, base.seed + args.seeds)),
        base=base,
    )
    configs = spec.configs()
    log.info("running %d configurations", len(configs))
    results = run_matrix(configs, workers=args.workers)
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(metrics_csv(results))
    for r in results:
        sub = out / run_label(r.config)
        sub.mkdir(exist_ok=True)
        (sub / "episodes.csv").write_text(episodes_csv(r))
        (sub / "sessions.csv").write_text(sessions_csv(r))
        (sub / "learning_curve.csv").write_text(learning_curve_csv(r))
    print(describe(results))


def _cmd_dump_tables(args: argparse.Namespace) -> None:
    layout = load_layout(args.env)
    text = build_tables(args.seed, layout.width, layout.height).to_csv()
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigurationError as exc:
        parser.print_usage(sys.stderr)
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    commands = {"run": _cmd_run, "matrix": _cmd_matrix, "dump-tables": _cmd_dump_tables}
    try:
        commands[args.command](args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - mapped to the runtime-failure exit code
        log.exception("run failed")
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
