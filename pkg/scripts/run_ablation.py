"""Run the agent-type ablation on one environment and print R_overall per type.

Example:
    python scripts/run_ablation.py --env base --difficulty easy --scenario 1 --seeds 5 --out results/ablation
"""

import argparse
import os
import statistics
from pathlib import Path

from decmarl.config import AGENT_TYPES, ScenarioConfig
from decmarl.harness import learning_curve_csv, metrics_csv, run_label, run_matrix


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--env", default="base", choices=("base", "large"))
    p.add_argument("--difficulty", default="easy", choices=("easy", "hard"))
    p.add_argument("--scenario", type=int, default=1, choices=(1, 2))
    p.add_argument("--types", nargs="+", default=sorted(AGENT_TYPES))
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--max-steps", type=int, default=300)
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", type=Path, default=Path("results/ablation"))
    args = p.parse_args()

    base = ScenarioConfig(env_size=args.env, difficulty=args.difficulty, scenario=args.scenario,
                          episodes=args.episodes, max_steps=args.max_steps)
    configs = [base.replace(agent_type=t, seed=s) for t in args.types for s in range(args.seeds)]
    results = run_matrix(configs, workers=args.workers)

    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "metrics.csv").write_text(metrics_csv(results))
    for r in results:
        (args.out / f"{run_label(r.config)}-curve.csv").write_text(learning_curve_csv(r))

    print(f"{'type':6s} {'mean R':>8s} {'sd':>7s}  per seed")
    for t in args.types:
        vals = [r.r_overall for r in results if r.config.agent_type == t]
        sd = statistics.pstdev(vals) if len(vals) > 1 else 0.0
        print(f"{t:6s} {statistics.fmean(vals):+8.4f} {sd:7.4f}  " + " ".join(f"{v:+.3f}" for v in vals))


if __name__ == "__main__":
    main()
