"""Experiment orchestration: the per-tick loop, metrics and CSV outputs."""

from __future__ import annotations

import csv
import io
import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import ScenarioConfig
from .encoding import EmbeddingTables, actor_input, build_tables
from .gridworld import Cell, GridWorld, MoveKind, apply_action, build, observe, step_dynamics
from .learner import (
    AgentBrain,
    RewardParams,
    combined_move_reward,
    epsilon_at,
    extrinsic_reward,
    select_action,
    step_reward,
    update,
)
from .mental_state import MentalState
from .protocol import AgentView, ProtocolStats, SessionOutcome, run_session

log = logging.getLogger(__name__)


@dataclass
class Agent:
    index: int
    goal: Cell
    brain: AgentBrain
    ms: MentalState | None
    act_rng: np.random.Generator
    replay_rng: np.random.Generator


@dataclass
class EpisodeMetrics:
    episode: int
    avg_reward: list[float]
    steps_to_goal: list[int]
    reached: list[bool]

    @property
    def agent_mean(self) -> float:
        return float(np.mean(self.avg_reward))


@dataclass
class RunResult:
    config: ScenarioConfig
    episodes: list[EpisodeMetrics] = field(default_factory=list)
    sessions: list[tuple[int, int, SessionOutcome]] = field(default_factory=list)  # (episode, step, outcome)
    diagnostics: list[tuple] = field(default_factory=list)
    stats: ProtocolStats = field(default_factory=ProtocolStats)

    @property
    def r_overall(self) -> float:
        return overall_performance([e.avg_reward for e in self.episodes])

    @property
    def r_std(self) -> float:
        return float(np.std([e.agent_mean for e in self.episodes]))

    @property
    def mean_steps_to_goal(self) -> float:
        return float(np.mean([s for e in self.episodes for s in e.steps_to_goal]))

    @property
    def goal_reach_rate(self) -> float:
        return float(np.mean([r for e in self.episodes for r in e.reached]))

    def summary_row(self) -> dict:
        c = self.config
        return {
            "env": c.env_size,
            "difficulty": c.difficulty,
            "scenario": c.scenario,
            "agent_type": c.agent_type,
            "seed": c.seed,
            "r_overall": self.r_overall,
            "r_std": self.r_std,
            "mean_steps_to_goal": self.mean_steps_to_goal,
            "goal_reach_rate": self.goal_reach_rate,
        }


class RunFailure(RuntimeError):
    def __init__(self, config: ScenarioConfig, cause: BaseException):
        c = config
        super().__init__(
            f"run failed for env={c.env_size} difficulty={c.difficulty} scenario={c.scenario} "
            f"agent_type={c.agent_type} seed={c.seed}: {cause!r}"
        )
        self.config = config


def avg_reward(rewards: Sequence[float], steps: int | None = None) -> float:
    """Mean per-step reward; an agent that never had to move (spawned on its goal) scores 1."""
    if steps is not None and steps != len(rewards):
        raise ValueError(f"got {len(rewards)} rewards for {steps} steps")
    if len(rewards) == 0:
        return 1.0
    return float(sum(rewards) / len(rewards))


def overall_performance(all_metrics: Sequence[Sequence[float]]) -> float:
    """Mean over episodes of the mean AvgR over agents."""
    return float(np.mean([np.mean(row) for row in all_metrics]))


def make_agents(config: ScenarioConfig, world: GridWorld, tables: EmbeddingTables) -> list[Agent]:
    flags = config.flags
    agents = []
    for i in range(world.n_agents):
        init_rng, act_rng, replay_rng = (
            np.random.default_rng(s) for s in np.random.SeedSequence([config.seed, 1, i]).spawn(3)
        )
        brain = AgentBrain(
            tables.action, init_rng, hidden=config.hidden, actor_lr=config.actor_lr,
            critic_lr=config.critic_lr, gamma=config.gamma, tau=config.tau,
            batch_size=config.batch_size, replay_capacity=config.replay_capacity,
        )
        ms = None
        if flags.use_mental_state:
            ms = MentalState(world.width, world.height, world.agent_goals[i],
                             config.time_increment, config.duration_cap)
        agents.append(Agent(i, world.agent_goals[i], brain, ms, act_rng, replay_rng))
    return agents


@dataclass
class _Context:
    config: ScenarioConfig
    tables: EmbeddingTables
    reward: RewardParams
    result: RunResult
    total_steps: int
    global_step: int = 0
    audit: bool = False
    diagnostics: bool = False


def run_episode(world: GridWorld, agents: list[Agent], ctx: _Context, episode: int = 0) -> EpisodeMetrics:
    """Simulate one episode; mutates the world, agents and the run's logs."""
    cfg = ctx.config
    flags = cfg.flags
    time_aware = flags.use_time_awareness
    alpha = cfg.effective_alpha
    n = len(agents)
    rewards: list[list[float]] = [[] for _ in range(n)]
    steps = [cfg.max_steps] * n
    done = [False] * n
    for i in range(n):
        if world.at_goal(i):
            done[i] = True
            steps[i] = 1

    for t in range(1, cfg.max_steps + 1):
        if all(done):
            break
        step_dynamics(world)
        views = None
        if flags.use_communication:
            views = [AgentView(a.index, a.goal, a.ms.copy(), a.brain.snapshot()) for a in agents]
        eps = epsilon_at(ctx.global_step, ctx.total_steps, cfg.eps_start, cfg.eps_end, cfg.eps_anneal_fraction)
        ctx.global_step += 1

        for a in agents:
            i = a.index
            if a.ms is not None:
                a.ms.absorb_observation(observe(world, i, cfg.obs_radius))
                a.ms.tick()
            if done[i]:
                continue
            if views is not None:
                outcome = run_session(
                    world, i, a.ms, a.brain, views, goal_aware=flags.use_goal_awareness,
                    beta=cfg.beta, radius=cfg.obs_radius, j_threshold=cfg.j_threshold,
                    goal_filtered=cfg.goal_filtered_sharing, stats=ctx.result.stats, audit=ctx.audit,
                )
                if outcome.contacts:
                    ctx.result.sessions.append((episode, t, outcome))

            x = actor_input(world.agent_positions[i], a.goal, a.ms, ctx.tables, time_aware)
            action = select_action(a.brain, x, eps, a.act_rng)
            move = apply_action(world, i, action)
            at_goal = world.at_goal(i)
            r_agg = 0.0
            if move.kind is MoveKind.MOVED and not at_goal:
                r_ext = extrinsic_reward(world, i, ctx.reward, a.ms if cfg.reward_on_known_map else None)
                r_agg = combined_move_reward(r_ext, a.ms if alpha > 0 else None, alpha, cfg.novelty_mode)
            r = step_reward(move.kind, at_goal, r_agg, cfg.lambda_stay)
            x_next = actor_input(move.cell, a.goal, a.ms, ctx.tables, time_aware)
            a.brain.buffer.push(x, int(action), r, x_next, at_goal)
            stats = update(a.brain, a.replay_rng)
            rewards[i].append(r)
            if ctx.diagnostics:
                ctx.result.diagnostics.append(
                    (episode, t, i, r, None if stats is None else stats.critic_loss, eps))
            if at_goal:
                done[i] = True
                steps[i] = t

    avg = [avg_reward(rw) for rw in rewards]
    return EpisodeMetrics(episode, avg, steps, [world.at_goal(i) for i in range(n)])


def run(config: ScenarioConfig, *, audit: bool = False, diagnostics: bool = False) -> RunResult:
    """Train agents of ``config.agent_type`` for ``config.episodes`` episodes."""
    world = build(config, config.seed)
    tables = build_tables(config.embedding_seed, world.width, world.height)
    agents = make_agents(config, world, tables)
    result = RunResult(config)
    ctx = _Context(
        config=config,
        tables=tables,
        reward=RewardParams(config.effective_alpha, config.lambda_stay, world.width + world.height),
        result=result,
        total_steps=config.episodes * config.max_steps,
        audit=audit,
        diagnostics=diagnostics,
    )
    for ep in range(config.episodes):
        if ep > 0:
            world.reset_episode()
            if not config.persist_mental_state:
                for a in agents:
                    if a.ms is not None:
                        a.ms.reset()
        metrics = run_episode(world, agents, ctx, ep)
        result.episodes.append(metrics)
        log.debug("episode %d: agent-mean AvgR %.4f", ep, metrics.agent_mean)
    return result


def _run_safely(config: ScenarioConfig) -> RunResult:
    try:
        return run(config)
    except Exception as exc:  # noqa: BLE001 - re-raised with the failing config attached
        raise RunFailure(config, exc) from exc


def run_matrix(configs: Sequence[ScenarioConfig], workers: int = 1) -> list[RunResult]:
    """Execute every config; runs share nothing, so they may go to separate processes."""
    if workers <= 1:
        return [_run_safely(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_safely, configs))


# ---------------------------------------------------------------- CSV output

METRICS_FIELDS = ["env", "difficulty", "scenario", "agent_type", "seed",
                  "r_overall", "r_std", "mean_steps_to_goal", "goal_reach_rate"]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def metrics_csv(results: Sequence[RunResult]) -> str:
    return _csv(METRICS_FIELDS, ([r.summary_row()[k] for k in METRICS_FIELDS] for r in results))


def episodes_csv(result: RunResult) -> str:
    rows = (
        (e.episode, i + 1, e.avg_reward[i], e.steps_to_goal[i], e.reached[i])
        for e in result.episodes
        for i in range(len(e.avg_reward))
    )
    return _csv(["episode", "agent", "avg_reward", "steps_to_goal", "reached"], rows)


def sessions_csv(result: RunResult) -> str:
    def ids(xs):
        return " ".join(str(x + 1) for x in xs)

    rows = (
        (ep, t, o.agent + 1, ids(o.contacts), ids(o.peers), ids(o.advisors),
         " ".join(f"{j + 1}:{v!r}" for j, v in o.j_values.items()), o.merged_cells,
         o.aggregation_applied)
        for ep, t, o in result.sessions
    )
    return _csv(["episode", "step", "agent", "contacts", "peers", "advisors", "j_values",
                 "merged_cells", "aggregation_applied"], rows)


def learning_curve_csv(result: RunResult) -> str:
    n = len(result.episodes[0].avg_reward) if result.episodes else 0
    header = ["episode"] + [f"agent_{i + 1}" for i in range(n)] + ["mean"]
    rows = ((e.episode, *e.avg_reward, e.agent_mean) for e in result.episodes)
    return _csv(header, rows)


def diagnostics_csv(result: RunResult) -> str:
    rows = ((ep, t, i + 1, r, "" if loss is None else loss, eps) for ep, t, i, r, loss, eps in result.diagnostics)
    return _csv(["episode", "step", "agent", "reward", "critic_loss", "epsilon"], rows)


def write_run_outputs(result: RunResult, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(metrics_csv([result]))
    (out / "episodes.csv").write_text(episodes_csv(result))
    (out / "sessions.csv").write_text(sessions_csv(result))
    (out / "learning_curve.csv").write_text(learning_curve_csv(result))
    if result.diagnostics:
        (out / "diagnostics.csv").write_text(diagnostics_csv(result))


def run_label(c: ScenarioConfig) -> str:
    return f"{c.env_size}-{c.difficulty}-s{c.scenario}-{c.agent_type}-seed{c.seed}"


def describe(results: Sequence[RunResult]) -> str:
    """Plain-text table of R_overall per run."""
    lines = []
    for r in results:
        lines.append(f"{run_label(r.config):32s} R_overall={r.r_overall:+.4f} ± {r.r_std:.4f} "
                     f"steps={r.mean_steps_to_goal:6.1f} reach={r.goal_reach_rate:.2f}")
    if len(results) > 1:
        lines.append(f"{'mean':32s} R_overall={statistics.fmean(r.r_overall for r in results):+.4f}")
    return "\n".join(lines)
