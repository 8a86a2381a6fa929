# harness.py -- experiment plumbing: flat key=value configs, the
# desk-scale reference workload, the production-phase evaluation schedule,
# the memoized episode environment, the five run modes (ql, dqn, mbf,
# oracle, significance), and CSV/summary report emission.

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from flowrl.baselines import (
    IlpInstance,
    MbfState,
    knapsack_exact,
    run_mbf_episode,
)
from flowrl.dqn import DqnConfig, ReplayMemory, dqn_train, init_mlp
from flowrl.model import FlowTable, ThresholdConfig, select_rules
from flowrl.qlearn import (
    AgentConfig,
    _trace_row,
    init_qtable,
    q_train,
)
from flowrl.simnet import run_episode, run_orchestration
from flowrl.traffic import (
    FlowSchedule,
    FlowSpec,
    InvalidProfile,
    TrafficProfile,
    generate_schedule,
    total_packets,
)


class ParseError(Exception):
    """Config file is malformed; message carries the line number."""


class ValidationError(Exception):
    """A config field is out of range; message names the field."""


# Desk-scale reference workload: 20 hosts offering ~2.5 flows/s of 10%
# elephant (67.5 KB) / 90% mice (22.5 KB) traffic at 36 kbit/s per flow
# (3 packets per tick), observed for a 60 s window against a 64-entry
# table. Small enough that full training sweeps finish in seconds.
REFERENCE_TRAFFIC = TrafficProfile(
    elephant_fraction=0.1,
    mice_size=22_500,
    elephant_size=67_500,
    aggregate_rate=540_000.0,
    packet_size=1500,
    per_flow_rate=36_000.0,
)

# Fixed agent hyperparameters (see AgentConfig/DqnConfig defaults).
ALPHA = 0.1
GAMMA = 0.95
EPSILON_FRESH = 1.0
EPSILON_STATIC = 0.1


@dataclass
class ExperimentConfig:
    """One experiment: mode, seed, workload shape, and agent knobs.

    Defaults define the reference workload. qtable_init "from_training"
    pre-trains on n_training_sets random threshold sets before the
    reported run (which then uses a static exploration rate of 0.1);
    "random" starts fresh with a decaying rate from 1.0.
    """

    mode: str = "ql"
    seed: int = 0
    episodes_cap: int = 1000
    goal_mu: float = 0.4
    table_capacity_bits: int = 22_784
    orchestration_window: int = 60
    n_hosts: int = 20
    replay_lag: int = 15
    qtable_init: str = "from_training"
    n_training_sets: int = 20
    param_mode: str = "both"
    initial_freq: int = 130
    initial_rec: int = 0
    output_path: str = "report.csv"
    traffic: TrafficProfile = field(default_factory=lambda: REFERENCE_TRAFFIC)

    def validate(self):
        if self.mode not in ("ql", "dqn", "mbf", "oracle", "significance"):
            raise ValidationError("mode must be ql|dqn|mbf|oracle|significance")
        if self.episodes_cap < 1:
            raise ValidationError("episodes_cap must be >= 1")
        if not 0.0 < self.goal_mu < 1.0:
            raise ValidationError("goal_mu must be in (0, 1)")
        if self.table_capacity_bits < 0:
            raise ValidationError("table_capacity_bits must be >= 0")
        if self.orchestration_window < 1:
            raise ValidationError("orchestration_window must be >= 1")
        if self.n_hosts < 2:
            raise ValidationError("n_hosts must be >= 2")
        if self.replay_lag < 0:
            raise ValidationError("replay_lag must be >= 0")
        if self.qtable_init not in ("random", "from_training"):
            raise ValidationError("qtable_init must be random|from_training")
        if self.n_training_sets < 1:
            raise ValidationError("n_training_sets must be >= 1")
        if self.param_mode not in ("both", "freq_only", "recentness_only"):
            raise ValidationError("param_mode must be both|freq_only|recentness_only")
        try:
            ThresholdConfig(self.initial_freq, self.initial_rec)
        except ValueError as exc:
            raise ValidationError(str(exc))
        try:
            self.traffic.validate()
        except InvalidProfile as exc:
            raise ValidationError(str(exc))
        return self

    def initial_state(self):
        return ThresholdConfig(self.initial_freq, self.initial_rec)


# key -> (is_traffic_field, converter); file order is the echo order.
_CONFIG_KEYS = {
    "mode": (False, str),
    "seed": (False, int),
    "episodes_cap": (False, int),
    "goal_mu": (False, float),
    "table_capacity_bits": (False, int),
    "orchestration_window": (False, int),
    "n_hosts": (False, int),
    "replay_lag": (False, int),
    "qtable_init": (False, str),
    "n_training_sets": (False, int),
    "param_mode": (False, str),
    "initial_freq": (False, int),
    "initial_rec": (False, int),
    "output_path": (False, str),
    "elephant_fraction": (True, float),
    "mice_size": (True, int),
    "elephant_size": (True, int),
    "aggregate_rate": (True, float),
    "packet_size": (True, int),
    "per_flow_rate": (True, float),
}


def load_config(path):
    """Parse a flat key=value config file.

    Blank lines and lines starting with '#' are skipped. Unknown keys and
    malformed lines raise ParseError with the line number; out-of-range
    values raise ValidationError naming the field. Unset keys keep the
    documented defaults.
    """
    cfg = ExperimentConfig()
    traffic_kwargs = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError("line %d: expected key=value" % lineno)
            key, value = line.split("=", 1)
            key = key.strip()
            value = value.strip()
            if key not in _CONFIG_KEYS:
                raise ParseError("line %d: unknown key %r" % (lineno, key))
            is_traffic, conv = _CONFIG_KEYS[key]
            try:
                parsed = conv(value)
            except ValueError:
                raise ValidationError("%s: cannot parse %r" % (key, value))
            if is_traffic:
                traffic_kwargs[key] = parsed
            else:
                setattr(cfg, key, parsed)
    if traffic_kwargs:
        cfg.traffic = dataclasses.replace(cfg.traffic, **traffic_kwargs)
    return cfg.validate()


def save_config(cfg, path):
    """Echo a config as a reloadable key=value file (exact round-trip)."""
    def fmt(value):
        if isinstance(value, float):
            return "%.17g" % value
        return str(value)

    with open(path, "w", newline="\n") as fh:
        for key, (is_traffic, _) in _CONFIG_KEYS.items():
            source = cfg.traffic if is_traffic else cfg
            fh.write("%s=%s\n" % (key, fmt(getattr(source, key))))
    return path


def build_eval_schedule(schedule, window, replay_lag):
    """Derive the production-phase schedule from the orchestration window.

    The production episode re-offers the observed workload rather than
    fresh arrivals, so an episode is a pure function of the thresholds:
      - every flow still draining at the window close continues from relative
        tick 0 with its remaining bytes;
      - every elephant that completed by the window close recurs replay_lag
        ticks after its last emission tick (long-lived services come back),
        sized to what fits before the window length so the episode conserves
        packets; recurrences falling past the window are dropped;
      - completed mice never recur.
    """
    profile = schedule.profile
    rate = profile.packets_per_tick()
    flows = []
    for f in schedule.flows:
        total = total_packets(f.size, profile.packet_size)
        emitted = min(total, (window - f.start) * rate)
        remaining = total - emitted
        if remaining > 0:
            size = remaining * profile.packet_size
            flows.append(
                FlowSpec(
                    id=f.id,
                    klass=f.klass,
                    size=size,
                    start=0,
                    duration=size * 8 / profile.per_flow_rate,
                )
            )
            continue
        if f.klass != "elephant":
            continue
        death = f.start + -(-total // rate) - 1
        replay_at = death + replay_lag
        if replay_at >= window:
            continue
        pkts = min(total, rate * (window - replay_at))
        size = pkts * profile.packet_size
        flows.append(
            FlowSpec(
                id=f.id,
                klass="elephant",
                size=size,
                start=replay_at,
                duration=size * 8 / profile.per_flow_rate,
            )
        )
    flows.sort(key=lambda f: (f.start, f.id))
    return FlowSchedule(
        flows=flows, horizon=window, seed=schedule.seed, profile=profile
    )


class EpisodeEnv:
    """Maps thresholds to episode metrics, memoized.

    One production episode preinstalls select_rules(pool, thresholds) into
    a fresh table and evaluates the fixed placement against the evaluation
    schedule; identical thresholds always yield identical metrics, so
    results are cached per threshold pair.
    """

    def __init__(self, pool, eval_schedule, capacity_bits, window_close,
                 param_mode="both"):
        self.pool = pool
        self.eval_schedule = eval_schedule
        self.capacity_bits = capacity_bits
        self.window_close = window_close
        self.param_mode = param_mode
        self.cache = {}

    def run(self, thresholds):
        key = (thresholds.freq_threshold, thresholds.recentness_threshold)
        metrics = self.cache.get(key)
        if metrics is None:
            ruleset = select_rules(
                self.pool,
                thresholds,
                self.capacity_bits,
                self.window_close,
                self.param_mode,
            )
            table = FlowTable(self.capacity_bits)
            metrics = run_episode(
                ruleset,
                self.eval_schedule,
                table,
                duration=self.eval_schedule.horizon,
            )
            self.cache[key] = metrics
        return metrics


@dataclass
class RunReport:
    """Everything one experiment produced: the config echo, per-episode
    rows, a summary mapping, and (significance mode) named sub-reports."""

    config: ExperimentConfig
    rows: list
    summary: dict
    subreports: dict = field(default_factory=dict)


def _draw_training_sets(n, rng):
    """n random grid states for pre-training."""
    sets = []
    for _ in range(n):
        f = 10 * int(rng.integers(0, 21))
        r = 10 * int(rng.integers(0, 31))
        sets.append(ThresholdConfig(f, r))
    return sets


def _build_env(cfg, param_mode=None):
    schedule = generate_schedule(
        cfg.traffic, cfg.orchestration_window, cfg.n_hosts, cfg.seed
    )
    pool = run_orchestration(schedule, cfg.orchestration_window)
    eval_schedule = build_eval_schedule(
        schedule, cfg.orchestration_window, cfg.replay_lag
    )
    return EpisodeEnv(
        pool,
        eval_schedule,
        cfg.table_capacity_bits,
        cfg.orchestration_window,
        param_mode or cfg.param_mode,
    )


def _train_summary(cfg, result):
    initial = result.trace[0].overhead
    best = result.best
    reduction = (initial - best.best_overhead) / initial if initial else 0.0
    best_thr = best.best_thresholds
    bm = best.best_metrics
    ratio = bm.hits / bm.total_lookups if bm and bm.total_lookups else 0.0
    return {
        "mode": cfg.mode,
        "seed": cfg.seed,
        "initial_overhead": initial,
        "best_overhead": best.best_overhead,
        "reduction": reduction,
        "best_freq_thr": best_thr.freq_threshold if best_thr else 0,
        "best_rec_thr": best_thr.recentness_threshold if best_thr else 0,
        "best_hit_ratio": ratio,
        "episodes_run": result.episodes_run,
        "episodes_to_goal": result.episodes_run if result.goal_met else cfg.episodes_cap,
        "goal_met": result.goal_met,
    }


def _run_ql(cfg, env, rng_streams, load_policy=None):
    from flowrl.qlearn import QTable

    sets_rng, init_ss, train_ss = rng_streams
    pretrain_cfg = AgentConfig(
        alpha=ALPHA, gamma=GAMMA, epsilon0=EPSILON_FRESH,
        budget=cfg.episodes_cap, goal_mu=cfg.goal_mu, epsilon_decay=True,
    )
    if load_policy is not None:
        q = QTable.load(load_policy)
        initialized = True
    elif cfg.qtable_init == "from_training":
        sets = _draw_training_sets(cfg.n_training_sets, sets_rng)
        q = init_qtable("from_training", sets, init_ss, env, pretrain_cfg)
        initialized = True
    else:
        q = init_qtable("random", seed=init_ss)
        initialized = False
    final_cfg = AgentConfig(
        alpha=ALPHA,
        gamma=GAMMA,
        epsilon0=EPSILON_STATIC if initialized else EPSILON_FRESH,
        budget=cfg.episodes_cap,
        goal_mu=cfg.goal_mu,
        epsilon_decay=not initialized,
    )
    result = q_train(env, q, final_cfg, cfg.initial_state(),
                     np.random.default_rng(train_ss))
    return result, q


def _run_dqn(cfg, env, rng_streams, load_policy=None):
    from flowrl.dqn import Mlp

    sets_rng, init_ss, train_ss = rng_streams
    pretrain_cfg = DqnConfig(
        gamma=GAMMA, epsilon0=EPSILON_FRESH, budget=cfg.episodes_cap,
        goal_mu=cfg.goal_mu, epsilon_decay=True,
    )
    memory = ReplayMemory(
        pretrain_cfg.replay_capacity,
        pretrain_cfg.start_threshold,
        pretrain_cfg.minibatch,
    )
    if load_policy is not None:
        net = Mlp.load(load_policy)
        initialized = True
    elif cfg.qtable_init == "from_training":
        sets = _draw_training_sets(cfg.n_training_sets, sets_rng)
        net = init_mlp("from_training", sets, init_ss, env, pretrain_cfg, memory)
        initialized = True
    else:
        net = init_mlp("random", seed=init_ss)
        initialized = False
    final_cfg = DqnConfig(
        gamma=GAMMA,
        epsilon0=EPSILON_STATIC if initialized else EPSILON_FRESH,
        budget=cfg.episodes_cap,
        goal_mu=cfg.goal_mu,
        epsilon_decay=not initialized,
    )
    result = dqn_train(env, net, final_cfg, cfg.initial_state(),
                       np.random.default_rng(train_ss), memory)
    return result, net


def _oracle_instance(pool, eval_schedule, capacity_bits):
    """t_i = the flow's packet count in the evaluation episode (0 for pool
    flows that never reappear), s_i = one table entry, in FlowId order."""
    packets = {}
    for f in eval_schedule.flows:
        packets[f.id] = packets.get(f.id, 0) + total_packets(
            f.size, eval_schedule.profile.packet_size
        )
    order = sorted(pool.records)
    rules = tuple((packets.get(fid, 0), 356) for fid in order)
    return IlpInstance(rules=rules, capacity=capacity_bits), order


def run_experiment(cfg, save_policy=None, load_policy=None):
    """Execute one experiment, fully determined by the config and seed.

    ql / dqn: orchestration, optional pre-training, then the goal-driven
    training loop. mbf: one reactive baseline episode on the evaluation
    schedule. oracle: exact best placement for the observed pool.
    significance: three tabular runs (freq_only / recentness_only / both)
    on the same workload and seeds, plus a comparative summary.
    """
    cfg.validate()
    ss = np.random.SeedSequence(cfg.seed)
    sets_ss, init_ss, train_ss = ss.spawn(3)
    streams = (np.random.default_rng(sets_ss), init_ss, train_ss)

    if cfg.mode in ("ql", "dqn"):
        env = _build_env(cfg)
        if cfg.mode == "ql":
            result, policy = _run_ql(cfg, env, streams, load_policy)
        else:
            result, policy = _run_dqn(cfg, env, streams, load_policy)
        if save_policy is not None:
            policy.save(save_policy)
        return RunReport(
            config=cfg, rows=result.trace[1:], summary=_train_summary(cfg, result)
        )

    if cfg.mode == "mbf":
        env = _build_env(cfg)
        table = FlowTable(cfg.table_capacity_bits)
        metrics = run_mbf_episode(
            env.eval_schedule,
            table,
            MbfState(seed=cfg.seed),
            duration=env.eval_schedule.horizon,
        )
        row = _trace_row(1, metrics, ThresholdConfig(0, 0), 0, 0.0, 0)
        ratio = metrics.hits / metrics.total_lookups if metrics.total_lookups else 0.0
        summary = {
            "mode": cfg.mode,
            "seed": cfg.seed,
            "overhead": metrics.overhead,
            "hits": metrics.hits,
            "misses": metrics.misses,
            "hit_ratio": ratio,
            "duration": metrics.duration,
        }
        return RunReport(config=cfg, rows=[row], summary=summary)

    if cfg.mode == "oracle":
        env = _build_env(cfg)
        inst, _ = _oracle_instance(
            env.pool, env.eval_schedule, cfg.table_capacity_bits
        )
        assignment = knapsack_exact(inst)
        summary = {
            "mode": cfg.mode,
            "seed": cfg.seed,
            "objective": assignment.objective,
            "on_switch_count": len(assignment.on_switch),
            "n_rules": inst.n,
            "capacity_bits": cfg.table_capacity_bits,
        }
        return RunReport(config=cfg, rows=[], summary=summary)

    # significance: identical workload and seed streams, three param modes
    subreports = {}
    reductions = {}
    for pm in ("freq_only", "recentness_only", "both"):
        sub_cfg = dataclasses.replace(cfg, mode="ql", param_mode=pm)
        env = _build_env(sub_cfg, param_mode=pm)
        sub_streams = (
            np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(3)[0]),
            init_ss,
            train_ss,
        )
        result, _ = _run_ql(sub_cfg, env, sub_streams)
        subreports[pm] = RunReport(
            config=sub_cfg,
            rows=result.trace[1:],
            summary=_train_summary(sub_cfg, result),
        )
        reductions[pm] = subreports[pm].summary["reduction"]
    summary = {
        "mode": cfg.mode,
        "seed": cfg.seed,
        "reduction_freq_only": reductions["freq_only"],
        "reduction_recentness_only": reductions["recentness_only"],
        "reduction_both": reductions["both"],
        "both_dominates": reductions["both"]
        > max(reductions["freq_only"], reductions["recentness_only"]),
    }
    return RunReport(config=cfg, rows=[], summary=summary, subreports=subreports)


_CSV_HEADER = (
    "episode,overhead,hits,misses,hit_ratio,reduction,"
    "freq_thr,rec_thr,reward,epsilon\n"
)


def _format_summary_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "%.6f" % value
    return str(value)


def write_report(report, path):
    """Write per-episode rows as CSV at `path`, the summary block at
    `path`.summary, and the config echo at `path`.cfg; significance
    sub-reports land at `path`.<param_mode>. Returns `path`."""
    with open(path, "w", newline="\n") as fh:
        fh.write(_CSV_HEADER)
        for row in report.rows:
            fh.write(
                "%d,%d,%d,%d,%.6f,%.6f,%d,%d,%d,%.6f\n"
                % (
                    row.episode,
                    row.overhead,
                    row.hits,
                    row.misses,
                    row.hit_ratio,
                    row.reduction,
                    row.freq_thr,
                    row.rec_thr,
                    row.reward,
                    row.epsilon,
                )
            )
    with open(path + ".summary", "w", newline="\n") as fh:
        for key, value in report.summary.items():
            fh.write("%s=%s\n" % (key, _format_summary_value(value)))
    save_config(report.config, path + ".cfg")
    for name, sub in report.subreports.items():
        write_report(sub, path + "." + name)
    return path
