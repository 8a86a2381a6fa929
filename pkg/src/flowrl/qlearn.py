# qlearn.py -- tabular Q-learning over the threshold grid: epsilon-greedy
# selection with iterative epsilon decay, the one-cell Q update, table
# initialization (random or from training runs), persistence, and the
# goal-driven training loop.

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from flowrl.model import FREQ_GRID, GRID_STEP, REC_GRID, ThresholdConfig
from flowrl.simnet import BestSoFar, compute_reward, reduction_fraction


class Action(IntEnum):
    """The five composite actions; greedy ties resolve in this order."""

    NoOp = 0
    IncFreq = 1
    DecFreq = 2
    IncRec = 3
    DecRec = 4


ACTIONS = tuple(Action)
N_ACTIONS = len(ACTIONS)


class EmptyTrainingSets(Exception):
    """from_training initialization needs at least one training set."""


@dataclass
class AgentConfig:
    """Q-learning hyperparameters.

    epsilon decays from epsilon0 each episode when epsilon_decay is True
    (fresh tables); initialized tables run a static small epsilon instead.
    budget is the episode cap of one training run; goal_mu the target
    overhead-reduction fraction.
    """

    alpha: float = 0.1
    gamma: float = 0.95
    epsilon0: float = 1.0
    budget: int = 1000
    goal_mu: float = 0.4
    epsilon_decay: bool = True

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if not 0.0 <= self.epsilon0 <= 1.0:
            raise ValueError("epsilon0 must be in [0, 1]")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")


class QTable:
    """Dense Q-values over the full state grid: shape (21, 31, 5) indexed
    by (freq_threshold/10, recentness_threshold/10, action)."""

    def __init__(self, values=None):
        shape = (len(FREQ_GRID), len(REC_GRID), N_ACTIONS)
        if values is None:
            values = np.zeros(shape)
        values = np.asarray(values, dtype=float)
        if values.shape != shape:
            raise ValueError("expected shape %r" % (shape,))
        self.values = values

    @staticmethod
    def random(rng):
        """Small random init: every cell uniform in [0, 0.01)."""
        shape = (len(FREQ_GRID), len(REC_GRID), N_ACTIONS)
        return QTable(rng.uniform(0.0, 0.01, size=shape))

    @staticmethod
    def _index(state):
        return (state.freq_threshold // GRID_STEP,
                state.recentness_threshold // GRID_STEP)

    def row(self, state):
        fi, ri = self._index(state)
        return self.values[fi, ri]

    def get(self, state, action):
        fi, ri = self._index(state)
        return self.values[fi, ri, int(action)]

    def set(self, state, action, value):
        fi, ri = self._index(state)
        self.values[fi, ri, int(action)] = value

    def copy(self):
        return QTable(self.values.copy())

    def save(self, path):
        """One `freq_thr,rec_thr,action,q_value` line per cell, sorted,
        with 17-significant-digit decimals (round-trip exact)."""
        with open(path, "w", newline="\n") as fh:
            for fi, f in enumerate(FREQ_GRID):
                for ri, r in enumerate(REC_GRID):
                    for a in ACTIONS:
                        fh.write(
                            "%d,%d,%s,%s\n"
                            % (f, r, a.name, "%.17g" % self.values[fi, ri, int(a)])
                        )

    @staticmethod
    def load(path):
        q = QTable()
        names = {a.name: a for a in ACTIONS}
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                f, r, name, value = line.split(",")
                q.values[int(f) // GRID_STEP, int(r) // GRID_STEP, int(names[name])] = (
                    float(value)
                )
        return q


@dataclass
class TraceRow:
    """One per-episode report row."""

    episode: int
    overhead: int
    hits: int
    misses: int
    hit_ratio: float
    reduction: float
    freq_thr: int
    rec_thr: int
    reward: int
    epsilon: float


@dataclass
class TrainResult:
    """Outcome of one training run. episodes_run counts training episodes
    after the initial-state evaluation (trace row 0)."""

    episodes_run: int
    best: BestSoFar
    goal_met: bool
    trace: list


def epsilon_greedy_select(q, state, eps, rng):
    """With probability eps pick uniformly over the 5 actions, otherwise
    the argmax of Q(state, .) with ties broken by action-enum order."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must be in [0, 1]")
    if rng.random() < eps:
        return Action(int(rng.integers(N_ACTIONS)))
    return Action(int(np.argmax(q.row(state))))


def apply_action(state, action):
    """Move one grid step (clamped): IncFreq/DecFreq on the frequency
    threshold, IncRec/DecRec on the recentness threshold, NoOp identity."""
    f = state.freq_threshold
    r = state.recentness_threshold
    if action == Action.IncFreq:
        f = min(f + GRID_STEP, FREQ_GRID[-1])
    elif action == Action.DecFreq:
        f = max(f - GRID_STEP, 0)
    elif action == Action.IncRec:
        r = min(r + GRID_STEP, REC_GRID[-1])
    elif action == Action.DecRec:
        r = max(r - GRID_STEP, 0)
    return ThresholdConfig(f, r)


def q_update(q, state, action, reward, next_state, cfg):
    """One-cell temporal-difference update:
    Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a))."""
    current = q.get(state, action)
    target = reward + cfg.gamma * float(np.max(q.row(next_state)))
    q.set(state, action, current + cfg.alpha * (target - current))
    return q


def decay_epsilon(eps, step, budget):
    """Iterative decay: eps * (1 - step/budget), applied each episode with
    the current eps and that episode's index."""
    if not 0 <= step < budget:
        raise ValueError("step must be in [0, budget)")
    return eps * (1.0 - step / budget)


def init_qtable(mode, training_sets=None, seed=0, env=None, cfg=None):
    """Build a Q-table.

    mode "random": every cell uniform in [0, 0.01), seeded.
    mode "from_training": random init, then one full training run per
    training set (each set as the initial state), accumulating into the
    same table; requires env and cfg.
    """
    rng = np.random.default_rng(seed)
    q = QTable.random(rng)
    if mode == "random":
        return q
    if mode != "from_training":
        raise ValueError("unknown init mode %r" % (mode,))
    if not training_sets:
        raise EmptyTrainingSets("from_training needs a non-empty training set list")
    if env is None or cfg is None:
        raise ValueError("from_training needs env and cfg")
    for state in training_sets:
        q_train(env, q, cfg, state, rng)
    return q


def _trace_row(episode, metrics, state, reward, eps, initial):
    ratio = metrics.hits / metrics.total_lookups if metrics.total_lookups else 0.0
    red = reduction_fraction(initial, metrics.overhead) if initial else 0.0
    return TraceRow(
        episode=episode,
        overhead=metrics.overhead,
        hits=metrics.hits,
        misses=metrics.misses,
        hit_ratio=ratio,
        reduction=red,
        freq_thr=state.freq_threshold,
        rec_thr=state.recentness_threshold,
        reward=reward,
        epsilon=eps,
    )


def q_train(env, q, cfg, initial_state, rng=None):
    """Goal-driven training loop.

    Episode 0 evaluates the initial state to fix the baseline overhead;
    each following episode selects an action epsilon-greedily, decays
    epsilon (when enabled), applies the action, runs an episode at the new
    thresholds, computes the reward against the best overhead so far, and
    updates one Q cell. Stops when the overhead reduction of the best
    episode exceeds cfg.goal_mu, or at the episode cap (goal_met=False).

    A baseline of zero overhead cannot be improved; the run returns
    immediately with goal_met=True.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    state = initial_state
    m0 = env.run(state)
    initial = m0.overhead
    best = BestSoFar(m0.overhead, state, m0)
    trace = [_trace_row(0, m0, state, 0, cfg.epsilon0, initial)]
    if initial == 0:
        return TrainResult(0, best, True, trace)

    eps = cfg.epsilon0
    goal_met = False
    episodes = 0
    for step in range(cfg.budget):
        action = epsilon_greedy_select(q, state, eps, rng)
        eps_used = eps
        if cfg.epsilon_decay:
            eps = decay_epsilon(eps, step, cfg.budget)
        next_state = apply_action(state, action)
        metrics = env.run(next_state)
        reward = compute_reward(best, metrics.overhead, next_state, metrics)
        q_update(q, state, action, reward, next_state, cfg)
        episodes = step + 1
        trace.append(_trace_row(episodes, metrics, next_state, reward, eps_used, initial))
        state = next_state
        if reduction_fraction(initial, best.best_overhead) > cfg.goal_mu:
            goal_met = True
            break
    return TrainResult(episodes, best, goal_met, trace)
