# Shared fixtures and helpers: tiny deterministic workloads, hand-built
# schedules, and a stub episode environment with a programmable landscape.

import numpy as np
import pytest

from flowrl.model import FlowId, FlowPool, ThresholdConfig
from flowrl.simnet import EpisodeMetrics
from flowrl.traffic import FlowSchedule, FlowSpec, TrafficProfile


def fid(i, j=None):
    """Distinct FlowIds keyed by small integers."""
    if j is None:
        j = 1000 + i
    return FlowId(src_host=0, dst_host=1, src_port=1024 + i, dst_port=1024 + j)


# One packet per tick per flow: per_flow_rate / (packet_size*8) = 1.
ONE_PPS = TrafficProfile(
    elephant_fraction=0.5,
    mice_size=3000,
    elephant_size=4500,
    aggregate_rate=100_000.0,
    packet_size=1500,
    per_flow_rate=12_000.0,
)


def hand_schedule(specs, horizon, profile=ONE_PPS):
    """Build a FlowSchedule from (flow_id, klass, size_bytes, start) tuples."""
    flows = [
        FlowSpec(
            id=f,
            klass=klass,
            size=size,
            start=start,
            duration=size * 8 / profile.per_flow_rate,
        )
        for f, klass, size, start in specs
    ]
    flows.sort(key=lambda f: (f.start, f.id))
    return FlowSchedule(flows=flows, horizon=horizon, seed=0, profile=profile)


def hand_pool(entries):
    """Build a FlowPool from {flow_id: (freq, last_seen)}."""
    pool = FlowPool()
    for f, (freq, last_seen) in entries.items():
        pool.record(f, last_seen, freq)
    return pool


class FakeEnv:
    """Episode environment with a programmable overhead landscape.

    overhead_fn maps (freq_threshold, recentness_threshold) to an integer
    overhead; lookups are padded so the metrics invariants hold.
    """

    def __init__(self, overhead_fn, total=100):
        self.overhead_fn = overhead_fn
        self.total = total
        self.calls = 0

    def run(self, thresholds):
        self.calls += 1
        o = int(self.overhead_fn(thresholds.freq_threshold,
                                 thresholds.recentness_threshold))
        hits = max(self.total - o, 0)
        return EpisodeMetrics(
            overhead=o, hits=hits, misses=o, total_lookups=hits + o, duration=1
        )


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def toy_mdp():
    """A 3-state, 2-action deterministic chain with known optimal values.

    States are the grid cells (0,0), (10,0), (20,0); actions move right or
    left with clamping at the chain ends. Rewards stay in {-1, 0, 1} and
    make every optimal action-value positive, so unused Q-table cells
    (which start at 0) never win a row max.

    Returns (states, actions, rewards, transition, q_star) with q_star the
    fixed point of the Bellman optimality recursion at gamma=0.95, iterated
    to 1e-10.
    """
    states = (ThresholdConfig(0, 0), ThresholdConfig(10, 0), ThresholdConfig(20, 0))
    from flowrl.qlearn import Action

    actions = (Action.IncFreq, Action.DecFreq)
    rewards = np.array([[1, 0], [0, 1], [-1, 1]])

    def step(si, ai):
        return min(si + 1, 2) if ai == 0 else max(si - 1, 0)

    gamma = 0.95
    q = np.zeros((3, 2))
    for _ in range(3000):
        q_next = np.empty_like(q)
        for si in range(3):
            for ai in range(2):
                q_next[si, ai] = rewards[si, ai] + gamma * q[step(si, ai)].max()
        if np.abs(q_next - q).max() < 1e-10:
            q = q_next
            break
        q = q_next
    return states, actions, rewards, step, q
