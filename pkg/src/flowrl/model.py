# model.py -- flow identities, forwarding rules, the capacity-bounded flow
# table, the observed flow pool, and threshold-based rule selection.

from dataclasses import dataclass, field

# A flow entry occupies a fixed number of TCAM bits.
ENTRY_BITS = 356

# Threshold grids walked by the agents: match-frequency thresholds in
# {0, 10, ..., 200}, recentness thresholds in {0, 10, ..., 300} seconds.
GRID_STEP = 10
FREQ_MAX = 200
REC_MAX = 300
FREQ_GRID = tuple(range(0, FREQ_MAX + 1, GRID_STEP))
REC_GRID = tuple(range(0, REC_MAX + 1, GRID_STEP))


class CapacityExceeded(Exception):
    """Inserting the rule would push the table past its bit capacity."""


class DuplicateRule(Exception):
    """A rule with the same FlowId is already installed."""


@dataclass(frozen=True, order=True)
class FlowId:
    """5-tuple flow identity. Ordering is the tuple order of the fields,
    which doubles as the deterministic lexicographic tie-break."""

    src_host: int
    dst_host: int
    src_port: int
    dst_port: int
    proto: str = "tcp"

    def __post_init__(self):
        if self.src_host == self.dst_host:
            raise ValueError("src_host and dst_host must differ")
        for port in (self.src_port, self.dst_port):
            if not 1 <= port <= 65535:
                raise ValueError("ports must be in [1, 65535]")
        if self.proto != "tcp":
            raise ValueError("only tcp flows are modeled")

    def text(self):
        """Serialize as a comma-free token for line-oriented files."""
        return "%d-%d-%d-%d-%s" % (
            self.src_host, self.dst_host, self.src_port, self.dst_port, self.proto
        )

    @staticmethod
    def from_text(token):
        src, dst, sport, dport, proto = token.strip().split("-")
        return FlowId(int(src), int(dst), int(sport), int(dport), proto)


@dataclass
class FlowRule:
    """A forwarding rule with usage counters.

    size_bits is constant; match_count only grows; last_match_time tracks
    the most recent hit (meaningful once match_count > 0).
    """

    id: FlowId
    install_time: int
    size_bits: int = ENTRY_BITS
    match_count: int = 0
    last_match_time: int = 0

    def __post_init__(self):
        if self.size_bits != ENTRY_BITS:
            raise ValueError("flow entries are fixed at %d bits" % ENTRY_BITS)


class FlowTable:
    """Capacity-bounded flow table keyed by FlowId.

    The sum of entry sizes never exceeds capacity_bits, so at most
    floor(capacity_bits / 356) entries fit.
    """

    def __init__(self, capacity_bits):
        if capacity_bits < 0:
            raise ValueError("capacity_bits must be non-negative")
        self.capacity_bits = capacity_bits
        self.entries = {}

    @property
    def max_entries(self):
        return self.capacity_bits // ENTRY_BITS

    @property
    def used_bits(self):
        return len(self.entries) * ENTRY_BITS

    def insert(self, rule):
        """Install a rule; raises DuplicateRule / CapacityExceeded."""
        if rule.id in self.entries:
            raise DuplicateRule(str(rule.id))
        if self.used_bits + rule.size_bits > self.capacity_bits:
            raise CapacityExceeded(
                "%d + %d bits > capacity %d"
                % (self.used_bits, rule.size_bits, self.capacity_bits)
            )
        self.entries[rule.id] = rule

    def remove(self, flow_id):
        del self.entries[flow_id]

    def lookup(self, flow_id, now):
        """Look up a packet's flow. Returns True on hit (counters updated),
        False on miss (table unchanged)."""
        rule = self.entries.get(flow_id)
        if rule is None:
            return False
        rule.match_count += 1
        rule.last_match_time = now
        return True

    def __contains__(self, flow_id):
        return flow_id in self.entries

    def __len__(self):
        return len(self.entries)


@dataclass
class PoolRecord:
    freq: int
    last_seen: int


class FlowPool:
    """Per-flow observation records collected during the orchestration
    window: match count (freq) and the time the flow was last seen."""

    def __init__(self):
        self.records = {}

    def record(self, flow_id, now, count=1):
        """Observe `count` matches of flow_id at time `now`."""
        if count < 1:
            raise ValueError("count must be >= 1")
        rec = self.records.get(flow_id)
        if rec is None:
            self.records[flow_id] = PoolRecord(freq=count, last_seen=now)
        else:
            rec.freq += count
            rec.last_seen = max(rec.last_seen, now)

    def freq(self, flow_id):
        return self.records[flow_id].freq

    def last_seen(self, flow_id):
        return self.records[flow_id].last_seen

    def __contains__(self, flow_id):
        return flow_id in self.records

    def __len__(self):
        return len(self.records)

    def save(self, path):
        """Write one `flow_id,freq,last_seen` line per record, sorted by id."""
        with open(path, "w", newline="\n") as fh:
            for fid in sorted(self.records):
                rec = self.records[fid]
                fh.write("%s,%d,%d\n" % (fid.text(), rec.freq, rec.last_seen))

    @staticmethod
    def load(path):
        pool = FlowPool()
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                token, freq, last_seen = line.split(",")
                fid = FlowId.from_text(token)
                pool.records[fid] = PoolRecord(freq=int(freq), last_seen=int(last_seen))
        return pool


@dataclass(frozen=True)
class ThresholdConfig:
    """The agent's state: a (match-frequency, recentness) threshold pair on
    the grid."""

    freq_threshold: int
    recentness_threshold: int

    def __post_init__(self):
        if self.freq_threshold not in FREQ_GRID:
            raise ValueError("freq_threshold %r off grid" % (self.freq_threshold,))
        if self.recentness_threshold not in REC_GRID:
            raise ValueError(
                "recentness_threshold %r off grid" % (self.recentness_threshold,)
            )


def select_rules(pool, thresholds, capacity_bits, window_close, param_mode="both"):
    """Pick the FlowIds to preinstall for an episode.

    A flow is eligible iff freq >= freq_threshold OR
    (window_close - last_seen) <= recentness_threshold. param_mode can
    disable one branch ("freq_only" / "recentness_only"); "both" keeps the
    OR of the two predicates.

    If more flows are eligible than fit (floor(capacity_bits/356) entries),
    rank by freq descending, recentness ascending, then FlowId order, and
    truncate.

    Returns a list of FlowIds (deterministic for identical inputs).
    """
    if param_mode not in ("both", "freq_only", "recentness_only"):
        raise ValueError("unknown param_mode %r" % (param_mode,))
    use_freq = param_mode in ("both", "freq_only")
    use_rec = param_mode in ("both", "recentness_only")

    eligible = []
    for fid, rec in pool.records.items():
        if window_close < rec.last_seen:
            raise ValueError("window_close precedes a pool record")
        recentness = window_close - rec.last_seen
        ok = False
        if use_freq and rec.freq >= thresholds.freq_threshold:
            ok = True
        if use_rec and recentness <= thresholds.recentness_threshold:
            ok = True
        if ok:
            eligible.append((fid, rec.freq, recentness))

    limit = capacity_bits // ENTRY_BITS
    if len(eligible) > limit:
        eligible.sort(key=lambda item: (-item[1], item[2], item[0]))
        eligible = eligible[:limit]
    return sorted(fid for fid, _, _ in eligible)
