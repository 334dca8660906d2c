"""Deterministic round-based scheduler, mining engine, and history recording.

Each round the scheduler picks at most one active miner, with probability
proportional to its power, and fixes the color of the block it may create.
Strategies see their local view (published blocks they have heard of, closed
under parent references) plus their own withheld blocks; they choose a parent
antichain or pass, and then decide what to publish. Broadcasts reach every
other miner within the synchrony bound; a per-(round, recipient) delay table
is drawn up front so an omniscient strategy can read the entire schedule.

All randomness is drawn from one seeded stream before and during the run in a
fixed order, so (config, seed) replays to an identical history.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Sequence

from .dag import BlockDag, BlockId, DagError, DagView

DELIVERY_FIXED = "fixed"
DELIVERY_UNIFORM = "uniform"
DELIVERY_ADVERSARIAL_MAX = "adversarial-max"

_DELIVERY_POLICIES = (DELIVERY_FIXED, DELIVERY_UNIFORM, DELIVERY_ADVERSARIAL_MAX)


class InvalidConfig(Exception):
    """A scheduler or experiment configuration field is out of range."""


class UnknownMiner(Exception):
    """A miner index outside the configured set."""


@dataclass(frozen=True)
class MinerConfig:
    """Constant mining power over an activity window [t_start, t_end]."""

    power: float
    t_start: int = 1
    t_end: int | None = None


@dataclass(frozen=True)
class SchedulerConfig:
    t_max: int
    delta: int
    n_colors: int
    miners: tuple[MinerConfig, ...]
    delivery: str = DELIVERY_UNIFORM
    fixed_delay: int = 1
    seed: int = 0

    def validated(self) -> "SchedulerConfig":
        if self.t_max < 1:
            raise InvalidConfig("t_max must be at least 1")
        if self.delta < 1:
            raise InvalidConfig("delta must be at least 1")
        if self.n_colors < 1:
            raise InvalidConfig("n_colors must be at least 1")
        if not self.miners:
            raise InvalidConfig("miners must be non-empty")
        if self.delivery not in _DELIVERY_POLICIES:
            raise InvalidConfig(f"delivery must be one of {_DELIVERY_POLICIES}")
        if not 1 <= self.fixed_delay <= self.delta:
            raise InvalidConfig("fixed_delay must be in [1, delta]")
        miners = []
        for idx, m in enumerate(self.miners):
            if m.power <= 0:
                raise InvalidConfig(f"miners[{idx}].power must be positive")
            t_end = self.t_max if m.t_end is None else m.t_end
            if not 1 <= m.t_start <= t_end <= self.t_max:
                raise InvalidConfig(
                    f"miners[{idx}] activity window must satisfy 1 <= t_start <= t_end <= t_max"
                )
            miners.append(MinerConfig(m.power, m.t_start, t_end))
        return replace(self, miners=tuple(miners))

    def activity(self, miner: int) -> tuple[int, int]:
        if not 0 <= miner < len(self.miners):
            raise UnknownMiner(f"no miner {miner}")
        m = self.miners[miner]
        return m.t_start, self.t_max if m.t_end is None else m.t_end


@dataclass(frozen=True)
class Schedule:
    """Pre-drawn randomness: per-round miner and color, per-recipient delays."""

    t_max: int
    chosen: tuple[int | None, ...]
    colors: tuple[int, ...]
    delays: tuple[tuple[int, ...], ...]

    def miner_at(self, t: int) -> int | None:
        return self.chosen[t]

    def color_at(self, t: int) -> int:
        return self.colors[t]

    def delay(self, t: int, recipient: int) -> int:
        return self.delays[t][recipient]


def generate_schedule(config: SchedulerConfig) -> Schedule:
    """Draw every scheduler choice for the whole run up front.

    Draw order per round is fixed (miner, color, per-recipient delays), so the
    stream is stable for a given config and the schedule can be handed to an
    omniscient strategy or replayed against a different strategy profile.
    """
    config = config.validated()
    rng = random.Random(config.seed)
    n = len(config.miners)
    chosen: list[int | None] = [None] * (config.t_max + 1)
    colors: list[int] = [0] * (config.t_max + 1)
    delays: list[tuple[int, ...]] = [tuple([0] * n)]

    windows = [config.activity(i) for i in range(n)]
    powers = [m.power for m in config.miners]

    for t in range(1, config.t_max + 1):
        active = [i for i in range(n) if windows[i][0] <= t <= windows[i][1]]
        if active:
            total = sum(powers[i] for i in active)
            r = rng.random() * total
            acc = 0.0
            pick = active[-1]
            for i in active:
                acc += powers[i]
                if r < acc:
                    pick = i
                    break
            chosen[t] = pick
        colors[t] = rng.randrange(config.n_colors)
        if config.delivery == DELIVERY_UNIFORM:
            delays.append(tuple(rng.randrange(1, config.delta + 1) for _ in range(n)))
        elif config.delivery == DELIVERY_ADVERSARIAL_MAX:
            delays.append(tuple([config.delta] * n))
        else:
            delays.append(tuple([config.fixed_delay] * n))

    return Schedule(
        t_max=config.t_max,
        chosen=tuple(chosen),
        colors=tuple(colors),
        delays=tuple(delays),
    )


@dataclass(frozen=True)
class TurnContext:
    """What a strategy sees when it is scheduled.

    ``view`` is the published local view; ``union_view`` additionally contains
    the miner's own withheld blocks. Both are live references valid for the
    duration of the callback. ``schedule`` is present only for omniscient
    strategies.
    """

    round: int
    miner: int
    view: DagView
    union_view: DagView
    leaves: tuple[BlockId, ...]
    union_leaves: tuple[BlockId, ...]
    private: tuple[BlockId, ...]
    schedule: Schedule | None
    config: SchedulerConfig


class Strategy:
    """Miner behavior. Subclasses override the three callbacks.

    ``on_scheduled`` returns the parent set for a new block or None to pass;
    ``decide_publish`` runs after the block exists (its color revealed) and
    returns the set of own withheld block ids to broadcast now. Broadcasts
    happen only on the miner's own turns; a miner may never send to a strict
    subset of peers.
    """

    name = "strategy"
    omniscient = False

    def begin(self, miner: int, config: SchedulerConfig) -> None:
        pass

    def on_scheduled(self, ctx: TurnContext) -> set[BlockId] | None:
        raise NotImplementedError

    def decide_publish(self, ctx: TurnContext, new_block) -> set[BlockId]:
        raise NotImplementedError

    def on_receive(self, block) -> None:
        pass


@dataclass
class _MinerState:
    """Engine-side per-miner bookkeeping (views, leaves, withheld blocks)."""

    view_ids: set[BlockId] = field(default_factory=set)
    union_ids: set[BlockId] = field(default_factory=set)
    view_child_count: dict[BlockId, int] = field(default_factory=dict)
    union_child_count: dict[BlockId, int] = field(default_factory=dict)
    view_leaves: set[BlockId] = field(default_factory=set)
    union_leaves: set[BlockId] = field(default_factory=set)
    private: set[BlockId] = field(default_factory=set)
    arrivals: list[tuple[int, BlockId]] = field(default_factory=list)

    def add_to_view(self, dag: BlockDag, bid: BlockId, t: int) -> None:
        self.view_ids.add(bid)
        self.view_child_count.setdefault(bid, 0)
        for p in dag.parents_of(bid):
            self.view_child_count[p] = self.view_child_count.get(p, 0) + 1
            self.view_leaves.discard(p)
        if self.view_child_count[bid] == 0:
            self.view_leaves.add(bid)
        self.arrivals.append((t, bid))
        if bid not in self.union_ids:
            self.add_to_union(dag, bid)

    def add_to_union(self, dag: BlockDag, bid: BlockId) -> None:
        self.union_ids.add(bid)
        self.union_child_count.setdefault(bid, 0)
        for p in dag.parents_of(bid):
            self.union_child_count[p] = self.union_child_count.get(p, 0) + 1
            self.union_leaves.discard(p)
        if self.union_child_count[bid] == 0:
            self.union_leaves.add(bid)


class History:
    """Complete record of one run: the master dag plus per-miner timelines.

    The master dag holds every generated block, withheld ones included (their
    ``round_published`` stays None). Local views are reconstructed from the
    recorded arrival timelines and are ancestor-closed by construction.
    """

    def __init__(
        self,
        config: SchedulerConfig,
        schedule: Schedule | None,
        dag: BlockDag,
        arrivals: list[list[tuple[int, BlockId]]],
        faults: list[dict],
        strategy_names: tuple[str, ...],
    ):
        self.config = config
        self.schedule = schedule
        self.dag = dag
        self.arrivals = arrivals
        self.faults = faults
        self.strategy_names = strategy_names

    @property
    def t_max(self) -> int:
        return self.config.t_max

    @property
    def n_miners(self) -> int:
        return len(self.config.miners)

    def honest_miners(self) -> frozenset[int]:
        return frozenset(
            i for i, name in enumerate(self.strategy_names) if name == "honest"
        )

    def activity(self, miner: int) -> tuple[int, int]:
        return self.config.activity(miner)

    def local_view(self, miner: int, t: int) -> DagView:
        """Blocks delivered to (or published by) the miner by round t."""
        if not 0 <= miner < self.n_miners:
            raise UnknownMiner(f"no miner {miner}")
        if t > self.t_max:
            raise InvalidConfig(f"round {t} exceeds t_max {self.t_max}")
        ids = {self.dag.genesis_id}
        for r, bid in self.arrivals[miner]:
            if r > t:
                break
            ids.add(bid)
        return DagView(self.dag, ids)

    def global_view(self, t: int | None = None) -> DagView:
        """All blocks published at or before round t (default: end of run)."""
        hi = self.t_max if t is None else t
        ids = {
            bid
            for bid in self.dag
            if self.dag.get(bid).round_published is not None
            and self.dag.get(bid).round_published <= hi
        }
        ids.add(self.dag.genesis_id)
        return DagView(self.dag, ids)

    def generated_blocks(self) -> list[BlockId]:
        return [bid for bid in self.dag if bid != self.dag.genesis_id]


def run(
    config: SchedulerConfig,
    strategies: Sequence[Strategy],
    schedule: Schedule | None = None,
) -> History:
    """Execute one run and record its history.

    A strategy returning an invalid parent set (unknown ids, not an antichain,
    or blocks outside its knowledge) forfeits the turn: the block is ignored,
    a fault is logged, and the run continues.
    """
    config = config.validated()
    if len(strategies) != len(config.miners):
        raise InvalidConfig("one strategy per miner required")
    if schedule is None:
        schedule = generate_schedule(config)
    if schedule.t_max != config.t_max:
        raise InvalidConfig("schedule and config disagree on t_max")

    n = len(config.miners)
    dag = BlockDag()
    states = [_MinerState() for _ in range(n)]
    for i, state in enumerate(states):
        state.add_to_view(dag, dag.genesis_id, 0)
        strategies[i].begin(i, config)
    faults: list[dict] = []
    # round -> list of (recipient, block id), in send order
    pending: dict[int, list[tuple[int, BlockId]]] = {}

    def deliver(t: int) -> None:
        for recipient, bid in sorted(pending.pop(t, ())):
            state = states[recipient]
            if bid in state.view_ids:
                continue
            missing = {bid}
            stack = list(dag.parents_of(bid))
            while stack:
                p = stack.pop()
                if p not in state.view_ids and p not in missing:
                    missing.add(p)
                    stack.extend(dag.parents_of(p))
            for m in sorted(missing, key=lambda b: (dag.depth_of(b), b)):
                state.add_to_view(dag, m, t)
                strategies[recipient].on_receive(dag.get(m))

    def publish(miner: int, bid: BlockId, t: int) -> None:
        state = states[miner]
        todo = {bid}
        stack = list(dag.parents_of(bid))
        while stack:
            p = stack.pop()
            if dag.get(p).round_published is None and p not in todo:
                todo.add(p)
                stack.extend(dag.parents_of(p))
        for b in sorted(todo, key=lambda x: (dag.depth_of(x), x)):
            dag.set_published(b, t)
            state.private.discard(b)
            state.add_to_view(dag, b, t)
            for j in range(n):
                if j != miner:
                    arrival = t + schedule.delay(t, j)
                    if arrival <= config.t_max:
                        pending.setdefault(arrival, []).append((j, b))

    for t in range(1, config.t_max + 1):
        deliver(t)
        i = schedule.miner_at(t)
        if i is None:
            continue
        state = states[i]
        ctx = TurnContext(
            round=t,
            miner=i,
            view=DagView(dag, state.view_ids),
            union_view=DagView(dag, state.union_ids),
            leaves=tuple(sorted(state.view_leaves)),
            union_leaves=tuple(sorted(state.union_leaves)),
            private=tuple(sorted(state.private)),
            schedule=schedule if strategies[i].omniscient else None,
            config=config,
        )
        parents = strategies[i].on_scheduled(ctx)
        new_block = None
        if parents is not None:
            bad = [p for p in parents if p not in state.union_ids]
            if bad:
                faults.append(
                    {"round": t, "miner": i, "reason": f"parents outside view: {sorted(bad)}"}
                )
            else:
                try:
                    bid = dag.add_block(
                        parents=parents,
                        miner=i,
                        color=schedule.color_at(t),
                        round_created=t,
                    )
                except DagError as exc:
                    faults.append({"round": t, "miner": i, "reason": str(exc)})
                else:
                    state.private.add(bid)
                    state.add_to_union(dag, bid)
                    new_block = dag.get(bid)
        ctx = replace(
            ctx,
            private=tuple(sorted(state.private)),
            union_leaves=tuple(sorted(state.union_leaves)),
        )
        to_publish = strategies[i].decide_publish(ctx, new_block)
        for bid in sorted(to_publish):
            if bid not in state.private:
                if bid not in dag or dag.get(bid).round_published is None:
                    faults.append(
                        {"round": t, "miner": i, "reason": f"cannot publish foreign block {bid}"}
                    )
                continue
            publish(i, bid, t)

    return History(
        config=config,
        schedule=schedule,
        dag=dag,
        arrivals=[s.arrivals for s in states],
        faults=faults,
        strategy_names=tuple(s.name for s in strategies),
    )
