"""Canonical paths, block acceptability, fork detection, rewards, and utility.

Acceptability asks whether some source-to-sink path of the block's closed
minor contains the block while differing from the canonical path by fewer
than ``n_ell`` blocks (symmetric difference). For any path P,

    |P symdiff P*| = sum over nodes of P of (1 if off P* else -1) + |P*|,

so the minimum over paths through a block is a pair of shortest-path sweeps
with node weights +1/-1. This evaluates the definition exactly for every
block of a color in linear time and doubles as the witness constructor.
"""

from __future__ import annotations

from dataclasses import dataclass

from .dag import BlockId, UnknownBlock
from .minors import VIRTUAL_SINK, VIRTUAL_SOURCE, MinorDag, build_minor


class NoColor(Exception):
    """The block carries no color, so acceptability does not apply."""


class NotAcceptable(Exception):
    """Fork status is only defined for acceptable blocks."""


class InactiveMiner(Exception):
    """Utility was requested before the miner's activity window opened."""


@dataclass(frozen=True)
class CanonicalPath:
    """The tie-broken longest source-to-sink path of a closed minor."""

    color: int
    blocks: tuple[BlockId, ...]

    def __post_init__(self):
        object.__setattr__(self, "_members", frozenset(self.blocks))

    @property
    def length(self) -> int:
        return len(self.blocks) - 1

    def __contains__(self, bid: BlockId) -> bool:
        return bid in self._members


def canonical_path(minor: MinorDag) -> CanonicalPath:
    """Greedy walk from the source along longest paths, min id at each tie.

    A successor continues some longest source-to-sink path iff its remaining
    distance to the sink is exactly one less than the current node's, so the
    walk stays on a longest path and every divergence is resolved locally.
    """
    dist = _dist_to_sink(minor)
    path = [VIRTUAL_SOURCE]
    cur = VIRTUAL_SOURCE
    while cur != VIRTUAL_SINK:
        want = dist[cur] - 1
        cur = min(ch for ch in minor.children[cur] if dist[ch] == want)
        path.append(cur)
    return CanonicalPath(color=minor.color, blocks=tuple(path))


def _dist_to_sink(minor: MinorDag) -> dict[BlockId, int]:
    dist = {VIRTUAL_SINK: 0}
    for b in reversed((VIRTUAL_SOURCE,) + minor.nodes):
        dist[b] = 1 + max(dist[ch] for ch in minor.children[b])
    return dist


class ColorEvaluation:
    """Acceptability, fork status, and rewards for every block of one color.

    Built from a closed minor; all per-block queries are O(1) afterwards,
    witness reconstruction excepted.
    """

    def __init__(self, minor: MinorDag, n_ell: int):
        if n_ell < 1:
            raise ValueError("n_ell must be at least 1")
        self.minor = minor
        self.n_ell = n_ell
        self.canonical = canonical_path(minor)

        on_star = self.canonical._members
        weight = {b: (-1 if b in on_star else 1) for b in minor.topo()}
        star_size = len(self.canonical.blocks)

        f: dict[BlockId, int] = {VIRTUAL_SOURCE: weight[VIRTUAL_SOURCE]}
        f_prev: dict[BlockId, BlockId] = {}
        for b in minor.nodes + (VIRTUAL_SINK,):
            best = min(minor.parents[b], key=lambda p: (f[p], p))
            f[b] = weight[b] + f[best]
            f_prev[b] = best

        g: dict[BlockId, int] = {VIRTUAL_SINK: weight[VIRTUAL_SINK]}
        g_next: dict[BlockId, BlockId] = {}
        for b in reversed((VIRTUAL_SOURCE,) + minor.nodes):
            best = min(minor.children[b], key=lambda c: (g[c], c))
            g[b] = weight[b] + g[best]
            g_next[b] = best

        self._weight = weight
        self._f = f
        self._g = g
        self._f_prev = f_prev
        self._g_next = g_next
        self._sym = {
            b: f[b] + g[b] - weight[b] + star_size for b in minor.nodes
        }
        accepted = [b for b in minor.nodes if self._sym[b] < n_ell]
        by_depth: dict[int, int] = {}
        for b in accepted:
            d = minor.depth[b]
            by_depth[d] = by_depth.get(d, 0) + 1
        self._accepted = frozenset(accepted)
        self._depth_occupancy = by_depth

    def min_symdiff(self, bid: BlockId) -> int:
        try:
            return self._sym[bid]
        except KeyError:
            raise UnknownBlock(f"block {bid} not in color-{self.minor.color} minor") from None

    def is_acceptable(self, bid: BlockId) -> bool:
        return self.min_symdiff(bid) < self.n_ell

    def witness(self, bid: BlockId) -> tuple[BlockId, ...] | None:
        """A source-to-sink path through ``bid`` realizing the minimum."""
        if not self.is_acceptable(bid):
            return None
        if bid in self.canonical:
            return self.canonical.blocks
        back = [bid]
        while back[-1] != VIRTUAL_SOURCE:
            back.append(self._f_prev[back[-1]])
        back.reverse()
        cur = bid
        while cur != VIRTUAL_SINK:
            cur = self._g_next[cur]
            back.append(cur)
        return tuple(back)

    def is_forked(self, bid: BlockId) -> bool:
        if not self.is_acceptable(bid):
            raise NotAcceptable(f"block {bid} is not {self.n_ell}-acceptable")
        return self._depth_occupancy[self.minor.depth[bid]] > 1

    def reward(self, bid: BlockId) -> int:
        if bid not in self._sym:
            raise UnknownBlock(f"block {bid} not in color-{self.minor.color} minor")
        return int(bid in self._accepted and self._depth_occupancy[self.minor.depth[bid]] == 1)

    def accepted_ids(self) -> frozenset[BlockId]:
        return self._accepted


@dataclass(frozen=True)
class RewardReport:
    """Per-block outcome of the 0/1 revenue scheme."""

    block: BlockId
    acceptable: bool
    witness: tuple[BlockId, ...] | None
    forked: bool
    reward: int


def _evaluate(dag, color: int, n_ell: int) -> ColorEvaluation:
    return ColorEvaluation(build_minor(dag, color), n_ell)


def _require_colored(dag, bid: BlockId) -> int:
    color = dag.get(bid).color
    if color is None:
        raise NoColor(f"block {bid} carries no color")
    return color


def is_acceptable(dag, bid: BlockId, n_ell: int) -> tuple[bool, tuple[BlockId, ...] | None]:
    """Whether ``bid`` lies on a path within ``n_ell`` of the canonical one.

    Returns the verdict and, when acceptable, a witness path (virtual
    endpoints included).
    """
    ev = _evaluate(dag, _require_colored(dag, bid), n_ell)
    return ev.is_acceptable(bid), ev.witness(bid)


def is_forked(dag, bid: BlockId, n_ell: int) -> bool:
    """Whether another acceptable same-color block shares ``bid``'s minor depth."""
    ev = _evaluate(dag, _require_colored(dag, bid), n_ell)
    return ev.is_forked(bid)


def reward(dag, bid: BlockId, n_ell: int) -> RewardReport:
    """Full report for one block: 1 iff acceptable and not forked."""
    ev = _evaluate(dag, _require_colored(dag, bid), n_ell)
    acceptable = ev.is_acceptable(bid)
    forked = ev.is_forked(bid) if acceptable else False
    return RewardReport(
        block=bid,
        acceptable=acceptable,
        witness=ev.witness(bid),
        forked=forked,
        reward=int(acceptable and not forked),
    )


def reward_all(dag, n_ell: int) -> dict[BlockId, RewardReport]:
    """Reports for every colored block, grouped color by color."""
    colors = sorted({dag.get(b).color for b in dag if dag.get(b).color is not None})
    out: dict[BlockId, RewardReport] = {}
    for c in colors:
        ev = _evaluate(dag, c, n_ell)
        for bid in ev.minor.nodes:
            acceptable = ev.is_acceptable(bid)
            forked = ev.is_forked(bid) if acceptable else False
            out[bid] = RewardReport(
                block=bid,
                acceptable=acceptable,
                witness=ev.witness(bid),
                forked=forked,
                reward=int(acceptable and not forked),
            )
    return dict(sorted(out.items()))


@dataclass(frozen=True)
class UtilityReport:
    """Eq-style normalized revenue share for one miner at one round.

    ``utility`` is None when no revenue at all was issued in the miner's
    window (the no-revenue case).
    """

    miner: int
    round: int
    numerator: int
    denominator: int

    @property
    def utility(self) -> float | None:
        if self.denominator == 0:
            return None
        return self.numerator / self.denominator


def utility(history, miner: int, t: int, n_ell: int) -> UtilityReport:
    """Miner's compensated blocks over all compensation in its active window.

    Rewards are evaluated in the miner's own local view at round ``t``.
    The denominator counts rewards of blocks published between the miner's
    activity start and min(t, activity end), whoever generated them; blocks
    never published (or not yet visible) contribute nothing to either sum.
    """
    t1, t2 = history.activity(miner)
    if t < t1:
        raise InactiveMiner(f"miner {miner} is not active until round {t1}")
    view = history.local_view(miner, t)
    reports = reward_all(view, n_ell)
    hi = min(t, t2)
    num = 0
    den = 0
    for bid, rep in reports.items():
        block = view.get(bid)
        tau = block.round_published
        if tau is None:
            continue
        if block.miner == miner:
            num += rep.reward
        if tau >= t1 and tau <= hi:
            den += rep.reward
    return UtilityReport(miner=miner, round=t, numerator=num, denominator=den)
