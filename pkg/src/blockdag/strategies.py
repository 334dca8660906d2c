"""Built-in miner strategies.

honest points at every leaf of its local view and broadcasts at once; the
others are deviations used by the incentive experiments. Broadcast decisions
happen on a miner's own turns, so a withholding strategy releases blocks the
next time it is scheduled.
"""

from __future__ import annotations

from .dag import GENESIS_ID, BlockId
from .minors import build_minor
from .sim import Strategy, TurnContext


class Honest(Strategy):
    """Extend all known leaves, publish immediately."""

    name = "honest"

    def on_scheduled(self, ctx: TurnContext) -> set[BlockId] | None:
        return set(ctx.leaves)

    def decide_publish(self, ctx: TurnContext, new_block) -> set[BlockId]:
        return {new_block.id} if new_block else set()


class Withholder(Strategy):
    """Mines honestly-shaped blocks but never broadcasts anything."""

    name = "withholder"

    def on_scheduled(self, ctx: TurnContext) -> set[BlockId] | None:
        return set(ctx.union_leaves)

    def decide_publish(self, ctx: TurnContext, new_block) -> set[BlockId]:
        return set()


class PrivateChain(Strategy):
    """Build a rival branch of one color in private, racing the public chain.

    Own blocks of the target color chain off the private tip, forking away
    from whatever the honest miners publish in that color afterwards; other
    colors are mined and published honestly against public leaves only, so
    no reference ever drags the stash out early. The stash is released the
    moment publishing it would out-depth the public canonical path of that
    color, which reroutes the path and strands the public suffix. Reads the
    schedule to know the upcoming color.
    """

    name = "private_chain"
    omniscient = True

    def __init__(self, color: int = 0):
        self.color = color

    def begin(self, miner: int, config) -> None:
        self.miner = miner
        self._branch: list[BlockId] = []
        self._fork_base: int | None = None

    def on_scheduled(self, ctx: TurnContext) -> set[BlockId] | None:
        if ctx.schedule.color_at(ctx.round) == self.color and self._branch:
            return {self._branch[-1]}
        return set(ctx.leaves)

    def decide_publish(self, ctx: TurnContext, new_block) -> set[BlockId]:
        out: set[BlockId] = set()
        public_tip = build_minor(ctx.view, self.color).tip_depth
        if new_block is not None:
            if new_block.color == self.color:
                if not self._branch:
                    self._fork_base = public_tip
                self._branch.append(new_block.id)
            else:
                out.add(new_block.id)
        if self._branch:
            union_tip = build_minor(ctx.union_view, self.color).tip_depth
            if union_tip <= public_tip:
                # overtaken: abandon the branch, its blocks stay unpublished
                self._branch = []
                self._fork_base = None
            elif public_tip >= self._fork_base + 1:
                # still ahead and the public side committed blocks past the
                # fork point: releasing now reroutes the canonical path
                out.update(self._branch)
                self._branch = []
                self._fork_base = None
        return out


class SelfForker(Strategy):
    """Duplicate the parent set of the newest same-color rival block.

    Reusing the rival's exact parents lands the new block at the rival's
    minor depth, forking it; both then forfeit their reward. Falls back to
    honest behavior until a rival of the scheduled color is known.
    """

    name = "self_forker"
    omniscient = True

    def begin(self, miner: int, config) -> None:
        self.miner = miner
        self._victims: dict[int, tuple[tuple[int, int], frozenset[BlockId]]] = {}

    def on_receive(self, block) -> None:
        if block.color is None or block.miner is None or block.miner == self.miner:
            return
        key = (block.round_created, block.id)
        cur = self._victims.get(block.color)
        if cur is None or key > cur[0]:
            self._victims[block.color] = (key, block.parents)

    def on_scheduled(self, ctx: TurnContext) -> set[BlockId] | None:
        victim = self._victims.get(ctx.schedule.color_at(ctx.round))
        if victim is None:
            return set(ctx.leaves)
        return set(victim[1])

    def decide_publish(self, ctx: TurnContext, new_block) -> set[BlockId]:
        return {new_block.id} if new_block else set()


class OwnFruitOnly(Strategy):
    """Point only at own blocks (plus the genesis), publishing immediately."""

    name = "own_fruit_only"

    def begin(self, miner: int, config) -> None:
        self._tip: BlockId = GENESIS_ID

    def on_scheduled(self, ctx: TurnContext) -> set[BlockId] | None:
        return {self._tip}

    def decide_publish(self, ctx: TurnContext, new_block) -> set[BlockId]:
        if new_block is None:
            return set()
        self._tip = new_block.id
        return {new_block.id}


def make_strategy(name: str, **params) -> Strategy:
    """Instantiate a strategy by registry name (used by configs and the CLI)."""
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown strategy {name!r}") from None
    return factory(**params)


_REGISTRY = {
    "honest": Honest,
    "withholder": Withholder,
    "private_chain": PrivateChain,
    "self_forker": SelfForker,
    "own_fruit_only": OwnFruitOnly,
}
