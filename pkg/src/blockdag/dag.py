"""Append-only blockdag with ancestry, longest-path depth, and antichain-parent validation.

A dag is created with a single genesis block (id 0). Every other block names a
non-empty antichain of existing blocks as its parents. Depth is the length of a
longest path from the genesis and is cached at insertion time. Block ids are
assigned sequentially, so ascending id order is always a topological order; ids
also serve as the deterministic stand-in for content-hash tie-breaks.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator


BlockId = int

GENESIS_ID: BlockId = 0


class DagError(Exception):
    """Base class for blockdag structure errors."""


class UnknownBlock(DagError):
    """A referenced block id is not present in the dag."""


class UnknownParent(UnknownBlock):
    """A parent id named at insertion is not present in the dag."""


class AncestorViolation(DagError):
    """A parent set is not an antichain (one parent reaches another)."""


@dataclass(frozen=True)
class Block:
    """One dag vertex plus its incoming edges.

    ``round_published`` is None while the block is withheld; publication is a
    one-way transition recorded via :meth:`BlockDag.set_published`.
    """

    id: BlockId
    parents: frozenset[BlockId]
    miner: int | None
    color: int | None
    round_created: int
    round_published: int | None
    payload: bytes = b""

    @property
    def published(self) -> bool:
        return self.round_published is not None


class BlockDag:
    """Single-writer, append-only blockdag.

    Reads are safe at any time between completed insertions; every value
    handed out is immutable. Nothing is ever removed, and the only field that
    may change after insertion is a block's publication round (None to a
    round, once).
    """

    def __init__(
        self,
        genesis_color: int | None = None,
        genesis_miner: int | None = None,
        genesis_round: int = 0,
        genesis_payload: bytes = b"",
    ):
        genesis = Block(
            id=GENESIS_ID,
            parents=frozenset(),
            miner=genesis_miner,
            color=genesis_color,
            round_created=genesis_round,
            round_published=genesis_round,
            payload=genesis_payload,
        )
        self._blocks: dict[BlockId, Block] = {GENESIS_ID: genesis}
        self._children: dict[BlockId, list[BlockId]] = {GENESIS_ID: []}
        self._depth: dict[BlockId, int] = {GENESIS_ID: 0}
        self._next_id: BlockId = GENESIS_ID + 1

    # -- read API ----------------------------------------------------------

    @property
    def genesis_id(self) -> BlockId:
        return GENESIS_ID

    def __contains__(self, bid: BlockId) -> bool:
        return bid in self._blocks

    def __len__(self) -> int:
        return len(self._blocks)

    def __iter__(self) -> Iterator[BlockId]:
        """Ids in insertion order, which is a topological order."""
        return iter(self._blocks)

    def get(self, bid: BlockId) -> Block:
        try:
            return self._blocks[bid]
        except KeyError:
            raise UnknownBlock(f"block {bid} not in dag") from None

    def parents_of(self, bid: BlockId) -> frozenset[BlockId]:
        return self.get(bid).parents

    def children_of(self, bid: BlockId) -> tuple[BlockId, ...]:
        self.get(bid)
        return tuple(self._children[bid])

    def leaves(self) -> list[BlockId]:
        """Blocks with no children, ascending by id."""
        return [bid for bid, ch in self._children.items() if not ch]

    def depth_of(self, bid: BlockId) -> int:
        """Length of a longest path from the genesis to ``bid``."""
        if bid not in self._blocks:
            raise UnknownBlock(f"block {bid} not in dag")
        return self._depth[bid]

    def is_ancestor(self, a: BlockId, b: BlockId) -> bool:
        """True iff a directed path ``a -> b`` exists. Irreflexive."""
        if a not in self._blocks:
            raise UnknownBlock(f"block {a} not in dag")
        if b not in self._blocks:
            raise UnknownBlock(f"block {b} not in dag")
        if a == b:
            return False
        cutoff = self._depth[a]
        if self._depth[b] <= cutoff:
            return False
        # Walk parent links from b; anything at or below a's depth cannot
        # lead back to a, so the frontier stays near the b-to-a corridor.
        stack = [b]
        seen = {b}
        while stack:
            for p in self._blocks[stack.pop()].parents:
                if p == a:
                    return True
                if p not in seen and self._depth[p] > cutoff:
                    seen.add(p)
                    stack.append(p)
        return False

    # -- write API ---------------------------------------------------------

    def add_block(
        self,
        parents: frozenset[BlockId] | set[BlockId],
        miner: int | None,
        color: int | None,
        round_created: int,
        round_published: int | None = None,
        payload: bytes = b"",
        bid: BlockId | None = None,
    ) -> BlockId:
        """Append a block; the dag is unchanged if validation fails.

        Raises UnknownParent for absent parent ids and AncestorViolation when
        one parent reaches another (callers treat the latter as the block
        being ignored). ``bid`` pins an explicit id (used when loading dags
        whose ids are not contiguous); by default ids are sequential.
        """
        parent_set = frozenset(parents)
        if not parent_set:
            raise DagError("a non-genesis block needs at least one parent")
        for p in parent_set:
            if p not in self._blocks:
                raise UnknownParent(f"parent {p} not in dag")
        by_depth = sorted(parent_set, key=lambda p: (self._depth[p], p))
        for i, p in enumerate(by_depth):
            for q in by_depth[i + 1 :]:
                if self.is_ancestor(p, q):
                    raise AncestorViolation(f"parent {p} is an ancestor of parent {q}")
        if bid is None:
            bid = self._next_id
        elif bid in self._blocks:
            raise DagError(f"block id {bid} already in dag")
        block = Block(
            id=bid,
            parents=parent_set,
            miner=miner,
            color=color,
            round_created=round_created,
            round_published=round_published,
            payload=payload,
        )
        self._blocks[bid] = block
        self._children[bid] = []
        for p in parent_set:
            self._children[p].append(bid)
        self._depth[bid] = 1 + max(self._depth[p] for p in parent_set)
        self._next_id = max(self._next_id, bid + 1)
        return bid

    def set_published(self, bid: BlockId, round_published: int) -> None:
        """Record publication. Only the None -> round transition is allowed."""
        block = self.get(bid)
        if block.round_published is not None:
            raise DagError(f"block {bid} already published")
        if round_published < block.round_created:
            raise DagError("publication cannot precede creation")
        self._blocks[bid] = replace(block, round_published=round_published)

    # -- consistency scan ---------------------------------------------------

    def validate(self) -> None:
        """Full re-check of the structural invariants; raises on violation."""
        for bid, block in self._blocks.items():
            if bid == GENESIS_ID:
                assert self._depth[bid] == 0
                continue
            assert self._depth[bid] == 1 + max(self._depth[p] for p in block.parents)
            parents = sorted(block.parents)
            for i, p in enumerate(parents):
                for q in parents[i + 1 :]:
                    if self.is_ancestor(p, q) or self.is_ancestor(q, p):
                        raise AncestorViolation(
                            f"stored block {bid} has comparable parents {p}, {q}"
                        )


class DagView:
    """Read-only restriction of a dag to an ancestor-closed id set.

    Exposes the same read API as :class:`BlockDag`. Because the id set is
    closed under parent references, depths and ancestry agree with the
    backing dag; only children and leaves are recomputed against the view.

    The id set is held by reference, not copied; a caller that keeps mutating
    it (the simulation engine does, between turns) must treat views handed
    out earlier as expired.
    """

    def __init__(self, dag: BlockDag, ids: set[BlockId] | frozenset[BlockId]):
        if dag.genesis_id not in ids:
            raise DagError("a view must contain the genesis")
        self._dag = dag
        self._ids = ids

    @property
    def genesis_id(self) -> BlockId:
        return self._dag.genesis_id

    def __contains__(self, bid: BlockId) -> bool:
        return bid in self._ids

    def __len__(self) -> int:
        return len(self._ids)

    def __iter__(self) -> Iterator[BlockId]:
        return iter(sorted(self._ids))

    def get(self, bid: BlockId) -> Block:
        if bid not in self._ids:
            raise UnknownBlock(f"block {bid} not in view")
        return self._dag.get(bid)

    def parents_of(self, bid: BlockId) -> frozenset[BlockId]:
        return self.get(bid).parents

    def children_of(self, bid: BlockId) -> tuple[BlockId, ...]:
        self.get(bid)
        return tuple(c for c in self._dag.children_of(bid) if c in self._ids)

    def leaves(self) -> list[BlockId]:
        return [bid for bid in sorted(self._ids) if not self.children_of(bid)]

    def depth_of(self, bid: BlockId) -> int:
        if bid not in self._ids:
            raise UnknownBlock(f"block {bid} not in view")
        return self._dag.depth_of(bid)

    def is_ancestor(self, a: BlockId, b: BlockId) -> bool:
        if a not in self._ids:
            raise UnknownBlock(f"block {a} not in view")
        if b not in self._ids:
            raise UnknownBlock(f"block {b} not in view")
        return self._dag.is_ancestor(a, b)

    def materialize(self) -> BlockDag:
        """Copy the view into a standalone dag, preserving block ids.

        Views are ancestor-closed, so inserting by ascending depth keeps
        every parent ahead of its children.
        """
        g = self._dag.get(self._dag.genesis_id)
        out = BlockDag(
            genesis_color=g.color,
            genesis_miner=g.miner,
            genesis_round=g.round_created,
            genesis_payload=g.payload,
        )
        for bid in sorted(self._ids, key=lambda x: (self._dag.depth_of(x), x)):
            if bid == self._dag.genesis_id:
                continue
            b = self.get(bid)
            out.add_block(
                b.parents,
                b.miner,
                b.color,
                b.round_created,
                b.round_published,
                b.payload,
                bid=bid,
            )
        return out


def ancestor_closure(dag: BlockDag, ids: set[BlockId]) -> set[BlockId]:
    """The given ids plus every block reachable through parent references."""
    out = set()
    stack = list(ids)
    while stack:
        bid = stack.pop()
        if bid in out:
            continue
        out.add(bid)
        stack.extend(dag.get(bid).parents)
    return out
