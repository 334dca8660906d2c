"""Color assignment and per-color graph minors.

The minor for color c keeps exactly the color-c blocks; block b' is a child of
b iff b' is reachable from b in the full dag and no path between them passes
through another color-c block. Equivalently, the minor is the Hasse diagram of
dag reachability restricted to color-c blocks. The closed form adds a virtual
source below all minor roots and a virtual sink above all minor leaves, and
minor depth is the longest-path distance from that source.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Callable

from .dag import BlockId, UnknownBlock

VIRTUAL_SOURCE: BlockId = -1
VIRTUAL_SINK: BlockId = -2

SCHEDULER_RANDOM = "scheduler-random"
CONTENT_DERIVED = "content-derived"


def _sha256(payload: bytes) -> bytes:
    return hashlib.sha256(payload).digest()


class ColorAssigner:
    """Draws block colors, either from a seeded stream or from content.

    scheduler-random mode is the simulation stance: a seeded uniform draw per
    call, replayable from the seed. content-derived mode reduces a stable
    digest of the payload mod the color count; the digest is injectable and
    defaults to sha256.
    """

    def __init__(
        self,
        n_colors: int,
        mode: str = SCHEDULER_RANDOM,
        seed: int = 0,
        digest: Callable[[bytes], bytes] = _sha256,
    ):
        if n_colors < 1:
            raise ValueError("n_colors must be at least 1")
        if mode not in (SCHEDULER_RANDOM, CONTENT_DERIVED):
            raise ValueError(f"unknown color mode {mode!r}")
        self.n_colors = n_colors
        self.mode = mode
        self._digest = digest
        self._rng = random.Random(seed)

    def assign(self, payload: bytes | None = None) -> int:
        if self.mode == SCHEDULER_RANDOM:
            return self._rng.randrange(self.n_colors)
        if payload is None:
            raise ValueError("content-derived coloring needs the block payload")
        return int.from_bytes(self._digest(payload), "big") % self.n_colors


@dataclass(frozen=True)
class MinorDag:
    """Closed minor for one color: real nodes plus virtual source and sink.

    ``nodes`` is ordered by (dag depth, id), which is a topological order of
    the minor. ``depth`` maps every node, including the virtuals, to its
    longest-path distance from the virtual source.
    """

    color: int
    nodes: tuple[BlockId, ...]
    parents: dict[BlockId, tuple[BlockId, ...]]
    children: dict[BlockId, tuple[BlockId, ...]]
    depth: dict[BlockId, int]

    def __contains__(self, bid: BlockId) -> bool:
        return bid in self.depth

    def depth_of(self, bid: BlockId) -> int:
        try:
            return self.depth[bid]
        except KeyError:
            raise UnknownBlock(f"block {bid} not in color-{self.color} minor") from None

    @property
    def tip_depth(self) -> int:
        """Depth of the deepest real node (0 when the minor is empty)."""
        return self.depth[VIRTUAL_SINK] - 1

    def topo(self) -> tuple[BlockId, ...]:
        return (VIRTUAL_SOURCE,) + self.nodes + (VIRTUAL_SINK,)

    def edges(self) -> list[tuple[BlockId, BlockId]]:
        out = []
        for child in self.topo():
            for parent in self.parents.get(child, ()):
                out.append((parent, child))
        return out

    def restrict(self, ids) -> "MinorDag":
        """The minor of an ancestor-closed sub-view.

        For an ancestor-closed block set, minor membership, edges among kept
        nodes, and depths are unchanged; only the sink reattaches to the
        view's minor leaves.
        """
        kept = tuple(b for b in self.nodes if b in ids)
        parents = {b: self.parents[b] for b in kept}
        return _close(self.color, kept, parents, self.depth)


def _close(
    color: int,
    nodes: tuple[BlockId, ...],
    parents: dict[BlockId, tuple[BlockId, ...]],
    real_depth: dict[BlockId, int] | None = None,
) -> MinorDag:
    """Attach the virtual source and sink and compute depths."""
    children: dict[BlockId, list[BlockId]] = {VIRTUAL_SOURCE: [], VIRTUAL_SINK: []}
    for b in nodes:
        children[b] = []
    for b in nodes:
        for p in parents[b]:
            children[p].append(b)
    leaves = tuple(b for b in nodes if not children[b])
    parents = dict(parents)
    parents[VIRTUAL_SINK] = leaves if leaves else (VIRTUAL_SOURCE,)
    parents[VIRTUAL_SOURCE] = ()
    for p in parents[VIRTUAL_SINK]:
        children[p].append(VIRTUAL_SINK)

    depth: dict[BlockId, int] = {VIRTUAL_SOURCE: 0}
    for b in nodes:
        if real_depth is not None:
            depth[b] = real_depth[b]
        else:
            depth[b] = 1 + max(depth[p] for p in parents[b])
    depth[VIRTUAL_SINK] = 1 + max(depth[p] for p in parents[VIRTUAL_SINK])

    return MinorDag(
        color=color,
        nodes=nodes,
        parents=parents,
        children={b: tuple(ch) for b, ch in children.items()},
        depth=depth,
    )


def build_minor(dag, color: int) -> MinorDag:
    """Construct the closed minor of ``color`` over any dag-like object.

    One sweep in topological order propagates, per block, the set of nearest
    color-c ancestors reachable without crossing another color-c block. The
    minor parents of a color-c block are the maximal elements of that set;
    non-maximal entries are exactly the ones some other entry reaches, i.e.
    cases where a path with an intermediate color-c block exists.
    """
    order = sorted(dag, key=lambda b: (dag.depth_of(b), b))
    nearest: dict[BlockId, frozenset[BlockId]] = {}
    empty: frozenset[BlockId] = frozenset()
    nodes: list[BlockId] = []
    parents: dict[BlockId, tuple[BlockId, ...]] = {}

    for bid in order:
        block = dag.get(bid)
        acc: frozenset[BlockId] | None = None
        merged: set[BlockId] | None = None
        for p in block.parents:
            contrib = frozenset((p,)) if dag.get(p).color == color else nearest[p]
            if acc is None:
                acc = contrib
            elif contrib != acc:
                if merged is None:
                    merged = set(acc)
                merged |= contrib
        near = empty if acc is None else (frozenset(merged) if merged is not None else acc)
        nearest[bid] = near
        if block.color == color:
            nodes.append(bid)
            if not near:
                parents[bid] = (VIRTUAL_SOURCE,)
            elif len(near) == 1:
                parents[bid] = tuple(near)
            else:
                parents[bid] = tuple(
                    sorted(
                        w
                        for w in near
                        if not any(w != w2 and dag.is_ancestor(w, w2) for w2 in near)
                    )
                )

    return _close(color, tuple(nodes), parents)


def minor_depth(minor: MinorDag, bid: BlockId) -> int:
    """Longest-path distance from the virtual source to ``bid``."""
    return minor.depth_of(bid)
