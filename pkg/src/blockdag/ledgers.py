"""Ledger extraction.

The plain ledger of a dag is the canonical path of the designated color with
the virtual endpoints stripped. The extended ledger walks those blocks in
order and, at each one, pulls in every acceptable ancestor (any color, the
ledger block itself included) that has not been pulled in yet, ordered by
(dag depth, color index, block id). Acceptability is evaluated against the
full dag at extraction time with the run's n_ell; entries within the last
n_ell depths of a minor tip are therefore unstable until the dag grows past
them.
"""

from __future__ import annotations

from dataclasses import dataclass

from .dag import BlockId
from .minors import build_minor
from .rewards import ColorEvaluation, canonical_path


@dataclass(frozen=True)
class Ledger:
    """Ordered color-c blocks of the canonical path, genesis-side first."""

    color: int
    blocks: tuple[BlockId, ...]

    def __len__(self) -> int:
        return len(self.blocks)

    def __getitem__(self, k: int) -> BlockId:
        return self.blocks[k]


@dataclass(frozen=True)
class ExtendedLedger:
    """All-colors transaction ordering anchored to the plain ledger."""

    color: int
    blocks: tuple[BlockId, ...]

    def __len__(self) -> int:
        return len(self.blocks)

    def __getitem__(self, k: int) -> BlockId:
        return self.blocks[k]


def ledger(dag, c_hat: int) -> Ledger:
    """Canonical path of the c_hat minor, virtual endpoints removed."""
    path = canonical_path(build_minor(dag, c_hat))
    return Ledger(color=c_hat, blocks=path.blocks[1:-1])


def extended_ledger(dag, c_hat: int, n_ell: int) -> ExtendedLedger:
    """The plain ledger interleaved with acceptable ancestors of its blocks.

    Each dag block is examined once: the ancestor walk from successive ledger
    blocks stops at anything already visited, so extraction is linear in the
    dag size.
    """
    base = ledger(dag, c_hat)
    colors = sorted({dag.get(b).color for b in dag if dag.get(b).color is not None})
    accepted: set[BlockId] = set()
    for c in colors:
        accepted |= ColorEvaluation(build_minor(dag, c), n_ell).accepted_ids()

    out: list[BlockId] = []
    visited: set[BlockId] = set()
    for anchor in base.blocks:
        batch: list[BlockId] = []
        stack = [anchor]
        while stack:
            bid = stack.pop()
            if bid in visited:
                continue
            visited.add(bid)
            if bid in accepted:
                batch.append(bid)
            stack.extend(dag.get(bid).parents)
        batch.sort(key=lambda b: (dag.depth_of(b), dag.get(b).color, b))
        out.extend(batch)
    return ExtendedLedger(color=c_hat, blocks=tuple(out))
