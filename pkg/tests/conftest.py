import random

import pytest

from blockdag import BlockDag

BLUE, RED, YELLOW = 0, 1, 2


def build_tricolor():
    """Nine-block, three-color dag used across the suite.

    The root B1 is itself a colored block (the dag's genesis), at depth 0.
    Returns (dag, names) where names maps labels like "B2" to block ids.
    """
    dag = BlockDag(genesis_color=BLUE, genesis_miner=0)
    names = {"B1": 0}

    def add(label, color, parent_labels, miner=0):
        names[label] = dag.add_block(
            parents={names[p] for p in parent_labels},
            miner=miner,
            color=color,
            round_created=len(names),
        )

    add("Y1", YELLOW, ["B1"])
    add("R1", RED, ["B1"])
    add("B2", BLUE, ["Y1"])
    add("R2", RED, ["Y1", "R1"])
    add("B3", BLUE, ["R1", "B2"])
    add("Y2", YELLOW, ["B2"])
    add("Y3", YELLOW, ["B3", "Y2"])
    add("R3", RED, ["R2", "Y2"])
    return dag, names


@pytest.fixture
def tricolor():
    return build_tricolor()


def random_extend(dag, rng, n_blocks, n_colors, max_parents=3):
    """Append random blocks: pick a few prior blocks, keep the maximal
    (mutually incomparable) ones as parents."""
    for _ in range(n_blocks):
        existing = list(dag)
        step = len(existing)
        k = rng.randint(1, min(max_parents, len(existing)))
        candidates = sorted(set(rng.choice(existing) for _ in range(k)))
        parents = [
            c
            for c in candidates
            if not any(c != other and dag.is_ancestor(c, other) for other in candidates)
        ]
        dag.add_block(
            parents=set(parents),
            miner=rng.randrange(3),
            color=rng.randrange(n_colors),
            round_created=step,
            round_published=step,
        )
    return dag


def random_dag(seed, n_blocks, n_colors, max_parents=3, colored_genesis=False):
    rng = random.Random(seed)
    dag = BlockDag(genesis_color=rng.randrange(n_colors) if colored_genesis else None)
    return random_extend(dag, rng, n_blocks, n_colors, max_parents)
