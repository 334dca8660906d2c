import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockdag import (
    BlockDag,
    MinerConfig,
    NoColor,
    NotAcceptable,
    Schedule,
    SchedulerConfig,
    build_minor,
    canonical_path,
    is_acceptable,
    is_forked,
    reward,
    reward_all,
    run,
    utility,
)
from blockdag.minors import VIRTUAL_SINK, VIRTUAL_SOURCE
from blockdag.rewards import ColorEvaluation
from blockdag.strategies import Honest

from conftest import BLUE, build_tricolor, random_dag
from oracles import brute_canonical, brute_min_symdiff


def diamond_dag():
    """Two same-color blocks sharing parent and child sets: a tie."""
    dag = BlockDag()
    x = dag.add_block({0}, miner=0, color=0, round_created=1)
    y = dag.add_block({0}, miner=1, color=0, round_created=2)
    return dag, x, y


def test_canonical_empty_minor():
    dag = BlockDag()
    path = canonical_path(build_minor(dag, 0))
    assert path.blocks == (VIRTUAL_SOURCE, VIRTUAL_SINK)
    assert path.length == 1


def test_canonical_tricolor_blue(tricolor):
    dag, n = tricolor
    path = canonical_path(build_minor(dag, BLUE))
    assert path.blocks == (VIRTUAL_SOURCE, n["B1"], n["B2"], n["B3"], VIRTUAL_SINK)


def test_canonical_diamond_prefers_smaller_id():
    dag, x, y = diamond_dag()
    path = canonical_path(build_minor(dag, 0))
    assert path.blocks == (VIRTUAL_SOURCE, x, VIRTUAL_SINK)
    assert x < y


def test_canonical_choice_is_local_to_the_divergence():
    dag, x, y = diamond_dag()
    before = canonical_path(build_minor(dag, 0)).blocks
    # extend both branches equally: the divergence candidates are unchanged
    dag.add_block({x, y}, miner=0, color=0, round_created=3)
    after = canonical_path(build_minor(dag, 0)).blocks
    assert before[:2] == after[:2] == (VIRTUAL_SOURCE, x)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_canonical_prefix_diverges_only_when_candidates_change(seed):
    """Growing the dag may reroute the canonical path, but only from the
    first node whose set of longest-path successors actually changed."""
    import random as _random

    from blockdag.rewards import _dist_to_sink
    from conftest import random_extend

    dag = random_dag(seed, n_blocks=14, n_colors=2)
    minors_before = {c: build_minor(dag, c) for c in range(2)}
    paths_before = {c: canonical_path(minors_before[c]).blocks for c in range(2)}
    random_extend(dag, _random.Random(seed + 1), n_blocks=8, n_colors=2)

    def candidates(minor, node):
        dist = _dist_to_sink(minor)
        return {ch for ch in minor.children[node] if dist[ch] == dist[node] - 1}

    for c in range(2):
        after_minor = build_minor(dag, c)
        p_a, p_b = paths_before[c], canonical_path(after_minor).blocks
        for i in range(1, min(len(p_a), len(p_b))):
            if p_a[i] != p_b[i]:
                hinge = p_a[i - 1]
                assert candidates(minors_before[c], hinge) != candidates(after_minor, hinge)
                break


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_canonical_matches_bruteforce(seed):
    dag = random_dag(seed, n_blocks=16, n_colors=2)
    for color in range(2):
        minor = build_minor(dag, color)
        assert canonical_path(minor).blocks == brute_canonical(minor)


def test_on_canonical_block_always_acceptable(tricolor):
    dag, n = tricolor
    for label in ("B1", "B2", "B3"):
        ok, witness = is_acceptable(dag, n[label], 1)
        assert ok
        assert witness == canonical_path(build_minor(dag, BLUE)).blocks


def test_diamond_acceptability_threshold():
    dag, x, y = diamond_dag()
    ok3, witness = is_acceptable(dag, y, 3)
    assert ok3 and y in witness
    ok2, witness2 = is_acceptable(dag, y, 2)
    assert not ok2 and witness2 is None


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_acceptability_matches_path_enumeration(seed):
    dag = random_dag(seed, n_blocks=20, n_colors=2)
    for color in range(2):
        minor = build_minor(dag, color)
        for n_ell in range(1, 7):
            ev = ColorEvaluation(minor, n_ell)
            for bid in minor.nodes:
                assert ev.min_symdiff(bid) == brute_min_symdiff(minor, bid)
                assert ev.is_acceptable(bid) == (brute_min_symdiff(minor, bid) < n_ell)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_witness_is_a_valid_path_realizing_the_bound(seed):
    dag = random_dag(seed, n_blocks=18, n_colors=2)
    for color in range(2):
        minor = build_minor(dag, color)
        ev = ColorEvaluation(minor, 4)
        star = set(ev.canonical.blocks)
        for bid in minor.nodes:
            w = ev.witness(bid)
            if not ev.is_acceptable(bid):
                assert w is None
                continue
            assert bid in w
            assert w[0] == VIRTUAL_SOURCE and w[-1] == VIRTUAL_SINK
            for a, b in zip(w, w[1:]):
                assert a in minor.parents[b]
            assert len(set(w) ^ star) == ev.min_symdiff(bid)


def test_single_chain_has_no_forks(tricolor):
    dag, n = tricolor
    for label in ("B1", "B2", "B3", "R1", "R2", "R3", "Y1", "Y2", "Y3"):
        assert not is_forked(dag, n[label], 3)


def test_two_rivals_at_same_depth_are_both_forked():
    dag, n = build_tricolor()
    c1 = dag.add_block({n["B3"]}, miner=1, color=BLUE, round_created=9)
    c2 = dag.add_block({n["Y3"]}, miner=2, color=BLUE, round_created=10)
    assert is_forked(dag, c1, 3) and is_forked(dag, c2, 3)
    assert reward(dag, c1, 3).reward == 0
    assert reward(dag, c2, 3).reward == 0


def test_unacceptable_rival_does_not_fork():
    dag = BlockDag()
    chain = [dag.add_block({0}, 0, 0, 1)]
    for i in range(5):
        chain.append(dag.add_block({chain[-1]}, 0, 0, i + 2))
    rival = dag.add_block({0}, 1, 0, 99)  # same minor depth as chain[0]
    minor = build_minor(dag, 0)
    assert minor.depth_of(rival) == minor.depth_of(chain[0]) == 1
    ok, _ = is_acceptable(dag, rival, 2)
    assert not ok
    with pytest.raises(NotAcceptable):
        is_forked(dag, rival, 2)
    assert not is_forked(dag, chain[0], 2)
    assert reward(dag, chain[0], 2).reward == 1


def test_tricolor_all_blocks_compensated(tricolor):
    dag, n = tricolor
    reports = reward_all(dag, 2)
    assert set(reports) == set(n.values())
    assert all(rep.reward == 1 for rep in reports.values())
    assert all(rep.witness is not None for rep in reports.values())


def test_stale_branch_gets_nothing():
    dag = BlockDag()
    chain = [dag.add_block({0}, 0, 0, 1)]
    for i in range(6):
        chain.append(dag.add_block({chain[-1]}, 0, 0, i + 2))
    straggler = dag.add_block({0}, 1, 0, 99)
    n_ell = 3  # tip depth 7 >= n_ell + 2
    rep = reward(dag, straggler, n_ell)
    assert not rep.acceptable and rep.reward == 0 and rep.witness is None


def test_reward_report_invariants(tricolor):
    dag, n = tricolor
    for rep in reward_all(dag, 2).values():
        assert rep.reward in (0, 1)
        assert rep.reward == int(rep.acceptable and not rep.forked)
        assert (rep.witness is not None) == rep.acceptable


def test_genesis_carries_no_color():
    dag = BlockDag()
    dag.add_block({0}, 0, 0, 1)
    with pytest.raises(NoColor):
        reward(dag, 0, 2)
    with pytest.raises(NoColor):
        is_acceptable(dag, 0, 2)


def test_reward_queries_unknown_block():
    from blockdag import UnknownBlock

    dag = BlockDag()
    dag.add_block({0}, 0, 0, 1)
    with pytest.raises(UnknownBlock):
        is_acceptable(dag, 999, 2)
    with pytest.raises(UnknownBlock):
        reward(dag, 999, 2)


def test_utility_requires_an_active_miner():
    from blockdag import InactiveMiner, UnknownMiner

    config = SchedulerConfig(
        t_max=10,
        delta=1,
        n_colors=1,
        miners=(MinerConfig(power=1.0), MinerConfig(power=1.0, t_start=8)),
        delivery="fixed",
        seed=0,
    )
    history = run(config, [Honest(), Honest()])
    with pytest.raises(InactiveMiner):
        utility(history, 1, 5, n_ell=2)
    with pytest.raises(UnknownMiner):
        utility(history, 7, 5, n_ell=2)


def _scripted_history(pattern, n_colors=1):
    """Run honest miners against an explicit choice sequence."""
    n = max(pattern) + 1
    t_max = len(pattern)
    config = SchedulerConfig(
        t_max=t_max,
        delta=1,
        n_colors=n_colors,
        miners=tuple(MinerConfig(power=1.0) for _ in range(n)),
        delivery="fixed",
        seed=0,
    )
    schedule = Schedule(
        t_max=t_max,
        chosen=(None,) + tuple(pattern),
        colors=tuple([0] * (t_max + 1)),
        delays=tuple(tuple([1] * n) for _ in range(t_max + 1)),
    )
    return run(config, [Honest() for _ in range(n)], schedule)


def test_utility_counts_shares_in_window():
    # miner 0 generates 5 of 15 single-color chained blocks and mines last,
    # so every rival block has reached its view by the evaluation round
    pattern = [1, 1, 0, 1, 1, 0, 1, 1, 0, 1, 1, 0, 1, 1, 0]
    history = _scripted_history(pattern)
    rep = utility(history, 0, 15, n_ell=2)
    assert rep.numerator == 5
    assert rep.denominator == 15
    assert rep.utility == pytest.approx(5 / 15)


def test_utility_no_revenue_reported_as_none():
    history = _scripted_history([0])
    # at round 1 only the round-1 block exists and is compensated
    rep = utility(history, 0, 1, n_ell=2)
    assert rep.utility == 1.0
    # a miner active but never compensated in an empty window
    config = SchedulerConfig(
        t_max=3,
        delta=1,
        n_colors=1,
        miners=(MinerConfig(power=1.0), MinerConfig(power=1.0, t_start=3)),
        delivery="fixed",
        seed=0,
    )
    schedule = Schedule(
        t_max=3,
        chosen=(None, 0, 0, None),
        colors=(0, 0, 0, 0),
        delays=tuple(tuple([1, 1]) for _ in range(4)),
    )
    history = run(config, [Honest(), Honest()], schedule)
    rep = utility(history, 1, 3, n_ell=2)
    assert rep.denominator == 0 and rep.utility is None
