import pytest

from blockdag import (
    MinerConfig,
    SchedulerConfig,
    build_minor,
    generate_schedule,
    reward_all,
    run,
    utility,
)
from blockdag.rewards import ColorEvaluation
from blockdag.strategies import (
    Honest,
    OwnFruitOnly,
    PrivateChain,
    SelfForker,
    make_strategy,
)


def adversary_config(alpha, t_max=400, n_colors=2, seed=0, delivery="fixed"):
    share = (1 - alpha) / 3
    return SchedulerConfig(
        t_max=t_max,
        delta=5,
        n_colors=n_colors,
        miners=(MinerConfig(power=alpha),) + tuple(MinerConfig(power=share) for _ in range(3)),
        delivery=delivery,
        seed=seed,
    )


def test_registry_round_trip():
    assert make_strategy("honest").name == "honest"
    assert make_strategy("private_chain", color=3).color == 3
    with pytest.raises(ValueError):
        make_strategy("nonesuch")


def test_self_forker_creates_same_depth_rivals():
    cfg = adversary_config(alpha=0.4, t_max=300, n_colors=1, seed=2)
    strategies = [SelfForker(), Honest(), Honest(), Honest()]
    history = run(cfg, strategies)
    minor = build_minor(history.global_view(), 0)
    ev = ColorEvaluation(minor, 10)
    occupancy = {}
    for b in minor.nodes:
        occupancy.setdefault(minor.depth_of(b), []).append(b)
    forked_pairs = [
        blocks
        for blocks in occupancy.values()
        if len(blocks) > 1 and all(ev.is_acceptable(b) for b in blocks)
    ]
    assert forked_pairs, "the self forker never landed a fork"
    pair = forked_pairs[0]
    assert {history.dag.get(b).miner for b in pair} >= {0}
    for b in pair:
        assert ev.reward(b) == 0


def test_self_forking_does_not_pay():
    cfg = adversary_config(alpha=0.4, t_max=400, n_colors=2, seed=7)
    schedule = generate_schedule(cfg)
    base = run(cfg, [Honest() for _ in range(4)], schedule)
    dev = run(cfg, [SelfForker(), Honest(), Honest(), Honest()], schedule)
    u_base = utility(base, 0, cfg.t_max, n_ell=10).utility
    u_dev = utility(dev, 0, cfg.t_max, n_ell=10).utility
    assert u_dev <= u_base


def test_own_fruit_only_builds_a_private_ladder():
    cfg = adversary_config(alpha=0.3, t_max=300, n_colors=2, seed=4)
    history = run(cfg, [OwnFruitOnly(), Honest(), Honest(), Honest()])
    own = [b for b in history.generated_blocks() if history.dag.get(b).miner == 0]
    assert own
    for b in own:
        parents = history.dag.parents_of(b)
        assert all(p == 0 or history.dag.get(p).miner == 0 for p in parents)
    # the isolated ladder falls behind and loses acceptability eventually
    reports = reward_all(history.global_view(), 4)
    own_rewards = [reports[b].reward for b in own if b in reports]
    honest_rewards = [
        rep.reward for b, rep in reports.items() if history.dag.get(b).miner != 0
    ]
    assert sum(own_rewards) / len(own_rewards) < sum(honest_rewards) / len(honest_rewards)


def test_private_chain_withholds_then_releases():
    cfg = adversary_config(alpha=0.45, t_max=300, n_colors=2, seed=11)
    history = run(cfg, [PrivateChain(color=0), Honest(), Honest(), Honest()])
    assert not history.faults
    own = [history.dag.get(b) for b in history.generated_blocks() if history.dag.get(b).miner == 0]
    held = [b for b in own if b.color == 0 and b.round_published is not None
            and b.round_published > b.round_created]
    assert held, "no block was ever withheld and later released"
    # other-color blocks were never withheld
    for b in own:
        if b.color != 0 and b.round_published is not None:
            assert b.round_published == b.round_created


def test_private_chain_racing_does_not_pay():
    # even near one half, every fork the race lands costs the racer a block
    from blockdag import deviation_experiment

    cfg = SchedulerConfig(
        t_max=2000,
        delta=5,
        n_colors=5,
        miners=(MinerConfig(power=0.45),)
        + tuple(MinerConfig(power=0.55 / 3) for _ in range(3)),
        delivery="fixed",
        seed=0,
    )
    result = deviation_experiment(
        cfg, lambda: PrivateChain(color=0), seeds=range(6), n_ell=30
    )
    assert result.mean_delta <= 1e-3


def test_strategies_only_publish_at_own_turns():
    cfg = adversary_config(alpha=0.45, t_max=200, n_colors=2, seed=3)
    history = run(cfg, [PrivateChain(color=0), Honest(), Honest(), Honest()])
    scheduled = {t for t in range(1, 201) if history.schedule.miner_at(t) == 0}
    for b in history.generated_blocks():
        blk = history.dag.get(b)
        if blk.miner == 0 and blk.round_published is not None:
            assert blk.round_published in scheduled
