"""Safe-history checking, ledger desiderata, and deviation experiments.

The three safe-history conditions quantify over every subinterval of the run,
so the checkers use prefix-sum sweeps that are exactly equivalent to the
naive all-subintervals scan (the test suite proves this against a brute-force
oracle on small histories). Interval arithmetic is done in exact integers by
clearing rational denominators; there are no float comparisons anywhere near
a threshold.

Desiderata checks sample a time grid per miner. Local views are ancestor
closed, so the minor of a view is the full-dag minor restricted to the view
with the sink reattached; that makes a per-view evaluation linear instead of
quadratic and keeps hundred-seed sweeps inside a desk-scale time budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .dag import BlockId
from .minors import build_minor
from .params import ParamTuple
from .rewards import ColorEvaluation, canonical_path, utility
from .sim import History, InvalidConfig, SchedulerConfig, Strategy, generate_schedule, run
from .strategies import Honest


# -- natural forks ----------------------------------------------------------


def natural_forks(history: History, color: int) -> list[tuple[BlockId, BlockId]]:
    """All pairs of color-c blocks generated within the synchrony window that
    ended up ancestry-incomparable in the final published dag."""
    view = history.global_view()
    blocks = sorted(
        (view.get(b).round_created, b) for b in view if view.get(b).color == color
    )
    delta = history.config.delta
    dag = history.dag
    out: list[tuple[BlockId, BlockId]] = []
    for j, (rj, bj) in enumerate(blocks):
        for rk, bk in blocks[j + 1 :]:
            if rk - rj >= delta:
                break
            if not dag.is_ancestor(bj, bk) and not dag.is_ancestor(bk, bj):
                out.append((bj, bk))
    return out


def fork_participants(history: History, color: int) -> set[BlockId]:
    """Blocks of the color that belong to at least one natural fork pair."""
    out: set[BlockId] = set()
    for a, b in natural_forks(history, color):
        out.add(a)
        out.add(b)
    return out


# -- safe-history predicate --------------------------------------------------


@dataclass(frozen=True)
class ColorSafety:
    color: int
    sh1: bool
    sh2: bool
    sh3: bool
    sh1_witness: dict | None = None
    sh2_witness: dict | None = None
    sh3_witness: dict | None = None

    @property
    def passed(self) -> bool:
        return self.sh1 and self.sh2 and self.sh3


@dataclass(frozen=True)
class SafetyVerdict:
    per_color: tuple[ColorSafety, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.per_color)

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "colors": [
                {
                    "color": c.color,
                    "sh1": c.sh1,
                    "sh2": c.sh2,
                    "sh3": c.sh3,
                    "sh1_witness": c.sh1_witness,
                    "sh2_witness": c.sh2_witness,
                    "sh3_witness": c.sh3_witness,
                }
                for c in self.per_color
            ],
        }


def _decimal_fraction(x) -> Fraction:
    """Exact rational for a threshold parameter.

    Floats are read through their shortest decimal repr, so delta_c=0.04
    means exactly 1/25 rather than the binary float a hair above it; the
    difference decides windows sitting exactly on the threshold.
    """
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


def check_safe(history: History, params: ParamTuple) -> SafetyVerdict:
    """Exact sweep of the three safe-history conditions over all subintervals.

    SH1 works on the per-color block sequence (any round interval's color-c
    blocks are a contiguous subsequence and vice versa); SH2 and SH3 work on
    per-round counters. Each condition reduces to extremizing a window sum
    with a minimum window length, which a prefix sweep does in linear time.
    """
    params = params.validated()
    n_ell = params.n_ell
    verdicts = []
    for color in range(history.config.n_colors):
        verdicts.append(_check_color(history, params, color, n_ell))
    return SafetyVerdict(per_color=tuple(verdicts))


def _color_blocks(history: History, color: int) -> list[tuple[int, BlockId, int | None]]:
    view = history.global_view()
    out = []
    for b in view:
        blk = view.get(b)
        if blk.color == color:
            out.append((blk.round_created, b, blk.miner))
    out.sort()
    return out


def _check_color(history: History, params: ParamTuple, color: int, n_ell: int) -> ColorSafety:
    blocks = _color_blocks(history, color)
    forked = fork_participants(history, color)
    t_max = history.config.t_max
    n_miners = history.n_miners

    d = _decimal_fraction(params.delta)
    dc = _decimal_fraction(params.delta_c)

    # SH1: no miner reaches a (1/2 - delta) share of any >= n_ell-block window.
    sh1_ok, sh1_wit = True, None
    k_total = len(blocks)
    if k_total >= n_ell:
        den, num = d.denominator, d.numerator
        step = den - 2 * num
        for miner in range(n_miners):
            prefix = [0] * (k_total + 1)
            for j, (_, _, by) in enumerate(blocks, start=1):
                prefix[j] = prefix[j - 1] + (2 * den if by == miner else 0) - step
            min_val, min_idx = prefix[0], 0
            for e in range(n_ell, k_total + 1):
                s = e - n_ell
                if prefix[s] < min_val:
                    min_val, min_idx = prefix[s], s
                if prefix[e] >= min_val:
                    window = e - min_idx
                    cnt = (prefix[e] - prefix[min_idx] + step * window) // (2 * den)
                    sh1_ok = False
                    sh1_wit = {
                        "t1": blocks[min_idx][0],
                        "t2": blocks[e - 1][0],
                        "miner": miner,
                        "color_blocks": window,
                        "miner_blocks": cnt,
                    }
                    break
            if not sh1_ok:
                break

    # Per-round counters for SH2 and SH3.
    c_round = [0] * (t_max + 1)
    f_round = [0] * (t_max + 1)
    for r, bid, _ in blocks:
        if 1 <= r <= t_max:
            c_round[r] += 1
            if bid in forked:
                f_round[r] += 1

    # SH2: forked fraction below delta on every window of length >= n_ell.
    sh2_ok, sh2_wit = True, None
    if t_max > n_ell:
        den, num = d.denominator, d.numerator
        pa = [0] * (t_max + 1)  # den*forked - num*color
        pf = [0] * (t_max + 1)
        pc = [0] * (t_max + 1)
        for t in range(1, t_max + 1):
            pa[t] = pa[t - 1] + den * f_round[t] - num * c_round[t]
            pf[t] = pf[t - 1] + f_round[t]
            pc[t] = pc[t - 1] + c_round[t]
        best = (pa[0], pf[0], 0)
        for e in range(n_ell + 1, t_max + 1):
            s = e - n_ell - 1
            cand = (pa[s], pf[s], s)
            if cand[:2] < best[:2]:
                best = cand
            a_val = pa[e] - best[0]
            f_val = pf[e] - best[1]
            if a_val > 0 or (a_val == 0 and f_val >= 1):
                s_star = best[2]
                sh2_ok = False
                sh2_wit = {
                    "t1": s_star + 1,
                    "t2": e,
                    "color_blocks": pc[e] - pc[s_star],
                    "forked_blocks": pf[e] - pf[s_star],
                }
                break

    # SH3: at least delta_c * length color-c blocks on every such window.
    sh3_ok, sh3_wit = True, None
    if t_max > n_ell:
        den, num = dc.denominator, dc.numerator
        q = [0] * (t_max + 1)
        pc3 = [0] * (t_max + 1)
        for t in range(1, t_max + 1):
            pc3[t] = pc3[t - 1] + c_round[t]
            q[t] = den * pc3[t] - num * t
        best_q, best_idx = q[0], 0
        for e in range(n_ell + 1, t_max + 1):
            s = e - n_ell - 1
            if q[s] > best_q:
                best_q, best_idx = q[s], s
            if q[e] - best_q + num < 0:
                s_star = best_idx
                sh3_ok = False
                sh3_wit = {
                    "t1": s_star + 1,
                    "t2": e,
                    "color_blocks": pc3[e] - pc3[s_star],
                    "required": float(dc * (e - s_star - 1)),
                }
                break

    return ColorSafety(
        color=color,
        sh1=sh1_ok,
        sh2=sh2_ok,
        sh3=sh3_ok,
        sh1_witness=sh1_wit,
        sh2_witness=sh2_wit,
        sh3_witness=sh3_wit,
    )


# -- ledger desiderata -------------------------------------------------------


@dataclass
class DesiderataReport:
    """Violation evidence for the four ledger/revenue properties, plus the
    honest-acceptability scan and depth-based reward stability.

    Checked counts say how much evidence each verdict rests on; a horizon
    longer than the run legitimately yields zero revenue-consistency checks.
    """

    c_hat: int
    times: tuple[int, ...]
    consistency_checks: int = 0
    consistency_violations: list[dict] = field(default_factory=list)
    growth_checks: int = 0
    growth_violations: list[dict] = field(default_factory=list)
    quality_checks: int = 0
    quality_violations: list[dict] = field(default_factory=list)
    revenue_checks: int = 0
    revenue_violations: list[dict] = field(default_factory=list)
    path_checks: int = 0
    path_violations: list[dict] = field(default_factory=list)
    stability_checks: int = 0
    stability_violations: list[dict] = field(default_factory=list)
    honest_ledger_fraction: float | None = None

    @property
    def desiderata_ok(self) -> bool:
        return not (
            self.consistency_violations
            or self.growth_violations
            or self.quality_violations
            or self.revenue_violations
        )

    @property
    def passed(self) -> bool:
        return self.desiderata_ok and not self.path_violations and not self.stability_violations

    def as_dict(self) -> dict:
        return {
            "c_hat": self.c_hat,
            "times": list(self.times),
            "passed": self.passed,
            "desiderata_ok": self.desiderata_ok,
            "checks": {
                "consistency": self.consistency_checks,
                "growth": self.growth_checks,
                "quality": self.quality_checks,
                "revenue": self.revenue_checks,
                "path": self.path_checks,
                "stability": self.stability_checks,
            },
            "violations": {
                "consistency": self.consistency_violations,
                "growth": self.growth_violations,
                "quality": self.quality_violations,
                "revenue": self.revenue_violations,
                "path": self.path_violations,
                "stability": self.stability_violations,
            },
            "honest_ledger_fraction": self.honest_ledger_fraction,
        }


def _default_times(t_max: int, points: int = 8) -> tuple[int, ...]:
    ts = sorted({max(1, t_max * k // points) for k in range(1, points + 1)})
    return tuple(ts)


def check_desiderata(
    history: History,
    params: ParamTuple,
    c_hat: int,
    times: Sequence[int] | None = None,
    honest: Iterable[int] | None = None,
) -> DesiderataReport:
    """Check consistency, growth, quality, and revenue consistency on a
    sampled (miner, round) grid, plus honest acceptability and depth-based
    reward stability.

    The checkers only report; runs outside the less-than-half-power
    hypothesis are diagnosed, never rejected.
    """
    params = params.validated()
    n_ell = params.n_ell
    t_max = history.config.t_max
    grid = tuple(sorted(set(times))) if times else _default_times(t_max)
    honest_set = frozenset(honest) if honest is not None else history.honest_miners()
    n_miners = history.n_miners
    colors = range(history.config.n_colors)
    dag = history.dag

    report = DesiderataReport(c_hat=c_hat, times=grid)

    final = history.global_view()
    full_minors = {c: build_minor(final, c) for c in colors}

    growth_gap = params.n_ell / params.delta_c
    quality_gap = 2 * params.n_ell / params.delta_c
    revenue_horizon = 4 * params.n_ell * params.n_colors / (
        params.delta_c * (1 - params.delta)
    )

    # One pass in (round, miner) order; views grow monotonically per miner.
    view_sets: list[set[BlockId]] = [set() for _ in range(n_miners)]
    pointers = [0] * n_miners
    ledgers: dict[tuple[int, int], tuple[BlockId, ...]] = {}
    frozen_reward: dict[BlockId, tuple[int, int, int]] = {}
    frozen_revenue: dict[BlockId, tuple[int, int, int]] = {}

    for t in grid:
        for i in range(n_miners):
            arr = history.arrivals[i]
            p = pointers[i]
            ids = view_sets[i]
            if p == 0:
                ids.add(dag.genesis_id)
            while p < len(arr) and arr[p][0] <= t:
                ids.add(arr[p][1])
                p += 1
            pointers[i] = p

            led_minor = full_minors[c_hat].restrict(ids)
            ledgers[(i, t)] = canonical_path(led_minor).blocks[1:-1]

            for c in colors:
                minor = led_minor if c == c_hat else full_minors[c].restrict(ids)
                tip = minor.tip_depth
                stable_cut = tip - 2 * n_ell
                ev: ColorEvaluation | None = None
                for bid in minor.nodes:
                    qualifies_depth = minor.depth[bid] <= stable_cut
                    tau = dag.get(bid).round_published
                    qualifies_revenue = tau is not None and t > tau + revenue_horizon
                    if not (qualifies_depth or qualifies_revenue):
                        continue
                    if ev is None:
                        ev = ColorEvaluation(minor, n_ell)
                    r = ev.reward(bid)
                    if qualifies_depth:
                        report.stability_checks += 1
                        seen = frozen_reward.get(bid)
                        if seen is None:
                            frozen_reward[bid] = (r, t, i)
                        elif seen[0] != r:
                            report.stability_violations.append(
                                {
                                    "block": bid,
                                    "color": c,
                                    "first": {"t": seen[1], "miner": seen[2], "reward": seen[0]},
                                    "later": {"t": t, "miner": i, "reward": r},
                                }
                            )
                    if qualifies_revenue:
                        report.revenue_checks += 1
                        seen = frozen_revenue.get(bid)
                        if seen is None:
                            frozen_revenue[bid] = (r, t, i)
                        elif seen[0] != r:
                            report.revenue_violations.append(
                                {
                                    "block": bid,
                                    "color": c,
                                    "first": {"t": seen[1], "miner": seen[2], "reward": seen[0]},
                                    "later": {"t": t, "miner": i, "reward": r},
                                }
                            )

    # Ledger consistency: the anchoring view's prefix up to |L| - n_ell must
    # reappear verbatim in every view of the same or a later round.
    keys = [(i, t) for t in grid for i in range(n_miners)]
    for i, t in keys:
        li = ledgers[(i, t)]
        cut = len(li) - n_ell
        if cut <= 0:
            continue
        for j, t2 in keys:
            if t2 < t:
                continue
            report.consistency_checks += 1
            lj = ledgers[(j, t2)]
            for k in range(cut):
                if k >= len(lj) or li[k] != lj[k]:
                    report.consistency_violations.append(
                        {
                            "i": i,
                            "t": t,
                            "j": j,
                            "t2": t2,
                            "k": k,
                            "a": li[k],
                            "b": lj[k] if k < len(lj) else None,
                        }
                    )
                    break

    # Ledger growth over every sampled window of at least n_ell/delta_c rounds.
    for i in range(n_miners):
        for t in grid:
            for t2 in grid:
                if t2 - t < growth_gap:
                    continue
                report.growth_checks += 1
                if len(ledgers[(i, t2)]) < len(ledgers[(i, t)]) + 1:
                    report.growth_violations.append(
                        {
                            "i": i,
                            "t": t,
                            "t2": t2,
                            "len_t": len(ledgers[(i, t)]),
                            "len_t2": len(ledgers[(i, t2)]),
                        }
                    )

    # Ledger quality: at least two honest c_hat blocks generated per window.
    for i in range(n_miners):
        for t in grid:
            for t2 in grid:
                if t2 - t < quality_gap:
                    continue
                report.quality_checks += 1
                added = [
                    b
                    for b in ledgers[(i, t2)]
                    if t < dag.get(b).round_created <= t2
                ]
                honest_added = sum(1 for b in added if dag.get(b).miner in honest_set)
                if honest_added < 2:
                    report.quality_violations.append(
                        {"i": i, "t": t, "t2": t2, "honest_added": honest_added}
                    )

    # Honest acceptability in the final view (path property).
    for c in colors:
        forked = fork_participants(history, c)
        ev = ColorEvaluation(full_minors[c], n_ell)
        for bid in full_minors[c].nodes:
            blk = dag.get(bid)
            if blk.miner not in honest_set or bid in forked:
                continue
            report.path_checks += 1
            if not ev.is_acceptable(bid):
                report.path_violations.append(
                    {"block": bid, "color": c, "min_symdiff": ev.min_symdiff(bid)}
                )

    final_ledger = ledgers[(0, grid[-1])] if grid else ()
    if final_ledger:
        honest_count = sum(1 for b in final_ledger if dag.get(b).miner in honest_set)
        report.honest_ledger_fraction = honest_count / len(final_ledger)
    return report


# -- deviation experiments ----------------------------------------------------


def utility_closed_form(
    m_rivals: int, m_own: int, m_forked: int
) -> tuple[Fraction, Fraction]:
    """Honest and deviant utility when a deviator forks m_forked pairs.

    With m_rivals compensated rival blocks and m_own own blocks, honest play
    yields m_own / (m_rivals + m_own); forking removes one own and one rival
    reward per pair.
    """
    if not 0 <= m_forked <= m_own:
        raise ValueError("forked pairs cannot exceed own blocks")
    honest = Fraction(m_own, m_rivals + m_own)
    deviant = Fraction(m_own - m_forked, m_rivals + m_own - 2 * m_forked)
    return honest, deviant


@dataclass(frozen=True)
class DeviationRow:
    seed: int
    honest_utility: float
    deviant_utility: float

    @property
    def delta(self) -> float:
        return self.deviant_utility - self.honest_utility


@dataclass(frozen=True)
class DeviationResult:
    adversary: str
    adversary_index: int
    rows: tuple[DeviationRow, ...]

    @property
    def mean_delta(self) -> float:
        return sum(r.delta for r in self.rows) / len(self.rows)

    @property
    def mean_honest(self) -> float:
        return sum(r.honest_utility for r in self.rows) / len(self.rows)

    @property
    def mean_deviant(self) -> float:
        return sum(r.deviant_utility for r in self.rows) / len(self.rows)

    @property
    def ci95_delta(self) -> float:
        n = len(self.rows)
        if n < 2:
            return math.inf
        mean = self.mean_delta
        var = sum((r.delta - mean) ** 2 for r in self.rows) / (n - 1)
        return 1.96 * math.sqrt(var / n)


def deviation_experiment(
    config: SchedulerConfig,
    adversary_factory: Callable[[], Strategy],
    seeds: Iterable[int],
    n_ell: int,
    adversary_index: int = 0,
) -> DeviationResult:
    """Replay each seed's schedule under all-honest and one-deviator profiles.

    Both runs share the identical pre-drawn schedule, so the utility delta
    isolates the strategy change. Utilities are the adversary's, measured in
    its own final view.
    """
    config = config.validated()
    total = sum(m.power for m in config.miners)
    if config.miners[adversary_index].power / total >= 0.5:
        raise InvalidConfig("adversary power must stay below one half")
    rows = []
    name = adversary_factory().name
    for seed in seeds:
        cfg = replace(config, seed=seed)
        schedule = generate_schedule(cfg)
        base = run(cfg, [Honest() for _ in cfg.miners], schedule)
        strategies: list[Strategy] = [Honest() for _ in cfg.miners]
        strategies[adversary_index] = adversary_factory()
        dev = run(cfg, strategies, schedule)
        u_base = utility(base, adversary_index, cfg.t_max, n_ell).utility or 0.0
        u_dev = utility(dev, adversary_index, cfg.t_max, n_ell).utility or 0.0
        rows.append(DeviationRow(seed=seed, honest_utility=u_base, deviant_utility=u_dev))
    return DeviationResult(
        adversary=name, adversary_index=adversary_index, rows=tuple(rows)
    )
