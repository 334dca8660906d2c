"""Suitability constraints on the mechanism parameters.

The four constraints bound the probability that a run of length t_max ever
leaves the safe-history regime, via concentration bounds swept over all
subintervals. The exponentials reach magnitudes around 1e12, so the library
evaluates everything in log space; an arbitrary-precision direct evaluation
(mpmath) is provided as a cross-check.

The two exponential interval constraints require a positive concentration
margin (block supply above the demanded rate, non-fork rate above the loss
bound). A tuple whose margin is zero or negative fails that constraint
outright, whatever t_max is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath


class AlphaOutOfRange(Exception):
    """alpha must lie in [0, 1/2)."""


class InvalidTuple(Exception):
    """A parameter tuple field violates its range invariant."""


class NoSolution(Exception):
    """No n_ell can satisfy the constraints under the given preconditions."""


AlphaLike = float | Fraction | str


def _as_fraction(alpha: AlphaLike) -> Fraction:
    if isinstance(alpha, Fraction):
        return alpha
    if isinstance(alpha, str):
        return Fraction(alpha)
    return Fraction(alpha)


def delta_from_alpha(alpha: AlphaLike) -> float:
    """The safety margin (1/2 - alpha) / 2."""
    a = _as_fraction(alpha)
    if a < 0 or a >= Fraction(1, 2):
        raise AlphaOutOfRange(f"alpha must be in [0, 1/2), got {alpha}")
    return float((Fraction(1, 2) - a) / 2)


def ceil_inv_alpha(alpha: AlphaLike) -> int:
    """Exact ceiling of 1/alpha (alpha may be given as a fraction or string)."""
    a = _as_fraction(alpha)
    if a <= 0:
        raise AlphaOutOfRange("ceil(1/alpha) needs alpha > 0")
    return math.ceil(1 / a)


@dataclass(frozen=True)
class ParamTuple:
    """The full parameter bundle for one deployment or experiment."""

    n_colors: int
    n_ell: int
    delta: float
    delta_c: float
    t_max: int
    alpha: float
    delta_net: int
    epsilon: float

    def validated(self) -> "ParamTuple":
        if self.n_colors < 1:
            raise InvalidTuple("n_colors must be at least 1")
        if self.n_ell < 1:
            raise InvalidTuple("n_ell must be at least 1")
        if not 0 < self.delta < 0.5:
            raise InvalidTuple("delta must be in (0, 1/2)")
        if not 0 < self.delta_c < 1:
            raise InvalidTuple("delta_c must be in (0, 1)")
        if not self.n_ell < self.t_max:
            raise InvalidTuple("n_ell must be smaller than t_max")
        if not 0 <= self.alpha < 0.5:
            raise InvalidTuple("alpha must be in [0, 1/2)")
        if self.delta_net < 1:
            raise InvalidTuple("delta_net must be at least 1")
        if not self.epsilon > 0:
            raise InvalidTuple("epsilon must be positive")
        return self


@dataclass(frozen=True)
class ConstraintVerdict:
    """One constraint's outcome; slack > 0 means it holds with that margin.

    Slack is in nats for the three log-domain constraints and a plain count
    margin for the n_ell floor.
    """

    name: str
    passed: bool
    slack: float


@dataclass(frozen=True)
class SuitabilityVerdict:
    sh2: ConstraintVerdict
    sh3: ConstraintVerdict
    sh1a: ConstraintVerdict
    sh1b: ConstraintVerdict

    @property
    def passed(self) -> bool:
        return all(v.passed for v in (self.sh2, self.sh3, self.sh1a, self.sh1b))

    def as_dict(self) -> dict:
        return {
            v.name: {"passed": v.passed, "slack": v.slack}
            for v in (self.sh2, self.sh3, self.sh1a, self.sh1b)
        } | {"passed": self.passed}


def check_suitability(p: ParamTuple) -> SuitabilityVerdict:
    """Evaluate all four constraints in log space.

    The interval constraints pass iff
    ln(n_colors) + 2 ln(t_max) [+ ln(ceil(1/alpha))] - exponent < ln(epsilon/3);
    the reported slack is the right side minus the left in nats.
    """
    p = p.validated()
    ln_eps3 = math.log(p.epsilon) - math.log(3.0)
    ln_base = math.log(p.n_colors) + 2.0 * math.log(p.t_max)

    margin2 = ((p.n_colors - 1) / p.n_colors) ** (p.delta_net - 1) - p.delta
    if margin2 <= 0:
        sh2 = ConstraintVerdict("sh2", False, -math.inf)
    else:
        slack = ln_eps3 - (ln_base - 2.0 * p.n_ell**3 * margin2**2)
        sh2 = ConstraintVerdict("sh2", slack > 0, slack)

    margin3 = 1.0 / p.n_colors - p.delta_c
    if margin3 <= 0:
        sh3 = ConstraintVerdict("sh3", False, -math.inf)
    else:
        slack = ln_eps3 - (ln_base - 2.0 * p.n_ell**3 * margin3**2)
        sh3 = ConstraintVerdict("sh3", slack > 0, slack)

    floor = 4.0 / p.delta**2
    sh1a = ConstraintVerdict("sh1a", p.n_ell >= floor, p.n_ell - floor)

    slack = ln_eps3 - (
        ln_base + math.log(ceil_inv_alpha(p.alpha)) - 2.0 * (p.delta / 2.0) ** 2 * p.n_ell
    )
    sh1b = ConstraintVerdict("sh1b", slack > 0, slack)

    return SuitabilityVerdict(sh2=sh2, sh3=sh3, sh1a=sh1a, sh1b=sh1b)


def check_suitability_exact(p: ParamTuple, dps: int = 80) -> SuitabilityVerdict:
    """Arbitrary-precision direct evaluation of the same constraints.

    Computes each left-hand side as an actual product (mpmath keeps the huge
    exponents exact enough) and reports slack as ln((epsilon/3) / lhs), so the
    numbers are directly comparable with :func:`check_suitability`.
    """
    p = p.validated()
    with mpmath.workdps(dps):
        eps3 = mpmath.mpf(p.epsilon) / 3
        base = mpmath.mpf(p.n_colors) * mpmath.mpf(p.t_max) ** 2

        def verdict(name: str, lhs) -> ConstraintVerdict:
            slack = float(mpmath.log(eps3) - mpmath.log(lhs))
            return ConstraintVerdict(name, lhs < eps3, slack)

        margin2 = (mpmath.mpf(p.n_colors - 1) / p.n_colors) ** (p.delta_net - 1) - mpmath.mpf(
            p.delta
        )
        if margin2 <= 0:
            sh2 = ConstraintVerdict("sh2", False, -math.inf)
        else:
            sh2 = verdict("sh2", base * mpmath.e ** (-2 * mpmath.mpf(p.n_ell) ** 3 * margin2**2))

        margin3 = mpmath.mpf(1) / p.n_colors - mpmath.mpf(p.delta_c)
        if margin3 <= 0:
            sh3 = ConstraintVerdict("sh3", False, -math.inf)
        else:
            sh3 = verdict("sh3", base * mpmath.e ** (-2 * mpmath.mpf(p.n_ell) ** 3 * margin3**2))

        floor = 4 / mpmath.mpf(p.delta) ** 2
        sh1a = ConstraintVerdict("sh1a", p.n_ell >= floor, float(p.n_ell - floor))

        sh1b = verdict(
            "sh1b",
            base
            * ceil_inv_alpha(p.alpha)
            * mpmath.e ** (-2 * (mpmath.mpf(p.delta) / 2) ** 2 * p.n_ell),
        )

    return SuitabilityVerdict(sh2=sh2, sh3=sh3, sh1a=sh1a, sh1b=sh1b)


def solve_min_nl(
    alpha: AlphaLike,
    epsilon: float,
    delta_net: int,
    n_colors: int,
    delta_c: float,
    n_ell_cap: int = 10**12,
) -> tuple[int, ParamTuple]:
    """Smallest n_ell passing every constraint with t_max pinned to n_ell**2.

    delta is derived from alpha; the search doubles until it finds a passing
    n_ell, bisects down, and then walks to a point whose predecessor fails,
    so the returned value is a true boundary.
    """
    delta = delta_from_alpha(alpha)
    alpha_f = float(_as_fraction(alpha))
    if ((n_colors - 1) / n_colors) ** (delta_net - 1) <= 0.5:
        raise NoSolution(
            "n_colors too small: ((n_colors-1)/n_colors)**(delta_net-1) must exceed 1/2"
        )
    if not delta_c < 1.0 / (2 * n_colors):
        raise InvalidTuple("delta_c must be below 1/(2*n_colors)")

    def tuple_for(n_ell: int) -> ParamTuple:
        return ParamTuple(
            n_colors=n_colors,
            n_ell=n_ell,
            delta=delta,
            delta_c=delta_c,
            t_max=n_ell**2,
            alpha=alpha_f,
            delta_net=delta_net,
            epsilon=epsilon,
        )

    def ok(n_ell: int) -> bool:
        return check_suitability(tuple_for(n_ell)).passed

    lo = max(2, math.ceil(4.0 / delta**2))
    hi = lo
    while not ok(hi):
        hi *= 2
        if hi > n_ell_cap:
            raise NoSolution(f"no passing n_ell up to {n_ell_cap}")
    lo_fail = lo if hi == lo else hi // 2
    if hi > lo:
        left, right = lo_fail, hi
        while right - left > 1:
            mid = (left + right) // 2
            if ok(mid):
                right = mid
            else:
                left = mid
        hi = right
    while hi > 2 and ok(hi - 1):
        hi -= 1
    return hi, tuple_for(hi)
