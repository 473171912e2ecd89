"""Audit-risk calculator.

Everything reduces to one question: if an audit samples ``alpha`` of
``n`` rows without replacement and each inspected bad row is flagged
with probability ``d``, what is the chance that ``f`` bad rows all
escape? ``hyp`` answers it, exactly (Fractions) or fast (log-gamma
floats); the soundness and privacy bounds and the sample-size planner
are thin algebra on top.
"""

from __future__ import annotations

import math
from fractions import Fraction


def _validate(n: int, alpha: int, f: int) -> None:
    if n < 0 or alpha < 0 or f < 0:
        raise ValueError("population, sample and fault counts must be >= 0")
    if alpha > n:
        raise ValueError(f"cannot sample {alpha} of {n}")
    if f > n:
        raise ValueError(f"cannot have {f} faulty rows among {n}")


def _lchoose(a: int, b: int) -> float:
    return math.lgamma(a + 1) - math.lgamma(b + 1) - math.lgamma(a - b + 1)


def hyp(n: int, alpha: int, f: int, d=1, exact: bool = False):
    """Probability that sampling ``alpha`` of ``n`` rows detects none of
    the ``f`` bad ones, detection per inspected bad row being ``d``.

    ``exact=True`` computes in exact rational arithmetic (``d`` is then
    interpreted via ``Fraction(d)``, so pass ints, Fractions or strings).
    """
    _validate(n, alpha, f)
    one = Fraction(1) if exact else 1.0
    if f == 0 or alpha == 0:
        return one
    d = Fraction(d) if exact else float(d)
    if d < 0 or d > 1:
        raise ValueError("detection probability must lie in [0, 1]")
    if d == 1:
        if alpha > n - f:
            return one * 0
        if exact:
            return Fraction(math.comb(n - f, alpha), math.comb(n, alpha))
        return math.exp(_lchoose(n - f, alpha) - _lchoose(n, alpha))
    if exact:
        denom = math.comb(n, alpha)
        total = Fraction(0)
        for k in range(0, min(f, alpha) + 1):
            if alpha - k > n - f:
                continue
            weight = Fraction(math.comb(f, k) * math.comb(n - f, alpha - k), denom)
            total += weight * (1 - d) ** k
        return total
    log_denom = _lchoose(n, alpha)
    log_miss = math.log1p(-d)
    total = 0.0
    for k in range(0, min(f, alpha) + 1):
        if alpha - k > n - f:
            continue
        total += math.exp(
            _lchoose(f, k) + _lchoose(n - f, alpha - k) - log_denom + k * log_miss
        )
    return total


def _route_escape(n: int, alpha: int, f: int, d, exact: bool):
    """Worst-case escape when f faults split across the two halves of the
    soundness experiment; the worst split is as even as integers allow."""
    lo, hi = f // 2, f - f // 2
    return hyp(n, alpha, lo, d, exact) * hyp(n, alpha, hi, d, exact)


def epsilon(
    n_d: int,
    alpha_d: int,
    f_d: int,
    n_s: int | None = None,
    alpha_s: int | None = None,
    f_s: int | None = None,
    N_s: int | None = None,
    exact: bool = False,
):
    """Soundness bound: chance that fraud of the stated sizes survives
    both the receipt-audit route and the roll-audit route.

    The desk route samples n_d receipts at rate alpha_d with one-in-three
    detection; the roll route samples the N_s + f_s screened rows with
    certain detection. Unspecified roll-route parameters default to the
    desk-route values, with N_s = 2 * n_s (at least half the screened
    rows belong to people who actually show up).
    """
    if n_s is None:
        n_s = n_d
    if alpha_s is None:
        alpha_s = alpha_d
    if f_s is None:
        f_s = f_d
    if N_s is None:
        N_s = 2 * n_s
    desk = _route_escape(n_d, alpha_d, f_d, Fraction(1, 3), exact)
    roll = _route_escape(N_s + f_s, alpha_s, f_s, 1, exact)
    bound = 2 * max(desk, roll)
    return min(bound, Fraction(1) if exact else 1.0)


def delta(n: int, alpha: int, exact: bool = False):
    """Privacy bound: worst-case chance that a targeted person's row is
    opened across the profiling, abstention and linking experiments."""
    _validate(n, alpha, 0)
    if n == 0:
        return Fraction(0) if exact else 0.0
    one = Fraction(1) if exact else 1.0
    frac = Fraction(alpha, n) if exact else alpha / n
    h1 = hyp(n, alpha, min(1, n), 1, exact)
    h2 = hyp(n, alpha, min(2, n), 1, exact)
    profiling = one - h1 * h1 * (one - frac) ** 2
    abstention = one - h2 * (one - 2 * frac)
    linking = one - h1 * h1
    bound = max(profiling, abstention, linking)
    return min(max(bound, one * 0), one)


def plan(margin: float, n: int, target: float, exact: bool = False) -> int:
    """Smallest audit sample size alpha such that fraud large enough to
    flip a race with the given winning margin escapes with probability
    at most ``target``. Returns -1 if even alpha = n does not reach it.

    A margin-flipping fraud puts at least margin/2 * n bad rows on one
    of the two routes, so both routes are planned for that size.
    """
    if not 0 < margin <= 1:
        raise ValueError("margin must lie in (0, 1]")
    if n <= 0:
        raise ValueError("need a positive roll size")
    f = math.ceil(n * margin / 2)
    if f == 0:
        raise ValueError("margin too small to imply any fraud at this n")

    def risk(alpha: int):
        return epsilon(n, alpha, f, exact=exact)

    if risk(n) > target:
        return -1
    lo, hi = 0, n
    while lo < hi:
        mid = (lo + hi) // 2
        if risk(mid) <= target:
            hi = mid
        else:
            lo = mid + 1
    return hi
