"""Two-ball cavity geometry.

Coordinates are slab-centered: the slab ``{|x| < d}`` (along ``e`` = x-axis) contains
both balls, the left ball touches ``x = -d`` and the right ball touches ``x = d``.
The signed coordinate ``a_hat`` of the common chord is measured from the slab
midpoint, so that ``d1 = (a_hat + d) / 2`` and ``d2 = (d - a_hat) / 2`` add up to ``d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq

from .errors import DegenerateConfigurationError, DomainError, NumericalError
from .geom2d import Vec2, segment_area, unit_ball_volume

MAX_ITER = 200

#: below this fraction of d the inner solve switches to log(rho2)
LOG_SWITCH = 1e-6


def rho_min(d: float, v1: float, v2: float, n: int = 2) -> float:
    """Radius of the left ball in the tangent (zero overlap) configuration."""
    if d <= 0:
        raise DomainError("d must be positive")
    if v1 < 0 or v2 < 0 or v1 + v2 == 0:
        raise DomainError("cavity volumes must be nonnegative and not both zero")
    w1 = v1 ** (1.0 / n)
    w2 = v2 ** (1.0 / n)
    return w1 * d / (w1 + w2)


def delta0(volume_omega: float, d: float, n: int = 2) -> float:
    """Overlap ratio below which the two-ball map beats the transition construction."""
    wn = unit_ball_volume(n)
    value = 1.0 - (volume_omega - 2**n * wn * d**n) / (4 ** (n + 1) * n * wn * d**n)
    return min(1.0, max(0.0, value))


@dataclass(frozen=True)
class TwoBallGeometry:
    d: float
    delta: float
    v1: float
    v2: float
    rho1: float
    rho2: float
    d1: float
    d2: float
    tilde_a1: Vec2
    tilde_a2: Vec2
    a1: Vec2
    a2: Vec2
    a_star: Vec2
    a_hat: float
    lam: float
    area_om1: float
    area_om2: float

    @property
    def strength(self) -> float:
        """``lam**2 - 1``, the common volume-to-area ratio of both sub-domains."""
        return self.lam**2 - 1.0

    @property
    def chord_half_height(self) -> float:
        if self.rho2 == 0.0:
            return 0.0
        return math.sqrt(max(self.rho1**2 - (self.a_hat - self.tilde_a1.x) ** 2, 0.0))

    @property
    def area_union(self) -> float:
        return self.area_om1 + self.area_om2

    @property
    def tangent(self) -> bool:
        """True when the two balls only touch (or the right one is absent)."""
        return self.rho2 == 0.0 or self.rho1 + self.rho2 <= self.d * (1.0 + 1e-14)

    def residuals(self) -> dict:
        """Relative residuals of the defining identities (all should be ~1e-12 or less)."""
        out = {
            "d_sum": abs(self.d1 + self.d2 - self.d) / self.d,
            "delta": abs((self.rho1 + self.rho2 - self.d) / self.d - self.delta),
        }
        if self.v1 > 0 and self.v2 > 0:
            target = self.v2 / self.v1
            out["area_ratio"] = abs(self.area_om2 / self.area_om1 - target) / target
            out["strength_2"] = abs(self.strength - self.v2 / self.area_om2) / self.strength
        if self.v1 > 0:
            total = (self.v1 + self.v2) / (self.area_om1 + self.area_om2)
            out["strength_1"] = abs(self.strength - self.v1 / self.area_om1) / self.strength
            out["strength_sum"] = abs(self.strength - total) / self.strength
        if self.rho2 > 0:
            lhs = self.d1 * (self.rho1 - self.d1)
            rhs = self.d2 * (self.rho2 - self.d2)
            out["chord"] = abs(lhs - rhs) / max(abs(lhs), abs(rhs), self.d**2 * 1e-300)
        return out


def _split(d: float, rho1: float, rho2: float):
    """Chord coordinate and the two sub-domain areas for given radii."""
    c1 = -d + rho1
    c2 = d - rho2
    gap = 2.0 * d - rho1 - rho2  # = c2 - c1
    if rho1 + rho2 <= d:
        return c1 + rho1, math.pi * rho1**2, math.pi * rho2**2
    if gap <= 0.0:
        a_hat = 0.5 * (c1 + c2)
    else:
        a_hat = 0.5 * (c1 + c2) + (rho1 - rho2) * (rho1 + rho2) / (2.0 * gap)
    t1 = min(max(a_hat - c1, -rho1), rho1)
    t2 = min(max(c2 - a_hat, -rho2), rho2)
    return a_hat, math.pi * rho1**2 - segment_area(rho1, t1), math.pi * rho2**2 - segment_area(rho2, t2)


def _root(fun, lo, hi, what):
    try:
        x, info = brentq(fun, lo, hi, xtol=1e-300, rtol=1e-15, maxiter=MAX_ITER, full_output=True, disp=False)
    except ValueError as exc:  # raised by brentq when f(lo), f(hi) share a sign
        raise NumericalError(f"{what}: bracket [{lo}, {hi}] does not enclose a root") from exc
    if not info.converged:
        raise NumericalError(f"{what}: no convergence after {MAX_ITER} steps")
    return x


def _inner_rho2(d: float, rho1: float, log_ratio: float) -> float:
    """Right radius giving area ratio exp(log_ratio) for a fixed left radius."""

    def residual(rho2):
        _, a1, a2 = _split(d, rho1, rho2)
        # near-empty sub-domains can round to zero area
        floor = 1e-300 * d * d
        return math.log(max(a2, floor)) - math.log(max(a1, floor)) - log_ratio

    lo, hi = d - rho1, rho1
    if residual(hi) <= 0.0:
        return hi
    if residual(lo) >= 0.0:
        return lo
    if lo < LOG_SWITCH * d:
        # exp(log(x)) may round off the bracket: pin the ends, clamp the rest
        s_lo, s_hi = math.log(max(lo, 1e-150 * d)), math.log(hi)

        def radius(s):
            if s <= s_lo:
                return lo
            if s >= s_hi:
                return hi
            return min(max(math.exp(s), lo), hi)

        return radius(_root(lambda s: residual(radius(s)), s_lo, s_hi, "inner solve"))
    return _root(residual, lo, hi, "inner solve")


def _assemble(d, delta, v1, v2, rho1, rho2, a_hat, area1, area2) -> TwoBallGeometry:
    c1 = -d + rho1
    c2 = d - rho2
    d1 = 0.5 * (a_hat + d)
    d2 = 0.5 * (d - a_hat)
    # v1 = v2 = 0 gives the identity map on the same shapes
    lam = math.sqrt(1.0 + v1 / area1) if area1 > 0 else 1.0
    return TwoBallGeometry(
        d=d,
        delta=delta,
        v1=v1,
        v2=v2,
        rho1=rho1,
        rho2=rho2,
        d1=d1,
        d2=d2,
        tilde_a1=Vec2(c1, 0.0),
        tilde_a2=Vec2(c2, 0.0),
        a1=Vec2(c1 - (rho1 - d1), 0.0),
        a2=Vec2(c2 + (rho2 - d2), 0.0),
        a_star=Vec2(rho1 - rho2, 0.0),
        a_hat=a_hat,
        lam=lam,
        area_om1=area1,
        area_om2=area2,
    )


def _full_overlap(d, delta, v1, v2, w1, w2) -> TwoBallGeometry:
    """Both balls equal to the slab ball; the chord splits it in the ratio ``w2 : w1``."""
    share = w2 / (w1 + w2)
    full = math.pi * d * d
    a_hat = _root(lambda t: segment_area(d, t) - share * full, -d, d, "chord placement")
    area2 = segment_area(d, a_hat)
    return _assemble(d, delta, v1, v2, d, d, a_hat, full - area2, area2)


def solve_geometry(d: float, delta: float, v1: float, v2: float) -> TwoBallGeometry:
    """Two balls in the slab with overlap ratio ``delta`` and area ratio ``v2 / v1``.

    Both balls are found by nested root bracketing: for a fixed left radius the area
    ratio is increasing in the right radius, and the resulting overlap ratio is
    increasing in the left radius.

    >>> g = solve_geometry(1.0, 0.0, math.pi, math.pi)
    >>> (g.rho1, g.rho2)
    (0.5, 0.5)
    """
    if not d > 0:
        raise DomainError("d must be positive")
    if not 0.0 <= delta <= 1.0:
        raise DomainError(f"delta must lie in [0, 1], got {delta}")
    if v2 < 0 or v1 < v2:
        raise DomainError("expected v1 >= v2 >= 0")
    if v2 == 0.0 and v1 > 0.0 and delta > 0.0:
        raise DegenerateConfigurationError("v2 = 0 leaves the second sub-domain empty unless delta = 0")

    # identical volumes (including the volume-free identity case) share the symmetric shape
    w1, w2 = (1.0, 1.0) if v1 == v2 else (v1, v2)

    if delta == 0.0:
        r1 = rho_min(d, w1, w2)
        r2 = d - r1
        area2 = math.pi * r2**2
        return _assemble(d, 0.0, v1, v2, r1, r2, -d + 2.0 * r1, math.pi * r1**2, area2)

    if delta == 1.0:
        return _full_overlap(d, 1.0, v1, v2, w1, w2)

    log_ratio = math.log(w2 / w1)

    def overlap(rho1):
        if rho1 >= d:
            return 1.0 - delta
        return (rho1 + _inner_rho2(d, rho1, log_ratio) - d) / d - delta

    lo = rho_min(d, w1, w2)
    # a delta below rounding resolution is indistinguishable from the tangent case
    r1 = lo if overlap(lo) >= 0.0 else _root(overlap, lo, d, "outer solve")
    if r1 >= d:
        # delta within rounding of 1: the root lands on the coincident-ball configuration
        return _full_overlap(d, delta, v1, v2, w1, w2)
    r2 = _inner_rho2(d, r1, log_ratio)
    a_hat, area1, area2 = _split(d, r1, r2)
    return _assemble(d, delta, v1, v2, r1, r2, a_hat, area1, area2)
