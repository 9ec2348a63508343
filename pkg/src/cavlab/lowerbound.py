"""Ball growth-and-merge construction, lower-bound evaluators, three-ball distortion problem."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NumericalError
from .geom2d import Circle, Vec2, lens_area

CONTACT_TOL = 1e-12


@dataclass(frozen=True)
class BallCollection:
    balls: tuple

    @classmethod
    def from_points(cls, centers, radii) -> "BallCollection":
        return cls(tuple(Circle(Vec2(float(c[0]), float(c[1])), float(r)) for c, r in zip(centers, radii)))

    @property
    def t(self) -> float:
        return math.fsum(b.radius for b in self.balls)

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        inside = np.zeros(pts.shape[:-1], dtype=bool)
        for b in self.balls:
            inside |= b.contains(pts)
        return inside

    def disjoint(self) -> bool:
        for i, a in enumerate(self.balls):
            for b in self.balls[i + 1 :]:
                gap = math.dist(a.center, b.center) - a.radius - b.radius
                if gap < -CONTACT_TOL * (a.radius + b.radius):
                    return False
        return True


@dataclass(frozen=True)
class MergeEvent:
    t: float
    first: Circle
    second: Circle
    merged: Circle


def _merge(a: Circle, b: Circle) -> Circle:
    r = a.radius + b.radius
    cx = (a.radius * a.center.x + b.radius * b.center.x) / r
    cy = (a.radius * a.center.y + b.radius * b.center.y) / r
    return Circle(Vec2(cx, cy), r)


def _touching_pair(balls):
    """Smallest-index pair of closed balls that meet, or None."""
    for i in range(len(balls)):
        for j in range(i + 1, len(balls)):
            a, b = balls[i], balls[j]
            if math.dist(a.center, b.center) <= (a.radius + b.radius) * (1.0 + CONTACT_TOL):
                return i, j
    return None


def _merge_all(balls, t, events):
    while True:
        pair = _touching_pair(balls)
        if pair is None:
            return balls
        i, j = pair
        merged = _merge(balls[i], balls[j])
        events.append(MergeEvent(t, balls[i], balls[j], merged))
        balls = balls[:i] + [merged] + balls[i + 1 : j] + balls[j + 1 :]


def _scaled(balls, factor):
    return [Circle(b.center, b.radius * factor) for b in balls]


def grow(collection: BallCollection, t_target: float):
    """Grow every ball about its own center until total radius ``t_target``.

    Radii are scaled by a common factor; whenever two balls touch they are replaced by
    the ball of radius ``r1 + r2`` centered at ``(r1 c1 + r2 c2) / (r1 + r2)``, which
    contains both. Ties are resolved by merging the smallest-index pair first.
    Returns the final collection and the list of merge events.
    """
    t = collection.t
    if t_target < t * (1.0 - 1e-15):
        raise DomainError(f"t_target = {t_target} is below the current total radius {t}")
    events = []
    balls = _merge_all(list(collection.balls), t, events)
    while True:
        if len(balls) == 1:
            balls = _scaled(balls, t_target / t)
            break
        s_min = math.inf
        for i in range(len(balls)):
            for j in range(i + 1, len(balls)):
                a, b = balls[i], balls[j]
                s_min = min(s_min, math.dist(a.center, b.center) / (a.radius + b.radius))
        t_touch = t * s_min
        if t_touch >= t_target:
            balls = _scaled(balls, t_target / t)
            break
        balls = _scaled(balls, s_min)
        t = t_touch
        balls = _merge_all(balls, t, events)
    return BallCollection(tuple(balls)), events


# ---------------------------------------------------------------------------
# lower-bound evaluators


def pro1_bound(v: Sequence[float], eps: Sequence[float], R: float, include: Optional[Sequence[bool]] = None) -> float:
    """``(sum of included v_i) * log(R / (2 sum eps_i))``; ``include`` flags which holes count."""
    if include is None:
        include = [True] * len(v)
    total = math.fsum(vi for vi, ok in zip(v, include) if ok)
    if total == 0.0:
        return 0.0
    return total * math.log(R / (2.0 * math.fsum(eps)))


def thLB_terms(v1, v2, d, eps1, eps2, R, C) -> tuple:
    """Leading and interaction terms of the planar two-cavity lower bound."""
    leading = 0.0
    if v1 > 0:
        leading += v1 * math.log(R / (2.0 * eps1))
    if v2 > 0:
        leading += v2 * math.log(R / (2.0 * eps2))
    total = v1 + v2
    if total <= 0:
        return leading, 0.0
    excess = max(0.0, (min(v1, v2) / total) ** 2 - math.pi * d * d / total)
    if excess == 0.0:
        return leading, 0.0
    argument = min((total / (4.0 * math.pi * d * d)) ** 0.25, R / d, d / max(eps1, eps2))
    return leading, C * total * excess * math.log(argument)


# ---------------------------------------------------------------------------
# three-ball distortion problem


@dataclass(frozen=True)
class DistortionTriple:
    R: float
    R1: float
    R2: float
    h: float
    q1: float
    q2: float
    max_intersection: float
    triple_intersection: float
    lens_lower_bound: float
    # half-widths sqrt(R^2 - h^2), sqrt(R1^2 - h^2), sqrt(R2^2 - h^2), kept at full precision
    legs: tuple = ()

    def distance_residual(self) -> float:
        if self.legs:
            leg, leg1, leg2 = self.legs
        else:
            leg, leg1, leg2 = (math.sqrt(max(x * x - self.h * self.h, 0.0)) for x in (self.R, self.R1, self.R2))
        return abs(leg - leg1 - leg2)

    def chord_half_heights(self) -> tuple:
        """Half-lengths of the common chords of (B, B1), (B1, B2), (B2, B)."""
        pairs = ((self.R, self.R1, abs(self.q1)), (self.R1, self.R2, self.q2 - self.q1), (self.R2, self.R, self.q2))
        out = []
        for ra, rb, dist in pairs:
            x = (dist * dist + ra * ra - rb * rb) / (2.0 * dist)
            out.append(math.sqrt(max(ra * ra - x * x, 0.0)))
        return tuple(out)

    def circles(self):
        """The optimal balls, aligned on the x-axis with ``B`` centered at the origin."""
        return (
            Circle(Vec2(0.0, 0.0), self.R),
            Circle(Vec2(self.q1, 0.0), self.R1),
            Circle(Vec2(self.q2, 0.0), self.R2),
        )


def distortion_triple(R: float, R1: float, R2: float) -> DistortionTriple:
    """Placement of balls of radii ``R1``, ``R2`` maximizing their overlap with a ball of radius ``R``.

    The optimum has aligned centers and three common chords of equal half-length ``h``,
    where ``h`` solves ``sqrt(R^2-h^2) = sqrt(R1^2-h^2) + sqrt(R2^2-h^2)``.
    The unknown is the half-width ``y = sqrt(m^2 - h^2)`` of the smaller ball ``m``: when
    ``R`` is close to ``R1`` the chord height sits within rounding of ``m`` and would
    lose the other half-widths to cancellation.
    """
    if not (0 < R1 < R and 0 < R2 < R and R <= R1 + R2):
        raise DomainError(f"need 0 < R1, R2 < R <= R1 + R2 (got R={R}, R1={R1}, R2={R2})")
    m = min(R1, R2)
    # R^2 - m^2 etc. are formed once, exactly enough for the half-widths below
    base = (R * R - m * m, R1 * R1 - m * m, R2 * R2 - m * m)

    def legs(y):
        return tuple(math.sqrt(b + y * y) for b in base)

    def fun(y):
        leg, leg1, leg2 = legs(y)
        return (R * R - R1 * R1) / (leg + leg1) - leg2

    if fun(m) >= 0.0:
        y = m  # tangent configuration, h = 0
    else:
        try:
            y = brentq(fun, 0.0, m, xtol=1e-17 * R, rtol=8.9e-16, maxiter=200)
        except (ValueError, RuntimeError) as exc:
            raise NumericalError(f"chord height solve failed: {exc}") from exc
    h = math.sqrt(max((m - y) * (m + y), 0.0))
    sR, s1, s2 = legs(y)
    q1 = s1 - sR
    q2 = sR - s2
    triple = lens_area(R1, R2, q2 - q1)  # the lens of B1 and B2 lies inside B
    max_int = lens_area(R, R1, -q1) + lens_area(R, R2, q2) - triple
    bound = (R1 + R2 - R) ** 1.5 * math.sqrt(R1 * R2 / (R1 + R2))
    return DistortionTriple(R, R1, R2, h, q1, q2, max_int, triple, bound, (sR, s1, s2))


def distortion_rhs(volE: float, vol1: float, vol2: float, Cn: float, n: int = 2) -> float:
    """Right-hand side of the two-set distortion inequality (signed)."""
    if vol1 < vol2:
        vol1, vol2 = vol2, vol1
    if vol2 <= 0:
        return 0.0
    total = (vol1 ** (1.0 / n) + vol2 ** (1.0 / n)) ** n
    ratio = (total - volE) / (total - (vol1 + vol2))
    power = n * (n + 1) / (2.0 * (n - 1))
    shaped = math.copysign(abs(ratio) ** power, ratio)
    return Cn * (vol2 / (vol1 + vol2)) ** (n / (n - 1.0)) * shaped


def distortion_lower_estimate(volE: float, vol1: float, vol2: float) -> float:
    """Best lower bound for the normalized distortion sum implied by the three-ball optimum.

    Equals ``(2 (|B1| + |B2| - max overlap) / (|E| + |E1| + |E2|))**2`` with radii matched
    to the given areas (planar case).
    """
    R, R1, R2 = (math.sqrt(v / math.pi) for v in (volE, vol1, vol2))
    if R >= R1 + R2:
        return 0.0
    tri = distortion_triple(R, R1, R2)
    return (2.0 * (vol1 + vol2 - tri.max_intersection) / (volE + vol1 + vol2)) ** 2


def fit_distortion_constant(ratios=None, fractions=None) -> float:
    """Largest constant for which the distortion inequality holds on a grid of ball triples.

    ``ratios`` are values of ``R2 / R1`` and ``fractions`` place ``R`` between its smallest
    admissible value ``sqrt(R1^2 + R2^2)`` and ``R1 + R2``. The minimum ratio between the
    lower estimate and the constant-free right-hand side is returned.
    """
    ratios = np.linspace(0.02, 1.0, 50) if ratios is None else np.asarray(ratios)
    fractions = np.linspace(0.0, 0.995, 200) if fractions is None else np.asarray(fractions)
    best = math.inf
    for k in ratios:
        R1, R2 = 1.0, float(k)
        low = math.hypot(R1, R2)
        for f in fractions:
            R = low + f * (R1 + R2 - low)
            vols = (math.pi * R * R, math.pi, math.pi * R2 * R2)
            shape = distortion_rhs(*vols, Cn=1.0)
            if shape <= 0:
                continue
            best = min(best, distortion_lower_estimate(*vols) / shape)
    return best
