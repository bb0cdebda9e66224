"""Exact exponent calculus for the complex-order spherical maximal operator.

All quantities live on the reciprocal-exponent plane ``(1/p, 1/q)`` and are
computed with :class:`fractions.Fraction`, so every identity between the
necessary exponent ``sigma``, the sufficient exponent ``d`` and the local
smoothing orders ``s2`` / ``s_n`` holds exactly.  ``p = inf`` is encoded as
``inv_p = 0``.
"""

from __future__ import annotations

import random
from math import gcd
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Tuple, Union

Rational = Union[Fraction, int, str]

# Fixed tie-break order for points on shared triangle edges.
TRIANGLE_ORDER = ("AOE", "ABE", "BCE", "ABC", "CDE")
REGION_TAGS = TRIANGLE_ORDER + ("OUTSIDE",)


def _frac(x: Rational) -> Fraction:
    if isinstance(x, float):
        raise TypeError("exponents are exact; pass Fraction, int or 'num/den' strings, not float")
    return Fraction(x)


def format_fraction(x: Fraction) -> str:
    """Encode a rational as ``"num/den"`` (integers keep the ``/1``)."""
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True)
class ExponentPoint:
    """A point ``(1/p, 1/q)`` of the exponent plane in dimension ``dim``."""

    inv_p: Fraction
    inv_q: Fraction
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "inv_p", _frac(self.inv_p))
        object.__setattr__(self, "inv_q", _frac(self.inv_q))
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {self.dim}")
        for name in ("inv_p", "inv_q"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    @classmethod
    def parse(cls, text: str, dim: int) -> "ExponentPoint":
        """Parse ``"a/b,c/d"`` into a point."""
        parts = [s.strip() for s in text.split(",")]
        if len(parts) != 2:
            raise ValueError(f"expected 'inv_p,inv_q', got {text!r}")
        return cls(Fraction(parts[0]), Fraction(parts[1]), dim)

    @property
    def admissible(self) -> bool:
        return self.inv_q <= self.inv_p

    @property
    def xy(self) -> Tuple[Fraction, Fraction]:
        return self.inv_p, self.inv_q

    def __str__(self):
        return f"({format_fraction(self.inv_p)}, {format_fraction(self.inv_q)})"


class InadmissibleError(ValueError):
    """Raised for exponent points with ``q < p`` (no estimate can hold there)."""


def _require_admissible(point: ExponentPoint):
    if not point.admissible:
        raise InadmissibleError(f"point {point} has inv_q > inv_p (q < p)")


# -- necessary / sufficient exponents ---------------------------------------


def sigma_terms(point: ExponentPoint) -> Tuple[Fraction, Fraction, Fraction]:
    """The three maximands of ``sigma``: focusing, plate and cone constraints."""
    n = point.dim
    ip, iq = point.xy
    focusing = ip - n * iq
    plate = Fraction(n + 1, 2) * ip - Fraction(n - 1, 2) * (iq + 1)
    cone = n * ip - n + 1
    return focusing, plate, cone


def sigma(point: ExponentPoint) -> Fraction:
    """Necessary lower bound on ``Re alpha`` for ``L^p -> L^q`` boundedness."""
    _require_admissible(point)
    return max(sigma_terms(point))


def extra_term(point: ExponentPoint) -> Fraction:
    """``1/(2p) - (n-2)/(2q) - (n-1)/4``, the additional maximand of ``d`` for ``n > 2``."""
    n = point.dim
    return point.inv_p / 2 - Fraction(n - 2, 2) * point.inv_q - Fraction(n - 1, 4)


def d_exponent(point: ExponentPoint) -> Fraction:
    """Sufficient threshold for ``n > 2``: ``max(sigma, extra_term)``."""
    if point.dim == 2:
        raise ValueError("d_exponent is defined for n > 2; use sigma for n = 2")
    return max(sigma(point), extra_term(point))


def transfer_alpha(s: Rational, point: ExponentPoint) -> Fraction:
    """Order threshold ``s - (n-1)/2 + 1/q`` induced by a local smoothing order ``s``."""
    return _frac(s) - Fraction(point.dim - 1, 2) + point.inv_q


# -- local smoothing orders ---------------------------------------------------


def s2_branch(point: ExponentPoint) -> int:
    """Branch index of ``s2``: 1 for ``q >= 3p'``, 2 for ``p' <= q < 3p'``, 3 for ``q < p'``.

    Comparisons are made on reciprocals, so ``p = 1`` (``p' = inf``) needs no
    special value: ``q < inf`` lands in branch 3 and ``q = inf`` in branch 1.
    """
    ip, iq = point.xy
    inv_pprime = 1 - ip
    if 3 * iq <= inv_pprime:
        return 1
    if iq <= inv_pprime:
        return 2
    return 3


def s2_branch_value(point: ExponentPoint, branch: int) -> Fraction:
    ip, iq = point.xy
    if branch == 1:
        return Fraction(1, 2) + ip - 3 * iq
    if branch == 2:
        return Fraction(3, 2) * (ip - iq)
    if branch == 3:
        return 2 * ip - Fraction(1, 2) - iq
    raise ValueError(f"no s2 branch {branch}")


def s2(point: ExponentPoint) -> Fraction:
    """Planar local smoothing order (three-branch piecewise formula)."""
    if point.dim != 2:
        raise ValueError("s2 is the n = 2 local smoothing order")
    _require_admissible(point)
    return s2_branch_value(point, s2_branch(point))


def smoothing_endpoint(n: int) -> Tuple[Fraction, Fraction, Fraction]:
    """``(1/p0, 1/q0, s0)`` of the frequency-localized ``L^p0 -> L^q0`` estimate, ``n >= 3``."""
    if n < 3:
        raise ValueError("endpoint estimate is stated for n >= 3")
    D = n * n + 2 * n - 1
    inv_p0 = Fraction((n - 1) * (n + 3), 2 * D)
    inv_q0 = Fraction((n - 1) * (n + 1), 2 * D)
    s0 = Fraction((n - 1) * (n + 1), 2 * D)
    return inv_p0, inv_q0, s0


@lru_cache(maxsize=64)
def _vertices(n: int) -> Tuple[Tuple[str, Tuple[Fraction, Fraction]], ...]:
    if n < 2:
        raise ValueError("n must be >= 2")
    a = Fraction(n - 1, 2 * (n + 1))
    D = n * n + 2 * n - 1
    return (
        ("O", (Fraction(0), Fraction(0))),
        ("A", (a, a)),
        ("B", (Fraction((n - 1) * (n + 3), 2 * D), Fraction((n - 1) * (n + 1), 2 * D))),
        ("C", (Fraction(1, 2), Fraction(1, 2))),
        ("D", (Fraction(1), Fraction(1))),
        ("E", (Fraction(1), Fraction(0))),
    )


def figure1_vertices(n: int) -> Dict[str, Tuple[Fraction, Fraction]]:
    """Vertices O, A, B, C, D, E of the region partition of the exponent triangle."""
    return dict(_vertices(n))


def region_polygons(n: int) -> Dict[str, List[Tuple[Fraction, Fraction]]]:
    v = figure1_vertices(n)
    return {tag: [v[c] for c in tag] for tag in TRIANGLE_ORDER}


def _orient(a, b, c) -> Fraction:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _edge_line(a, b) -> Tuple[int, int, int]:
    """Integer ``(A, B, C)`` with ``sign(A x + B y + C) == sign(orient(a, b, (x, y)))``."""
    A = -(b[1] - a[1])
    B = b[0] - a[0]
    C = -B * a[1] - A * a[0]
    scale = 1
    for v in (A, B, C):
        scale = scale * v.denominator // gcd(scale, v.denominator)
    return int(A * scale), int(B * scale), int(C * scale)


@lru_cache(maxsize=64)
def _triangle_lines(n: int):
    out = []
    for tag, tri in region_polygons(n).items():
        a, b, c = tri
        out.append((tag, (_edge_line(a, b), _edge_line(b, c), _edge_line(c, a))))
    return tuple(out)


def _in_triangle(xn: int, yn: int, den: int, lines) -> Tuple[bool, bool]:
    """(inside closed triangle, on its boundary) for the point ``(xn/den, yn/den)``."""
    o = [A * xn + B * yn + C * den for A, B, C in lines]
    inside = all(x >= 0 for x in o) or all(x <= 0 for x in o)
    return inside, inside and any(x == 0 for x in o)


@dataclass(frozen=True)
class RegionLabel:
    tag: str
    boundary: bool

    def __str__(self):
        return f"{self.tag}{' (boundary)' if self.boundary else ''}"


def classify_region(point: ExponentPoint) -> RegionLabel:
    """Locate ``point`` in the five-triangle partition (``n >= 3``).

    Closed triangles are tested in the order AOE, ABE, BCE, ABC, CDE and the
    first hit wins; ``boundary`` is set when the point sits on an edge of that
    triangle.
    """
    if point.dim < 3:
        raise ValueError("the triangle partition is used for n >= 3; n = 2 uses s2_branch")
    if not point.admissible:
        return RegionLabel("OUTSIDE", False)
    x, y = point.xy
    den = x.denominator * y.denominator // gcd(x.denominator, y.denominator)
    xn, yn = x.numerator * (den // x.denominator), y.numerator * (den // y.denominator)
    for tag, lines in _triangle_lines(point.dim):
        inside, on_edge = _in_triangle(xn, yn, den, lines)
        if inside:
            return RegionLabel(tag, on_edge)
    # admissible points always fall in ODE = union of the five triangles
    raise AssertionError(f"admissible point {point} not covered by the partition")


_SN_FORMULAS = {
    "AOE": lambda ip, iq, n: ip - (n + 1) * iq + Fraction(n - 1, 2),
    "ABE": lambda ip, iq, n: ip - (n + 1) * iq + Fraction(n - 1, 2),
    "BCE": lambda ip, iq, n: Fraction(n + 1, 2) * (ip - iq),
    "ABC": lambda ip, iq, n: ip / 2 - Fraction(n, 2) * iq + Fraction(n - 1, 4),
    "CDE": lambda ip, iq, n: n * ip - iq - Fraction(n - 1, 2),
}


def s_n_branch_value(point: ExponentPoint, tag: str) -> Fraction:
    return _SN_FORMULAS[tag](point.inv_p, point.inv_q, point.dim)


def s_n(point: ExponentPoint) -> Fraction:
    """Local smoothing order for ``n >= 3``, piecewise over the triangle partition."""
    if point.dim < 3:
        raise ValueError("s_n is the n >= 3 local smoothing order; use s2")
    label = classify_region(point)
    if label.tag == "OUTSIDE":
        raise InadmissibleError(f"point {point} is outside the exponent triangle")
    return s_n_branch_value(point, label.tag)


def smoothing_order(point: ExponentPoint) -> Fraction:
    """``s2`` in the plane, ``s_n`` otherwise."""
    return s2(point) if point.dim == 2 else s_n(point)


# -- the critical quadrangle ------------------------------------------------------


@dataclass(frozen=True)
class QuadrangleQ:
    dim: int
    corners: Tuple[Tuple[Fraction, Fraction], ...]

    def _edges(self):
        # counterclockwise: P1 -> P4 -> P3 -> P2
        p1, p2, p3, p4 = self.corners
        ring = [p1, p4, p3, p2]
        if p2 == p3:
            ring = [p1, p4, p3]
        return [(ring[i], ring[(i + 1) % len(ring)]) for i in range(len(ring))]

    def contains(self, point: ExponentPoint, closed: bool = True) -> bool:
        o = [_orient(a, b, point.xy) for a, b in self._edges()]
        if closed:
            return all(x >= 0 for x in o)
        return all(x > 0 for x in o)


def quadrangle_Q(n: int) -> QuadrangleQ:
    """Corners ``P1..P4`` of the closed quadrangle (a triangle when ``n = 2``)."""
    if n < 2:
        raise ValueError("n must be >= 2")
    p1 = (Fraction(0), Fraction(0))
    p2 = (Fraction(n - 1, n), Fraction(n - 1, n))
    p3 = (Fraction(n - 1, n), Fraction(1, n))
    p4 = (Fraction(n * (n - 1), n * n + 1), Fraction(n - 1, n * n + 1))
    return QuadrangleQ(n, (p1, p2, p3, p4))


def random_admissible_point(rng: random.Random, n: int, max_den: int = 997) -> ExponentPoint:
    """Uniform-ish random rational point with ``0 <= 1/q <= 1/p <= 1``."""
    den_p = rng.randint(1, max_den)
    den_q = rng.randint(1, max_den)
    ip = Fraction(rng.randint(0, den_p), den_p)
    iq = Fraction(rng.randint(0, den_q), den_q) * ip
    return ExponentPoint(ip, iq, n)
