"""Hermite polynomial splines and the two-stage smoothing pipeline.

The workhorse is the unique degree-(2k+1) polynomial matching derivatives
through order k at both ends of a symmetric window, for k = 1 (cubic) and
k = 2 (quintic). A kinked curve is smoothed in two stages: a C1 stage on
``[kink - eps, kink + eps]`` that trades the corner for a pair of curvature
jumps at the window ends, then a C2 stage on ``delta``-windows around those
two points. The output agrees with the input outside the windows,
bit-identically.

Segment coefficients are found by solving the Hermite system in the scaled
local variable a/width, where the matrix is constant and perfectly
conditioned; the closed-form rational expressions live in the test suite as
a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PreconditionError
from .jetcurve import Jet3, Jet3Curve, Poly

__all__ = [
    "SplineSegment",
    "hermite_cubic",
    "hermite_quintic",
    "smooth_c1",
    "smooth_c2",
    "two_stage_smooth",
]

# Hermite systems in the scaled variable t = a / half_width, rows ordered
# value(-1), t-deriv(-1), [t2-deriv(-1)], value(+1), ...
_CUBIC_MATRIX = np.array(
    [
        [1.0, -1.0, 1.0, -1.0],
        [0.0, 1.0, -2.0, 3.0],
        [1.0, 1.0, 1.0, 1.0],
        [0.0, 1.0, 2.0, 3.0],
    ]
)
_QUINTIC_MATRIX = np.array(
    [
        [1.0, -1.0, 1.0, -1.0, 1.0, -1.0],
        [0.0, 1.0, -2.0, 3.0, -4.0, 5.0],
        [0.0, 0.0, 2.0, -6.0, 12.0, -20.0],
        [1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
        [0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
        [0.0, 0.0, 2.0, 6.0, 12.0, 20.0],
    ]
)


@dataclass(frozen=True)
class SplineSegment:
    """Polynomial on ``[center - half_width, center + half_width]``.

    ``coefficients`` are ascending powers of the local variable
    ``a = x - center``.
    """

    center: float
    half_width: float
    degree: int
    coefficients: tuple

    def node(self) -> Poly:
        return Poly(self.coefficients, center=self.center)

    def jet_local(self, a: float) -> Jet3:
        return Poly(self.coefficients).jet(a)


def _solve(matrix: np.ndarray, rhs, width: float, center: float, degree: int) -> SplineSegment:
    scaled = np.linalg.solve(matrix, np.asarray(rhs, dtype=float))
    coeffs = tuple(float(scaled[j]) / width**j for j in range(len(scaled)))
    seg = SplineSegment(center, width, degree, coeffs)
    _check_interpolation(seg, rhs, order=(degree - 1) // 2)
    return seg


def _check_interpolation(seg: SplineSegment, rhs, order: int) -> None:
    w = seg.half_width
    stride = order + 1
    for i, a in enumerate((-w, w)):
        jet = seg.jet_local(a)
        for k in range(stride):
            want = rhs[i * stride + k] / w**k
            got = jet.deriv(k)
            if abs(got - want) > 1e-9 * max(1.0, abs(want)):
                raise ArithmeticError(
                    f"Hermite solve lost endpoint data: order {k} at a={a!r}: "
                    f"{got!r} != {want!r}"
                )


def hermite_cubic(left: Jet3, right: Jet3, eps: float) -> SplineSegment:
    """Unique cubic with p(+-eps) = F(+-eps), p'(+-eps) = F'(+-eps).

    Jets are taken in the window-centered coordinate: ``left`` is the jet at
    ``-eps``, ``right`` at ``+eps``. The returned segment has center 0; shift
    it with ``dataclasses.replace`` or use :func:`smooth_c1`.
    """
    if not eps > 0.0:
        raise PreconditionError(f"eps must be positive, got {eps!r}")
    if not (left.is_finite() and right.is_finite()):
        raise PreconditionError("endpoint jets must be finite")
    rhs = (left.value, eps * left.d1, right.value, eps * right.d1)
    return _solve(_CUBIC_MATRIX, rhs, eps, 0.0, 3)


def hermite_quintic(left: Jet3, right: Jet3, delta: float) -> SplineSegment:
    """Unique quintic matching value, first and second derivatives at +-delta."""
    if not delta > 0.0:
        raise PreconditionError(f"delta must be positive, got {delta!r}")
    if not (left.is_finite() and right.is_finite()):
        raise PreconditionError("endpoint jets must be finite")
    rhs = (
        left.value,
        delta * left.d1,
        delta * delta * left.d2,
        right.value,
        delta * right.d1,
        delta * delta * right.d2,
    )
    return _solve(_QUINTIC_MATRIX, rhs, delta, 0.0, 5)


def _check_window(curve: Jet3Curve, lo: float, hi: float, allow=()):
    d_lo, d_hi = curve.domain
    if lo < d_lo or hi > d_hi:
        raise DomainError(
            f"smoothing window [{lo!r}, {hi!r}] exits domain [{d_lo!r}, {d_hi!r}]"
        )
    for x, order in curve.kinks:
        if lo <= x <= hi and x not in allow:
            raise PreconditionError(
                f"window [{lo!r}, {hi!r}] overlaps foreign kink at {x!r} (order {order})"
            )


def smooth_c1(curve: Jet3Curve, kink: float, eps: float) -> Jet3Curve:
    """C1 smoothing: replace ``[kink - eps, kink + eps]`` by the Hermite cubic.

    The input may have a corner (order-1 kink) at ``kink``, a milder declared
    kink, or be smooth there (then the cubic reproduces the curve's own jets
    and the output deviates by the Taylor remainder, O(eps^2)). The result is
    C1 everywhere and smooth except for curvature jumps at ``kink +- eps``.
    """
    if not eps > 0.0:
        raise PreconditionError(f"eps must be positive, got {eps!r}")
    order = curve.kink_order(kink)
    if order == 0:
        raise PreconditionError("cannot smooth a value discontinuity")
    lo, hi = kink - eps, kink + eps
    _check_window(curve, lo, hi, allow={kink})
    seg = hermite_cubic(curve.jet(lo), curve.jet(hi), eps)
    node = Poly(seg.coefficients, center=kink)
    drop = (kink,) if order is not None else ()
    return curve.replace_window(lo, hi, node, drop_kinks=drop,
                                add_kinks=((lo, 2), (hi, 2)))


def smooth_c2(curve: Jet3Curve, kinks, delta: float) -> Jet3Curve:
    """C2 smoothing of two curvature kinks via quintic windows.

    ``kinks`` is the pair of locations left by :func:`smooth_c1`. The input
    must be C1 there (declared order >= 2, or smooth); the windows must be
    disjoint and inside the domain.
    """
    if not delta > 0.0:
        raise PreconditionError(f"delta must be positive, got {delta!r}")
    x1, x2 = sorted(kinks)
    if x1 + delta >= x2 - delta:
        raise PreconditionError(
            f"delta windows around {x1!r} and {x2!r} overlap (delta={delta!r})"
        )
    out = curve
    for x in (x1, x2):
        order = out.kink_order(x)
        if order is not None and order < 2:
            raise PreconditionError(
                f"kink at {x!r} has order {order}; smooth_c2 needs C1 input"
            )
        lo, hi = x - delta, x + delta
        _check_window(out, lo, hi, allow={x})
        seg = hermite_quintic(out.jet(lo), out.jet(hi), delta)
        node = Poly(seg.coefficients, center=x)
        drop = (x,) if order is not None else ()
        out = out.replace_window(lo, hi, node, drop_kinks=drop,
                                 add_kinks=((lo, 3), (hi, 3)))
    return out


def two_stage_smooth(curve: Jet3Curve, kink: float, eps: float, delta: float) -> Jet3Curve:
    """C1 stage then C2 stage around one kink; returns a C2 curve.

    Requires ``delta < eps`` so the second-stage windows are disjoint, and
    ``[kink - eps - delta, kink + eps + delta]`` inside the domain with no
    other kinks.
    """
    if not 0.0 < delta < eps:
        raise PreconditionError(f"need 0 < delta < eps, got eps={eps!r}, delta={delta!r}")
    _check_window(curve, kink - eps - delta, kink + eps + delta, allow={kink})
    stage1 = smooth_c1(curve, kink, eps)
    return smooth_c2(stage1, (kink - eps, kink + eps), delta)
