"""Named metric families and the multi-step construction procedures.

Four builds live here:

* the handle metric ``dx^2 + f_nu^2(x) ds_m^2 + (2R)^2 sin^2(x/2R) ds_{n-1}^2``;
* the boundary-sphere profile (k, h): a nearly-constant k joined by a
  two-stage-smoothed corner to a cosine arc closing at s = T, and a sine arc
  h flattening to the constant R, with every profile condition checked
  numerically and reported;
* the two-stage Ricci-positive isotopy from that profile to the round
  metric, as affine paths of warping functions;
* the concordance cylinder ``dt^2 + t^2 rho^2(t) g_{lambda(t)}`` with its
  closed-form schedule, curvature-bound certificates, and the deterministic
  parameter search (r1, r0, then t0 doubling).

Constructing any object with a violated numeric condition raises
``ConditionError`` carrying the full report; nothing passes silently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConditionError, PreconditionError, SearchError
from .jetcurve import (
    Cos,
    ExpOf,
    Jet3,
    Jet3Curve,
    Log,
    Poly,
    Recip,
    Scale,
    Sin,
    Sum,
    constant,
)
from .spline import hermite_quintic, two_stage_smooth
from .verify import GridSpec, PositivityCertificate, bisect_param, grid_min
from .warped import DoublyWarpedMetric, WarpedMetricPath, _jet_safe, sectional

__all__ = [
    "ConditionCheck",
    "ConditionReport",
    "HandleParams",
    "make_handle",
    "BoundaryProfile",
    "make_boundary_profile",
    "IsotopyTarget",
    "make_isotopy_target",
    "isotopy_stage1",
    "isotopy_stage2",
    "RoundRadiusPath",
    "ConcordanceParams",
    "concordance_schedule",
    "gamma_weight",
    "estimate_C",
    "concordance_search",
    "TriangleSolution",
    "solve_geodesic_triangle",
]


# ---------------------------------------------------------------------------
# condition reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionCheck:
    name: str
    margin: float
    passed: bool
    note: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "margin": self.margin,
                "passed": self.passed, "note": self.note}


@dataclass(frozen=True)
class ConditionReport:
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failing(self):
        return [c for c in self.checks if not c.passed]

    def margin(self, name: str) -> float:
        for c in self.checks:
            if c.name == name:
                return c.margin
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}

    def raise_if_failed(self, context: str):
        if not self.passed:
            bad = ", ".join(f"{c.name} (margin {c.margin:.3e})" for c in self.failing())
            raise ConditionError(f"{context}: failed condition(s): {bad}", report=self)


def _check(name, margin, note="") -> ConditionCheck:
    return ConditionCheck(name, float(margin), bool(margin > 0.0), note)


def _grid_extreme(fn, lo, hi, count=256, reduce=min):
    vals = [fn(s) for s in np.linspace(lo, hi, count)]
    return reduce(vals)


# ---------------------------------------------------------------------------
# handle metric
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HandleParams:
    """Parameters of the handle metric; ``fnu_power`` shapes f_nu = 1 + nu u^p.

    The default power is the smallest integer > pi R / 3 (at least 4), which
    keeps the first three derivatives of f_nu zero at 0 and makes
    f_nu'(pi R/3) = nu p / (pi R / 3) > nu.
    """

    R: float
    nu: float
    m: int
    n: int
    fnu_power: int | None = None

    def __post_init__(self):
        if not self.R > 1.0:
            raise PreconditionError(f"R must exceed 1, got {self.R!r}")
        if not 0.0 < self.nu < 1.0:
            raise PreconditionError(f"nu must lie in (0, 1), got {self.nu!r}")
        power = self.power
        if power < 4:
            raise PreconditionError(f"fnu_power must be >= 4, got {power}")
        L = math.pi * self.R / 3.0
        if not power > L:
            raise PreconditionError(
                f"fnu_power {power} too small: need > pi R/3 = {L!r} for f'(end) > nu"
            )

    @property
    def power(self) -> int:
        if self.fnu_power is not None:
            return self.fnu_power
        return max(4, math.floor(math.pi * self.R / 3.0) + 1)


def fnu_curve(p: HandleParams) -> Jet3Curve:
    """f_nu(x) = 1 + nu (x / (pi R/3))^power on [0, pi R/3]."""
    L = math.pi * p.R / 3.0
    power = p.power
    coeffs = [0.0] * (power + 1)
    coeffs[0] = 1.0
    coeffs[power] = p.nu / L**power
    return Jet3Curve.from_node(Poly(tuple(coeffs)), (0.0, L))


def make_handle(p: HandleParams) -> DoublyWarpedMetric:
    """The handle metric as a doubly warped product on [0, pi R/3].

    The (n-1)-sphere factor ``2R sin(x/2R)`` collapses at x = 0 (closed_h
    end); the m-sphere factor is f_nu, so the outer boundary's level-set
    second form carries the f'/f > 0 component the gluing needs.
    """
    L = math.pi * p.R / 3.0
    k = fnu_curve(p)
    h = Jet3Curve.from_node(Sin(2.0 * p.R, 0.5 / p.R), (0.0, L))
    return DoublyWarpedMetric(k, h, p.m, p.n, start_kind="closed_h",
                              end_kind="boundary")


# ---------------------------------------------------------------------------
# piecewise-polynomial assembly for concave dives
# ---------------------------------------------------------------------------


_BUMP_NORM = 256.0 / 315.0  # integral of (1 - x^2)^4 over [-1, 1]


class _PPoly:
    """Piecewise polynomial with per-piece centers, for exact integration."""

    def __init__(self, pieces):
        # pieces: list of (lo, hi, center, coeffs ascending in (s - center))
        self.pieces = [(lo, hi, c, list(map(float, coef)))
                       for lo, hi, c, coef in pieces]

    def eval(self, s: float) -> float:
        s = min(max(s, self.pieces[0][0]), self.pieces[-1][1])
        for lo, hi, c, coef in self.pieces:
            if lo <= s <= hi:
                t = s - c
                v = 0.0
                for a in reversed(coef):
                    v = v * t + a
                return v
        raise ValueError(f"{s!r} outside piecewise domain")

    def antiderivative(self) -> "_PPoly":
        out = []
        running = 0.0
        for lo, hi, c, coef in self.pieces:
            anti = [0.0] + [a / (i + 1) for i, a in enumerate(coef)]
            t = lo - c
            v = 0.0
            for a in reversed(anti):
                v = v * t + a
            anti[0] += running - v
            t = hi - c
            v = 0.0
            for a in reversed(anti):
                v = v * t + a
            running = v
            out.append((lo, hi, c, anti))
        return _PPoly(out)

    def scaled_shifted(self, scale: float, shift: float) -> "_PPoly":
        return _PPoly([
            (lo, hi, c, [scale * a + (shift if i == 0 else 0.0)
                         for i, a in enumerate(coef)])
            for lo, hi, c, coef in self.pieces
        ])

    def to_curve(self) -> Jet3Curve:
        segs = [(lo, hi, Poly(tuple(coef), center=c))
                for lo, hi, c, coef in self.pieces]
        return Jet3Curve.piecewise(segs)


def _bump_coeffs(amplitude: float, width: float):
    """amplitude * (1 - (u / width)^2)^4, ascending in u."""
    out = [0.0] * 9
    for j in range(5):
        out[2 * j] = amplitude * math.comb(4, j) * (-1.0) ** j / width ** (2 * j)
    return out


def _dive_curve(lo: float, T: float, start_value: float, start_slope: float,
                floor_pieces, floor_mass: float, bump_center: float,
                bump_width: float) -> Jet3Curve:
    """Concave curve on [lo, T] with prescribed start data and closure at T.

    Built as k = start data minus the double integral of
    w = floor + bump, where the bump amplitude is set so the total mass
    makes k'(T) = -1; the caller places the bump center so k(T) = 0.
    The floor keeps k'' strictly negative outside the bump.
    """
    mass = 1.0 + start_slope - floor_mass
    if mass <= 0.0:
        raise PreconditionError("dive bump mass must be positive")
    amp = mass / (bump_width * _BUMP_NORM)
    c, W = bump_center, bump_width
    pieces = []
    for plo, phi, pc, pcoef in floor_pieces:
        pieces.append((plo, phi, pc, list(pcoef)))
    merged = []
    for plo, phi, pc, pcoef in pieces:
        for seg_lo, seg_hi in ((plo, min(phi, c - W)),
                               (max(plo, c - W), min(phi, c + W)),
                               (max(plo, c + W), phi)):
            if seg_lo >= seg_hi:
                continue
            mid = 0.5 * (seg_lo + seg_hi)
            if c - W <= mid <= c + W:
                coef = _recenter(pcoef, pc, c)
                bump = _bump_coeffs(amp, W)
                coef = [x + (bump[i] if i < len(bump) else 0.0)
                        for i, x in enumerate(coef + [0.0] * (9 - len(coef)))]
                merged.append((seg_lo, seg_hi, c, coef))
            else:
                merged.append((seg_lo, seg_hi, pc, pcoef))
    w = _PPoly(merged)
    w1 = w.antiderivative()                       # integral of w from lo
    kp = w1.scaled_shifted(-1.0, start_slope)     # k' = slope0 - integral
    k = kp.antiderivative()
    k = k.scaled_shifted(1.0, start_value - k.eval(lo))
    return k.to_curve()


def _recenter(coeffs, old_center: float, new_center: float):
    """Rewrite sum c_i (s - old)^i in powers of (s - new)."""
    d = new_center - old_center
    out = [0.0] * len(coeffs)
    for i, a in enumerate(coeffs):
        # (s - old)^i = ((s - new) + d)^i
        for j in range(i + 1):
            out[j] += a * math.comb(i, j) * d ** (i - j)
    return out


def _solve_dive_center(build, target_fn, lo: float, hi: float,
                       what: str, tol: float = 1e-12):
    """Bisect the bump center so the built dive hits its value pin."""
    f_lo, f_hi = target_fn(build(lo)), target_fn(build(hi))
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if (f_lo > 0.0) == (f_hi > 0.0):
        raise ConditionError(
            f"{what}: dive does not fit (residual {f_lo:.3e} at {lo!r}, "
            f"{f_hi:.3e} at {hi!r}); the value pin exceeds the room left "
            "after T2", report=None)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = target_fn(build(mid))
        if (f_mid > 0.0) == (f_lo > 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# boundary-sphere profile
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProfileShape:
    """Window sizes, bump geometry and check insets for the synthesis.

    The two-stage spline pipeline smooths only the genuine corner of k at
    s_c; the near-equality pieces (the h flattening and the dives) are C2 by
    construction, because exact Hermite windows overshoot their endpoint
    curvature hulls by a fixed fraction of the spike, which would break the
    h''/h and k'' sign clauses at these scales.
    """

    eps_k: float = 0.06
    delta_k: float = 0.012
    h_arc_cap: float = 1.45
    bridge_back: float = 0.11
    bump_halfwidth: float = 0.10
    floor_frac: float = 0.5
    tol_R_frac: float = 1e-3
    check_count: int = 384
    inset_frac: float = 0.01


@dataclass(frozen=True)
class BoundaryProfile:
    """Warping functions of the boundary sphere with their condition report."""

    k: Jet3Curve
    h: Jet3Curve
    R: float
    nu: float
    b1: float
    T0: float
    T1: float
    T2: float
    T3: float
    T: float
    s_c: float
    s_j: float
    report: ConditionReport

    def metric(self, m: int, n: int) -> DoublyWarpedMetric:
        return DoublyWarpedMetric(self.k, self.h, m, n,
                                  start_kind="closed_h", end_kind="closed_k")


def make_boundary_profile(R: float, nu: float, b1: float,
                         shape: ProfileShape = ProfileShape()) -> BoundaryProfile:
    """Synthesize (k, h) on [0, pi R / 2] and verify every profile condition.

    k is cos(b1)(1 + nu (s/s_c)^4) meeting a concave dive at s_c in a genuine
    corner that the two-stage spline pipeline smooths; the dive is a strictly
    concave bump-integral closing with k(T) = 0, k'(T) = -1, even orders
    zero. h is the arc a sin(s/a) flattened onto the constant R by a single
    C2 quintic bridge. The total length pi R / 2 makes the profile
    concatenable with the round path of radius R.
    """
    if not R > 1.0:
        raise PreconditionError(f"R must exceed 1, got {R!r}")
    if not 0.0 < nu < 1.0:
        raise PreconditionError(f"nu must lie in (0, 1), got {nu!r}")
    if not 0.0 < b1 < 0.5 * math.pi:
        raise PreconditionError(f"b1 must lie in (0, pi/2), got {b1!r}")

    T = 0.5 * math.pi * R
    cb = math.cos(b1)
    k_c = cb * (1.0 + nu)
    s_c = T - 0.5 * math.pi * k_c
    eps_k, delta_k = shape.eps_k, shape.delta_k
    if s_c <= eps_k + delta_k:
        raise PreconditionError(f"k smoothing window does not fit: s_c = {s_c!r}")

    # h: sine arc, C2 quintic bridge, plateau at R.
    a = min(shape.h_arc_cap * R, 0.92 * math.sqrt(5.0 * R))
    if a <= 1.02 * R:
        raise PreconditionError(
            f"no admissible h arc radius: a = {a!r} vs R = {R!r}"
        )
    s_star = a * math.asin(R / a)
    s_j = s_star - shape.bridge_back
    if s_j <= s_c - eps_k:
        raise PreconditionError(
            f"h bridge (s_j = {s_j!r}) would start before the k corner zone"
        )
    h_j = a * math.sin(s_j / a)
    slope_j = math.cos(s_j / a)
    w_br = 2.0 * (R - h_j) / slope_j
    T3 = s_j + w_br
    if T3 >= T:
        raise PreconditionError("h bridge exits the domain")
    seg = hermite_quintic(
        Jet3(h_j, slope_j, -math.sin(s_j / a) / a),
        Jet3(R, 0.0, 0.0), 0.5 * w_br)
    h = Jet3Curve.piecewise(
        [(0.0, s_j, Sin(a, 1.0 / a)),
         (s_j, T3, Poly(seg.coefficients, center=0.5 * (s_j + T3))),
         (T3, T, constant(R))],
        kinks=[(s_j, 3), (T3, 3)],
    )

    # k: quartic rise to (s_c, k_c), corner onto a strictly concave dive.
    lam = T - s_c
    c_nu = shape.floor_frac * nu * cb
    floor_mass = 0.5 * c_nu * lam
    w0 = shape.bump_halfwidth
    lo_c = s_c + eps_k + delta_k + w0 + 0.01
    hi_c = T - w0
    if lo_c >= hi_c:
        raise PreconditionError("no room for the k dive bump")
    floor_pieces = [(s_c, T, T, (0.0, -c_nu / lam))]

    def build_dive(center):
        return _dive_curve(s_c, T, k_c, 0.0, floor_pieces, floor_mass,
                           center, w0)

    c0 = _solve_dive_center(build_dive,
                            lambda kd: kd.jet(T).value,
                            lo_c, hi_c, "profile k dive")
    dive = build_dive(c0)
    flat = Poly((cb, 0.0, 0.0, 0.0, cb * nu / s_c ** 4))
    k_raw = Jet3Curve.piecewise(
        [(0.0, s_c, flat)] + [(plo, phi, n) for plo, phi, n in dive.pieces],
        kinks=[(s_c, 1)],
    )
    k = two_stage_smooth(k_raw, s_c, eps_k, delta_k)

    T0 = s_c - eps_k - delta_k
    T1 = _last_nonneg_d2(k, T0, s_c + eps_k + 2.0 * delta_k) + delta_k
    T2 = _near_R_onset(h, R, shape.tol_R_frac * R, s_j, T3)

    report = _profile_report(k, h, R, nu, b1, a, T0, T1, T2, T3, T, s_j, shape)
    profile = BoundaryProfile(k=k, h=h, R=R, nu=nu, b1=b1, T0=T0, T1=T1,
                             T2=T2, T3=T3, T=T, s_c=s_c, s_j=s_j,
                             report=report)
    report.raise_if_failed("boundary profile synthesis")
    return profile


def _last_nonneg_d2(curve: Jet3Curve, lo: float, hi: float,
                    count: int = 2048) -> float:
    worst = lo
    for s in np.linspace(lo, hi, count):
        if _jet_safe(curve, s).d2 >= 0.0:
            worst = s
    return worst + (hi - lo) / (count - 1)


def _near_R_onset(h: Jet3Curve, R: float, tol: float, lo: float,
                  hi: float, count: int = 2048) -> float:
    onset = hi
    for s in np.linspace(hi, lo, count):
        if abs(h.value(s) - R) > tol:
            break
        onset = s
    return onset


def _profile_report(k, h, R, nu, b1, a, T0, T1, T2, T3, T, s_j,
                    shape) -> ConditionReport:
    cb = math.cos(b1)
    count = shape.check_count
    eta = shape.inset_frac

    def d2(curve, s):
        return _jet_safe(curve, s).d2

    def d1(curve, s):
        return _jet_safe(curve, s).d1

    checks = [
        _check("order_T0<T1<T2<T3<T",
               min(T1 - T0, T2 - T1, T3 - T2, T - T3), "breakpoint ordering"),
        _check("k_near_const_before_T0",
               nu * cb * (1.0 + 1e-9)
               - _grid_extreme(lambda s: abs(k.value(s) - cb), 0.0, T0, count,
                               reduce=max),
               "max |k - cos b1| within nu cos b1"),
        _check("k_even_at_0",
               1e-9 - max(abs(k.jet(0.0).d1), abs(k.jet(0.0).d3)),
               "odd derivatives vanish at s=0"),
        _check("k_concave_after_T1",
               _grid_extreme(lambda s: -d2(k, s),
                             T1, T - eta * (T - T1), count),
               "k'' < 0 on (T1, T), checked with a 1% inset at T"),
        _check("k_closes_at_T",
               1e-8 - max(abs(k.jet(T).value), abs(k.jet(T).d1 + 1.0),
                          abs(k.jet(T).d2)),
               "k(T)=0, k'(T)=-1, k''(T)=0"),
        _check("k_slope_bounded",
               1e-9 + 1.0 - _grid_extreme(lambda s: abs(d1(k, s)), 0.0, T,
                                          count, reduce=max),
               "|k'| <= 1"),
        _check("h_closes_at_0",
               1e-9 - max(abs(h.jet(0.0).value), abs(h.jet(0.0).d1 - 1.0),
                          abs(h.jet(0.0).d2)),
               "h(0)=0, h'(0)=1, h''(0)=0"),
        _check("h_ratio_before_T1",
               _grid_extreme(lambda s: -d2(h, s) / h.value(s) - 1.0 / (5.0 * R),
                             eta * T1, T1, count),
               "-h''/h > 1/(5R) on (0, T1]"),
        _check("h_concave_before_T2",
               _grid_extreme(lambda s: -d2(h, s),
                             eta * T2, T2 - eta * (T3 - T2), count),
               "h'' < 0 on (0, T2), checked with insets"),
        _check("h_near_R_after_T2",
               shape.tol_R_frac * R
               - _grid_extreme(lambda s: abs(h.value(s) - R), T2, T, count,
                               reduce=max),
               "|h - R| small beyond T2"),
        _check("h_flat_after_T3",
               1e-12 - _grid_extreme(lambda s: abs(h.value(s) - R), T3, T,
                                     count, reduce=max),
               "h identically R beyond T3"),
    ]
    return ConditionReport(tuple(checks))


# ---------------------------------------------------------------------------
# stage-1 target (the pair the isotopy interpolates toward)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IsotopyTarget:
    """The pair (k1, h1) the stage-1 isotopy deforms the profile onto."""

    k1: Jet3Curve
    h1: Jet3Curve
    report: ConditionReport
    bump_center: float
    gamma: float


def make_isotopy_target(profile: BoundaryProfile,
                      slope_frac: float = 0.35,
                      bump_halfwidth: float = 0.10) -> IsotopyTarget:
    """Synthesize (k1, h1) for the profile and verify the target conditions.

    k1 is strictly concave by construction: minus the double integral of a
    small even floor (which keeps k1' strictly inside (-nu cos b1, 0) up to
    T2 and k1'' < 0 everywhere) plus a bump placed after T2 that performs
    the dive; the bump center pins k1(T1) = k0(T1). h1 reuses the profile's
    h, which already satisfies the stronger concavity clause.
    """
    T, T1, T2 = profile.T, profile.T1, profile.T2
    nu, cb = profile.nu, math.cos(profile.b1)

    gamma = slope_frac * nu * cb / (T2 - T2 ** 3 / (3.0 * T ** 2))
    floor_mass = 2.0 * gamma * T / 3.0
    w_b = bump_halfwidth
    v1 = profile.k.value(T1)
    lo_c = T2 + w_b + 0.01
    hi_c = T - w_b
    if lo_c >= hi_c:
        raise PreconditionError("no room for the k1 dive bump after T2")
    floor_pieces = [(0.0, T, 0.0, (gamma, 0.0, -gamma / T ** 2))]

    def build(center):
        return _dive_curve(0.0, T, 0.0, 0.0, floor_pieces, floor_mass,
                           center, w_b)

    def residual(k_shape):
        # build() anchors the start value at 0; shift so k1(T) = 0 instead,
        # then compare at T1.
        shift = -k_shape.jet(T).value
        return (k_shape.value(T1) + shift) - v1

    center = _solve_dive_center(build, residual, lo_c, hi_c, "k1 dive")
    k_shape = build(center)
    shift = -k_shape.jet(T).value
    k1 = Jet3Curve.piecewise(
        [(plo, phi, Sum((node, Poly((shift,)))))
         for plo, phi, node in k_shape.pieces])
    h1 = profile.h

    report = _target_report(profile, k1, h1, nu, cb)
    target = IsotopyTarget(k1=k1, h1=h1, report=report, bump_center=center,
                         gamma=gamma)
    report.raise_if_failed("isotopy target synthesis")
    return target


def _target_report(profile: BoundaryProfile, k1, h1, nu, cb) -> ConditionReport:
    T, T0, T1, T2, T3 = profile.T, profile.T0, profile.T1, profile.T2, profile.T3
    count = 384
    eta = 0.01

    def d2(curve, s):
        return _jet_safe(curve, s).d2

    def d1(curve, s):
        return _jet_safe(curve, s).d1

    checks = [
        _check("k1_even_at_0",
               1e-9 - max(abs(k1.jet(0.0).d1), abs(k1.jet(0.0).d3)),
               "k1 odd derivatives vanish at 0"),
        _check("k1_closes_at_T",
               1e-8 - max(abs(k1.jet(T).value), abs(k1.jet(T).d1 + 1.0),
                          abs(k1.jet(T).d2)),
               "k1(T)=0, k1'(T)=-1, k1''(T)=0"),
        _check("k1_matches_k0_at_T1",
               1e-8 - abs(k1.value(T1) - profile.k.value(T1)),
               "k1(T1) = k0(T1)"),
        _check("k1_concave",
               _grid_extreme(lambda s: -d2(k1, s), 0.0, T - eta * T, count),
               "k1'' < 0 on [0, T)"),
        _check("k1_slope_band_to_T2",
               _grid_extreme(lambda s: min(-d1(k1, s), nu * cb + d1(k1, s)),
                             eta * T2, T2, count),
               "-nu cos b1 < k1' < 0 on (0, T2]"),
        _check("k1_positive",
               _grid_extreme(lambda s: k1.value(s), 0.0, T - eta * T, count),
               "k1 > 0 before T"),
        _check("h1_equals_h0_before_T0",
               1e-12 - _grid_extreme(lambda s: abs(h1.value(s)
                                                   - profile.h.value(s)),
                                     0.0, T0, count, reduce=max),
               "h1 = h0 below T0 (same curve)"),
        _check("h1_is_R_after_T3",
               1e-12 - _grid_extreme(lambda s: abs(h1.value(s) - profile.R),
                                     T3, T, count, reduce=max),
               "h1 = R beyond T3"),
        _check("h1_concave_before_T3",
               _grid_extreme(lambda s: -d2(h1, s),
                             eta * T3, T3 - eta * (T - T3), count),
               "h1'' < 0 on (0, T3), checked with insets"),
        _check("h1_close_to_h0",
               1e-12 - _grid_extreme(lambda s: abs(h1.value(s)
                                                   - profile.h.value(s)),
                                     0.0, T, count, reduce=max),
               "h0 within 0 of h1 (shared curve)"),
    ]
    return ConditionReport(tuple(checks))


# ---------------------------------------------------------------------------
# isotopy stages
# ---------------------------------------------------------------------------


def isotopy_stage1(profile: BoundaryProfile, target: IsotopyTarget,
                   m: int, n: int) -> WarpedMetricPath:
    """Affine path from the profile metric to (k1, h1) over lambda in [0, 1]."""
    if not target.report.passed:
        target.report.raise_if_failed("isotopy stage 1 target")
    if target.k1.domain != profile.k.domain:
        raise PreconditionError("target domain differs from profile domain")
    return WarpedMetricPath(
        k0=profile.k, k1=target.k1, h0=profile.h, h1=target.h1,
        m=m, n=n, start_kind="closed_h", end_kind="closed_k",
        lam_range=(0.0, 1.0),
    )


def isotopy_stage2(k1: Jet3Curve, h1: Jet3Curve, R: float,
                   m: int, n: int) -> WarpedMetricPath:
    """Affine path from (k1, h1) to the round warpings of radius R.

    Requires the domain [0, pi R/2] and weak concavity of both inputs; the
    round end then forces |k'|, |h'| <= 1 along the whole path.
    """
    T = 0.5 * math.pi * R
    lo, hi = k1.domain
    if abs(lo) > 1e-9 or abs(hi - T) > 1e-9:
        raise PreconditionError(
            f"stage-2 domain must be [0, pi R/2] = [0, {T!r}], got {k1.domain!r}"
        )
    for name, curve in (("k1", k1), ("h1", h1)):
        worst = _grid_extreme(lambda s, c=curve: -_jet_safe(c, s).d2,
                              1e-3 * T, T - 1e-3 * T, 384)
        if worst < -1e-9:
            raise PreconditionError(
                f"{name} is not weakly concave: min(-{name}'') = {worst:.3e}"
            )
    k_round = Jet3Curve.from_node(Cos(R, 1.0 / R), (0.0, T))
    h_round = Jet3Curve.from_node(Sin(R, 1.0 / R), (0.0, T))
    return WarpedMetricPath(
        k0=k1, k1=k_round, h0=h1, h1=h_round,
        m=m, n=n, start_kind="closed_h", end_kind="closed_k",
        lam_range=(1.0, 2.0),
    )


# ---------------------------------------------------------------------------
# concordance cylinder
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RoundRadiusPath:
    """Slice family r(lam)^2 ds_n^2: round n-spheres of varying radius."""

    r: Jet3Curve
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise PreconditionError(f"need n >= 2, got {self.n}")
        if self.r.domain != (0.0, 1.0):
            raise PreconditionError("radius curve must live on [0, 1]")
        for lam in np.linspace(0.0, 1.0, 65):
            if self.r.value(lam) <= 0.0:
                raise PreconditionError(f"radius vanishes at lambda={lam!r}")

    def min_ricci(self, grid: GridSpec, threshold: float = 1e-6,
                  workers: int = 1) -> PositivityCertificate:
        return grid_min(
            lambda lam: (self.n - 1) / _jet_safe(self.r, lam).value ** 2,
            grid, threshold=threshold, quantity_id="path_min_ricci",
            workers=workers,
        )


@dataclass(frozen=True)
class ConcordanceParams:
    """Chosen constants of the concordance metric G = dt^2 + t^2 rho^2 g_lam.

    ``path`` is the certified slice family the search ran against; it is
    carried for downstream evaluation and excluded from serialization.
    """

    t0: float
    t1: float
    r0: float
    r1: float
    nu: float
    C: float
    path: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not 1.0 < self.t0 < self.t1:
            raise PreconditionError(f"need 1 < t0 < t1, got {self.t0!r}, {self.t1!r}")
        if not 0.0 < self.r0 < self.r1 < 1.0:
            raise PreconditionError(f"need 0 < r0 < r1 < 1, got {self.r0!r}, {self.r1!r}")
        if not 2.0 * self.r1 < self.nu:
            raise PreconditionError(f"need 2 r1 < nu, got r1={self.r1!r}, nu={self.nu!r}")
        if not math.log(self.r1) - math.log(self.r0) > self.C:
            raise PreconditionError("need ln r1 - ln r0 > C")

    @property
    def alpha(self) -> float:
        return 1.0 / math.log(self.t0) - 1.0 / math.log(self.t1)

    @property
    def beta(self) -> float:
        return self.alpha / (math.log(self.r1) - math.log(self.r0))

    @property
    def boundary_scale(self) -> float:
        # G(nu) = (1 / (t0 r1))^2 G makes the t0 slice isometric to g_0.
        return 1.0 / (self.t0 * self.r1)

    @property
    def end_radius_factor(self) -> float:
        # The t1 slice is then R^2 g_1 with R = t1 r0 / (t0 r1).
        return self.t1 * self.r0 / (self.t0 * self.r1)

    def to_dict(self) -> dict:
        return {"t0": self.t0, "t1": self.t1, "r0": self.r0, "r1": self.r1,
                "nu": self.nu, "C": self.C, "alpha": self.alpha,
                "beta": self.beta, "R": self.end_radius_factor}


def gamma_weight(t: float) -> float:
    """Gamma(t) = 1 / (t ln^2 t), the common speed of both schedules."""
    u = math.log(t)
    return 1.0 / (t * u * u)


def concordance_schedule(p: ConcordanceParams):
    """The unique (rho, lambda) bijections with alpha lam' = -beta rho'/rho = Gamma.

    Closed forms: lam(t) = (1/alpha)(1/ln t0 - 1/ln t) and
    ln rho(t) = ln r1 - (1/beta)(1/ln t0 - 1/ln t). Returns (rho, lam) as
    curves on [t0, t1]; the defining residuals are re-checked on a dense
    log-uniform grid and must stay below 1e-10.
    """
    alpha, beta = p.alpha, p.beta
    l0 = math.log(p.t0)
    dom = (p.t0, p.t1)
    lam = Jet3Curve.from_node(
        Sum((Poly((1.0 / (alpha * l0),)),
             Scale(Recip(Log(1.0)), -1.0 / alpha))), dom)
    rho = Jet3Curve.from_node(
        Scale(ExpOf(Scale(Recip(Log(1.0)), 1.0 / beta)),
              p.r1 * math.exp(-1.0 / (beta * l0))), dom)

    worst = 0.0
    for t in np.exp(np.linspace(math.log(p.t0), math.log(p.t1), 1000)):
        jl, jr = lam.jet(t), rho.jet(t)
        g = gamma_weight(t)
        worst = max(worst, abs(alpha * jl.d1 - g),
                    abs(beta * jr.d1 / jr.value + g))
    if worst > 1e-10:
        raise ConditionError(
            f"schedule residuals {worst:.3e} exceed 1e-10", report=None
        )
    return rho, lam


def estimate_C(path, grid: GridSpec) -> float:
    """Numerical bound for the slice-family constant C of the cylinder bounds.

    C dominates |II|, |d/ds II| and |Ric(X, d/ds)| of ds^2 + g_s over the
    path, in unit frames. For affine warped paths II is diagonal with values
    (dk/ds)/k and (dh/ds)/h, its s-derivative is minus the square, and the
    only mixed Ricci term is m (dk/ds)'/k + (n-1)(dh/ds)'/h. Round-radius
    paths have II = r'/r and no mixed term. The supremum over the grid is
    inflated by 1.1 and floored at 1e-6.
    """
    if isinstance(path, RoundRadiusPath):
        worst = 0.0
        (lo, hi, count), = grid.axes
        for lam in np.linspace(lo, hi, count):
            j = _jet_safe(path.r, lam)
            b = j.d1 / j.value
            db = j.d2 / j.value - b * b
            worst = max(worst, abs(b), abs(db))
        return max(1.1 * worst, 1e-6)
    if isinstance(path, WarpedMetricPath):
        return max(1.1 * _warped_path_sup(path, grid), 1e-6)
    raise PreconditionError(f"unsupported path type {type(path).__name__}")


def _warped_path_sup(path: WarpedMetricPath, grid: GridSpec) -> float:
    (llo, lhi, lcount), (slo, shi, scount) = grid.axes
    T = path.k0.domain[1]
    guard = 1e-6 * T
    worst = 0.0
    for lam in np.linspace(llo, lhi, lcount):
        u = path.weight(lam)
        for s in np.linspace(slo, shi, scount):
            jk0, jk1 = _jet_safe(path.k0, s), _jet_safe(path.k1, s)
            jh0, jh1 = _jet_safe(path.h0, s), _jet_safe(path.h1, s)
            k = jk0.scaled(1.0 - u) + jk1.scaled(u)
            h = jh0.scaled(1.0 - u) + jh1.scaled(u)
            dk = jk1 + jk0.scaled(-1.0)  # d/du of the family, per point
            dh = jh1 + jh0.scaled(-1.0)
            # Collapsed ends: replace 0/0 by the derivative ratio.
            if abs(k.value) < guard:
                b_k = dk.d1 / k.d1
                mixed_k = path.m * dk.d2 / k.d1
            else:
                b_k = dk.value / k.value
                mixed_k = path.m * dk.d1 / k.value
            if abs(h.value) < guard:
                b_h = dh.d1 / h.d1
                mixed_h = (path.n - 1) * dh.d2 / h.d1
            else:
                b_h = dh.value / h.value
                mixed_h = (path.n - 1) * dh.d1 / h.value
            worst = max(worst, abs(b_k), abs(b_h), b_k * b_k, b_h * b_h,
                        abs(mixed_k + mixed_h))
    return worst


def _path_global_minima(path, grid: GridSpec, workers: int):
    """(min Ricci certificate, min sectional) of the slice metrics."""
    if isinstance(path, RoundRadiusPath):
        cert = path.min_ricci(grid, workers=workers)
        sec_min = math.inf
        (lo, hi, count), = grid.axes
        for lam in np.linspace(lo, hi, count):
            sec_min = min(sec_min, 1.0 / path.r.value(lam) ** 2)
        return cert, sec_min
    cert = path.min_ricci(grid, workers=workers)
    sec_min = math.inf
    (llo, lhi, lcount), (slo, shi, scount) = grid.axes
    for lam in np.linspace(llo, lhi, lcount):
        for s in np.linspace(slo, shi, scount):
            c = path.sectional(lam, s)
            sec_min = min(sec_min, c.K_sk, c.K_sh, c.K_kk, c.K_hh, c.K_kh)
    return cert, sec_min


def _slice_dim(path) -> int:
    if isinstance(path, RoundRadiusPath):
        return path.n
    return 1 + path.m + (path.n - 1)


def concordance_search(path, nu: float, *,
                       path_grid: GridSpec | None = None,
                       t_count: int = 160, theta_count: int = 48,
                       cert_depth: int = 1, threshold: float = 1e-6,
                       max_doublings: int = 400, workers: int = 1):
    """Deterministic parameter search for the concordance metric.

    Picks r1 (0.9 of the binding bound among 2 r1 < nu and
    Ric_min > 2 r1^2), r0 = r1 exp(-(C+1)), then doubles t0 until the
    normalized curvature bounds certify positive Ricci over
    (theta, ln t) in both theta regimes split at theta0 (the largest angle
    where the time-coefficient inequality still dominates the mixed term)
    and the boundary principal-curvature margins hold: > -nu at the scaled
    t0 end, > 0 at t1 = t0^2. Returns (params, certificates dict).

    All bounds are the Gamma/alpha/beta curvature-bound expressions of the
    cylinder, multiplied by t^2 so margins are O(1); the
    mixed term enters with its polarization factor 2.
    """
    if not 0.0 < nu < 1.0:
        raise PreconditionError(f"nu must lie in (0, 1), got {nu!r}")
    n = _slice_dim(path)
    if path_grid is None:
        path_grid = (GridSpec.line(0.0, 1.0, 257)
                     if isinstance(path, RoundRadiusPath)
                     else GridSpec.box([(0.0, 1.0, 33),
                                        (path.k0.domain[0], path.k0.domain[1], 129)]))

    path_cert = None
    path_cert, sec_min = _path_global_minima(path, path_grid, workers)
    if not path_cert.passed:
        raise PreconditionError(
            f"slice metrics are not Ricci-positive (min {path_cert.min_margin:.3e})"
        )
    ric_min = path_cert.min_margin

    r1 = 0.9 * min(0.5 * nu, math.sqrt(0.5 * ric_min))
    C = estimate_C(path, path_grid)
    r0 = r1 * math.exp(-(C + 1.0))
    L = math.log(r1) - math.log(r0)  # = C + 1

    def rho_of(u, ell, beta):
        return r1 * math.exp(-(1.0 / beta) * (1.0 / ell - 1.0 / u))

    def bounds_at(theta, u, ell):
        alpha = 0.5 / ell
        beta = alpha / L
        inv_a, inv_b = 1.0 / alpha, 1.0 / beta
        rho = rho_of(u, ell, beta)
        shape = 1.0 / u**2 - 2.0 / u**3
        sec_time = (inv_b - C * inv_a) * shape - 4.0 * (inv_b + C * inv_a) ** 2 / u**4
        b_time = n * sec_time
        sec_space = (sec_min / rho**2 - 1.0
                     - C * ((inv_a + inv_b) / u**2 + (inv_a + inv_b) ** 2 / u**4))
        b_space = sec_time + (n - 1) * sec_space
        b_mixed = C * inv_a / (u * u * rho)
        ct, st = math.cos(theta), math.sin(theta)
        return (ct * ct * b_time - 2.0 * abs(st * ct) * b_mixed
                + st * st * b_space)

    def theta_split(ell) -> float:
        def ok(theta):
            ct, st = math.cos(theta), math.sin(theta)
            return (ct * ct * n * (L - C) - st * ct * C / r0) > (L - C)

        if not ok(1e-9):
            return 0.0
        return bisect_param(ok, 1e-9, 0.5 * math.pi - 1e-9, tol=1e-6)

    def coarse_ok(ell, theta0):
        # Cheap gate before running the full certificates: the margins are
        # smooth in (theta, ln t), so a thin grid finds the right doubling.
        worst = math.inf
        for th in np.linspace(0.0, 0.5 * math.pi, 25):
            for u in np.linspace(ell, 2.0 * ell, 33):
                worst = min(worst, bounds_at(th, u, ell))
                if worst <= threshold:
                    return False
        return True

    t0 = 4.0
    trace = []
    for _ in range(max_doublings):
        ell = math.log(t0)
        theta0 = theta_split(ell)
        margin_t0 = nu - r1 * (1.0 + 2.0 * (L + C) / ell)
        margin_t1 = 1.0 + (L - C) / (2.0 * ell)
        trace.append((t0, theta0, margin_t0, margin_t1))
        if (theta0 <= 0.0 or margin_t0 <= threshold or margin_t1 <= threshold
                or not coarse_ok(ell, theta0)):
            t0 *= 2.0
            continue
        certs = {}
        certs["ricci_theta_below"] = grid_min(
            lambda th, u, e=ell: bounds_at(th, u, e),
            GridSpec.box([(0.0, theta0, theta_count), (ell, 2.0 * ell, t_count)],
                         depth=cert_depth),
            threshold=threshold, quantity_id="ricci_bound_theta_below_t2norm",
            workers=workers)
        certs["ricci_theta_above"] = grid_min(
            lambda th, u, e=ell: bounds_at(th, u, e),
            GridSpec.box([(theta0, 0.5 * math.pi, theta_count),
                          (ell, 2.0 * ell, t_count)], depth=cert_depth),
            threshold=threshold, quantity_id="ricci_bound_theta_above_t2norm",
            workers=workers)
        ric_ok = all(c.passed for c in certs.values())
        if ric_ok:
            params = ConcordanceParams(t0=t0, t1=t0 * t0, r0=r0, r1=r1,
                                       nu=nu, C=C, path=path)
            certs["path_ricci"] = path_cert
            boundary = {
                "t0_end_margin": margin_t0,
                "t0_end_requirement": "principal curvatures > -nu after scaling",
                "t1_end_margin": margin_t1,
                "t1_end_requirement": "principal curvatures > 0 (t^2-normalized)",
                "theta0": theta0,
            }
            return params, certs, boundary
        t0 *= 2.0
    raise SearchError(
        f"concordance search exceeded {max_doublings} doublings of t0; "
        f"last: theta0 {trace[-1][1]:.3e}, t0-end margin {trace[-1][2]:.3e}, "
        f"t1-end margin {trace[-1][3]:.3e}", trace=trace,
    )


# ---------------------------------------------------------------------------
# spherical triangle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TriangleSolution:
    theta0: float
    theta_r: float
    x1: float
    z: float
    residual: float

    def to_dict(self) -> dict:
        return {"theta0": self.theta0, "theta_r": self.theta_r,
                "x1": self.x1, "z": self.z, "residual": self.residual}


def _sin_z(theta0: float, theta_r: float, r: float):
    """Law of cosines for the angle theta1, then law of sines for the side z."""
    cos_t1 = (-math.cos(theta_r) * math.cos(theta0)
              + math.sin(theta_r) * math.sin(theta0) * math.cos(r))
    sin_t1 = math.sqrt(max(0.0, 1.0 - cos_t1 * cos_t1))
    return math.sin(theta0) * math.sin(r) / sin_t1, sin_t1


def solve_geodesic_triangle(r: float, tilt: float = 1e-4,
                            tol: float = 1e-13) -> TriangleSolution:
    """Angles (theta0, theta_r) with sin z = sin 2r, plus the base x1.

    The pair is found by bisecting along the path
    (theta0, theta_r)(tau) = (pi/2 - tilt tau, pi - tau pi/2), whose
    endpoints give sin z -> sin r and sin z -> 1; the tiny tilt keeps
    theta0 strictly below pi/2 at the solution.
    """
    if not 0.0 < r < 0.25 * math.pi:
        raise PreconditionError(f"r must lie in (0, pi/4), got {r!r}")
    target = math.sin(2.0 * r)

    def angles(tau):
        return 0.5 * math.pi - tilt * tau, math.pi - 0.5 * math.pi * tau

    def residual(tau):
        t0, tr = angles(tau)
        return _sin_z(t0, tr, r)[0] - target

    lo, hi = 1e-9, 1.0 - 1e-9
    f_lo, f_hi = residual(lo), residual(hi)
    if not f_lo < 0.0 < f_hi:
        raise SearchError(
            f"no bracket for the triangle solve at r={r!r}: "
            f"f({lo})={f_lo!r}, f({hi})={f_hi!r}"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if residual(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    tau = 0.5 * (lo + hi)
    theta0, theta_r = angles(tau)
    sin_z, sin_t1 = _sin_z(theta0, theta_r, r)
    x1 = math.asin(min(1.0, math.sin(theta_r) * math.sin(r) / sin_t1))
    return TriangleSolution(
        theta0=theta0, theta_r=theta_r, x1=x1,
        z=math.asin(min(1.0, sin_z)), residual=sin_z - target,
    )
