"""Normal-coordinate corner charts: face second forms, gluing, smoothing.

A chart models a neighborhood of a codimension-2 corner in the normal form

    g = da^2 + mu^2(a) db^2 + H^2(a, b) ds_{m-1}^2,

with the boundary face at a = 0 (normalized: mu(0) = 1) and the other face
the graph b = phi(a) (phi(0) = 0) bounding the region b <= phi(a). The
corner sphere is round and nothing depends on the z coordinate, which kills
the sum-over-z terms in the second-form formulas.

With F := H^2, the face's second fundamental form w.r.t. the outward unit
normal has the two scalar values

    II_tau = (-mu phi_aa - phi_a mu_a (mu^2 phi_a^2 + 2))
             / ((1 + (mu phi_a)^2) sqrt(1 + mu^2 phi_a^2))
    II_Z   = (-phi_a F_a mu^2 + F_b) / (2 mu F sqrt(1 + mu^2 phi_a^2))

whose denominator-free numerators (tau_clear, zed_clear) drive the
convexity certificates. Concavity of the face profile is the sign of
d^2/ds^2 F(a(s), b(s)) along the arclength parameterization of the graph in
the 2-D metric da^2 + mu^2 db^2.

Two charts glue along a = 0 when their boundary data match; the corner is
then smoothed by running the two-stage spline pipeline on mu, phi and on
every a-factor of H. H is carried as a sum of separable terms
sum_i f_i(a) g_i(b); the Hermite systems are linear in the smoothed
function's endpoint jets, so smoothing the f_i termwise is exactly the
smoothing of a -> H(a, b) for every b at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PreconditionError
from .jetcurve import BiJet, Jet3Curve
from .spline import two_stage_smooth
from .verify import GridSpec, PositivityCertificate, grid_min

__all__ = [
    "BiWarp",
    "CornerChart",
    "FaceSecondForm",
    "face_second_form",
    "face_profile_hessian",
    "dihedral_angle",
    "glue_and_smooth",
    "convexity_certificate",
    "concavity_certificate",
]

_MATCH_TOL = 1e-9


@dataclass(frozen=True)
class BiWarp:
    """Bivariate warping ``H(a, b) = sum_i f_i(a) g_i(b)``.

    All ``f_i`` share one a-domain and all ``g_i`` one b-domain. Partials
    through order 3 in each variable come from the factor curves' jets.
    """

    terms: tuple  # of (Jet3Curve in a, Jet3Curve in b)

    def __post_init__(self):
        if not self.terms:
            raise PreconditionError("BiWarp needs at least one term")
        fa0, gb0 = self.terms[0]
        for fa, gb in self.terms:
            if fa.domain != fa0.domain or gb.domain != gb0.domain:
                raise PreconditionError("BiWarp factors must share domains")

    @property
    def a_domain(self):
        return self.terms[0][0].domain

    @property
    def b_domain(self):
        return self.terms[0][1].domain

    def partial(self, i: int, j: int, a: float, b: float) -> float:
        total = 0.0
        for fa, gb in self.terms:
            total += _safe_jet(fa, a).deriv(i) * _safe_jet(gb, b).deriv(j)
        return total

    def value(self, a: float, b: float) -> float:
        return self.partial(0, 0, a, b)

    def bijet(self, a: float, b: float) -> BiJet:
        v = da = db = daa = dab = dbb = 0.0
        for fa, gb in self.terms:
            jf, jg = _safe_jet(fa, a), _safe_jet(gb, b)
            v += jf.value * jg.value
            da += jf.d1 * jg.value
            db += jf.value * jg.d1
            daa += jf.d2 * jg.value
            dab += jf.d1 * jg.d1
            dbb += jf.value * jg.d2
        return BiJet(v, da, db, daa, dab, dbb)

    def to_dict(self) -> dict:
        return {
            "terms": [
                {"a": fa.to_dict(), "b": gb.to_dict()} for fa, gb in self.terms
            ]
        }

    @staticmethod
    def from_dict(d: dict) -> "BiWarp":
        return BiWarp(
            tuple(
                (Jet3Curve.from_dict(t["a"]), Jet3Curve.from_dict(t["b"]))
                for t in d["terms"]
            )
        )


def _safe_jet(curve: Jet3Curve, x: float):
    from .warped import _jet_safe

    return _jet_safe(curve, x)


@dataclass(frozen=True)
class CornerChart:
    """One side of a corner (or a glued union) in normal coordinates.

    ``side`` is "left" (a_range ends at 0), "right" (a_range starts at 0), or
    "union" for the output of :func:`glue_and_smooth`, whose a-range spans 0.
    Left/right charts are normalized: mu(0) = 1 and phi(0) = 0 exactly.
    """

    mu: Jet3Curve
    phi: Jet3Curve
    H: BiWarp
    fiber_dim: int
    side: str

    def __post_init__(self):
        if self.side not in ("left", "right", "union"):
            raise PreconditionError(f"side must be left/right/union, got {self.side!r}")
        if self.fiber_dim < 2:
            raise PreconditionError(f"fiber_dim must be >= 2, got {self.fiber_dim}")
        if self.mu.domain != self.phi.domain or self.mu.domain != self.H.a_domain:
            raise PreconditionError("mu, phi and H must share the a-domain")
        lo, hi = self.a_range
        if self.side == "left" and hi != 0.0:
            raise PreconditionError(f"left chart must end at a=0, got {hi!r}")
        if self.side == "right" and lo != 0.0:
            raise PreconditionError(f"right chart must start at a=0, got {lo!r}")
        if self.side == "union" and not (lo < 0.0 < hi):
            raise PreconditionError("union chart must span a=0")
        if self.side != "union":
            if abs(self.mu.value(0.0) - 1.0) > 1e-12:
                raise PreconditionError(f"mu(0) must be 1, got {self.mu.value(0.0)!r}")
            if abs(self.phi.value(0.0)) > 1e-12:
                raise PreconditionError(f"phi(0) must be 0, got {self.phi.value(0.0)!r}")
        self._check_graph_and_positivity()

    def _check_graph_and_positivity(self, samples: int = 24):
        b_lo, b_hi = self.H.b_domain
        for a in np.linspace(*self.a_range, samples):
            b = self.phi.value(a)
            if b < b_lo - 1e-12 or b > b_hi + 1e-12:
                raise DomainError(
                    f"face graph exits chart: phi({a!r}) = {b!r} not in [{b_lo!r}, {b_hi!r}]"
                )
        for a in np.linspace(*self.a_range, samples):
            for b in np.linspace(b_lo, b_hi, samples):
                if self.H.value(a, b) <= 0.0:
                    raise PreconditionError(f"H <= 0 at (a={a!r}, b={b!r})")

    @property
    def a_range(self):
        return self.mu.domain

    def to_dict(self) -> dict:
        return {
            "mu": self.mu.to_dict(),
            "phi": self.phi.to_dict(),
            "H": self.H.to_dict(),
            "fiber_dim": self.fiber_dim,
            "side": self.side,
        }

    @staticmethod
    def from_dict(d: dict) -> "CornerChart":
        return CornerChart(
            mu=Jet3Curve.from_dict(d["mu"]),
            phi=Jet3Curve.from_dict(d["phi"]),
            H=BiWarp.from_dict(d["H"]),
            fiber_dim=int(d["fiber_dim"]),
            side=d["side"],
        )


@dataclass(frozen=True)
class FaceSecondForm:
    """Second-form values of the face b = phi(a) at one a, with the
    denominator-free numerators used by the certificates."""

    a: float
    II_tau: float
    II_Z: float
    tau_clear: float
    zed_clear: float

    def as_row(self):
        return (self.a, self.II_tau, self.II_Z, self.tau_clear, self.zed_clear)

    CSV_HEADER = ("a", "II_tau", "II_Z", "tau_clear", "zed_clear")


def _chart_data(chart: CornerChart, a: float):
    jmu = _safe_jet(chart.mu, a)
    jphi = _safe_jet(chart.phi, a)
    b = jphi.value
    b_lo, b_hi = chart.H.b_domain
    if b < b_lo - 1e-12 or b > b_hi + 1e-12:
        raise DomainError(f"face graph exits chart at a={a!r} (b={b!r})")
    jH = chart.H.bijet(a, b)
    return jmu, jphi, jH


def face_second_form(chart: CornerChart, a: float) -> FaceSecondForm:
    """Both scalar second-form values of the face at ``a``."""
    jmu, jphi, jH = _chart_data(chart, a)
    mu, mu_a = jmu.value, jmu.d1
    phi_a, phi_aa = jphi.d1, jphi.d2
    Hv = jH.value
    F = Hv * Hv
    F_a = 2.0 * Hv * jH.da
    F_b = 2.0 * Hv * jH.db

    q = 1.0 + mu * mu * phi_a * phi_a
    root = math.sqrt(q)
    tau_clear = -mu * phi_aa - phi_a * mu_a * (mu * mu * phi_a * phi_a + 2.0)
    zed_clear = -phi_a * F_a * mu * mu + F_b
    return FaceSecondForm(
        a=a,
        II_tau=tau_clear / (q * root),
        II_Z=zed_clear / (2.0 * mu * F * root),
        tau_clear=tau_clear,
        zed_clear=zed_clear,
    )


def face_profile_hessian(chart: CornerChart, a: float) -> float:
    """d^2/ds^2 of F = H^2 along the arclength parameterization of the face.

    With psi'(a) = sqrt(1 + mu^2 phi_a^2) the arclength derivative of the
    graph in da^2 + mu^2 db^2, the chain rule gives

        F_ss = a'' F_a + b'' F_b + a'^2 F_aa + 2 a' b' F_ab + b'^2 F_bb,
        a' = 1/psi', a'' = -psi''/psi'^3,
        b' = phi_a/psi', b'' = phi_aa/psi'^2 - phi_a psi''/psi'^3.
    """
    jmu, jphi, jH = _chart_data(chart, a)
    mu, mu_a = jmu.value, jmu.d1
    phi_a, phi_aa = jphi.d1, jphi.d2
    Hv = jH.value

    F_a = 2.0 * Hv * jH.da
    F_b = 2.0 * Hv * jH.db
    F_aa = 2.0 * (jH.da * jH.da + Hv * jH.daa)
    F_ab = 2.0 * (jH.da * jH.db + Hv * jH.dab)
    F_bb = 2.0 * (jH.db * jH.db + Hv * jH.dbb)

    psi1 = math.sqrt(1.0 + mu * mu * phi_a * phi_a)
    psi2 = (mu * mu_a * phi_a * phi_a + mu * mu * phi_a * phi_aa) / psi1
    a1 = 1.0 / psi1
    a2 = -psi2 / psi1**3
    b1 = phi_a / psi1
    b2 = phi_aa / psi1**2 - phi_a * psi2 / psi1**3
    return (a2 * F_a + b2 * F_b + a1 * a1 * F_aa
            + 2.0 * a1 * b1 * F_ab + b1 * b1 * F_bb)


def dihedral_angle(left: CornerChart, right: CornerChart) -> float:
    """Interior dihedral angle of the glued region at the corner.

    With c1 = phi_left'(0) and c2 = phi_right'(0) (one-sided, in the shared
    orientation) the angle between the left face tangent tau_1 and the
    right face normal nu_2 satisfies

        cos(alpha) = (c1 - c2) / (|tau_1| |nu_2|),

    and the interior angle of the region b <= phi is pi/2 + alpha. Values
    below pi mean the corner can be smoothed convexly.
    """
    if left.side != "left" or right.side != "right":
        raise PreconditionError("dihedral_angle expects (left, right) charts")
    c1 = left.phi.jet(0.0, side="left").d1
    c2 = right.phi.jet(0.0, side="right").d1
    n1 = math.sqrt(1.0 + c1 * c1)
    n2 = math.sqrt(1.0 + c2 * c2)
    cos_alpha = (c1 - c2) / (n1 * n2)
    alpha = math.acos(max(-1.0, min(1.0, cos_alpha)))
    return 0.5 * math.pi + alpha


def _match_b_factors(left: BiWarp, right: BiWarp, samples: int = 33):
    if len(left.terms) != len(right.terms):
        raise PreconditionError(
            f"H term counts differ: {len(left.terms)} vs {len(right.terms)}"
        )
    if left.b_domain != right.b_domain:
        raise PreconditionError(
            f"b-domains differ: {left.b_domain!r} vs {right.b_domain!r}"
        )
    bs = np.linspace(*left.b_domain, samples)
    for idx, ((_, gl), (_, gr)) in enumerate(zip(left.terms, right.terms)):
        for b in bs:
            vl, vr = gl.value(b), gr.value(b)
            if abs(vl - vr) > _MATCH_TOL * max(1.0, abs(vl), abs(vr)):
                raise PreconditionError(
                    f"b-factor {idx} differs between charts at b={b!r}: {vl!r} vs {vr!r}"
                )


def _check_boundary_match(left: CornerChart, right: CornerChart, samples: int = 33):
    bs = np.linspace(*left.H.b_domain, samples)
    worst = 0.0
    for b in bs:
        worst = max(worst, abs(left.H.value(0.0, b) - right.H.value(0.0, b)))
    if worst > _MATCH_TOL:
        raise PreconditionError(
            f"boundary metrics mismatch: max |H_L(0,b) - H_R(0,b)| = {worst:.3e} > {_MATCH_TOL}"
        )


def _check_glue_second_forms(left: CornerChart, right: CornerChart, samples: int = 33):
    # Gluing needs the boundary second forms to sum positively; on the
    # b-slices of the glue face that means d_a(H^2) jumps downward at a = 0.
    bs = np.linspace(*left.H.b_domain, samples)
    worst = math.inf
    for b in bs:
        fa_l = 2.0 * left.H.value(0.0, b) * left.H.partial(1, 0, 0.0, b)
        fa_r = 2.0 * right.H.value(0.0, b) * right.H.partial(1, 0, 0.0, b)
        worst = min(worst, fa_l - fa_r)
    if worst <= 0.0:
        raise PreconditionError(
            f"glue-face second-form sum not positive on b-slices "
            f"(min d_a F jump = {worst:.3e})"
        )
    return worst


def _union_curve(cl: Jet3Curve, cr: Jet3Curve) -> Jet3Curve:
    vl, vr = cl.value(0.0), cr.value(0.0)
    if abs(vl - vr) > _MATCH_TOL * max(1.0, abs(vl), abs(vr)):
        raise PreconditionError(
            f"chart functions disagree at the glue: {vl!r} vs {vr!r}"
        )
    pieces = cl.pieces + cr.pieces
    kinks = cl.kinks + ((0.0, 1),) + cr.kinks
    return Jet3Curve((cl.domain[0], cr.domain[1]), pieces, kinks)


def glue_and_smooth(left: CornerChart, right: CornerChart,
                    eps: float, delta: float) -> CornerChart:
    """Glue two charts along a = 0 and smooth the corner and the metric.

    Preconditions: interior dihedral angle < pi, identical boundary metrics
    at a = 0, the glue-face second-form sum positive on the b-slices, and
    smoothing windows inside both a-ranges. The output agrees with the
    inputs outside ``[-eps - delta, eps + delta]`` bit-identically.
    """
    if left.side != "left" or right.side != "right":
        raise PreconditionError("glue_and_smooth expects (left, right) charts")
    if left.fiber_dim != right.fiber_dim:
        raise PreconditionError("fiber dimensions differ")
    angle = dihedral_angle(left, right)
    # Exactly pi means the faces already meet C1 (e.g. both graphs constant);
    # only genuinely reflex corners are rejected.
    if angle > math.pi + 1e-12:
        raise PreconditionError(
            f"interior dihedral angle {angle:.6f} exceeds pi; corner cannot be smoothed"
        )
    _check_boundary_match(left, right)
    _match_b_factors(left.H, right.H)
    _check_glue_second_forms(left, right)

    window = eps + delta
    if -window <= left.a_range[0] or window >= right.a_range[1]:
        raise DomainError(
            f"smoothing window +-{window!r} exits chart ranges "
            f"{left.a_range!r} / {right.a_range!r}"
        )

    mu = two_stage_smooth(_union_curve(left.mu, right.mu), 0.0, eps, delta)
    phi = two_stage_smooth(_union_curve(left.phi, right.phi), 0.0, eps, delta)
    terms = []
    for (fa_l, g_l), (fa_r, _) in zip(left.H.terms, right.H.terms):
        fa = two_stage_smooth(_union_curve(fa_l, fa_r), 0.0, eps, delta)
        terms.append((fa, g_l))
    return CornerChart(
        mu=mu, phi=phi, H=BiWarp(tuple(terms)),
        fiber_dim=left.fiber_dim, side="union",
    )


def convexity_certificate(chart: CornerChart, grid: GridSpec,
                          threshold: float = 1e-6,
                          workers: int = 1) -> PositivityCertificate:
    """Certificate that min(tau_clear, zed_clear) > threshold along the face."""

    def margin(a):
        form = face_second_form(chart, a)
        return min(form.tau_clear, form.zed_clear)

    return grid_min(margin, grid, threshold=threshold,
                    quantity_id="face_convexity", workers=workers)


def concavity_certificate(chart: CornerChart, grid: GridSpec,
                          threshold: float = 1e-6,
                          workers: int = 1) -> PositivityCertificate:
    """Certificate that -face_profile_hessian > threshold along the face."""
    return grid_min(lambda a: -face_profile_hessian(chart, a), grid,
                    threshold=threshold, quantity_id="face_concavity",
                    workers=workers)
