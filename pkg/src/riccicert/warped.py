"""Curvature kernel for doubly warped product metrics.

The metric is ``ds^2 + k^2(s) g_{S^m} + h^2(s) g_{S^(n-1)}`` on an interval
``[0, T]``: an m-sphere fiber warped by ``k`` and an (n-1)-sphere fiber
warped by ``h``. The five sectional curvatures have the classical closed
forms

    K(ds, k-fiber)   = -k''/k
    K(ds, h-fiber)   = -h''/h
    K(k, k)          = (1 - k'^2) / k^2
    K(h, h)          = (1 - h'^2) / h^2
    K(k-fiber, h)    = -(k' h') / (k h)

and the Ricci tensor is diagonal in this frame with values

    Ric_s = m K_sk + (n-1) K_sh
    Ric_k = K_sk + (m-1) K_kk + (n-1) K_kh
    Ric_h = K_sh + (n-2) K_hh + m K_kh

(the integer weights are frozen against a finite-difference Riemann oracle
in the test suite). At an end where a fiber collapses the 0/0 forms are
replaced by their limits: for h(0) = 0, h'(0) = 1 both K_sh and K_hh tend to
-h'''(0) and K_kh tends to -k''(0)/k(0); symmetrically with k''' at a
collapsing k end. The limits require the non-collapsing warping to be even
at that end (k'(0) = 0), which validation enforces.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, KinkSideRequired, PreconditionError
from .jetcurve import Jet3Curve, affine_combine
from .verify import GridSpec, PositivityCertificate, grid_min


def _jet_safe(curve, s):
    # Grid scans may land exactly on a marked kink; sample the left limit
    # there (value and low orders are continuous, higher orders one-sided).
    try:
        return curve.jet(s)
    except KinkSideRequired:
        return curve.jet(s, side="left")

__all__ = [
    "DoublyWarpedMetric",
    "CurvatureSample",
    "WarpedMetricPath",
    "sectional",
    "level_set_second_form",
    "min_ricci",
]

ENDPOINT_KINDS = ("closed_k", "closed_h", "boundary")
_CLOSE_TOL = 1e-6


@dataclass(frozen=True)
class CurvatureSample:
    """Sectional and frame-diagonal Ricci values at one parameter value."""

    s: float
    K_sk: float
    K_sh: float
    K_kk: float
    K_hh: float
    K_kh: float
    Ric_s: float
    Ric_k: float
    Ric_h: float

    def min_ric(self) -> float:
        return min(self.Ric_s, self.Ric_k, self.Ric_h)

    def as_row(self):
        return (self.s, self.K_sk, self.K_sh, self.K_kk, self.K_hh, self.K_kh,
                self.Ric_s, self.Ric_k, self.Ric_h)

    CSV_HEADER = ("s", "K_sk", "K_sh", "K_kk", "K_hh", "K_kh",
                  "Ric_s", "Ric_k", "Ric_h")


@dataclass(frozen=True)
class DoublyWarpedMetric:
    """``ds^2 + k^2 ds_m^2 + h^2 ds_{n-1}^2`` with endpoint closure tags."""

    k: Jet3Curve
    h: Jet3Curve
    m: int
    n: int
    start_kind: str = "boundary"
    end_kind: str = "boundary"
    guard_frac: float = 1e-6

    def __post_init__(self):
        if self.k.domain != self.h.domain:
            raise PreconditionError(
                f"k and h domains differ: {self.k.domain!r} vs {self.h.domain!r}"
            )
        if self.m < 2 or self.n < 2:
            raise PreconditionError(f"need m, n >= 2, got m={self.m}, n={self.n}")
        for kind in (self.start_kind, self.end_kind):
            if kind not in ENDPOINT_KINDS:
                raise PreconditionError(f"unknown endpoint kind {kind!r}")
        self._check_closure()
        self._check_positivity()

    @property
    def domain(self):
        return self.k.domain

    def _check_closure(self):
        lo, hi = self.domain
        checks = []
        if self.start_kind == "closed_h":
            jh, jk = self.h.jet(lo), self.k.jet(lo)
            checks += [("h(0)", jh.value), ("h'(0)-1", jh.d1 - 1.0),
                       ("h''(0)", jh.d2), ("k'(0)", jk.d1)]
        if self.start_kind == "closed_k":
            jk, jh = self.k.jet(lo), self.h.jet(lo)
            checks += [("k(0)", jk.value), ("k'(0)-1", jk.d1 - 1.0),
                       ("k''(0)", jk.d2), ("h'(0)", jh.d1)]
        if self.end_kind == "closed_k":
            jk, jh = self.k.jet(hi), self.h.jet(hi)
            checks += [("k(T)", jk.value), ("k'(T)+1", jk.d1 + 1.0),
                       ("k''(T)", jk.d2), ("h'(T)", jh.d1)]
        if self.end_kind == "closed_h":
            jh, jk = self.h.jet(hi), self.k.jet(hi)
            checks += [("h(T)", jh.value), ("h'(T)+1", jh.d1 + 1.0),
                       ("h''(T)", jh.d2), ("k'(T)", jk.d1)]
        for name, err in checks:
            if abs(err) > _CLOSE_TOL:
                raise PreconditionError(
                    f"endpoint closure violated: |{name}| = {abs(err):.3e} > {_CLOSE_TOL}"
                )

    def _check_positivity(self, samples: int = 64):
        lo, hi = self.domain
        guard = self.guard_frac * (hi - lo)
        for s in np.linspace(lo + guard, hi - guard, samples):
            if self.k.value(s) <= 0.0 or self.h.value(s) <= 0.0:
                raise PreconditionError(
                    f"nonpositive warping at interior point s={s!r}"
                )

    def sectional(self, s: float) -> CurvatureSample:
        return sectional(self, s)

    def min_ricci(self, grid: GridSpec, threshold: float = 1e-6,
                  workers: int = 1) -> PositivityCertificate:
        return min_ricci(self, grid, threshold, workers)

    def scaled(self, c: float) -> "DoublyWarpedMetric":
        """The metric with (k, h, s) -> (c k(s/c), c h(s/c), c s)."""
        from .jetcurve import AffineOf, Scale

        def stretch(curve: Jet3Curve) -> Jet3Curve:
            pieces = tuple(
                (a * c, b * c, Scale(AffineOf(node, 1.0 / c), c))
                for a, b, node in curve.pieces
            )
            kinks = tuple((x * c, order) for x, order in curve.kinks)
            return Jet3Curve((curve.domain[0] * c, curve.domain[1] * c), pieces, kinks)

        return replace(self, k=stretch(self.k), h=stretch(self.h))


def _limits_at_closed_end(jk, jh, collapsing: str):
    """Curvature limits where one warping vanishes (L'Hopital forms)."""
    if collapsing == "h":
        K_sh = -jh.d3 / jh.d1
        K_hh = K_sh
        K_sk = -jk.d2 / jk.value
        K_kk = (1.0 - jk.d1 * jk.d1) / (jk.value * jk.value)
        K_kh = -(jk.d2 * jh.d1 + jk.d1 * jh.d2) / (jk.d1 * jh.value + jk.value * jh.d1)
    else:
        K_sk = -jk.d3 / jk.d1
        K_kk = K_sk
        K_sh = -jh.d2 / jh.value
        K_hh = (1.0 - jh.d1 * jh.d1) / (jh.value * jh.value)
        K_kh = -(jk.d2 * jh.d1 + jk.d1 * jh.d2) / (jk.d1 * jh.value + jk.value * jh.d1)
    return K_sk, K_sh, K_kk, K_hh, K_kh


def sectional(g: DoublyWarpedMetric, s: float) -> CurvatureSample:
    """All five sectional curvatures and the diagonal Ricci values at ``s``."""
    lo, hi = g.domain
    guard = g.guard_frac * (hi - lo)
    near_start = s - lo <= guard
    near_end = hi - s <= guard

    if near_start and g.start_kind != "boundary":
        jk, jh = _jet_safe(g.k, lo), _jet_safe(g.h, lo)
        which = "h" if g.start_kind == "closed_h" else "k"
        K_sk, K_sh, K_kk, K_hh, K_kh = _limits_at_closed_end(jk, jh, which)
    elif near_end and g.end_kind != "boundary":
        jk, jh = _jet_safe(g.k, hi), _jet_safe(g.h, hi)
        which = "h" if g.end_kind == "closed_h" else "k"
        K_sk, K_sh, K_kk, K_hh, K_kh = _limits_at_closed_end(jk, jh, which)
    else:
        if s < lo - guard or s > hi + guard:
            raise DomainError(f"s={s!r} outside domain [{lo!r}, {hi!r}]")
        jk, jh = _jet_safe(g.k, s), _jet_safe(g.h, s)
        kv, hv = jk.value, jh.value
        if kv <= 0.0 or hv <= 0.0:
            where = "endpoint" if (near_start or near_end) else "interior point"
            raise DomainError(
                f"warping vanishes at {where} s={s!r} without a matching "
                f"closed endpoint kind (k={kv!r}, h={hv!r})"
            )
        K_sk = -jk.d2 / kv
        K_sh = -jh.d2 / hv
        K_kk = (1.0 - jk.d1 * jk.d1) / (kv * kv)
        K_hh = (1.0 - jh.d1 * jh.d1) / (hv * hv)
        K_kh = -(jk.d1 * jh.d1) / (kv * hv)

    m, n = g.m, g.n
    return CurvatureSample(
        s=s,
        K_sk=K_sk, K_sh=K_sh, K_kk=K_kk, K_hh=K_hh, K_kh=K_kh,
        Ric_s=m * K_sk + (n - 1) * K_sh,
        Ric_k=K_sk + (m - 1) * K_kk + (n - 1) * K_kh,
        Ric_h=K_sh + (n - 2) * K_hh + m * K_kh,
    )


def level_set_second_form(g: DoublyWarpedMetric, s: float):
    """Principal curvatures (k'/k, h'/h) of the slice {s} w.r.t. +ds."""
    lo, hi = g.domain
    guard = g.guard_frac * (hi - lo)
    if s <= lo + guard or s >= hi - guard:
        raise DomainError(f"level-set second form needs interior s, got {s!r}")
    jk, jh = g.k.jet(s), g.h.jet(s)
    if jk.value <= 0.0 or jh.value <= 0.0:
        raise DomainError(f"nonpositive warping at s={s!r}")
    return (jk.d1 / jk.value, jh.d1 / jh.value)


def min_ricci(g: DoublyWarpedMetric, grid: GridSpec, threshold: float = 1e-6,
              workers: int = 1) -> PositivityCertificate:
    """Certificate that min(Ric_s, Ric_k, Ric_h) > threshold over the domain."""
    return grid_min(
        lambda s: sectional(g, s).min_ric(),
        grid,
        threshold=threshold,
        quantity_id="min_ricci",
        workers=workers,
    )


@dataclass(frozen=True)
class WarpedMetricPath:
    """Affine family g_lam with k_lam = (1-u) k0 + u k1 (same for h), where
    u = (lam - lam_range[0]) / (lam_range[1] - lam_range[0]).

    Owns path-wise positivity queries; the endpoint metrics are recovered
    bit-exactly at the range ends.
    """

    k0: Jet3Curve
    k1: Jet3Curve
    h0: Jet3Curve
    h1: Jet3Curve
    m: int
    n: int
    start_kind: str
    end_kind: str
    lam_range: tuple = (0.0, 1.0)

    def weight(self, lam: float) -> float:
        a, b = self.lam_range
        if lam < a - 1e-12 or lam > b + 1e-12:
            raise DomainError(f"lambda={lam!r} outside {self.lam_range!r}")
        return (lam - a) / (b - a)

    def metric_at(self, lam: float) -> DoublyWarpedMetric:
        u = self.weight(lam)
        if u == 0.0:
            k, h = self.k0, self.h0
        elif u == 1.0:
            k, h = self.k1, self.h1
        else:
            k = affine_combine(self.k0, self.k1, u)
            h = affine_combine(self.h0, self.h1, u)
        return DoublyWarpedMetric(k, h, self.m, self.n, self.start_kind, self.end_kind)

    def _cached_jet(self, which: str, s: float):
        # Grid scans revisit the same s for every lambda row; memoize per curve.
        cache = self.__dict__.setdefault("_jet_cache", {})
        key = (which, s)
        hit = cache.get(key)
        if hit is None:
            hit = _jet_safe(getattr(self, which), s)
            cache[key] = hit
        return hit

    def sectional(self, lam: float, s: float) -> CurvatureSample:
        # Jets combine linearly, so evaluate both endpoint curves once and mix.
        u = self.weight(lam)
        k = (self._cached_jet("k0", s).scaled(1.0 - u)
             + self._cached_jet("k1", s).scaled(u))
        h = (self._cached_jet("h0", s).scaled(1.0 - u)
             + self._cached_jet("h1", s).scaled(u))
        probe = DoublyWarpedMetric.__new__(DoublyWarpedMetric)
        object.__setattr__(probe, "k", _FrozenJetCurve(k, self.k0.domain))
        object.__setattr__(probe, "h", _FrozenJetCurve(h, self.h0.domain))
        object.__setattr__(probe, "m", self.m)
        object.__setattr__(probe, "n", self.n)
        object.__setattr__(probe, "start_kind", self.start_kind)
        object.__setattr__(probe, "end_kind", self.end_kind)
        object.__setattr__(probe, "guard_frac", 1e-6)
        return sectional(probe, s)

    def min_ricci(self, grid: GridSpec, threshold: float = 1e-6,
                  workers: int = 1) -> PositivityCertificate:
        """Grid is (lambda, s); margin is the worst diagonal Ricci value."""
        return grid_min(
            lambda lam, s: self.sectional(lam, s).min_ric(),
            grid,
            threshold=threshold,
            quantity_id="path_min_ricci",
            workers=workers,
        )


def _combine_jets(c0: Jet3Curve, c1: Jet3Curve, u: float, s: float):
    j0 = _jet_safe(c0, s)
    j1 = _jet_safe(c1, s)
    return j0.scaled(1.0 - u) + j1.scaled(u)


class _FrozenJetCurve:
    """Adapter exposing a fixed jet at every query point near one s value.

    ``sectional`` only evaluates the curve at the queried point (or the
    domain end within the guard band), and a combined jet is already the jet
    of the affine combination at that point, so a constant-jet view is exact
    for a single sample.
    """

    def __init__(self, jet, domain):
        self._jet = jet
        self.domain = domain

    def jet(self, s, side=None):
        return self._jet

    def value(self, s):
        return self._jet.value
