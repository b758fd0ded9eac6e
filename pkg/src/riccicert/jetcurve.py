"""Piecewise-analytic scalar curves with exact jets through order 3.

A curve is a chain of closed-form pieces (polynomials, trig, exponentials,
logarithms, and their sums/products/compositions) covering a closed interval.
Evaluation returns a :class:`Jet3` -- value and first three derivatives --
propagated analytically through the expression tree, never by finite
differences.

Curves may carry *kinks*: marked breakpoints where some derivative order
jumps. ``order`` is the lowest discontinuous derivative, so order 1 is a
corner (continuous value, slope jump) and order 2 a jump in curvature only.
Smoothing stages downstream assert on these marks to check they received the
regularity they expect.

Everything here is immutable; operations return new curves.
"""

from __future__ import annotations

import bisect as _bisect
import math
from dataclasses import dataclass

from .errors import DomainError, KinkSideRequired, PreconditionError

__all__ = [
    "Jet3",
    "BiJet",
    "Poly",
    "Cos",
    "Sin",
    "Exp",
    "Log",
    "Scale",
    "Sum",
    "Product",
    "Recip",
    "ExpOf",
    "AffineOf",
    "Jet3Curve",
    "eval_jet",
    "affine_combine",
    "node_from_dict",
    "constant",
]

_MATCH_TOL = 1e-9


@dataclass(frozen=True)
class Jet3:
    """Value and first three derivatives of a scalar function at a point."""

    value: float
    d1: float = 0.0
    d2: float = 0.0
    d3: float = 0.0

    def deriv(self, k: int) -> float:
        return (self.value, self.d1, self.d2, self.d3)[k]

    def scaled(self, c: float) -> "Jet3":
        return Jet3(c * self.value, c * self.d1, c * self.d2, c * self.d3)

    def __add__(self, other: "Jet3") -> "Jet3":
        return Jet3(
            self.value + other.value,
            self.d1 + other.d1,
            self.d2 + other.d2,
            self.d3 + other.d3,
        )

    def __mul__(self, other: "Jet3") -> "Jet3":
        # Leibniz rule through order 3.
        p, q = self, other
        return Jet3(
            p.value * q.value,
            p.d1 * q.value + p.value * q.d1,
            p.d2 * q.value + 2.0 * p.d1 * q.d1 + p.value * q.d2,
            p.d3 * q.value + 3.0 * p.d2 * q.d1 + 3.0 * p.d1 * q.d2 + p.value * q.d3,
        )

    def is_finite(self) -> bool:
        return all(map(math.isfinite, (self.value, self.d1, self.d2, self.d3)))

    def as_tuple(self):
        return (self.value, self.d1, self.d2, self.d3)


@dataclass(frozen=True)
class BiJet:
    """Value and partials through order 2 of a bivariate function.

    A single ``dab`` entry: mixed partials are symmetric by construction.
    """

    value: float
    da: float = 0.0
    db: float = 0.0
    daa: float = 0.0
    dab: float = 0.0
    dbb: float = 0.0


# ---------------------------------------------------------------------------
# analytic primitives
# ---------------------------------------------------------------------------


class Node:
    """Base for analytic expression nodes. Subclasses implement ``jet``."""

    kind = "node"

    def jet(self, x: float) -> Jet3:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Poly(Node):
    """Polynomial sum(c_i * (x - center)^i) with coefficients in ascending order."""

    coeffs: tuple
    center: float = 0.0

    kind = "poly"

    def jet(self, x: float) -> Jet3:
        t = x - self.center
        v = d1 = d2 = d3 = 0.0
        # Horner simultaneously for p, p', p'', p'''.
        for c in reversed(self.coeffs):
            d3 = d3 * t + 3.0 * d2
            d2 = d2 * t + 2.0 * d1
            d1 = d1 * t + v
            v = v * t + c
        return Jet3(v, d1, d2, d3)

    def to_dict(self) -> dict:
        return {"kind": "poly", "coeffs": list(self.coeffs), "center": self.center}


@dataclass(frozen=True)
class Cos(Node):
    """amplitude * cos(frequency * x + phase)."""

    amplitude: float
    frequency: float = 1.0
    phase: float = 0.0

    kind = "cos"

    def jet(self, x: float) -> Jet3:
        a, b = self.amplitude, self.frequency
        u = b * x + self.phase
        c, s = math.cos(u), math.sin(u)
        return Jet3(a * c, -a * b * s, -a * b * b * c, a * b**3 * s)

    def to_dict(self) -> dict:
        return {
            "kind": "cos",
            "amplitude": self.amplitude,
            "frequency": self.frequency,
            "phase": self.phase,
        }


@dataclass(frozen=True)
class Sin(Node):
    """amplitude * sin(frequency * x + phase)."""

    amplitude: float
    frequency: float = 1.0
    phase: float = 0.0

    kind = "sin"

    def jet(self, x: float) -> Jet3:
        a, b = self.amplitude, self.frequency
        u = b * x + self.phase
        c, s = math.cos(u), math.sin(u)
        return Jet3(a * s, a * b * c, -a * b * b * s, -a * b**3 * c)

    def to_dict(self) -> dict:
        return {
            "kind": "sin",
            "amplitude": self.amplitude,
            "frequency": self.frequency,
            "phase": self.phase,
        }


@dataclass(frozen=True)
class Exp(Node):
    """amplitude * exp(rate * x + shift)."""

    amplitude: float
    rate: float = 1.0
    shift: float = 0.0

    kind = "exp"

    def jet(self, x: float) -> Jet3:
        b = self.rate
        v = self.amplitude * math.exp(b * x + self.shift)
        return Jet3(v, b * v, b * b * v, b**3 * v)

    def to_dict(self) -> dict:
        return {
            "kind": "exp",
            "amplitude": self.amplitude,
            "rate": self.rate,
            "shift": self.shift,
        }


@dataclass(frozen=True)
class Log(Node):
    """amplitude * ln(rate * x + shift); requires rate*x + shift > 0."""

    amplitude: float
    rate: float = 1.0
    shift: float = 0.0

    kind = "log"

    def jet(self, x: float) -> Jet3:
        a, b = self.amplitude, self.rate
        u = b * x + self.shift
        if u <= 0.0:
            raise DomainError(f"log argument {u!r} <= 0 at x={x!r}")
        return Jet3(
            a * math.log(u),
            a * b / u,
            -a * b * b / (u * u),
            2.0 * a * b**3 / u**3,
        )

    def to_dict(self) -> dict:
        return {
            "kind": "log",
            "amplitude": self.amplitude,
            "rate": self.rate,
            "shift": self.shift,
        }


@dataclass(frozen=True)
class Scale(Node):
    """factor * arg(x)."""

    arg: Node
    factor: float

    kind = "scale"

    def jet(self, x: float) -> Jet3:
        return self.arg.jet(x).scaled(self.factor)

    def to_dict(self) -> dict:
        return {"kind": "scale", "factor": self.factor, "arg": self.arg.to_dict()}


@dataclass(frozen=True)
class Sum(Node):
    terms: tuple

    kind = "sum"

    def jet(self, x: float) -> Jet3:
        out = Jet3(0.0)
        for t in self.terms:
            out = out + t.jet(x)
        return out

    def to_dict(self) -> dict:
        return {"kind": "sum", "terms": [t.to_dict() for t in self.terms]}


@dataclass(frozen=True)
class Product(Node):
    factors: tuple

    kind = "product"

    def jet(self, x: float) -> Jet3:
        out = Jet3(1.0)
        for f in self.factors:
            out = out * f.jet(x)
        return out

    def to_dict(self) -> dict:
        return {"kind": "product", "factors": [f.to_dict() for f in self.factors]}


@dataclass(frozen=True)
class Recip(Node):
    """1 / arg(x); requires arg(x) != 0."""

    arg: Node

    kind = "recip"

    def jet(self, x: float) -> Jet3:
        u = self.arg.jet(x)
        if u.value == 0.0:
            raise DomainError(f"reciprocal of zero at x={x!r}")
        w = 1.0 / u.value
        w2 = w * w
        return Jet3(
            w,
            -u.d1 * w2,
            (2.0 * u.d1 * u.d1 * w - u.d2) * w2,
            (-u.d3 + (6.0 * u.d1 * u.d2 - 6.0 * u.d1**3 * w) * w) * w2,
        )

    def to_dict(self) -> dict:
        return {"kind": "recip", "arg": self.arg.to_dict()}


@dataclass(frozen=True)
class ExpOf(Node):
    """exp(arg(x)) for a general inner node."""

    arg: Node

    kind = "exp_of"

    def jet(self, x: float) -> Jet3:
        u = self.arg.jet(x)
        e = math.exp(u.value)
        return Jet3(
            e,
            u.d1 * e,
            (u.d2 + u.d1 * u.d1) * e,
            (u.d3 + 3.0 * u.d1 * u.d2 + u.d1**3) * e,
        )

    def to_dict(self) -> dict:
        return {"kind": "exp_of", "arg": self.arg.to_dict()}


@dataclass(frozen=True)
class AffineOf(Node):
    """arg(scale * x + shift): affine reparameterization of any node."""

    arg: Node
    scale: float
    shift: float = 0.0

    kind = "affine_of"

    def jet(self, x: float) -> Jet3:
        b = self.scale
        u = self.arg.jet(b * x + self.shift)
        return Jet3(u.value, b * u.d1, b * b * u.d2, b**3 * u.d3)

    def to_dict(self) -> dict:
        return {
            "kind": "affine_of",
            "scale": self.scale,
            "shift": self.shift,
            "arg": self.arg.to_dict(),
        }


_NODE_KINDS = {
    "poly": lambda d: Poly(tuple(float(c) for c in d["coeffs"]), float(d.get("center", 0.0))),
    "cos": lambda d: Cos(float(d["amplitude"]), float(d.get("frequency", 1.0)), float(d.get("phase", 0.0))),
    "sin": lambda d: Sin(float(d["amplitude"]), float(d.get("frequency", 1.0)), float(d.get("phase", 0.0))),
    "exp": lambda d: Exp(float(d["amplitude"]), float(d.get("rate", 1.0)), float(d.get("shift", 0.0))),
    "log": lambda d: Log(float(d["amplitude"]), float(d.get("rate", 1.0)), float(d.get("shift", 0.0))),
    "scale": lambda d: Scale(node_from_dict(d["arg"]), float(d["factor"])),
    "sum": lambda d: Sum(tuple(node_from_dict(t) for t in d["terms"])),
    "product": lambda d: Product(tuple(node_from_dict(f) for f in d["factors"])),
    "recip": lambda d: Recip(node_from_dict(d["arg"])),
    "exp_of": lambda d: ExpOf(node_from_dict(d["arg"])),
    "affine_of": lambda d: AffineOf(node_from_dict(d["arg"]), float(d["scale"]), float(d.get("shift", 0.0))),
}


def node_from_dict(d: dict) -> Node:
    try:
        builder = _NODE_KINDS[d["kind"]]
    except KeyError as exc:
        raise PreconditionError(f"unknown curve node kind {d.get('kind')!r}") from exc
    return builder(d)


def constant(c: float) -> Poly:
    return Poly((float(c),))


# ---------------------------------------------------------------------------
# curves
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Jet3Curve:
    """A scalar function on ``[domain[0], domain[1]]`` made of analytic pieces.

    ``pieces`` is a tuple of ``(lo, hi, node)`` covering the domain without
    gaps. ``kinks`` maps breakpoint -> lowest discontinuous derivative order.
    At a non-kink breakpoint the adjacent pieces must agree through order 3;
    at a kink of order ``w`` they must agree through order ``w - 1``.
    """

    domain: tuple
    pieces: tuple
    kinks: tuple = ()

    def __post_init__(self):
        lo, hi = self.domain
        if not (lo < hi):
            raise PreconditionError(f"empty domain {self.domain!r}")
        if not self.pieces:
            raise PreconditionError("curve needs at least one piece")
        if self.pieces[0][0] != lo or self.pieces[-1][1] != hi:
            raise PreconditionError("pieces do not span the domain")
        for (a, b, _), (c, _, _) in zip(self.pieces, self.pieces[1:]):
            if b != c or not (a < b):
                raise PreconditionError("pieces must be contiguous and ordered")
        kink_map = dict(self.kinks)
        for x, order in self.kinks:
            if not (lo < x < hi):
                raise PreconditionError(f"kink {x!r} not interior to the domain")
            if order not in (1, 2, 3):
                raise PreconditionError(f"kink order must be 1, 2 or 3, got {order!r}")
        for (a, b, left), (_, c, right) in zip(self.pieces, self.pieces[1:]):
            need = dict.get(kink_map, b, 4)
            jl, jr = left.jet(b), right.jet(b)
            for k in range(min(need, 4)):
                vl, vr = jl.deriv(k), jr.deriv(k)
                tol = _MATCH_TOL * max(1.0, abs(vl), abs(vr))
                if abs(vl - vr) > tol:
                    raise PreconditionError(
                        f"pieces mismatch at breakpoint {b!r}: order {k} "
                        f"({vl!r} vs {vr!r}), declared continuity {need - 1}"
                    )

    # -- evaluation ---------------------------------------------------------

    @property
    def breakpoints(self):
        return tuple(p[0] for p in self.pieces[1:])

    def kink_order(self, x: float):
        for loc, order in self.kinks:
            if loc == x:
                return order
        return None

    def _piece_at(self, x: float, side):
        lo, hi = self.domain
        slack = 1e-12 * max(1.0, abs(lo), abs(hi))
        if x < lo - slack or x > hi + slack:
            raise DomainError(f"x={x!r} outside domain [{lo!r}, {hi!r}]")
        x = min(max(x, lo), hi)
        starts = [p[0] for p in self.pieces]
        i = _bisect.bisect_right(starts, x) - 1
        i = max(i, 0)
        # On a shared breakpoint the right piece owns the point unless the
        # caller asked for the left limit, or we are at the domain's far end.
        if side == "left" and i > 0 and self.pieces[i][0] == x:
            i -= 1
        if x == hi:
            i = len(self.pieces) - 1
        return x, self.pieces[i][2]

    def jet(self, x: float, side: str | None = None) -> Jet3:
        if side not in (None, "left", "right"):
            raise PreconditionError(f"side must be 'left' or 'right', got {side!r}")
        order = self.kink_order(x)
        if order is not None and side is None:
            raise KinkSideRequired(
                f"x={x!r} is a kink of order {order}; pass side='left' or side='right'"
            )
        xc, node = self._piece_at(x, side)
        out = node.jet(xc)
        if not out.is_finite():
            raise DomainError(f"non-finite jet at x={x!r}: {out.as_tuple()!r}")
        return out

    def value(self, x: float) -> float:
        # Values are continuous even at kinks, so no side is needed.
        xc, node = self._piece_at(x, None)
        return node.jet(xc).value

    # -- constructors and transforms ----------------------------------------

    @staticmethod
    def from_node(node: Node, domain) -> "Jet3Curve":
        lo, hi = float(domain[0]), float(domain[1])
        return Jet3Curve((lo, hi), ((lo, hi, node),))

    @staticmethod
    def piecewise(segments, kinks=()) -> "Jet3Curve":
        """Build from ``[(lo, hi, node), ...]`` segments already in order."""
        segs = tuple((float(a), float(b), n) for a, b, n in segments)
        return Jet3Curve((segs[0][0], segs[-1][1]), segs, tuple(kinks))

    def replace_window(self, lo: float, hi: float, node: Node,
                       drop_kinks=(), add_kinks=()) -> "Jet3Curve":
        """Return a copy with ``[lo, hi]`` replaced by ``node``.

        Pieces outside the window are reused unchanged (object-identical), so
        evaluation there is bit-identical to the input.
        """
        d_lo, d_hi = self.domain
        if not (d_lo <= lo < hi <= d_hi):
            raise DomainError(f"window [{lo!r}, {hi!r}] exits domain {self.domain!r}")
        new_pieces = []
        for a, b, n in self.pieces:
            if b <= lo or a >= hi:
                new_pieces.append((a, b, n))
                continue
            if a < lo:
                new_pieces.append((a, lo, n))
            if b > hi:
                new_pieces.append((hi, b, n))
        new_pieces.append((lo, hi, node))
        new_pieces.sort(key=lambda p: p[0])
        dropped = set(drop_kinks)
        kept = [kk for kk in self.kinks if kk[0] not in dropped]
        for loc, _ in kept:
            if lo < loc < hi:
                raise PreconditionError(
                    f"undropped kink at {loc!r} inside replacement window"
                )
        return Jet3Curve(self.domain, tuple(new_pieces), tuple(kept) + tuple(add_kinks))

    def reversed(self) -> "Jet3Curve":
        """The curve s -> f(lo + hi - s) on the same domain."""
        lo, hi = self.domain
        total = lo + hi
        pieces = tuple(
            (total - b, total - a, AffineOf(n, -1.0, total))
            for a, b, n in reversed(self.pieces)
        )
        kinks = tuple((total - x, order) for x, order in reversed(self.kinks))
        return Jet3Curve(self.domain, pieces, kinks)

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "domain": [self.domain[0], self.domain[1]],
            "pieces": [
                {"lo": a, "hi": b, "fn": n.to_dict()} for a, b, n in self.pieces
            ],
            "kinks": [[x, order] for x, order in self.kinks],
        }

    @staticmethod
    def from_dict(d: dict) -> "Jet3Curve":
        pieces = tuple(
            (float(p["lo"]), float(p["hi"]), node_from_dict(p["fn"]))
            for p in d["pieces"]
        )
        kinks = tuple((float(x), int(order)) for x, order in d.get("kinks", []))
        return Jet3Curve((float(d["domain"][0]), float(d["domain"][1])), pieces, kinks)


def eval_jet(curve: Jet3Curve, x: float, side: str | None = None) -> Jet3:
    """Jet of ``curve`` at ``x``; one-sided at kinks via ``side``."""
    return curve.jet(x, side)


def affine_combine(c1: Jet3Curve, c2: Jet3Curve, w: float) -> Jet3Curve:
    """Pointwise ``(1 - w) * c1 + w * c2`` with jets combined linearly.

    Domains must match exactly. Kinks of either input are kept (with the
    lower order when both mark the same point), which is conservative: the
    combination cannot be smoother than its worst input unless weights kill
    a term.
    """
    if c1.domain != c2.domain:
        raise PreconditionError(f"domain mismatch: {c1.domain!r} vs {c2.domain!r}")
    cuts = sorted({a for a, _, _ in c1.pieces} | {a for a, _, _ in c2.pieces}
                  | {c1.domain[1]})
    pieces = []
    for a, b in zip(cuts, cuts[1:]):
        mid = 0.5 * (a + b)
        _, n1 = c1._piece_at(mid, None)
        _, n2 = c2._piece_at(mid, None)
        pieces.append((a, b, Sum((Scale(n1, 1.0 - w), Scale(n2, w)))))
    merged: dict = {}
    for x, order in c1.kinks + c2.kinks:
        merged[x] = min(order, merged.get(x, 4))
    kinks = tuple(sorted(merged.items()))
    return Jet3Curve(c1.domain, tuple(pieces), kinks)
