"""The operator zoo and its supporting set descriptors.

Operators live on R^n (dual pairing = Euclidean dot product) and come in
five flavours: linear maps, linear relations (graph = subspace of R^2n),
norm subdifferentials, normal cones of bounded convex sets, and binary
sums.  A sixth plumbing variant translates a graph by a fixed pair, which
is what the affine-shift certificates operate on.

All descriptors are immutable; every operation is pure given an explicit
seed, so concurrent use needs no synchronization.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .linalg import (
    DimensionMismatchError,
    Subspace,
    as_matrix,
    as_vector,
    complement,
    contains,
    orthonormalize,
    sym_eig,
    zero_space,
)

# Eigenvalue slack used when classifying monotone / symmetric / skew.
MONOTONE_TOL = 1e-10

# Membership tolerance for set and graph tests.
MEMBER_TOL = 1e-9


class MalformedDescriptorError(ValueError):
    """An operator descriptor violates its structural invariants."""


class NotMonotoneError(ValueError):
    """Operation requires a monotone operator."""


class NotMaximalError(ValueError):
    """Operation requires a maximally monotone operator."""


class NotSkewError(ValueError):
    """Operation requires a skew linear relation."""


class UnsupportedOperatorError(TypeError):
    """The requested operation has no implementation for this descriptor."""


# ---------------------------------------------------------------------------
# convex set descriptors
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Ball:
    """Closed Euclidean ball with positive radius."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_vector(self.center))
        if not self.radius > 0:
            raise MalformedDescriptorError("ball radius must be positive")

    @property
    def dim(self):
        return self.center.shape[0]

    def support(self, u) -> float:
        u = as_vector(u, self.dim)
        return float(self.center @ u + self.radius * np.linalg.norm(u))

    def contains(self, x, tol=MEMBER_TOL) -> bool:
        x = as_vector(x, self.dim)
        return float(np.linalg.norm(x - self.center)) <= self.radius + tol

    def project(self, x) -> np.ndarray:
        x = as_vector(x, self.dim)
        d = x - self.center
        nd = float(np.linalg.norm(d))
        if nd <= self.radius:
            return x
        return self.center + d * (self.radius / nd)

    def interior_point(self) -> np.ndarray:
        return self.center.copy()


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box {x : lo <= x <= hi componentwise}, lo < hi."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = as_vector(self.lo)
        hi = as_vector(self.hi, lo.shape[0])
        if not np.all(lo < hi):
            raise MalformedDescriptorError("box requires lo < hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return self.lo.shape[0]

    def support(self, u) -> float:
        u = as_vector(u, self.dim)
        return float(np.sum(np.maximum(self.lo * u, self.hi * u)))

    def contains(self, x, tol=MEMBER_TOL) -> bool:
        x = as_vector(x, self.dim)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def project(self, x) -> np.ndarray:
        return np.clip(as_vector(x, self.dim), self.lo, self.hi)

    def interior_point(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)


def _project_simplex(y):
    """Euclidean projection onto the probability simplex (sort method)."""
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, y.size + 1)
    cond = u - css / idx > 0
    rho = int(idx[cond][-1])
    theta = css[rho - 1] / rho
    return np.maximum(y - theta, 0.0)


@dataclass(frozen=True, eq=False)
class Polytope:
    """Convex hull of a nonempty, vertex-listed point set (V-representation)."""

    vertices: tuple

    def __post_init__(self):
        if len(self.vertices) == 0:
            raise MalformedDescriptorError("polytope needs at least one vertex")
        verts = tuple(as_vector(v) for v in self.vertices)
        d = verts[0].shape[0]
        if any(v.shape[0] != d for v in verts):
            raise DimensionMismatchError("polytope vertices have mixed dimensions")
        object.__setattr__(self, "vertices", verts)

    @property
    def dim(self):
        return self.vertices[0].shape[0]

    def _vertex_matrix(self):
        return np.stack(self.vertices)  # (m, n)

    def support(self, u) -> float:
        u = as_vector(u, self.dim)
        return float(np.max(self._vertex_matrix() @ u))

    def project(self, x) -> np.ndarray:
        """Nearest point of the hull, via accelerated projected gradient on
        the simplex weights (exact for a single vertex)."""
        x = as_vector(x, self.dim)
        p = self._vertex_matrix()
        m = p.shape[0]
        if m == 1:
            return p[0].copy()
        lam = np.full(m, 1.0 / m)
        lip = float(np.linalg.norm(p @ p.T, 2))
        step = 1.0 / max(lip, 1e-30)
        z, t_acc = lam.copy(), 1.0
        for _ in range(4000):
            grad = p @ (p.T @ z - x)
            new = _project_simplex(z - step * grad)
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_acc * t_acc))
            z = new + ((t_acc - 1.0) / t_next) * (new - lam)
            if np.linalg.norm(new - lam) <= 1e-14 * (1.0 + np.linalg.norm(lam)):
                lam = new
                break
            lam, t_acc = new, t_next
        return p.T @ lam

    def contains(self, x, tol=MEMBER_TOL) -> bool:
        x = as_vector(x, self.dim)
        return float(np.linalg.norm(x - self.project(x))) <= tol * (1.0 + np.linalg.norm(x))

    def interior_point(self) -> np.ndarray:
        return self._vertex_matrix().mean(axis=0)


ConvexSetDescriptor = Union[Ball, Box, Polytope]


def support_function(c: ConvexSetDescriptor, u) -> float:
    """sup over the set of <point, u>; always finite (sets are bounded)."""
    return c.support(u)


# ---------------------------------------------------------------------------
# operator descriptors
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LinearMapOp:
    """Single-valued linear operator x -> A x."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", as_matrix(self.matrix, square=True))

    @property
    def dim(self):
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class LinearRelationOp:
    """Set-valued operator whose graph is a linear subspace of R^2n.

    The graph basis is stored with the first n coordinates for x and the
    last n for x*.
    """

    graph: Subspace

    def __post_init__(self):
        if self.graph.ambient_dim % 2 != 0:
            raise MalformedDescriptorError("relation graph must live in R^(2n)")

    @property
    def dim(self):
        return self.graph.ambient_dim // 2

    @property
    def u_block(self) -> np.ndarray:
        return self.graph.basis[: self.dim]

    @property
    def v_block(self) -> np.ndarray:
        return self.graph.basis[self.dim:]

    @classmethod
    def from_matrix(cls, a) -> "LinearRelationOp":
        a = as_matrix(a, square=True)
        n = a.shape[0]
        cols = np.vstack([np.eye(n), a])
        return cls(orthonormalize(cols, ambient_dim=2 * n))

    @classmethod
    def from_graph_columns(cls, columns, dim) -> "LinearRelationOp":
        return cls(orthonormalize(columns, ambient_dim=2 * dim))


@dataclass(frozen=True, eq=False)
class NormSubdiffOp:
    """Subdifferential of the Euclidean p-power norm.

    ``p == 1`` means f = ||.||; ``p > 1`` means f = (1/p) ||.||^p.
    """

    dim: int
    p: float

    def __post_init__(self):
        if self.dim < 1:
            raise MalformedDescriptorError("dimension must be >= 1")
        if not self.p >= 1.0:
            raise MalformedDescriptorError("exponent p must be >= 1")

    def gradient(self, x) -> np.ndarray:
        """The single-valued selection at x != 0 (the unique value there)."""
        x = as_vector(x, self.dim)
        r = float(np.linalg.norm(x))
        if r == 0.0:
            return np.zeros(self.dim)
        return x * r ** (self.p - 2.0)


@dataclass(frozen=True, eq=False)
class NormalConeOp:
    """Normal cone operator of a bounded closed convex set."""

    set: ConvexSetDescriptor

    @property
    def dim(self):
        return self.set.dim


@dataclass(frozen=True, eq=False)
class SumOp:
    """Pointwise sum of two operators on the same space."""

    terms: tuple

    def __post_init__(self):
        if len(self.terms) != 2:
            raise MalformedDescriptorError("sums have exactly two terms in v1")
        dims = {ambient_dim(t) for t in self.terms}
        if len(dims) != 1:
            raise DimensionMismatchError("sum terms live in different spaces")

    @property
    def dim(self):
        return ambient_dim(self.terms[0])


@dataclass(frozen=True, eq=False)
class TranslatedOp:
    """Graph translation: gra = gra(inner) + {(shift_x, shift_xs)}."""

    inner: "OperatorDescriptor"
    shift_x: np.ndarray
    shift_xs: np.ndarray

    def __post_init__(self):
        n = ambient_dim(self.inner)
        object.__setattr__(self, "shift_x", as_vector(self.shift_x, n))
        object.__setattr__(self, "shift_xs", as_vector(self.shift_xs, n))

    @property
    def dim(self):
        return ambient_dim(self.inner)


OperatorDescriptor = Union[
    LinearMapOp, LinearRelationOp, NormSubdiffOp, NormalConeOp, SumOp, TranslatedOp
]


def ambient_dim(op: OperatorDescriptor) -> int:
    if isinstance(op, (LinearMapOp, LinearRelationOp, NormSubdiffOp, NormalConeOp,
                       SumOp, TranslatedOp)):
        return op.dim
    raise UnsupportedOperatorError(f"not an operator descriptor: {type(op)!r}")


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValidationReport:
    monotone: bool
    maximal: Optional[bool]  # None = unknown at this level
    detail: str


def symmetric_part(op) -> np.ndarray:
    """(A + A^T)/2 for a linear map (or a relation that is one in disguise)."""
    if isinstance(op, LinearRelationOp):
        m = relation_as_map(op)
        if m is None:
            raise UnsupportedOperatorError("relation is not a single-valued map")
        op = m
    if not isinstance(op, LinearMapOp):
        raise UnsupportedOperatorError("symmetric_part needs a linear operator")
    return 0.5 * (op.matrix + op.matrix.T)


def _relation_form(rel: LinearRelationOp) -> np.ndarray:
    u, v = rel.u_block, rel.v_block
    return 0.5 * (u.T @ v + v.T @ u)


def is_symmetric(op, tol=MONOTONE_TOL) -> bool:
    """<x, y*> = <y, x*> for all graph pairs."""
    if isinstance(op, LinearMapOp):
        return float(np.max(np.abs(op.matrix - op.matrix.T), initial=0.0)) <= tol
    if isinstance(op, LinearRelationOp):
        u, v = op.u_block, op.v_block
        return float(np.max(np.abs(u.T @ v - v.T @ u), initial=0.0)) <= tol
    raise UnsupportedOperatorError("symmetry is defined for linear operators")


def is_skew(op, tol=MONOTONE_TOL) -> bool:
    """<x, x*> = 0 on the whole graph."""
    if isinstance(op, LinearMapOp):
        return float(np.max(np.abs(op.matrix + op.matrix.T), initial=0.0)) <= tol
    if isinstance(op, LinearRelationOp):
        return float(np.max(np.abs(_relation_form(op)), initial=0.0)) <= tol
    raise UnsupportedOperatorError("skewness is defined for linear operators")


def validate(op: OperatorDescriptor) -> ValidationReport:
    """Decide monotonicity (exactly, for linear operators) and maximality.

    Linear maps: monotone iff the symmetric part is PSD; monotone
    single-valued linear operators on R^n are automatically maximal.
    Linear relations: monotone iff the induced graph form is PSD; a
    monotone relation is maximal iff its graph has dimension n.
    Subdifferentials and normal cones are maximally monotone outright.
    For sums, monotonicity of every term is reported (a sufficient
    condition) and maximality is left to the certificates layer.
    """
    if isinstance(op, LinearMapOp):
        w, _ = sym_eig(0.5 * (op.matrix + op.matrix.T))
        lam_min = float(w[-1]) if w.size else 0.0
        mono = lam_min >= -MONOTONE_TOL
        return ValidationReport(
            monotone=mono,
            maximal=mono,
            detail=f"min eigenvalue of symmetric part = {lam_min:.6e}",
        )
    if isinstance(op, LinearRelationOp):
        w, _ = sym_eig(_relation_form(op))
        lam_min = float(w[-1]) if w.size else 0.0
        mono = lam_min >= -MONOTONE_TOL
        maximal = mono and op.graph.dim == op.dim
        return ValidationReport(
            monotone=mono,
            maximal=maximal,
            detail=(f"graph form min eigenvalue = {lam_min:.6e}, "
                    f"dim gra = {op.graph.dim} (n = {op.dim})"),
        )
    if isinstance(op, (NormSubdiffOp, NormalConeOp)):
        return ValidationReport(True, True, "subdifferential of a proper lsc convex function")
    if isinstance(op, SumOp):
        terms = [validate(t) for t in op.terms]
        mono = all(t.monotone for t in terms)
        return ValidationReport(mono, None, "sum: maximality resolved by certificates")
    if isinstance(op, TranslatedOp):
        inner = validate(op.inner)
        return ValidationReport(inner.monotone, inner.maximal,
                                f"translation of: {inner.detail}")
    raise MalformedDescriptorError(f"unknown descriptor {type(op)!r}")


def require_monotone(op) -> ValidationReport:
    rep = validate(op)
    if not rep.monotone:
        raise NotMonotoneError(rep.detail)
    return rep


def require_maximal(op) -> ValidationReport:
    rep = require_monotone(op)
    if rep.maximal is not True:
        raise NotMaximalError(rep.detail)
    return rep


# ---------------------------------------------------------------------------
# graphs and adjoints
# ---------------------------------------------------------------------------

def graph_subspace(op) -> Subspace:
    """The graph of a linear map / relation as a subspace of R^2n."""
    if isinstance(op, LinearMapOp):
        return LinearRelationOp.from_matrix(op.matrix).graph
    if isinstance(op, LinearRelationOp):
        return op.graph
    raise UnsupportedOperatorError("only linear operators have subspace graphs")


def adjoint_relation(g: Subspace) -> Subspace:
    """Graph of the adjoint relation: pairs (y, y*) with (y*, -y) in G-perp.

    Computed from the orthogonal complement of G by swapping the two
    blocks and negating one of them; dim gra A* = 2n - dim G.
    """
    if g.ambient_dim % 2 != 0:
        raise DimensionMismatchError("graph must live in R^(2n)")
    n = g.ambient_dim // 2
    comp = complement(g).basis
    cols = np.vstack([comp[n:], -comp[:n]])
    return Subspace(g.ambient_dim, cols)


def neg_adjoint_graph(g: Subspace) -> Subspace:
    """Graph of -A*: the second block of gra A* negated."""
    adj = adjoint_relation(g).basis
    n = g.ambient_dim // 2
    return Subspace(g.ambient_dim, np.vstack([adj[:n], -adj[n:]]))


def dom_subspace(op) -> Subspace:
    """Domain of a linear map / relation, as a subspace of R^n."""
    if isinstance(op, LinearMapOp):
        return orthonormalize(np.eye(op.dim))
    if isinstance(op, LinearRelationOp):
        return orthonormalize(op.u_block, ambient_dim=op.dim)
    raise UnsupportedOperatorError("domain subspace needs a linear operator")


def relation_as_map(rel: LinearRelationOp) -> Optional[LinearMapOp]:
    """Matrix form of a relation that is single-valued with full domain."""
    n = rel.dim
    u, v = rel.u_block, rel.v_block
    if rel.graph.dim != n:
        return None
    if np.linalg.matrix_rank(u, tol=1e-10) != n:
        return None
    t = np.linalg.solve(u.T @ u, u.T)  # U t = x  resolved columnwise
    return LinearMapOp(v @ t)


def as_relation(op) -> LinearRelationOp:
    if isinstance(op, LinearRelationOp):
        return op
    if isinstance(op, LinearMapOp):
        return LinearRelationOp.from_matrix(op.matrix)
    raise UnsupportedOperatorError("only linear operators convert to relations")


def sum_relation(a, b) -> LinearRelationOp:
    """Graph of A + B for linear maps/relations.

    Built in (x, a*, b*) coordinates: intersect the two cylinder
    subspaces, then push forward through (x, a*, b*) -> (x, a* + b*).
    """
    ra, rb = as_relation(a), as_relation(b)
    if ra.dim != rb.dim:
        raise DimensionMismatchError("sum terms live in different spaces")
    n = ra.dim
    ka, kb = ra.graph.dim, rb.graph.dim
    s1 = np.zeros((3 * n, ka + n))
    s1[: 2 * n, :ka] = ra.graph.basis
    s1[2 * n:, ka:] = np.eye(n)
    s2 = np.zeros((3 * n, kb + n))
    s2[:n, :kb] = rb.graph.basis[:n]
    s2[2 * n:, :kb] = rb.graph.basis[n:]
    s2[n: 2 * n, kb:] = np.eye(n)
    from .linalg import intersect as _intersect
    common = _intersect(orthonormalize(s1, ambient_dim=3 * n),
                        orthonormalize(s2, ambient_dim=3 * n))
    t = common.basis
    cols = np.vstack([t[:n], t[n: 2 * n] + t[2 * n:]])
    return LinearRelationOp(orthonormalize(cols, ambient_dim=2 * n))


# ---------------------------------------------------------------------------
# set-valued application
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EmptySet:
    def contains(self, u, tol=MEMBER_TOL) -> bool:
        return False


@dataclass(frozen=True, eq=False)
class PointValue:
    point: np.ndarray

    def contains(self, u, tol=MEMBER_TOL) -> bool:
        u = as_vector(u, self.point.shape[0])
        return float(np.linalg.norm(u - self.point)) <= tol * (1.0 + np.linalg.norm(self.point))


@dataclass(frozen=True, eq=False)
class BallValue:
    center: np.ndarray
    radius: float  # >= 0; a radius-0 value is the single point `center`

    def contains(self, u, tol=MEMBER_TOL) -> bool:
        u = as_vector(u, self.center.shape[0])
        return float(np.linalg.norm(u - self.center)) <= self.radius + tol


@dataclass(frozen=True, eq=False)
class AffineSetValue:
    point: np.ndarray
    directions: Subspace

    def contains(self, u, tol=MEMBER_TOL) -> bool:
        u = as_vector(u, self.point.shape[0])
        d = u - self.point
        resid = float(np.linalg.norm(d - self.directions.project(d)))
        return resid <= tol * (1.0 + float(np.linalg.norm(u)))


@dataclass(frozen=True, eq=False)
class RayValue:
    """{s * direction : s >= 0} with a unit direction."""

    direction: np.ndarray

    def contains(self, u, tol=MEMBER_TOL) -> bool:
        u = as_vector(u, self.direction.shape[0])
        s = float(u @ self.direction)
        resid = float(np.linalg.norm(u - s * self.direction))
        return s >= -tol and resid <= tol * (1.0 + float(np.linalg.norm(u)))


@dataclass(frozen=True, eq=False)
class FaceConeValue:
    """Box normal cone at a face: sign-constrained coordinates.

    ``signs[i]`` is +1 where the point sits on the upper face, -1 on the
    lower face, 0 where the coordinate is interior (forcing u_i = 0).
    """

    signs: np.ndarray

    def contains(self, u, tol=MEMBER_TOL) -> bool:
        u = as_vector(u, self.signs.shape[0])
        ok_free = np.all(np.abs(u[self.signs == 0]) <= tol)
        ok_up = np.all(u[self.signs > 0] >= -tol)
        ok_dn = np.all(u[self.signs < 0] <= tol)
        return bool(ok_free and ok_up and ok_dn)


@dataclass(frozen=True, eq=False)
class ConeByInequalities:
    """{u : rows @ u <= 0}; used for polytope normal cones."""

    rows: np.ndarray

    def contains(self, u, tol=MEMBER_TOL) -> bool:
        u = as_vector(u, self.rows.shape[1])
        return bool(np.all(self.rows @ u <= tol * (1.0 + np.linalg.norm(u))))


@dataclass(frozen=True, eq=False)
class TranslatedValue:
    """base + offset, for cone-type values shifted off the origin."""

    base: "SetValue"
    offset: np.ndarray

    def contains(self, u, tol=MEMBER_TOL) -> bool:
        u = as_vector(u, self.offset.shape[0])
        return self.base.contains(u - self.offset, tol)


SetValue = Union[EmptySet, PointValue, BallValue, AffineSetValue, RayValue,
                 FaceConeValue, ConeByInequalities, TranslatedValue]


def _translate_value(val: SetValue, shift: np.ndarray) -> SetValue:
    if isinstance(val, EmptySet):
        return val
    if isinstance(val, PointValue):
        return PointValue(val.point + shift)
    if isinstance(val, BallValue):
        return BallValue(val.center + shift, val.radius)
    if isinstance(val, AffineSetValue):
        return AffineSetValue(val.point + shift, val.directions)
    if isinstance(val, TranslatedValue):
        return TranslatedValue(val.base, val.offset + shift)
    return TranslatedValue(val, shift)


def _minkowski(a: SetValue, b: SetValue) -> SetValue:
    if isinstance(a, EmptySet) or isinstance(b, EmptySet):
        return EmptySet()
    if isinstance(a, PointValue):
        return _translate_value(b, a.point)
    if isinstance(b, PointValue):
        return _translate_value(a, b.point)
    if isinstance(a, AffineSetValue) and isinstance(b, AffineSetValue):
        dirs = orthonormalize(
            np.hstack([a.directions.basis, b.directions.basis]),
            ambient_dim=a.point.shape[0])
        return AffineSetValue(a.point + b.point, dirs)
    raise UnsupportedOperatorError(
        f"Minkowski sum of {type(a).__name__} and {type(b).__name__} not supported")


def apply(op: OperatorDescriptor, x) -> SetValue:
    """Exact set description of op(x); EmptySet when x is outside the domain."""
    x = as_vector(x, ambient_dim(op))
    if isinstance(op, LinearMapOp):
        return PointValue(op.matrix @ x)
    if isinstance(op, LinearRelationOp):
        u, v = op.u_block, op.v_block
        t, *_ = np.linalg.lstsq(u, x, rcond=None)
        if float(np.linalg.norm(u @ t - x)) > MEMBER_TOL * (1.0 + np.linalg.norm(x)):
            return EmptySet()
        point = v @ t
        null_u = _null_space(u)
        dirs = orthonormalize(v @ null_u, ambient_dim=op.dim) if null_u.shape[1] else \
            zero_space(op.dim)
        if dirs.dim == 0:
            return PointValue(point)
        return AffineSetValue(point, dirs)
    if isinstance(op, NormSubdiffOp):
        r = float(np.linalg.norm(x))
        if r == 0.0:
            if op.p == 1.0:
                return BallValue(np.zeros(op.dim), 1.0)
            return PointValue(np.zeros(op.dim))
        return PointValue(op.gradient(x))
    if isinstance(op, NormalConeOp):
        return _normal_cone_value(op.set, x)
    if isinstance(op, SumOp):
        return _minkowski(apply(op.terms[0], x), apply(op.terms[1], x))
    if isinstance(op, TranslatedOp):
        inner = apply(op.inner, x - op.shift_x)
        return _translate_value(inner, op.shift_xs)
    raise MalformedDescriptorError(f"unknown descriptor {type(op)!r}")


def _null_space(m) -> np.ndarray:
    m = np.atleast_2d(m)
    _, s, vt = np.linalg.svd(m)
    tol = (s[0] if s.size else 0.0) * 1e-10
    rank = int(np.sum(s > tol))
    return vt[rank:].T


def _normal_cone_value(c: ConvexSetDescriptor, x) -> SetValue:
    tol = MEMBER_TOL
    if isinstance(c, Ball):
        d = x - c.center
        nd = float(np.linalg.norm(d))
        if nd > c.radius + tol:
            return EmptySet()
        if nd < c.radius - tol:
            return PointValue(np.zeros(c.dim))
        return RayValue(d / nd)
    if isinstance(c, Box):
        if not c.contains(x, tol):
            return EmptySet()
        signs = np.zeros(c.dim)
        signs[x >= c.hi - tol] = 1.0
        signs[x <= c.lo + tol] = -1.0
        if not signs.any():
            return PointValue(np.zeros(c.dim))
        return FaceConeValue(signs)
    if isinstance(c, Polytope):
        if not c.contains(x, tol):
            return EmptySet()
        rows = c._vertex_matrix() - x
        return ConeByInequalities(rows)
    raise MalformedDescriptorError(f"unknown set {type(c)!r}")


def graph_member(op: OperatorDescriptor, x, xs, tol=MEMBER_TOL) -> bool:
    """(x, xs) in gra op, via the exact set value at x."""
    return apply(op, x).contains(xs, tol)


# ---------------------------------------------------------------------------
# deterministic graph sampling
# ---------------------------------------------------------------------------

# Normal magnitudes for cone graph sampling, relative to the sampling radius
# (at the default radius 10 this is the decade grid 0, 1e-2 .. 1e2).
_SCALE_GRID = (0.0, 1e-3, 1e-2, 1e-1, 1.0, 1e1)


def _param_stream(n, radius, rng):
    """Low-discrepancy cube points (clipped to the radius ball) interleaved
    with seeded uniform ball points; the stream is prefix-stable."""
    from scipy.stats import qmc
    halton = qmc.Halton(d=n, scramble=False)
    while True:
        h = halton.random(1)[0]
        p = radius * (2.0 * h - 1.0)
        norm = float(np.linalg.norm(p))
        if norm > radius:
            p = p * (radius / norm)
        yield p
        d = rng.normal(size=n)
        nd = float(np.linalg.norm(d))
        if nd > 0:
            r = radius * rng.uniform() ** (1.0 / n)
            yield d * (r / nd)


def _unit_dirs(n, rng):
    while True:
        d = rng.normal(size=n)
        nd = float(np.linalg.norm(d))
        if nd > 1e-12:
            yield d / nd


def _graph_stream(op, radius, rng):
    if isinstance(op, LinearMapOp):
        for y in _param_stream(op.dim, radius, rng):
            yield y, op.matrix @ y
    elif isinstance(op, LinearRelationOp):
        k = op.graph.dim
        if k == 0:
            while True:
                yield np.zeros(op.dim), np.zeros(op.dim)
        u, v = op.u_block, op.v_block
        for t in _param_stream(k, radius, rng):
            yield u @ t, v @ t
    elif isinstance(op, NormSubdiffOp):
        yield from _subdiff_stream(op, radius, rng)
    elif isinstance(op, NormalConeOp):
        yield from _cone_stream(op.set, radius, rng)
    elif isinstance(op, SumOp):
        yield from _sum_stream(op, radius, rng)
    elif isinstance(op, TranslatedOp):
        for x, xs in _graph_stream(op.inner, radius, rng):
            yield x + op.shift_x, xs + op.shift_xs
    else:
        raise MalformedDescriptorError(f"unknown descriptor {type(op)!r}")


def _subdiff_stream(op: NormSubdiffOp, radius, rng):
    dirs = _unit_dirs(op.dim, rng)
    radii = itertools.cycle(
        [0.0, radius / 4, radius / 2, 3 * radius / 4, radius, None])
    count = 0
    for d, r in zip(dirs, radii):
        if r is None:
            r = radius * rng.uniform()
        x = r * d
        if r == 0.0:
            if op.p == 1.0:
                # at the kink, every unit-ball element is a subgradient
                scale = rng.uniform()
                yield np.zeros(op.dim), scale * d
            else:
                yield np.zeros(op.dim), np.zeros(op.dim)
        else:
            yield x, op.gradient(x)
        count += 1
        if op.p == 1.0 and count % 4 == 0:
            yield np.zeros(op.dim), rng.uniform() * next(dirs)


def _box_face_stream(c: Box, radius, rng):
    n = c.dim
    mid = 0.5 * (c.lo + c.hi)
    patterns = itertools.cycle(itertools.product((-1, 0, 1), repeat=n))
    scales = itertools.cycle(radius * s for s in _SCALE_GRID)
    for sig in patterns:
        sig = np.array(sig, dtype=float)
        x = mid.copy()
        x[sig > 0] = c.hi[sig > 0]
        x[sig < 0] = c.lo[sig < 0]
        u = sig * next(scales)
        yield x, u


def _cone_stream(c: ConvexSetDescriptor, radius, rng):
    n = c.dim
    dirs = _unit_dirs(n, rng)
    scales = itertools.cycle(radius * s for s in _SCALE_GRID)
    box_faces = _box_face_stream(c, radius, rng) if isinstance(c, Box) else None
    while True:
        # a point of the set paired with the zero normal
        yield _inset_point(c, rng), np.zeros(n)
        # support route: x maximizes <., d>, so s*d is an outward normal at x
        d = next(dirs)
        x = _argmax_point(c, d)
        if x is not None:
            yield x, next(scales) * d
        if box_faces is not None:
            yield next(box_faces)


def _inset_point(c, rng) -> np.ndarray:
    if isinstance(c, Ball):
        d = rng.normal(size=c.dim)
        nd = float(np.linalg.norm(d))
        r = c.radius * rng.uniform() ** (1.0 / c.dim)
        return c.center + (d * (r / nd) if nd > 0 else 0.0)
    if isinstance(c, Box):
        return rng.uniform(c.lo, c.hi)
    if isinstance(c, Polytope):
        w = rng.dirichlet(np.ones(len(c.vertices)))
        return c._vertex_matrix().T @ w
    raise MalformedDescriptorError(f"unknown set {type(c)!r}")


def _argmax_point(c, d) -> Optional[np.ndarray]:
    """A maximizer of <., d> over the set, None when ties make the face
    ambiguous (polytopes only)."""
    if isinstance(c, Ball):
        return c.center + c.radius * d
    if isinstance(c, Box):
        return np.where(d > 0, c.hi, c.lo)
    if isinstance(c, Polytope):
        vals = c._vertex_matrix() @ d
        order = np.argsort(vals)
        if len(vals) > 1 and vals[order[-1]] - vals[order[-2]] <= 1e-12:
            return None
        return c.vertices[int(order[-1])].copy()
    raise MalformedDescriptorError(f"unknown set {type(c)!r}")


def _term_value_at(term, x, rng):
    """A representative x* with (x, x*) on the term's graph, None off-domain."""
    return _value_representative(apply(term, x), rng)


def _value_representative(val, rng):
    if isinstance(val, EmptySet):
        return None
    if isinstance(val, PointValue):
        return val.point
    if isinstance(val, BallValue):
        d = rng.normal(size=val.center.shape[0])
        nd = float(np.linalg.norm(d))
        r = val.radius * rng.uniform()
        return val.center + (d * (r / nd) if nd > 0 else 0.0)
    if isinstance(val, AffineSetValue):
        coeff = rng.normal(size=val.directions.dim)
        return val.point + val.directions.basis @ coeff
    if isinstance(val, RayValue):
        return rng.uniform(0.0, 10.0) * val.direction
    if isinstance(val, FaceConeValue):
        mags = rng.uniform(0.0, 10.0, size=val.signs.shape[0])
        return val.signs * mags
    if isinstance(val, ConeByInequalities):
        return np.zeros(val.rows.shape[1])
    if isinstance(val, TranslatedValue):
        inner = _value_representative(val.base, rng)
        return None if inner is None else val.offset + inner
    raise UnsupportedOperatorError(f"unknown value {type(val)!r}")


def _sum_stream(op: SumOp, radius, rng):
    t0, t1 = op.terms
    if isinstance(t0, (LinearMapOp, LinearRelationOp)) and \
            isinstance(t1, (LinearMapOp, LinearRelationOp)):
        yield from _graph_stream(sum_relation(t0, t1), radius, rng)
        return
    # order so that the more domain-restricted term drives the x samples
    if isinstance(t1, NormalConeOp) and not isinstance(t0, NormalConeOp):
        driver, other = t1, t0
    else:
        driver, other = t0, t1
    for x, u in _graph_stream(driver, radius, rng):
        w = _term_value_at(other, x, rng)
        if w is None:
            continue
        yield x, u + w


def sample_graph(op: OperatorDescriptor, count, radius, seed) -> list:
    """Deterministic graph samples: ``count`` pairs (x, x*) on gra op.

    For a fixed seed and radius, a longer sample extends a shorter one
    (prefix-stable streams), which makes sampled suprema monotone in
    ``count``.
    """
    if count <= 0:
        raise ValueError("count must be positive")
    if radius <= 0:
        raise ValueError("radius must be positive")
    rng = np.random.default_rng(seed)
    stream = _graph_stream(op, radius, rng)
    return [next(stream) for _ in range(count)]
