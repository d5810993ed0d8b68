"""Epsilon-enlargements: membership verdicts, explicit slice descriptors
for monotone linear maps, and closed-form graph tests for norm
subdifferentials and normal cones.

A pair (x, x*) belongs to the enlargement A_eps exactly when
F_A(x, x*) <= <x, x*> + eps; the verdict carries the slack of that
inequality.  Slices A_eps(x) of a monotone linear map are ellipsoids
described exactly (center + quadratic form + level + carrier subspace),
never as point clouds, so boundary-tight tests stay exact.

Membership comparisons use a uniform absolute boundary tolerance of
``SLACK_TOL``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import operators as ops
from .fitzpatrick import fitz_bruteforce, fitz_closed_form, pairing
from .linalg import (
    Subspace,
    as_vector,
    pseudoinverse,
    rank_cutoff,
    sym_eig,
    zero_space,
)

SLACK_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class EnlargementVerdict:
    """Outcome of an enlargement membership test.

    slack = <x, x*> + eps - F; membership means slack >= -SLACK_TOL.
    ``method`` records whether F came from a closed form or from the
    sampled oracle (the latter is approximate: a lower bound of F).
    """

    member: bool
    fitz_value: float
    slack: float
    method: str


def _reduce_linear_sum(op):
    if isinstance(op, ops.SumOp):
        t0, t1 = op.terms
        if isinstance(t0, (ops.LinearMapOp, ops.LinearRelationOp)) and \
                isinstance(t1, (ops.LinearMapOp, ops.LinearRelationOp)):
            return ops.sum_relation(t0, t1)
    return op


def enl_member(op: ops.OperatorDescriptor, x, xs, eps,
               count=10000, radius=10.0, seed=0) -> EnlargementVerdict:
    """Decide (x, xs) in gra A_eps for a maximally monotone operator.

    Uses the closed-form Fitzpatrick value when the zoo provides one,
    otherwise the sampled oracle with divergence detection (a diverging
    sup is treated as F = +inf, suspected).
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    reduced = _reduce_linear_sum(op)
    ops.require_maximal(reduced)
    n = ops.ambient_dim(reduced)
    x, xs = as_vector(x, n), as_vector(xs, n)
    value = fitz_closed_form(reduced, x, xs)
    method = "closed_form"
    if value is None:
        res = fitz_bruteforce(reduced, x, xs, count=count, radius=radius, seed=seed)
        value = math.inf if res.diverging else res.value
        method = "bruteforce"
    slack = -math.inf if math.isinf(value) else pairing(x, xs) + eps - value
    return EnlargementVerdict(member=slack >= -SLACK_TOL, fitz_value=value,
                              slack=slack, method=method)


# ---------------------------------------------------------------------------
# slices of monotone linear maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EllipsoidSlice:
    """A_eps(x) = {center + z : z in carrier, z' form z <= level}."""

    center: np.ndarray
    form: np.ndarray
    level: float
    carrier: Subspace

    def contains(self, zs, tol=SLACK_TOL) -> bool:
        zs = as_vector(zs, self.center.shape[0])
        d = zs - self.center
        if not self.carrier.contains_vector(d, tol):
            return False
        return float(d @ self.form @ d) <= self.level + tol

    def semiaxes(self) -> np.ndarray:
        """Semiaxis lengths of the ellipsoid inside its carrier."""
        if self.carrier.dim == 0:
            return np.zeros(0)
        b = self.carrier.basis
        w, _ = sym_eig(b.T @ self.form @ b)
        return np.sqrt(self.level / w)

    def ball_radius(self) -> float:
        """Radius when the slice is a ball of its carrier (max semiaxis;
        0 for the degenerate point slice)."""
        ax = self.semiaxes()
        return float(np.max(ax)) if ax.size else 0.0

    def boundary_points(self, num=32, seed=0) -> list:
        """Points with z' form z = level exactly, spread over directions."""
        d = self.carrier.dim
        if d == 0 or self.level <= 0.0:
            return [self.center.copy()]
        b = self.carrier.basis
        w, q = sym_eig(b.T @ self.form @ b)
        scale = q * np.sqrt(self.level / w)
        if d == 1:
            units = [np.array([1.0]), np.array([-1.0])]
        elif d == 2:
            angles = 2.0 * np.pi * np.arange(num) / num
            units = [np.array([np.cos(a), np.sin(a)]) for a in angles]
        else:
            rng = np.random.default_rng(seed)
            units = []
            while len(units) < num:
                u = rng.normal(size=d)
                nu = float(np.linalg.norm(u))
                if nu > 1e-12:
                    units.append(u / nu)
        return [self.center + b @ (scale @ u) for u in units]


def _symmetric_part_psd(a: ops.LinearMapOp) -> np.ndarray:
    ops.require_monotone(a)
    return 0.5 * (a.matrix + a.matrix.T)


def _range_subspace(sym) -> Subspace:
    w, q = sym_eig(sym)
    cols = q[:, w > rank_cutoff(w)]
    if cols.shape[1] == 0:
        return zero_space(sym.shape[0])
    return Subspace(sym.shape[0], cols)


def enl_slice_linear(a: ops.LinearMapOp, x, eps) -> EllipsoidSlice:
    """Ellipsoid description of A_eps(x) for a monotone linear map:
    center A x, quadratic form pinv(A_+), level 4 eps, carrier ran A_+."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    x = as_vector(x, a.dim)
    sym = _symmetric_part_psd(a)
    return EllipsoidSlice(center=a.matrix @ x, form=pseudoinverse(sym),
                          level=4.0 * float(eps), carrier=_range_subspace(sym))


@dataclass(frozen=True, eq=False)
class ParametricSlice:
    """Generator form of the same slice:
    {base + gen z : (1/2) <z, A z> <= bound} with gen = A + A'."""

    base: np.ndarray
    gen: np.ndarray
    sym: np.ndarray   # A_+, the quadratic's matrix
    bound: float

    def image_contains(self, zs, tol=SLACK_TOL) -> bool:
        zs = as_vector(zs, self.base.shape[0])
        w = zs - self.base
        z, *_ = np.linalg.lstsq(self.gen, w, rcond=None)
        if float(np.linalg.norm(self.gen @ z - w)) > tol * (1.0 + np.linalg.norm(w)):
            return False
        return 0.5 * float(z @ self.sym @ z) <= self.bound + tol

    def boundary_points(self, num=32, seed=0) -> list:
        """Images of parameters with (1/2) z' A z = bound exactly."""
        inner = EllipsoidSlice(center=np.zeros(self.base.shape[0]),
                               form=self.sym, level=2.0 * self.bound,
                               carrier=_range_subspace(self.sym))
        return [self.base + self.gen @ z for z in inner.boundary_points(num, seed)]


def enl_slice_param(a: ops.LinearMapOp, x, eps) -> ParametricSlice:
    """A_eps(x) = {Ax + (A + A') z : (1/2) <z, A z> <= eps / 2}; its image
    equals the ellipsoid of :func:`enl_slice_linear`."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    x = as_vector(x, a.dim)
    sym = _symmetric_part_psd(a)
    return ParametricSlice(base=a.matrix @ x, gen=2.0 * sym, sym=sym,
                           bound=0.5 * float(eps))


# ---------------------------------------------------------------------------
# skew relations
# ---------------------------------------------------------------------------

def skew_relation_enl(r: ops.LinearRelationOp, x, xs, eps) -> bool:
    """Enlargement of a maximal skew relation:
    member iff (x, xs) in gra(-A*) and <x, xs> >= -eps."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if not ops.is_skew(r):
        raise ops.NotSkewError("relation is not skew")
    ops.require_maximal(r)
    x, xs = as_vector(x, r.dim), as_vector(xs, r.dim)
    neg_adj = ops.neg_adjoint_graph(r.graph)
    stacked = np.concatenate([x, xs])
    if not neg_adj.contains_vector(stacked, tol=SLACK_TOL):
        return False
    return pairing(x, xs) >= -eps - SLACK_TOL


# ---------------------------------------------------------------------------
# norm subdifferentials and normal cones
# ---------------------------------------------------------------------------

def eps_subdiff_slice(n: ops.NormSubdiffOp, eps) -> ops.BallValue:
    """The enlargement slice (df)_eps(0): the dual unit ball for p = 1,
    the ball of radius p^(1/p) (q eps)^(1/q) for p > 1 (1/p + 1/q = 1)."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if n.p == 1.0:
        return ops.BallValue(np.zeros(n.dim), 1.0)
    q = n.p / (n.p - 1.0)
    radius = n.p ** (1.0 / n.p) * (q * float(eps)) ** (1.0 / q)
    return ops.BallValue(np.zeros(n.dim), radius)


def norm_subdiff_enl_member(n: ops.NormSubdiffOp, x, xs, eps) -> bool:
    """Graph of (d||.||)_eps: ||xs|| <= 1 and ||x|| <= <x, xs> + eps.
    For the sublinear f = ||.|| this is also the eps-subdifferential."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if n.p != 1.0:
        raise ops.UnsupportedOperatorError("closed form only for p = 1")
    x, xs = as_vector(x, n.dim), as_vector(xs, n.dim)
    if float(np.linalg.norm(xs)) > 1.0 + SLACK_TOL:
        return False
    return float(np.linalg.norm(x)) <= pairing(x, xs) + eps + SLACK_TOL


def normal_cone_enl_member(nc: ops.NormalConeOp, x, xs, eps) -> bool:
    """Graph of (N_C)_eps: x in C and support_C(xs) <= <x, xs> + eps."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    x, xs = as_vector(x, nc.dim), as_vector(xs, nc.dim)
    if not nc.set.contains(x, SLACK_TOL):
        return False
    return nc.set.support(xs) <= pairing(x, xs) + eps + SLACK_TOL


# ---------------------------------------------------------------------------
# sampled falsification oracle
# ---------------------------------------------------------------------------

def _golden_refine(h, lo, hi, iters=80):
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = h(c), h(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = h(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = h(d)
    t = 0.5 * (a + b)
    return t, h(t)


def eps_subdiff_oracle(n: ops.NormSubdiffOp, x, xs, eps,
                       count=2000, radius=16.0, seed=0) -> bool:
    """Necessary-condition check of enlargement membership by sampling.

    Searches graph pairs (y, y*) of the subdifferential for a violation of
    <x - y, xs - y*> >= -eps.  A violation found is conclusive
    non-membership; returning True means no violation at the finest grid
    (the minimum over each probed ray is sharpened by golden-section
    search, so boundary cases resolve to ~1e-9 in the ray parameter).
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    x, xs = as_vector(x, n.dim), as_vector(xs, n.dim)
    margin = SLACK_TOL

    def related(y, ys):
        return float((x - y) @ (xs - ys))

    worst = math.inf
    for y, ys in ops.sample_graph(n, count, radius, seed):
        worst = min(worst, related(y, ys))
        if worst < -eps - margin:
            return False

    # directed radial probes: rays through the query data and axes
    dirs = [x, xs, x + xs, x - xs]
    dirs += [np.eye(n.dim)[i] for i in range(n.dim)]
    units = []
    for d in dirs:
        nd = float(np.linalg.norm(d))
        if nd > 1e-12:
            units.extend([d / nd, -d / nd])
    for d in units:
        if n.p == 1.0:
            # the kink at 0 admits every unit vector as a subgradient
            worst = min(worst, related(np.zeros(n.dim), d))

        def along(t, d=d):
            t = max(t, 1e-300)
            return related(t * d, (t ** (n.p - 1.0)) * d)

        grid = np.linspace(1e-9, radius, 200)
        vals = [along(t) for t in grid]
        k = int(np.argmin(vals))
        lo = grid[max(k - 1, 0)]
        hi = grid[min(k + 1, len(grid) - 1)]
        _, refined = _golden_refine(along, lo, hi)
        worst = min(worst, refined, vals[k])
        if worst < -eps - margin:
            return False
    return True
