"""Fitzpatrick functions: closed forms, a sampled-supremum oracle, and the
partial inf-convolution of two evaluators.

Closed forms implemented here:

* linear monotone map ``A``:   F(x, x*) = (1/4) c' S c  with  c = x* + A'x,
  S the pseudoinverse of the symmetric part ``(A + A')/2``; the value is
  finite exactly when c lies in the range of the symmetric part.
* monotone linear relation with orthonormal graph basis stacked as (U; V):
  same formula with  c = V'x + U'x*  and the form  W = (U'V + V'U)/2.
* normal cone of a bounded closed convex set C:  indicator(x in C) +
  support_C(x*).
* subdifferential of the Euclidean norm (p = 1):  ||x|| + indicator of the
  dual unit ball at x*.

The function value lives in ]-inf, +inf]; plain floats carry it, with
``math.inf`` for the infinite value.

The sampled oracle ``fitz_bruteforce`` maximizes the defining supremum
over deterministic graph samples, optionally polished by a local
derivative-free search over the graph's natural parameters.  It always
returns a lower bound of the true value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.optimize

from . import operators as ops
from .linalg import (
    as_vector,
    check_symmetric,
    pseudoinverse,
    range_contains,
    rank_cutoff,
    sym_eig,
)

CARRIER_TOL = 1e-9


class SolverFailureError(RuntimeError):
    """Inner minimization stopped above tolerance at the iteration cap.

    Distinct from a genuinely infinite value: it signals numerical trouble
    or violated hypotheses, never a certified +inf.
    """


# ---------------------------------------------------------------------------
# quadratic forms and their conjugates
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class QuadForm:
    """The convex quadratic x -> (1/2) <x, S x> with S symmetric PSD."""

    s: np.ndarray

    def __post_init__(self):
        m = check_symmetric(self.s)
        w, _ = sym_eig(m)
        if w.size and float(w[-1]) < -rank_cutoff(w):
            from .linalg import NotPSDError
            raise NotPSDError(f"form has eigenvalue {w[-1]:.3e}")
        object.__setattr__(self, "s", m)

    def value(self, x) -> float:
        x = as_vector(x, self.s.shape[0])
        return 0.5 * float(x @ self.s @ x)


def qconj(q: QuadForm, y, tol=CARRIER_TOL) -> float:
    """Fenchel conjugate of the quadratic form at y.

    Finite exactly on the range of S, where it equals (1/2) y' S^+ y.
    """
    y = as_vector(y, q.s.shape[0])
    if not range_contains(q.s, y, tol):
        return math.inf
    return 0.5 * float(y @ pseudoinverse(q.s) @ y)


# ---------------------------------------------------------------------------
# carrier quadratics: the closed form for linear maps and relations
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CarrierQuadratic:
    """F(x, u) = (1/4) c' P c on the affine carrier {c in ran W},
    with c = V'x + U'u.  P is the pseudoinverse of W and ``null`` spans
    ker W (the carrier test is ||null' c|| ~ 0)."""

    u: np.ndarray       # (n, k)
    v: np.ndarray       # (n, k)
    w: np.ndarray       # (k, k) symmetric PSD
    p: np.ndarray       # pinv(w)
    null: np.ndarray    # (k, m) orthonormal basis of ker w

    @classmethod
    def build(cls, u, v) -> "CarrierQuadratic":
        w = 0.5 * (u.T @ v + v.T @ u)
        w = 0.5 * (w + w.T)
        p = pseudoinverse(w)   # raises NotPSD for non-monotone graphs
        lam, q = sym_eig(w)
        null = q[:, np.abs(lam) <= rank_cutoff(lam)]
        return cls(u=u, v=v, w=w, p=p, null=null)

    def c_of(self, x, u) -> np.ndarray:
        return self.v.T @ x + self.u.T @ u

    def on_carrier(self, c, tol=CARRIER_TOL) -> bool:
        if self.null.shape[1] == 0:
            return True
        resid = float(np.linalg.norm(self.null.T @ c))
        return resid <= tol * (1.0 + float(np.linalg.norm(c)))

    def evaluate(self, x, u, tol=CARRIER_TOL) -> float:
        c = self.c_of(x, u)
        if not self.on_carrier(c, tol):
            return math.inf
        return 0.25 * float(c @ self.p @ c)


def _carrier_from_map(op: ops.LinearMapOp) -> CarrierQuadratic:
    ops.require_monotone(op)
    n = op.dim
    return CarrierQuadratic.build(np.eye(n), op.matrix)


def _carrier_from_relation(op: ops.LinearRelationOp) -> CarrierQuadratic:
    ops.require_monotone(op)
    return CarrierQuadratic.build(op.u_block, op.v_block)


# ---------------------------------------------------------------------------
# evaluators
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FitzEvaluator:
    """Closed-form Fitzpatrick function of one zoo operator.

    ``kind`` is one of ``quadratic`` (linear maps/relations and linear
    sums), ``indicator_support`` (normal cones) and ``norm_graph`` (the
    p = 1 norm subdifferential)."""

    operator: ops.OperatorDescriptor
    kind: str
    data: object

    @property
    def dim(self) -> int:
        return ops.ambient_dim(self.operator)

    def evaluate(self, x, xs, tol=CARRIER_TOL) -> float:
        x = as_vector(x, self.dim)
        xs = as_vector(xs, self.dim)
        if self.kind == "quadratic":
            return self.data.evaluate(x, xs, tol)
        if self.kind == "indicator_support":
            c = self.data
            if not c.contains(x, tol):
                return math.inf
            return c.support(xs)
        if self.kind == "norm_graph":
            if float(np.linalg.norm(xs)) > 1.0 + tol:
                return math.inf
            return float(np.linalg.norm(x))
        raise AssertionError(self.kind)


def fitz_evaluator(op: ops.OperatorDescriptor) -> FitzEvaluator:
    """Build the closed-form evaluator; raises UnsupportedOperatorError when
    the zoo offers none (p > 1 subdifferentials, non-linear sums)."""
    if isinstance(op, ops.LinearMapOp):
        return FitzEvaluator(op, "quadratic", _carrier_from_map(op))
    if isinstance(op, ops.LinearRelationOp):
        return FitzEvaluator(op, "quadratic", _carrier_from_relation(op))
    if isinstance(op, ops.NormalConeOp):
        return FitzEvaluator(op, "indicator_support", op.set)
    if isinstance(op, ops.NormSubdiffOp):
        if op.p == 1.0:
            return FitzEvaluator(op, "norm_graph", None)
        raise ops.UnsupportedOperatorError(
            "no closed form for p > 1 norm subdifferentials; use fitz_bruteforce")
    if isinstance(op, ops.SumOp):
        t0, t1 = op.terms
        if isinstance(t0, (ops.LinearMapOp, ops.LinearRelationOp)) and \
                isinstance(t1, (ops.LinearMapOp, ops.LinearRelationOp)):
            rel = ops.sum_relation(t0, t1)
            return FitzEvaluator(op, "quadratic", _carrier_from_relation(rel))
        raise ops.UnsupportedOperatorError(
            "closed form for sums only when both terms are linear")
    raise ops.UnsupportedOperatorError(f"no evaluator for {type(op).__name__}")


def fitz_linear_map(op: ops.LinearMapOp, x, xs) -> float:
    """F_A(x, x*) for a monotone linear map (see module docstring)."""
    return _carrier_from_map(op).evaluate(
        as_vector(x, op.dim), as_vector(xs, op.dim))


def fitz_linear_relation(op: ops.LinearRelationOp, x, xs) -> float:
    return _carrier_from_relation(op).evaluate(
        as_vector(x, op.dim), as_vector(xs, op.dim))


def fitz_normal_cone(op: ops.NormalConeOp, x, xs, tol=CARRIER_TOL) -> float:
    return fitz_evaluator(op).evaluate(x, xs, tol)


def fitz_norm_subdiff(op: ops.NormSubdiffOp, x, xs, count=10000, radius=10.0,
                      seed=0) -> float:
    """F of the norm subdifferential.

    Exact for p = 1.  For p > 1 the value comes from the sampled oracle
    (advisory accuracy ~1e-3 near interior maximizers) and is reported as
    +inf when the divergence detector fires.
    """
    if op.p == 1.0:
        return fitz_evaluator(op).evaluate(x, xs)
    res = fitz_bruteforce(op, x, xs, count=count, radius=radius, seed=seed)
    return math.inf if res.diverging else res.value


def fitz_closed_form(op, x, xs) -> Optional[float]:
    """Closed-form F when the zoo provides one, else None."""
    try:
        return fitz_evaluator(op).evaluate(x, xs)
    except ops.UnsupportedOperatorError:
        return None


def pairing(x, xs) -> float:
    return float(np.dot(np.asarray(x, float), np.asarray(xs, float)))


# ---------------------------------------------------------------------------
# sampled supremum oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BruteForceResult:
    value: float
    best_pair: tuple
    diverging: bool
    trend: tuple  # ((radius, sampled sup), ...) used by the detector


def _objective(x, xs):
    def f(a, astar):
        return float(x @ astar + a @ xs - a @ astar)
    return f


def _sampled_sup(op, obj, count, radius, seed):
    best, best_pair = -math.inf, None
    for a, astar in ops.sample_graph(op, count, radius, seed):
        v = obj(a, astar)
        if v > best:
            best, best_pair = v, (a, astar)
    return best, best_pair


def _chart_polish(op, obj, start_pair, maxiter=400):
    """Local derivative-free refinement over the graph's natural parameters.

    Every candidate evaluated is a genuine graph point, so the refined
    value remains a lower bound of the true supremum.
    """
    charts = []
    a0, astar0 = start_pair
    if isinstance(op, ops.LinearMapOp):
        charts.append((a0, lambda y: (y, op.matrix @ y)))
    elif isinstance(op, ops.LinearRelationOp):
        u, v = op.u_block, op.v_block
        t0 = op.graph.coordinates(np.concatenate([a0, astar0]))
        charts.append((t0, lambda t: (u @ t, v @ t)))
    elif isinstance(op, ops.NormSubdiffOp):
        if float(np.linalg.norm(a0)) > 0:
            charts.append((a0, lambda y: (y, op.gradient(y))
                           if np.linalg.norm(y) > 0 else (y, np.zeros_like(y))))
        if op.p == 1.0:
            def ball_chart(u):
                nu = float(np.linalg.norm(u))
                return np.zeros_like(u), (u if nu <= 1.0 else u / nu)
            charts.append((astar0 if np.linalg.norm(a0) == 0 else np.zeros(op.dim),
                           ball_chart))
    else:
        return -math.inf, None
    best, best_pair = -math.inf, None
    for t0, chart in charts:
        def neg(t):
            a, astar = chart(np.asarray(t, float))
            return -obj(a, astar)
        res = scipy.optimize.minimize(
            neg, t0, method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": maxiter,
                     "maxfev": 4 * maxiter})
        a, astar = chart(np.asarray(res.x, float))
        v = obj(a, astar)
        if v > best:
            best, best_pair = v, (a, astar)
    return best, best_pair


def _sum_cone_polish(op, x, xs):
    """Exact refinement for sums (linear map) + (normal cone).

    For a query with x in C, the supremum over the sum's graph reduces to
    maximizing the concave quadratic <A'x + xs, w> - <w, A_+ w> over
    w in C (taking the zero normal), solved by projected gradient ascent.
    Each iterate is a genuine graph point, keeping the lower-bound
    guarantee.
    """
    t0, t1 = op.terms
    if isinstance(t1, ops.NormalConeOp) and isinstance(t0, ops.LinearMapOp):
        a_op, cone = t0, t1
    elif isinstance(t0, ops.NormalConeOp) and isinstance(t1, ops.LinearMapOp):
        a_op, cone = t1, t0
    else:
        return -math.inf, None
    c = cone.set
    if not c.contains(x, CARRIER_TOL):
        return -math.inf, None
    mat = a_op.matrix
    sym = mat + mat.T
    lin = mat.T @ x + xs
    lip = max(float(np.linalg.norm(sym, 2)), 1e-12)
    w = c.project(x)
    for _ in range(50000):
        grad = lin - sym @ w
        new = c.project(w + grad / lip)
        if float(np.linalg.norm(new - w)) <= 1e-13 * (1.0 + np.linalg.norm(w)):
            w = new
            break
        w = new
    pair = (w, mat @ w)
    return _objective(x, xs)(*pair), pair


# Growth thresholds for the divergence heuristic: the sampled sup of an
# indicator-type F grows linearly in the sampling radius (factor ~2 per
# doubling), while a saturating sup flattens out once the maximizer is
# covered.
_DIV_FACTOR_TOTAL = 10.0
_DIV_FACTOR_STEP = 1.5
_DIV_FLOOR = 1e-6


def _diverging(trend) -> bool:
    s = [max(v, _DIV_FLOOR) for _, v in trend]
    if len(s) < 3:
        return False
    if s[2] > _DIV_FACTOR_TOTAL * s[0]:
        return True
    return s[1] >= _DIV_FACTOR_STEP * s[0] and s[2] >= _DIV_FACTOR_STEP * s[1]


def fitz_bruteforce(op, x, xs, count=10000, radius=10.0, seed=0, polish=True,
                    divergence_check=True) -> BruteForceResult:
    """Sampled supremum defining the Fitzpatrick function.

    Deterministic for a fixed seed; nested in ``count`` (prefix-stable
    sampling), so the sampled sup is nondecreasing in ``count``.  When the
    query pair itself lies on the graph it joins the candidate set, which
    pins the value to the pairing there.  The result is always a lower
    bound of the true F; ``diverging`` flags the indicator-type +inf
    suspicion from sups recomputed at doubled radii.
    """
    x = as_vector(x, ops.ambient_dim(op))
    xs = as_vector(xs, ops.ambient_dim(op))
    obj = _objective(x, xs)
    best, best_pair = _sampled_sup(op, obj, count, radius, seed)
    if ops.graph_member(op, x, xs, tol=CARRIER_TOL):
        v = obj(x, xs)
        if v > best:
            best, best_pair = v, (x, xs)
    if polish:
        if isinstance(op, ops.SumOp):
            pv, pp = _sum_cone_polish(op, x, xs)
        else:
            pv, pp = _chart_polish(op, obj, best_pair)
        if pp is not None and pv > best:
            best, best_pair = pv, pp
    trend = [(radius, best)]
    diverging = False
    if divergence_check:
        sups = [_sampled_sup(op, obj, count, radius * (2 ** k), seed)[0]
                for k in (0, 1, 2)]
        trend = [(radius * (2 ** k), sups[k]) for k in (0, 1, 2)]
        diverging = _diverging(trend)
    return BruteForceResult(value=best, best_pair=best_pair,
                            diverging=diverging, trend=tuple(trend))


# ---------------------------------------------------------------------------
# partial inf-convolution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-8
    max_iter: int = 100000
    dr_step: float = 1.0


@dataclass(frozen=True, eq=False)
class InfConvResult:
    value: float
    witness: Optional[np.ndarray]
    inner_residual: float


class _QuadPiece:
    """phi(v) = (1/4) c' P c, c = a + sign * U'v, constrained to ran W."""

    def __init__(self, cq: CarrierQuadratic, a, sign):
        self.cq = cq
        self.a = a
        self.sign = float(sign)
        nul = cq.null
        if nul.shape[1]:
            self.e = self.sign * (nul.T @ cq.u.T)
            self.d = -(nul.T @ a)
        else:
            self.e = np.zeros((0, cq.u.shape[0]))
            self.d = np.zeros(0)
        self.hess = 0.5 * cq.u @ cq.p @ cq.u.T
        self.lin = 0.5 * self.sign * (cq.u @ cq.p @ a)

    def c_of(self, v):
        return self.a + self.sign * (self.cq.u.T @ v)

    def feasible_point(self):
        """Some v on the carrier, or None when the carrier is empty."""
        if self.e.shape[0] == 0:
            return np.zeros(self.cq.u.shape[0])
        v, *_ = np.linalg.lstsq(self.e, self.d, rcond=None)
        if float(np.linalg.norm(self.e @ v - self.d)) > \
                CARRIER_TOL * (1.0 + float(np.linalg.norm(self.d))):
            return None
        return v

    def grad(self, v):
        c = self.c_of(v)
        return 0.5 * self.sign * (self.cq.u @ self.cq.p @ c)

    def prox(self, w, t):
        """argmin phi(v) + ||v - w||^2 / (2 t) subject to the carrier."""
        n = w.shape[0]
        m = self.e.shape[0]
        kkt = np.zeros((n + m, n + m))
        kkt[:n, :n] = self.hess + np.eye(n) / t
        kkt[:n, n:] = self.e.T
        kkt[n:, :n] = self.e
        rhs = np.concatenate([w / t - self.lin, self.d])
        sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
        return sol[:n]


class _ProxPiece:
    """Nonsmooth piece with an exact prox: support function or ball
    indicator, optionally precomposed with v -> y - v."""

    def __init__(self, prox_plain, flip_y=None):
        self.prox_plain = prox_plain
        self.flip_y = flip_y

    def prox(self, w, t):
        if self.flip_y is None:
            return self.prox_plain(w, t)
        return self.flip_y - self.prox_plain(self.flip_y - w, t)


def _support_prox(c):
    def prox(w, t):
        # Moreau: prox of the support function via projection onto the set
        return w - t * c.project(w / t)
    return prox


def _ball_indicator_prox():
    def prox(w, t):
        nw = float(np.linalg.norm(w))
        return w if nw <= 1.0 else w / nw
    return prox


def _second_slot_piece(ev: FitzEvaluator, x, y, first_slot):
    """Decompose F(x, .) as additive-constant + v-piece.

    ``first_slot`` evaluators receive u = y - v, the second slot receives
    v itself.  Returns (constant, piece) where piece is a _QuadPiece or a
    _ProxPiece; the constant is +inf when x is outside the indicator part.
    """
    if ev.kind == "quadratic":
        cq = ev.data
        b = cq.v.T @ x
        if first_slot:
            return 0.0, _QuadPiece(cq, b + cq.u.T @ y, -1.0)
        return 0.0, _QuadPiece(cq, b, +1.0)
    if ev.kind == "indicator_support":
        c = ev.data
        if not c.contains(x, CARRIER_TOL):
            return math.inf, None
        return 0.0, _ProxPiece(_support_prox(c), flip_y=y if first_slot else None)
    if ev.kind == "norm_graph":
        const = float(np.linalg.norm(x))
        return const, _ProxPiece(_ball_indicator_prox(),
                                 flip_y=y if first_slot else None)
    raise AssertionError(ev.kind)


def _exact_quad_quad(p1: _QuadPiece, p2: _QuadPiece, n):
    e = np.vstack([p1.e, p2.e])
    d = np.concatenate([p1.d, p2.d])
    if e.shape[0]:
        v0, *_ = np.linalg.lstsq(e, d, rcond=None)
        if float(np.linalg.norm(e @ v0 - d)) > CARRIER_TOL * (1.0 + np.linalg.norm(d)):
            return None  # incompatible carriers: the inf-convolution is +inf
        _, s, vt = np.linalg.svd(e)
        rank = int(np.sum(s > (s[0] if s.size else 0.0) * 1e-12))
        z = vt[rank:].T
    else:
        v0 = np.zeros(n)
        z = np.eye(n)
    hess = p1.hess + p2.hess
    if z.shape[1] == 0:
        return v0, 0.0
    hr = z.T @ hess @ z
    gr = z.T @ (p1.grad(v0) + p2.grad(v0))
    wstar = -pseudoinverse(0.5 * (hr + hr.T)) @ gr
    vstar = v0 + z @ wstar
    resid = float(np.linalg.norm(z.T @ (p1.grad(vstar) + p2.grad(vstar))))
    return vstar, resid


def _douglas_rachford(pf, pg, y, cfg: SolverConfig):
    """Douglas-Rachford on f + g with exact proxes; returns (v, residual)."""
    z = 0.5 * y
    t = cfg.dr_step
    v_f = z
    resid = math.inf
    for _ in range(cfg.max_iter):
        v_g = pg.prox(z, t)
        v_f = pf.prox(2.0 * v_g - z, t)
        z = z + v_f - v_g
        resid = float(np.linalg.norm(v_f - v_g))
        if resid <= cfg.tol:
            return v_f, resid
    raise SolverFailureError(
        f"inner minimization residual {resid:.3e} above {cfg.tol:.1e} "
        f"after {cfg.max_iter} iterations")


def partial_inf_conv(f1: FitzEvaluator, f2: FitzEvaluator, x, y,
                     cfg: SolverConfig = SolverConfig()) -> InfConvResult:
    """(F1 box_2 F2)(x, y) = inf over v of F1(x, y - v) + F2(x, v).

    Two quadratic pieces meet in an exact linear solve on the intersection
    of their carriers; any mix involving support/indicator pieces runs
    Douglas-Rachford with exact proxes (deterministic start at v = y/2).
    A +inf value (incompatible carriers, x outside an indicator) is
    reported with no witness; failure to converge raises
    :class:`SolverFailureError` instead of being passed off as infinite.
    """
    if f1.dim != f2.dim:
        raise ops.DimensionMismatchError("evaluators live in different spaces")
    x = as_vector(x, f1.dim)
    y = as_vector(y, f1.dim)
    c1, p1 = _second_slot_piece(f1, x, y, first_slot=True)
    c2, p2 = _second_slot_piece(f2, x, y, first_slot=False)
    if math.isinf(c1) or math.isinf(c2):
        return InfConvResult(math.inf, None, 0.0)
    if isinstance(p1, _QuadPiece) and isinstance(p2, _QuadPiece):
        out = _exact_quad_quad(p1, p2, f1.dim)
        if out is None:
            return InfConvResult(math.inf, None, 0.0)
        vstar, resid = out
    else:
        # run DR with the quadratic piece (exact KKT prox) as f when present
        if isinstance(p2, _QuadPiece):
            pf, pg = p2, p1
        else:
            pf, pg = p1, p2
        if isinstance(pf, _QuadPiece) and pf.feasible_point() is None:
            return InfConvResult(math.inf, None, 0.0)
        vstar, resid = _douglas_rachford(pf, pg, y, cfg)
    value = f1.evaluate(x, y - vstar, tol=1e-7) + f2.evaluate(x, vstar, tol=1e-7)
    return InfConvResult(float(value), vstar, resid)
