"""Hyperbolic geometry in the hyperboloid model.

Points live on the upper sheet of <x,x> = -1 in R^{p+1} with the bilinear
form J = diag(-1, 1, ..., 1).  Totally geodesic subspaces are stored as
J-orthonormal column bases (first column timelike, on the upper sheet), and
isometries as (p+1)x(p+1) matrices with M^T J M = J.

The trigonometry of the regular right-angled n-gon is collected in a
TrigTable: edge length a, short diagonal b, inradius r, circumradius rho,
all strictly increasing in n and tied together by

    cosh a = 1 + 2 cos(2 pi / n)        cosh b = cosh^2 a
    cosh r = 1 / (sqrt 2 sin(pi / n))   cosh rho = cosh r cosh(a/2)
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, VerificationError

__all__ = [
    "TOL_ORTH",
    "TOL_CLASSIFY",
    "RENORM_EVERY",
    "minkowski_form",
    "mdot",
    "normalize_point",
    "distance",
    "unit_tangent",
    "geodesic_point",
    "midpoint",
    "TrigTable",
    "trig_table",
    "BisectorMargin",
    "disjoint_bisectors_test",
    "lambert_check",
    "three_orthogonal_equivalent_length",
    "Hyperplane",
    "bisector",
    "reflection_in_hyperplane",
    "PairClassification",
    "classify_hyperplane_pair",
    "Subspace",
    "span_of_points",
    "slice_subspace",
    "hyperplane_subspace",
    "closest_points",
    "OrthogonalityReport",
    "subspaces_orthogonal",
    "tangent_frame_at",
    "elliptic_at",
    "translation_along",
    "parallel_transport_normal",
    "reorthonormalize",
    "mat_chain_product",
    "is_isometry_residual",
    "PolygonEmbedding",
    "regular_polygon",
]

TOL_ORTH = 1e-9
TOL_CLASSIFY = 1e-7
RENORM_EVERY = 16


def minkowski_form(p: int) -> np.ndarray:
    J = np.eye(p + 1)
    J[0, 0] = -1.0
    return J


def mdot(u: np.ndarray, v: np.ndarray) -> float:
    return float(-u[0] * v[0] + u[1:] @ v[1:])


def normalize_point(x: np.ndarray) -> np.ndarray:
    """Rescale a timelike vector onto the upper sheet."""
    q = mdot(x, x)
    if q >= 0:
        raise InvalidInputError("vector is not timelike")
    x = np.asarray(x, dtype=float) / math.sqrt(-q)
    if x[0] < 0:
        x = -x
    return x


def distance(a: np.ndarray, b: np.ndarray) -> float:
    c = -mdot(a, b)
    return math.acosh(max(1.0, c))


def unit_tangent(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Unit tangent at a pointing along the geodesic toward b."""
    c = -mdot(a, b)
    s = math.sqrt(max(c * c - 1.0, 0.0))
    if s < 1e-14:
        raise InvalidInputError("points coincide; tangent undefined")
    return (b - c * a) / s


def geodesic_point(a: np.ndarray, u: np.ndarray, t: float) -> np.ndarray:
    return math.cosh(t) * a + math.sinh(t) * u


def midpoint(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return normalize_point(a + b)


# ---------------------------------------------------------------------------
# Right-angled polygon trigonometry


@dataclass(frozen=True)
class TrigTable:
    """Edge/diagonal/radius data of the regular right-angled n-gon."""

    n: int
    edge_length: float
    short_diagonal: float
    inradius: float
    circumradius: float
    cosh_edge: float
    cosh_half_edge: float
    cosh_short_diagonal: float
    cosh_inradius: float
    cosh_circumradius: float

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "edge": self.edge_length,
            "shortDiagonal": self.short_diagonal,
            "inradius": self.inradius,
            "circumradius": self.circumradius,
        }


def trig_table(n: int) -> TrigTable:
    if n < 5:
        raise InvalidInputError(
            f"a regular right-angled polygon needs n >= 5 sides, got {n}"
        )
    cosh_a = 1.0 + 2.0 * math.cos(2.0 * math.pi / n)
    cosh_half_a = math.sqrt(2.0) * math.cos(math.pi / n)
    cosh_b = cosh_a * cosh_a
    cosh_r = 1.0 / (math.sqrt(2.0) * math.sin(math.pi / n))
    cosh_rho = cosh_r * cosh_half_a
    return TrigTable(
        n=n,
        edge_length=math.acosh(cosh_a),
        short_diagonal=math.acosh(cosh_b),
        inradius=math.acosh(cosh_r),
        circumradius=math.acosh(cosh_rho),
        cosh_edge=cosh_a,
        cosh_half_edge=cosh_half_a,
        cosh_short_diagonal=cosh_b,
        cosh_inradius=cosh_r,
        cosh_circumradius=cosh_rho,
    )


@dataclass(frozen=True)
class BisectorMargin:
    """Outcome of a closed-form bisector disjointness test.

    ``margin`` is sinh(l1/2) sinh(l2/2) - 1 for two segments meeting
    orthogonally at a shared endpoint; the perpendicular bisectors are
    disjoint, asymptotic, or crossing as the margin is positive, zero, or
    negative.  When disjoint, they are arccosh(1 + margin) apart.
    """

    l1: float
    l2: float
    margin: float
    kind: str
    distance: float | None


def disjoint_bisectors_test(l1: float, l2: float, tol: float = 1e-9) -> BisectorMargin:
    if l1 <= 0 or l2 <= 0:
        raise InvalidInputError("segment lengths must be positive")
    value = math.sinh(l1 / 2.0) * math.sinh(l2 / 2.0)
    margin = value - 1.0
    if margin > tol:
        kind, dist = "disjoint", math.acosh(value)
    elif margin < -tol:
        kind, dist = "intersecting", None
    else:
        kind, dist = "asymptotic", 0.0
    return BisectorMargin(l1=l1, l2=l2, margin=margin, kind=kind, distance=dist)


def lambert_check(x: float, y: float) -> bool:
    """Whether a quadrilateral with three right angles and legs x, y closes
    with an acute fourth angle, i.e. sinh(x) sinh(y) < 1."""
    if x < 0 or y < 0:
        raise InvalidInputError("leg lengths must be nonnegative")
    return math.sinh(x) * math.sinh(y) < 1.0


def three_orthogonal_equivalent_length(x: float, y: float) -> float:
    """Collapse a three-segment orthogonal chain to an equivalent segment.

    For segments of lengths x, y, x chained at right angles (each pair of
    consecutive directions orthogonal, outer directions mutually orthogonal
    too), the perpendicular bisectors of the outer segments behave like
    those of segments z and x meeting orthogonally at a point, where

        sinh(z/2) = sinh(x/2) cosh(y).

    Degenerates to z = x when y = 0.
    """
    if x <= 0 or y < 0:
        raise InvalidInputError("need x > 0 and y >= 0")
    return 2.0 * math.asinh(math.sinh(x / 2.0) * math.cosh(y))


# ---------------------------------------------------------------------------
# Hyperplanes


@dataclass(frozen=True)
class Hyperplane:
    """Totally geodesic hyperplane {x : <x, normal> = 0}, unit spacelike normal."""

    normal: np.ndarray

    @property
    def ambient_dim(self) -> int:
        return len(self.normal) - 1


def bisector(a: np.ndarray, b: np.ndarray) -> Hyperplane:
    """Perpendicular bisector of the segment [a, b]."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    q = mdot(d, d)
    if q <= 1e-28:
        raise InvalidInputError("bisector of a degenerate segment")
    return Hyperplane(normal=d / math.sqrt(q))


def reflection_in_hyperplane(h: Hyperplane | np.ndarray) -> np.ndarray:
    u = h.normal if isinstance(h, Hyperplane) else np.asarray(h, dtype=float)
    q = mdot(u, u)
    if abs(q - 1.0) > 1e-8:
        raise InvalidInputError("reflection normal must be unit spacelike")
    p1 = len(u)
    J = minkowski_form(p1 - 1)
    return np.eye(p1) - 2.0 * np.outer(u, J @ u) / q


@dataclass(frozen=True)
class PairClassification:
    kind: str  # intersecting | asymptotic | disjoint
    inner: float
    distance: float | None
    coincident: bool


def classify_hyperplane_pair(
    h1: Hyperplane, h2: Hyperplane, tol: float = TOL_CLASSIFY
) -> PairClassification:
    """Classify two hyperplanes by the Minkowski product of their normals.

    |<u, v>| below 1 means crossing, within ``tol`` of 1 asymptotic, above 1
    disjoint at distance arccosh |<u, v>|.  A pair of identical hyperplanes
    is flagged coincident (and reported as intersecting).
    """
    u, v = h1.normal, h2.normal
    inner = mdot(u, v)
    c = abs(inner)
    coincident = min(np.abs(u - v).max(), np.abs(u + v).max()) < 1e-9
    if coincident:
        return PairClassification("intersecting", inner, None, True)
    if c > 1.0 + tol:
        return PairClassification("disjoint", inner, math.acosh(c), False)
    if c >= 1.0 - tol:
        return PairClassification("asymptotic", inner, 0.0, False)
    return PairClassification("intersecting", inner, None, False)


# ---------------------------------------------------------------------------
# Totally geodesic subspaces


@dataclass
class Subspace:
    """Totally geodesic subspace spanned by a J-orthonormal basis.

    Column 0 is timelike on the upper sheet; the rest are spacelike.
    ``dim`` is the hyperbolic dimension (columns minus one).
    """

    basis: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[1] - 1

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0] - 1

    def base_point(self) -> np.ndarray:
        return self.basis[:, 0]

    def signs(self) -> np.ndarray:
        s = np.ones(self.basis.shape[1])
        s[0] = -1.0
        return s

    def coefficients(self, y: np.ndarray) -> np.ndarray:
        J = minkowski_form(self.ambient_dim)
        return self.signs() * (self.basis.T @ (J @ y))

    def linear_project(self, y: np.ndarray) -> np.ndarray:
        return self.basis @ self.coefficients(y)

    def project(self, y: np.ndarray) -> np.ndarray:
        """Nearest point of the subspace to the hyperbolic point y."""
        yl = self.linear_project(y)
        q = mdot(yl, yl)
        if q >= -1e-14:
            raise InvalidInputError(
                "projection degenerates; point is orthogonal to the subspace"
            )
        return normalize_point(yl)

    def contains_point(self, y: np.ndarray, tol: float = 1e-8) -> bool:
        return bool(np.abs(self.linear_project(y) - y).max() <= tol)

    def transformed(self, m: np.ndarray) -> "Subspace":
        b = m @ self.basis
        return Subspace(basis=_j_orthonormalize_basis(b))


def _j_orthonormalize_basis(cols: np.ndarray) -> np.ndarray:
    """Gram-Schmidt a (timelike, spacelike...) column set against J."""
    out = []
    norms = []
    for k in range(cols.shape[1]):
        v = cols[:, k].astype(float).copy()
        for w, nw in zip(out, norms):
            v -= (mdot(v, w) / nw) * w
        q = mdot(v, v)
        if k == 0:
            if q >= -1e-14:
                raise InvalidInputError("first basis vector must be timelike")
            v /= math.sqrt(-q)
            if v[0] < 0:
                v = -v
            out.append(v)
            norms.append(-1.0)
        else:
            if q <= 1e-14:
                raise InvalidInputError("basis degenerates under Gram-Schmidt")
            v /= math.sqrt(q)
            out.append(v)
            norms.append(1.0)
    return np.column_stack(out)


def span_of_points(points, tol: float = 1e-10) -> Subspace:
    """Totally geodesic hull of a point set.

    Dependent points collapse; a lightlike direction in the linear span (or
    the absence of a timelike one) is an error since no totally geodesic
    subspace contains it.
    """
    P = np.column_stack([np.asarray(q, dtype=float) for q in points])
    J = minkowski_form(P.shape[0] - 1)
    G = P.T @ J @ P
    evals, evecs = np.linalg.eigh(G)
    scale = max(1.0, float(np.abs(evals).max()))
    timelike = []
    spacelike = []
    for lam, w in zip(evals, evecs.T):
        v = P @ w
        if abs(lam) <= tol * scale:
            if np.abs(v).max() > 1e-6:
                raise InvalidInputError("span degenerates (lightlike direction)")
            continue
        if lam < 0:
            timelike.append(v / math.sqrt(-lam))
        else:
            spacelike.append(v / math.sqrt(lam))
    if len(timelike) != 1:
        raise InvalidInputError(
            f"span needs exactly one timelike direction, found {len(timelike)}"
        )
    t = timelike[0]
    if t[0] < 0:
        t = -t
    return Subspace(basis=np.column_stack([t] + spacelike))


def slice_subspace(ambient_dim: int) -> Subspace:
    """The standard plane spanned by the first three coordinates."""
    if ambient_dim < 2:
        raise InvalidInputError("ambient dimension must be at least 2")
    basis = np.zeros((ambient_dim + 1, 3))
    basis[0, 0] = basis[1, 1] = basis[2, 2] = 1.0
    return Subspace(basis=basis)


def hyperplane_subspace(h: Hyperplane) -> Subspace:
    """The hyperplane of ``h`` as a Subspace (codimension-one basis)."""
    u = h.normal
    p1 = len(u)
    J = minkowski_form(p1 - 1)
    M = np.eye(p1) - np.outer(u, J @ u)  # J-orthogonal projection off u
    G = M.T @ J @ M
    evals, evecs = np.linalg.eigh(G)
    timelike = []
    spacelike = []
    for lam, w in zip(evals, evecs.T):
        if abs(lam) <= 1e-10 * max(1.0, float(np.abs(evals).max())):
            continue
        v = M @ w
        (timelike if lam < 0 else spacelike).append(v / math.sqrt(abs(lam)))
    if len(timelike) != 1:
        raise InvalidInputError("hyperplane normal must be spacelike")
    t = timelike[0]
    if t[0] < 0:
        t = -t
    return Subspace(basis=_j_orthonormalize_basis(np.column_stack([t] + spacelike)))


def closest_points(h1: Subspace, h2: Subspace, polish: int = 60):
    """Feet of the shortest geodesic between two disjoint subspaces.

    Solved through the stationarity eigenproblem on the J-Gram cross matrix
    and polished by alternating nearest-point projection.  Returns (x, y,
    distance); for intersecting subspaces the distance comes out ~0.
    """
    J = minkowski_form(h1.ambient_dim)
    C = h1.basis.T @ J @ h2.basis
    K = (h1.signs()[:, None] * C) @ (h2.signs()[:, None] * C.T)
    evals, evecs = np.linalg.eig(K)
    best = None
    for lam, w in zip(evals, evecs.T):
        if abs(lam.imag) > 1e-9:
            continue
        a = np.real(w)
        if float(h1.signs() @ (a * a)) >= 0:
            continue  # need a timelike coefficient vector
        if best is None or lam.real > best[0]:
            best = (lam.real, a)
    if best is None:
        # No timelike stationary direction; fall back to base points.
        x = h1.base_point().copy()
    else:
        x = normalize_point(h1.basis @ best[1])
    y = h2.project(x)
    for _ in range(polish):
        x2 = h1.project(y)
        y2 = h2.project(x2)
        if abs(distance(x2, y2) - distance(x, y)) < 1e-15:
            x, y = x2, y2
            break
        x, y = x2, y2
    return x, y, distance(x, y)


def _nullspace(A: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
    u, s, vt = np.linalg.svd(A)
    if s.size == 0:
        return vt.T
    cutoff = max(rtol * s[0], 1e-12)
    rank = int((s > cutoff).sum())
    return vt[rank:].T


def _tangent_basis(h: Subspace, x: np.ndarray) -> list[np.ndarray]:
    """J-orthonormal spacelike basis of the tangent of h at a point x on h."""
    vecs = []
    for k in range(h.basis.shape[1]):
        v = h.basis[:, k] + mdot(h.basis[:, k], x) * x
        for w in vecs:
            v = v - mdot(v, w) * w
        q = mdot(v, v)
        if q > 1e-16:
            vecs.append(v / math.sqrt(q))
    return vecs


@dataclass(frozen=True)
class OrthogonalityReport:
    orthogonal: bool
    case: str  # intersecting | translated | asymptotic | containment | degenerate
    residual: float
    distance: float | None
    message: str = ""


def _orthogonal_at_point(
    h1: Subspace, h2: Subspace, x: np.ndarray, tol: float, dist: float | None, case: str
) -> OrthogonalityReport:
    t1 = _tangent_basis(h1, x)
    t2 = _tangent_basis(h2, x)
    shared = []
    if t1 and t2:
        both = _nullspace(np.column_stack([np.column_stack(t1), -np.column_stack(t2)]))
        for w in both.T:
            v = np.column_stack(t1) @ w[: len(t1)]
            for s in shared:
                v = v - mdot(v, s) * s
            q = mdot(v, v)
            if q > 1e-16:
                shared.append(v / math.sqrt(q))
    comp1 = []
    for v in t1:
        r = v.copy()
        for s in shared:
            r = r - mdot(r, s) * s
        if mdot(r, r) > 1e-16:
            for c in comp1:
                r = r - mdot(r, c) * c
            if mdot(r, r) > 1e-16:
                comp1.append(r / math.sqrt(mdot(r, r)))
    comp2 = []
    for v in t2:
        r = v.copy()
        for s in shared:
            r = r - mdot(r, s) * s
        if mdot(r, r) > 1e-16:
            for c in comp2:
                r = r - mdot(r, c) * c
            if mdot(r, r) > 1e-16:
                comp2.append(r / math.sqrt(mdot(r, r)))
    if not comp1 or not comp2:
        return OrthogonalityReport(
            False, "containment", 0.0, dist, "one subspace contains the other"
        )
    resid = max(abs(mdot(c1, c2)) for c1 in comp1 for c2 in comp2)
    return OrthogonalityReport(resid <= tol, case, resid, dist)


def subspaces_orthogonal(
    h1: Subspace, h2: Subspace, tol: float = TOL_ORTH
) -> OrthogonalityReport:
    """Decide orthogonality of two totally geodesic subspaces.

    Crossing subspaces are tested at a common point: the tangent complements
    of the shared tangent must be J-orthogonal and both nonempty.  Disjoint
    subspaces are translated along their common perpendicular first; an
    asymptotic pair is never orthogonal.
    """
    inter = _nullspace(np.column_stack([h1.basis, -h2.basis]))
    k1 = h1.basis.shape[1]
    timelike_point = None
    if inter.shape[1] > 0:
        vecs = h1.basis @ inter[:k1, :]
        norms = np.linalg.norm(vecs, axis=0)
        vecs = vecs[:, norms > 1e-9] / norms[norms > 1e-9]
    else:
        vecs = np.zeros((h1.ambient_dim + 1, 0))
    if vecs.shape[1] > 0:
        G = vecs.T @ minkowski_form(h1.ambient_dim) @ vecs
        evals, evecs = np.linalg.eigh(G)
        if evals[0] < -1e-8:
            timelike_point = normalize_point(vecs @ evecs[:, 0])
        elif evals[0] < 1e-8:
            # a null direction and no timelike one: shared ideal point
            return OrthogonalityReport(
                False, "asymptotic", 0.0, 0.0,
                "subspaces share only ideal directions",
            )
        # all positive: the linear spans meet in spacelike directions only,
        # the hyperbolic subspaces themselves are disjoint
    if timelike_point is not None:
        return _orthogonal_at_point(h1, h2, timelike_point, tol, None, "intersecting")
    x, y, d = closest_points(h1, h2)
    if d < 1e-7:
        return OrthogonalityReport(
            False, "asymptotic", 0.0, d, "no positive distance realized"
        )
    T = translation_along(x, y)
    moved = h1.transformed(T)
    return _orthogonal_at_point(moved, h2, y, tol, d, "translated")


# ---------------------------------------------------------------------------
# Isometries


def tangent_frame_at(
    x: np.ndarray,
    prescribed: list[np.ndarray] | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Complete a J-orthonormal tangent frame at x.

    Prescribed columns come first and must already be unit, tangent, and
    mutually orthogonal.  The completion Gram-Schmidts the coordinate
    directions, in seeded-shuffled order when an rng is supplied.
    """
    p1 = len(x)
    cols: list[np.ndarray] = []
    for v in prescribed or []:
        if abs(mdot(v, x)) > 1e-8 or abs(mdot(v, v) - 1.0) > 1e-8:
            raise InvalidInputError("prescribed frame vector not unit tangent at x")
        for w in cols:
            if abs(mdot(v, w)) > 1e-8:
                raise InvalidInputError("prescribed frame vectors not orthogonal")
        cols.append(np.asarray(v, dtype=float))
    order = list(range(p1))
    if rng is not None:
        order = list(rng.permutation(p1))
    for k in order:
        if len(cols) == p1 - 1:
            break
        v = np.zeros(p1)
        v[k] = 1.0
        v = v + mdot(v, x) * x
        for w in cols:
            v = v - mdot(v, w) * w
        q = mdot(v, v)
        if q > 1e-12:
            cols.append(v / math.sqrt(q))
    if len(cols) != p1 - 1:
        raise VerificationError("frame completion failed")
    return np.column_stack(cols)


def elliptic_at(x: np.ndarray, frame: np.ndarray, rotation: np.ndarray) -> np.ndarray:
    """Isometry fixing x whose differential is ``rotation`` in ``frame``.

    ``frame`` is a (p+1) x p J-orthonormal tangent frame at x and
    ``rotation`` an orthogonal p x p matrix expressed in that frame.
    """
    p1 = len(x)
    if frame.shape != (p1, p1 - 1):
        raise InvalidInputError("frame has the wrong shape")
    R = np.asarray(rotation, dtype=float)
    if R.shape != (p1 - 1, p1 - 1) or np.abs(R.T @ R - np.eye(p1 - 1)).max() > 1e-8:
        raise InvalidInputError("differential must be orthogonal")
    C = np.column_stack([x, frame])
    J = minkowski_form(p1 - 1)
    S = np.eye(p1)
    S[0, 0] = -1.0
    gram_resid = np.abs(C.T @ J @ C - S).max()
    if gram_resid > 1e-8:
        raise InvalidInputError("frame is not J-orthonormal at x")
    block = np.zeros((p1, p1))
    block[0, 0] = 1.0
    block[1:, 1:] = R
    return C @ block @ (S @ C.T @ J)


def translation_along(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hyperbolic translation moving a to b along their geodesic."""
    d = distance(a, b)
    if d < 1e-15:
        return np.eye(len(a))
    u = unit_tangent(a, b)
    J = minkowski_form(len(a) - 1)
    Ja, Ju = J @ a, J @ u
    return (
        np.eye(len(a))
        + (math.cosh(d) - 1.0) * (np.outer(a, -Ja) + np.outer(u, Ju))
        + math.sinh(d) * (np.outer(u, -Ja) + np.outer(a, Ju))
    )


def parallel_transport_normal(
    vectors: np.ndarray, x: np.ndarray, y: np.ndarray, path=None
) -> np.ndarray:
    """Transport slice-normal vectors along a path inside the slice.

    Coordinate directions past the first three are parallel along any curve
    of the standard plane, so the transport is the identity on them; the
    point and path arguments are validated, not used for the value.
    """
    for q in [x, y] + list(path or []):
        if np.abs(q[3:]).max(initial=0.0) > 1e-8:
            raise InvalidInputError("transport path must stay in the slice")
    V = np.atleast_2d(np.asarray(vectors, dtype=float).T).T
    if np.abs(V[:3, :]).max(initial=0.0) > 1e-8:
        raise InvalidInputError("vectors must be normal to the slice")
    return vectors.copy()


def reorthonormalize(m: np.ndarray) -> np.ndarray:
    """Minkowski Gram-Schmidt of an almost-J-orthogonal matrix's columns."""
    p1 = m.shape[0]
    out = np.array(m, dtype=float, copy=True)
    norms = []
    for k in range(p1):
        v = out[:, k]
        for i in range(k):
            v -= (mdot(v, out[:, i]) / norms[i]) * out[:, i]
        q = mdot(v, v)
        if k == 0:
            if q >= 0:
                raise VerificationError("column 0 lost timelikeness")
            v /= math.sqrt(-q)
            norms.append(-1.0)
        else:
            if q <= 0:
                raise VerificationError(f"column {k} lost spacelikeness")
            v /= math.sqrt(q)
            norms.append(1.0)
        out[:, k] = v
    return out


def mat_chain_product(mats, renorm_every: int = RENORM_EVERY) -> np.ndarray:
    """Product of a sequence of J-orthogonal matrices, left to right,
    re-orthonormalized every ``renorm_every`` factors to stop drift."""
    result = None
    count = 0
    for m in mats:
        result = m.copy() if result is None else result @ m
        count += 1
        if count % renorm_every == 0:
            result = reorthonormalize(result)
    if result is None:
        raise InvalidInputError("empty matrix chain")
    return result


def is_isometry_residual(m: np.ndarray) -> float:
    J = minkowski_form(m.shape[0] - 1)
    return float(np.abs(m.T @ J @ m - J).max())


# ---------------------------------------------------------------------------
# The embedded polygon


@dataclass
class PolygonEmbedding:
    """Regular right-angled n-gon in the standard plane of H^p.

    Vertex k sits at angle 2 pi k / n and circumradius distance from the
    center; edge k joins vertices k and k+1 and has its midpoint at angle
    pi (2k+1) / n at inradius distance.
    """

    n: int
    ambient_dim: int
    trig: TrigTable
    vertices: np.ndarray
    midpoints: np.ndarray
    center: np.ndarray

    def vertex(self, i: int) -> np.ndarray:
        return self.vertices[i % self.n]

    def edge_midpoint(self, l: int) -> np.ndarray:
        return self.midpoints[l % self.n]

    def toward_next(self, i: int) -> np.ndarray:
        return unit_tangent(self.vertex(i), self.vertex(i + 1))

    def toward_prev(self, i: int) -> np.ndarray:
        return unit_tangent(self.vertex(i), self.vertex(i - 1))

    def inward_normal(self, l: int) -> np.ndarray:
        return unit_tangent(self.edge_midpoint(l), self.center)

    def along_edge(self, l: int) -> np.ndarray:
        return unit_tangent(self.edge_midpoint(l), self.vertex(l + 1))

    def edge_bisector(self, l: int) -> Hyperplane:
        return bisector(self.vertex(l), self.vertex(l + 1))

    def slice(self) -> Subspace:
        return slice_subspace(self.ambient_dim)

    def validate(self, tol: float = 1e-9) -> None:
        t = self.trig
        for i in range(self.n):
            if abs(distance(self.vertex(i), self.vertex(i + 1)) - t.edge_length) > tol:
                raise VerificationError(f"edge {i} has the wrong length")
            if abs(distance(self.vertex(i), self.vertex(i + 2)) - t.short_diagonal) > tol:
                raise VerificationError(f"diagonal at {i} has the wrong length")
            if abs(mdot(self.toward_next(i), self.toward_prev(i))) > tol:
                raise VerificationError(f"vertex {i} angle is not right")
            if abs(distance(self.center, self.vertex(i)) - t.circumradius) > tol:
                raise VerificationError(f"vertex {i} circumradius off")
            if abs(distance(self.center, self.edge_midpoint(i)) - t.inradius) > tol:
                raise VerificationError(f"midpoint {i} inradius off")
            if abs(mdot(self.inward_normal(i), self.along_edge(i))) > tol:
                raise VerificationError(f"apothem at edge {i} not orthogonal")


def regular_polygon(n: int, ambient_dim: int = 2) -> PolygonEmbedding:
    if ambient_dim < 2:
        raise InvalidInputError("ambient dimension must be at least 2")
    t = trig_table(n)
    p1 = ambient_dim + 1
    verts = np.zeros((n, p1))
    mids = np.zeros((n, p1))
    rho, r = t.circumradius, t.inradius
    for k in range(n):
        av = 2.0 * math.pi * k / n
        am = math.pi * (2 * k + 1) / n
        verts[k, :3] = (math.cosh(rho), math.sinh(rho) * math.cos(av),
                        math.sinh(rho) * math.sin(av))
        mids[k, :3] = (math.cosh(r), math.sinh(r) * math.cos(am),
                       math.sinh(r) * math.sin(am))
    center = np.zeros(p1)
    center[0] = 1.0
    poly = PolygonEmbedding(
        n=n, ambient_dim=ambient_dim, trig=t,
        vertices=verts, midpoints=mids, center=center,
    )
    poly.validate()
    return poly
