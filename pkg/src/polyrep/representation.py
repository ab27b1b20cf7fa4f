"""Isometric actions of cyclic graph products on H^p.

Two constructions around the embedded right-angled n-gon:

* odd n: the flag construction.  The flag space has one component per
  side with t_l flags, p = sum t_l.  A structured base frame at the first
  edge midpoint sends the first distinguished flag to the inward normal,
  one other distinguished flag to the along-edge tangent, and everything
  else to the coordinate normals; the frame is propagated around the
  polygon by bisector reflections combined with a dihedral flag
  involution, and each edge group acts elliptically at its midpoint by
  its regular permutation seen through the local frame.

  For a pentagon of order-2 groups the mirror walls of non-adjacent
  sides would cross inside hyperbolic space under that propagation, so
  there the reflections also rotate a pair of designated normal planes
  and the involutions carry whole components; the seed vectors are
  weighted so that walls of adjacent sides stay exactly perpendicular
  while non-adjacent ones become ultraparallel.

* even n: the orbit construction.  The orbit span of the two parity
  indicators under a separating finite quotient gives a p-dimensional
  orthogonal action of every vertex group; a base frame at vertex 0
  sends the even indicator to the tangent toward the previous vertex and
  the odd one toward the next, frames at the other vertices come from
  the partial products of the edge-bisector reflections, and each vertex
  group acts elliptically at its vertex.

Both produce a generator table of J-orthogonal matrices; arbitrary
elements are evaluated by normal-form factorization with periodic
re-orthonormalization.
"""
from __future__ import annotations

import datetime
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, VerificationError
from . import hyperbolic as hyp
from .complexes import (
    ComplexBall,
    PolygonOfGroups,
    QuotientComplex,
    SeparationReport,
    angle_and_curvature,
    even_side_edge,
    odd_side_edge,
    quotient_complex,
    verify_separation,
)
from .groups import (
    GraphProductSpec,
    GroupHom,
    NormalForm,
    inverse,
    multiply,
    normal_form,
    vertex_element_word,
    vertex_group,
    vertex_pair,
)

__all__ = [
    "FlagSpace",
    "build_flag_space",
    "ReflectionChain",
    "reflection_chain",
    "Representation",
    "build_odd",
    "build_even",
    "RelationReport",
    "verify_relations",
    "OrthogonalityScan",
    "verify_orthogonality",
    "EquivariantMap",
    "equivariant_map",
    "OrthogonalTwist",
    "extend_representation",
    "DisplacementScan",
    "min_displacement_scan",
    "representation_to_json",
    "representation_from_json",
]

TOL_BUILD = 1e-9


# ---------------------------------------------------------------------------
# Flag space (odd construction)


@dataclass(frozen=True)
class FlagSpace:
    """Disjoint union of the edge-group element sets, one flag per element.

    Component l holds t_l flags; flag (l, 0) is the distinguished one.
    """

    spec: GraphProductSpec
    offsets: tuple

    @property
    def size(self) -> int:
        return self.offsets[-1]

    def flag_index(self, l: int, j: int) -> int:
        return self.offsets[l % self.spec.n] + j

    def distinguished(self, l: int) -> int:
        return self.flag_index(l, 0)

    def involution_matrix(self, j0: int, full_components: bool = False) -> np.ndarray:
        """Dihedral flip l -> 2*j0 - l on distinguished flags, rest fixed.

        With ``full_components`` the flip carries whole components
        instead, (l, a) -> (2*j0 - l, a).
        """
        n = self.spec.n
        M = np.eye(self.size)
        for l in range(n):
            span = self.spec.orders[l] if full_components else 1
            for a in range(span):
                src = self.flag_index(l, a)
                dst = self.flag_index((2 * j0 - l) % n, a)
                M[src, src] = 0.0
                M[dst, src] = 1.0
        return M

    def regular_action_matrix(self, l: int, a: int) -> np.ndarray:
        """Left multiplication by a on component l, identity elsewhere."""
        fac = self.spec.factors[l]
        M = np.eye(self.size)
        for j in range(fac.order):
            src = self.flag_index(l, j)
            M[src, src] = 0.0
            M[self.flag_index(l, fac.mul(a, j)), src] = 1.0
        return M


def build_flag_space(spec: GraphProductSpec) -> FlagSpace:
    offsets = [0]
    for t in spec.orders:
        offsets.append(offsets[-1] + t)
    return FlagSpace(spec=spec, offsets=tuple(offsets))


# ---------------------------------------------------------------------------
# Bisector reflections of the embedded polygon


@dataclass
class ReflectionChain:
    """Edge-bisector reflections with their partial products.

    ``prefix[i]`` is the product R_{i-1} ... R_0, which carries vertex 0
    to vertex i.  For even n the full cycle closes up to the identity;
    for odd n it is a genuine involution.
    """

    polygon: hyp.PolygonEmbedding
    reflections: list
    prefix: list

    def closure_defect(self) -> float:
        p1 = self.prefix[0].shape[0]
        return float(np.abs(self.prefix[-1] - np.eye(p1)).max())


def reflection_chain(polygon: hyp.PolygonEmbedding) -> ReflectionChain:
    n = polygon.n
    refs = [hyp.reflection_in_hyperplane(polygon.edge_bisector(l)) for l in range(n)]
    prefix = [np.eye(polygon.ambient_dim + 1)]
    for l in range(n):
        prefix.append(refs[l] @ prefix[-1])
    return ReflectionChain(polygon=polygon, reflections=refs, prefix=prefix)


# ---------------------------------------------------------------------------
# The representation container


@dataclass
class Representation:
    """Generator table of a polygon action on H^p.

    Keys are ("edge", l, a) in odd mode and ("vertex", i, k) in even
    mode; extended mode keeps the keys of the representation it extends.
    """

    mode: str
    spec: GraphProductSpec
    p: int
    polygon: hyp.PolygonEmbedding
    generators: dict
    seed: int
    provenance: dict = field(default_factory=dict)
    frames: list | None = None

    def generator_keys(self):
        return sorted(self.generators)

    def syllable_matrix(self, l: int, a: int) -> np.ndarray:
        if a % self.spec.factors[l].order == 0:
            return np.eye(self.p + 1)
        key = ("edge", l, a)
        if key in self.generators:
            return self.generators[key]
        # the edge group sits in its tail vertex group as the second
        # coordinate, so the vertex-group index is just a
        return self.generators[("vertex", l, a)]

    def evaluate(self, word) -> np.ndarray:
        """Matrix of a group element given as a NormalForm or syllable list."""
        if not isinstance(word, NormalForm):
            word = normal_form(list(word), self.spec)
        if not word.syllables:
            return np.eye(self.p + 1)
        return hyp.mat_chain_product(
            [self.syllable_matrix(l, a) for l, a in word.syllables]
        )

    def base_point(self) -> np.ndarray:
        return self.polygon.center


# ---------------------------------------------------------------------------
# Odd builder


def _coordinate_normals(p: int) -> list:
    out = []
    for k in range(3, p + 1):
        e = np.zeros(p + 1)
        e[k] = 1.0
        out.append(e)
    return out


def _odd_base_frame(flags: FlagSpace, polygon: hyp.PolygonEmbedding,
                    rng: np.random.Generator) -> np.ndarray:
    n = polygon.n
    p = flags.size
    frame = np.zeros((p + 1, p))
    frame[:, flags.distinguished(0)] = polygon.inward_normal(0)
    carrier = 1 + int(rng.integers(0, n - 1))  # any side other than 0 works
    frame[:, flags.distinguished(carrier)] = polygon.along_edge(0)
    rest = [flags.distinguished(l) for l in range(n) if l not in (0, carrier)]
    rest += [
        flags.flag_index(l, j)
        for l in range(n)
        for j in range(1, flags.spec.orders[l])
    ]
    normals = _coordinate_normals(p)
    order = rng.permutation(len(normals))
    for slot, which in zip(rest, order):
        frame[:, slot] = normals[which]
    return frame


def _mirror_crossing_pairs(spec: GraphProductSpec) -> list:
    """Non-adjacent side pairs whose mirror walls would meet under the
    plain frame chain.

    Side l acts through a wall whose pole mixes the inward side normal
    with the component-l seed directions; for non-adjacent sides the
    poles pair to -cosh(a_n) * sqrt((t_l - 1)(t_m - 1)) / sqrt(t_l t_m),
    and the walls stay disjoint exactly when that falls below -1.
    """
    n = spec.n
    cosh_a = 1.0 + 2.0 * math.cos(2.0 * math.pi / n)
    out = []
    for l in range(n):
        for m in range(l + 1, n):
            if (m - l) % n in (1, n - 1):
                continue
            tl, tm = spec.orders[l], spec.orders[m]
            bound = math.sqrt(tl * tm / ((tl - 1.0) * (tm - 1.0)))
            if cosh_a <= bound + 1e-12:
                out.append((l, m))
    return out


# Seed weights for the rebalanced pentagon chain: squares sum to 1, and
# splitting them (5 +- sqrt 5)/10 over the two rotation planes makes
# adjacent carried-seed pairs orthogonal while pushing non-adjacent ones
# to -1/2.  Adjacent walls then stay exactly perpendicular and the
# non-adjacent wall products land at -(sqrt(5)+2)/4, safely past the
# ultraparallel threshold.
_SEED_MAJOR = math.sqrt((5.0 + math.sqrt(5.0)) / 10.0)
_SEED_MINOR = math.sqrt((5.0 - math.sqrt(5.0)) / 10.0)


def _twisted_reflections(chain: ReflectionChain, flags: FlagSpace) -> list:
    """Bisector reflections extended by dihedral action on two normal planes.

    Reflection j realizes the side flip l -> 2j - l, so on the rotation
    planes it acts as that flip in the k = 1 and k = 2 planar dihedral
    representations.  Plain reflections are identity on all normal
    coordinates.
    """
    n = flags.spec.n
    out = []
    for j in range(n):
        R = chain.reflections[j].copy()
        for k in (1, 2):
            ang = 2.0 * math.pi * k * (2 * j) / n
            c, s = math.cos(ang), math.sin(ang)
            b = 3 + 2 * (k - 1)
            R[b:b + 2, b:b + 2] = np.array([[c, s], [s, -c]])
        out.append(R)
    return out


def _twisted_base_frame(flags: FlagSpace, polygon: hyp.PolygonEmbedding,
                        rng: np.random.Generator) -> np.ndarray:
    """Base frame whose carried seed lives in the rotation planes."""
    n = polygon.n
    p = flags.size
    frame = np.zeros((p + 1, p))
    frame[:, flags.distinguished(0)] = polygon.inward_normal(0)
    seed = np.zeros(p + 1)
    seed[3] = _SEED_MAJOR
    seed[5] = _SEED_MINOR
    frame[:, flags.flag_index(0, 1)] = seed
    carrier = 1 + int(rng.integers(0, n - 1))  # any side other than 0 works
    frame[:, flags.distinguished(carrier)] = polygon.along_edge(0)
    spare = []
    anti = np.zeros(p + 1)
    anti[3] = _SEED_MINOR
    anti[5] = -_SEED_MAJOR
    spare.append(anti)
    for k in (4, 6):
        e = np.zeros(p + 1)
        e[k] = 1.0
        spare.append(e)
    for k in range(7, p + 1):
        e = np.zeros(p + 1)
        e[k] = 1.0
        spare.append(e)
    rest = [flags.distinguished(l) for l in range(n) if l not in (0, carrier)]
    rest += [flags.flag_index(l, 1) for l in range(1, n)]
    order = rng.permutation(len(spare))
    for slot, which in zip(rest, order):
        frame[:, slot] = spare[which]
    return frame


def build_odd(spec: GraphProductSpec, seed: int = 0) -> Representation:
    """Flag-space action for odd n; refuses even n."""
    n = spec.n
    if n % 2 == 0:
        raise InvalidInputError("n is even; use the orbit builder instead")
    poly_data = PolygonOfGroups.from_graph_product(spec)
    verdict = angle_and_curvature(poly_data)
    if not verdict.negatively_curved:
        raise InvalidInputError("polygon is not negatively curved right-angled")
    flags = build_flag_space(spec)
    p = flags.size
    polygon = hyp.regular_polygon(n, ambient_dim=p)
    chain = reflection_chain(polygon)
    crossing = _mirror_crossing_pairs(spec)
    twist = bool(crossing)
    if twist and len(set(spec.orders)) != 1:
        raise InvalidInputError(
            f"mirror walls of non-adjacent side pairs {crossing} would meet "
            f"for orders {list(spec.orders)}; the rebalanced build needs "
            "equal edge-group orders"
        )
    # equal orders can only cross at n = 5, t = 2: the threshold t/(t-1)
    # drops below cosh(a_5) from t = 3 on, and cosh(a_n) > 2 for n >= 7
    if twist and (n != 5 or spec.orders[0] != 2):
        raise InvalidInputError(
            f"unexpected wall crossing for n={n}, orders {list(spec.orders)}"
        )
    rng = np.random.default_rng(seed)
    if twist:
        refs = _twisted_reflections(chain, flags)
        base = _twisted_base_frame(flags, polygon, rng)
    else:
        refs = chain.reflections
        base = _odd_base_frame(flags, polygon, rng)
    psi = [base]
    half = (n + 1) // 2
    for i in range(n):
        j0 = (i + half) % n
        psi.append(
            refs[j0] @ psi[i] @ flags.involution_matrix(j0, full_components=twist)
        )
    for i in range(n):
        resid = np.abs(
            psi[i][:, flags.distinguished(i)] - polygon.inward_normal(i)
        ).max()
        if resid > 1e-10:
            raise VerificationError(
                f"frame chain lost the normal invariant at side {i}: {resid:.2e}"
            )
    generators = {}
    for l in range(n):
        for a in range(1, spec.orders[l]):
            generators[("edge", l, a)] = hyp.elliptic_at(
                polygon.edge_midpoint(l), psi[l], flags.regular_action_matrix(l, a)
            )
    # closing the loop must reproduce the side-0 generators
    for a in range(1, spec.orders[0]):
        again = hyp.elliptic_at(
            polygon.edge_midpoint(0), psi[n], flags.regular_action_matrix(0, a)
        )
        defect = float(np.abs(again - generators[("edge", 0, a)]).max())
        if defect > TOL_BUILD:
            raise VerificationError(
                f"construction inconsistency: chain closure defect {defect:.2e}"
            )
    prov = {
        "orders": list(spec.orders),
        "mode": "odd",
        "seed": seed,
        "p": p,
        "quotient": None,
        "chain": "rebalanced" if twist else "plain",
    }
    return Representation(
        mode="odd", spec=spec, p=p, polygon=polygon,
        generators=generators, seed=seed, provenance=prov, frames=psi,
    )


# ---------------------------------------------------------------------------
# Even builder


def build_even(
    poly: PolygonOfGroups | GraphProductSpec,
    hom: GroupHom,
    seed: int = 0,
    report: SeparationReport | None = None,
    qc: QuotientComplex | None = None,
) -> Representation:
    """Orbit-span action for even n; requires a separating quotient."""
    if isinstance(poly, GraphProductSpec):
        poly = PolygonOfGroups.from_graph_product(poly)
    spec = poly.graph_product
    if spec is None:
        raise InvalidInputError("even builder needs a graph-product polygon")
    n = spec.n
    if n % 2 == 1:
        raise InvalidInputError("n is odd; use the flag builder instead")
    if report is None:
        report = verify_separation(poly, hom)
    if not report.passed:
        raise VerificationError(
            "quotient does not separate; refusing to build",
            certificate=report.certificate(),
        )
    if qc is None:
        qc = quotient_complex(poly, hom, report)
    p = qc.p
    polygon = hyp.regular_polygon(n, ambient_dim=p)
    chain = reflection_chain(polygon)
    if chain.closure_defect() > TOL_BUILD:
        raise VerificationError(
            f"reflection cycle fails to close: {chain.closure_defect():.2e}"
        )
    rng = np.random.default_rng(seed)
    x0 = polygon.vertex(0)
    base = hyp.tangent_frame_at(
        x0, [polygon.toward_prev(0), polygon.toward_next(0)], rng=rng
    )
    frames = [chain.prefix[i] @ base for i in range(n)]
    generators = {}
    for i in range(n):
        gx = vertex_group(spec, i)
        for k in range(1, gx.order):
            A, resid = qc.vertex_action_matrix(i, k)
            if resid > 1e-8:
                raise VerificationError(
                    f"construction inconsistency: orbit span not invariant "
                    f"under vertex {i} element {k} (residual {resid:.2e})"
                )
            generators[("vertex", i, k)] = hyp.elliptic_at(
                polygon.vertex(i), frames[i], A
            )
    # the two vertex groups of each side must induce the same edge action
    for l in range(n):
        t_next = spec.orders[(l + 1) % n]
        for a in range(1, spec.orders[l]):
            tail = generators[("vertex", l, a)]
            head = generators[("vertex", (l + 1) % n, a * t_next)]
            defect = float(np.abs(tail - head).max())
            if defect > TOL_BUILD:
                raise VerificationError(
                    f"construction inconsistency: side {l} element {a} "
                    f"disagrees across its endpoints ({defect:.2e})"
                )
    # indicator transport: the class-side edge groups fix the frame columns
    for i in range(n):
        t_i = spec.orders[i]
        for col, edge in ((0, even_side_edge(i, n)), (1, odd_side_edge(i, n))):
            for a in range(1, spec.orders[edge]):
                k = a if edge == i else a * t_i
                M = generators[("vertex", i, k)]
                defect = float(np.abs(M @ frames[i][:, col] - frames[i][:, col]).max())
                if defect > TOL_BUILD:
                    raise VerificationError(
                        f"construction inconsistency: side {edge} fails to fix "
                        f"its indicator direction at vertex {i} ({defect:.2e})"
                    )
    prov = {
        "orders": list(spec.orders),
        "mode": "even",
        "seed": seed,
        "p": p,
        "quotient": {
            "targetOrder": hom.target.order,
            "factorImages": [list(im) for im in hom.factor_images],
        },
    }
    return Representation(
        mode="even", spec=spec, p=p, polygon=polygon,
        generators=generators, seed=seed, provenance=prov, frames=frames,
    )


# ---------------------------------------------------------------------------
# Verification


@dataclass(frozen=True)
class RelationReport:
    table_residual: float
    edge_agreement_residual: float
    commutator_residual: float
    order_residual: float
    nonidentity_margin: float
    isometry_residual: float

    def max_residual(self) -> float:
        return max(
            self.table_residual,
            self.edge_agreement_residual,
            self.commutator_residual,
            self.order_residual,
            self.isometry_residual,
        )


def verify_relations(rep: Representation) -> RelationReport:
    """Residuals of the defining relations under the stored generators."""
    spec = rep.spec
    n = spec.n
    eye = np.eye(rep.p + 1)
    table = 0.0
    for i in range(n):
        gx = vertex_group(spec, i)
        words = [vertex_element_word(spec, i, k) for k in range(gx.order)]
        mats = [rep.evaluate(w) for w in words]
        for k1 in range(gx.order):
            for k2 in range(gx.order):
                lhs = mats[k1] @ mats[k2]
                rhs = mats[gx.mul(k1, k2)]
                table = max(table, float(np.abs(lhs - rhs).max()))
    edge = 0.0
    if rep.mode in ("even", "extended") and ("vertex", 0, 1) in rep.generators:
        for l in range(n):
            t_next = spec.orders[(l + 1) % n]
            for a in range(1, spec.orders[l]):
                tail = rep.generators[("vertex", l, a)]
                head = rep.generators[("vertex", (l + 1) % n, a * t_next)]
                edge = max(edge, float(np.abs(tail - head).max()))
    comm = 0.0
    for l in range(n):
        m = (l + 1) % n
        for a in range(1, spec.orders[l]):
            for b in range(1, spec.orders[m]):
                A = rep.syllable_matrix(l, a)
                B = rep.syllable_matrix(m, b)
                comm = max(comm, float(np.abs(A @ B - B @ A).max()))
    orders_resid = 0.0
    margin = math.inf
    iso = 0.0
    for l in range(n):
        fac = spec.factors[l]
        for a in range(1, fac.order):
            M = rep.syllable_matrix(l, a)
            iso = max(iso, hyp.is_isometry_residual(M))
            d = fac.element_order(a)
            power = eye
            for e in range(1, d + 1):
                power = power @ M
                gap = float(np.abs(power - eye).max())
                if e < d:
                    margin = min(margin, gap)
                else:
                    orders_resid = max(orders_resid, gap)
    return RelationReport(
        table_residual=table,
        edge_agreement_residual=edge,
        commutator_residual=comm,
        order_residual=orders_resid,
        nonidentity_margin=margin,
        isometry_residual=iso,
    )


@dataclass(frozen=True)
class OrthogonalityScan:
    mode: str
    pairs_checked: int
    worst_residual: float
    all_orthogonal: bool
    failures: tuple


def _slice_image(rep: Representation, M: np.ndarray) -> hyp.Subspace:
    return hyp.slice_subspace(rep.p).transformed(M)


def verify_orthogonality(rep: Representation) -> OrthogonalityScan:
    """Orthogonality of the moved copies of the base plane.

    Flag-chain actions (edge-keyed generators) compare the base plane
    and its images under nontrivial elements of two different edge
    groups, all pairs.  Orbit-span actions (vertex-keyed) check the
    normal components of the rotated indicator directions across
    vertices at cyclic distance >= 2 (after the trivial parallel
    transport of slice normals), plus the plane images at each vertex.
    Extensions keep the keys of their base, so they dispatch the same
    way.
    """
    spec = rep.spec
    n = spec.n
    worst = 0.0
    pairs = 0
    failures = []
    if all(key[0] == "edge" for key in rep.generators):
        base = hyp.slice_subspace(rep.p)
        moved = {}
        for l in range(n):
            for a in range(1, spec.orders[l]):
                moved[(l, a)] = _slice_image(rep, rep.generators[("edge", l, a)])
        for (l, a), sub in moved.items():
            pairs += 1
            repo = hyp.subspaces_orthogonal(base, sub)
            worst = max(worst, repo.residual)
            if not repo.orthogonal:
                failures.append(("base", (l, a), repo.case))
        keys = sorted(moved)
        for u in range(len(keys)):
            for v in range(u + 1, len(keys)):
                (l1, a1), (l2, a2) = keys[u], keys[v]
                if l1 == l2:
                    continue
                pairs += 1
                repo = hyp.subspaces_orthogonal(moved[keys[u]], moved[keys[v]])
                worst = max(worst, repo.residual)
                if not repo.orthogonal:
                    failures.append((keys[u], keys[v], repo.case))
    else:
        if rep.frames is None:
            raise InvalidInputError(
                "orthogonality scan needs the stored vertex frames"
            )
        # rotated indicator normals, compared in the flat normal coordinates
        normals = {}
        for i in range(n):
            gx = vertex_group(spec, i)
            for k in range(1, gx.order):
                M = rep.generators[("vertex", i, k)]
                for col in (0, 1):
                    vec = M @ rep.frames[i][:, col]
                    nor = vec.copy()
                    nor[:3] = 0.0
                    if np.abs(nor).max() > 1e-12:
                        normals.setdefault(i, []).append(
                            hyp.parallel_transport_normal(
                                nor.reshape(-1, 1),
                                rep.polygon.vertex(i),
                                rep.polygon.vertex(0),
                            )[:, 0]
                        )
        for i in range(n):
            for j in range(i + 2, n):
                if (j - i) % n < 2 or (i - j) % n < 2:
                    continue
                for u in normals.get(i, []):
                    for v in normals.get(j, []):
                        pairs += 1
                        r = abs(float(u @ v))
                        worst = max(worst, r)
                        if r > hyp.TOL_ORTH:
                            failures.append((i, j, r))
        base = hyp.slice_subspace(rep.p)
        for i in range(n):
            gx = vertex_group(spec, i)
            for k in range(1, gx.order):
                sub = _slice_image(rep, rep.generators[("vertex", i, k)])
                pairs += 1
                repo = hyp.subspaces_orthogonal(base, sub)
                worst = max(worst, repo.residual)
                if not repo.orthogonal:
                    failures.append(("base", (i, k), repo.case))
    return OrthogonalityScan(
        mode=rep.mode, pairs_checked=pairs, worst_residual=worst,
        all_orthogonal=not failures, failures=tuple(failures),
    )


# ---------------------------------------------------------------------------
# The equivariant map on a ball


@dataclass
class EquivariantMap:
    ball: ComplexBall
    vertex_images: dict
    midpoint_images: dict
    face_centers: dict
    residual: float


def equivariant_map(rep: Representation, ball: ComplexBall,
                    tol: float = 1e-8) -> EquivariantMap:
    """Push the base polygon around the ball by the action.

    Every face contributes candidate images for its vertices and edge
    midpoints; distinct faces must agree on shared cells, and the worst
    disagreement is the well-definedness residual.
    """
    if ball.spec.orders != rep.spec.orders:
        raise InvalidInputError("ball and representation disagree on the product")
    vertex_images: dict = {}
    midpoint_images: dict = {}
    face_centers: dict = {}
    residual = 0.0
    for fid, g in enumerate(ball.faces):
        M = rep.evaluate(g)
        face_centers[fid] = M @ rep.polygon.center
        for i in range(ball.n):
            vid = ball.face_vertices[fid][i]
            img = M @ rep.polygon.vertex(i)
            if vid in vertex_images:
                residual = max(residual, float(np.abs(vertex_images[vid] - img).max()))
            else:
                vertex_images[vid] = img
        for l in range(ball.n):
            eid = ball.face_edges[fid][l]
            img = M @ rep.polygon.edge_midpoint(l)
            if eid in midpoint_images:
                residual = max(
                    residual, float(np.abs(midpoint_images[eid] - img).max())
                )
            else:
                midpoint_images[eid] = img
    if residual > tol:
        raise VerificationError(
            f"equivariant map is not well defined: residual {residual:.2e}"
        )
    return EquivariantMap(
        ball=ball, vertex_images=vertex_images,
        midpoint_images=midpoint_images, face_centers=face_centers,
        residual=residual,
    )


# ---------------------------------------------------------------------------
# Extension by a finite orthogonal twist


@dataclass(frozen=True)
class OrthogonalTwist:
    """Orthogonal k x k blocks attached to each generator key."""

    k: int
    blocks: dict

    def __post_init__(self):
        for key, Q in self.blocks.items():
            Q = np.asarray(Q, dtype=float)
            if Q.shape != (self.k, self.k):
                raise InvalidInputError(f"twist block {key} has the wrong shape")
            if np.abs(Q.T @ Q - np.eye(self.k)).max() > 1e-9:
                raise InvalidInputError(f"twist block {key} is not orthogonal")

    @staticmethod
    def from_group_hom(rep: Representation, hom: GroupHom) -> "OrthogonalTwist":
        """Left-regular permutation blocks from a finite quotient."""
        if hom.spec.orders != rep.spec.orders:
            raise InvalidInputError("twist quotient is over a different product")
        k = hom.target.order
        blocks = {}
        for key in rep.generators:
            if key[0] == "edge":
                _, l, a = key
                s = hom.image_of_syllable(l, a)
            else:
                _, i, g = key
                s = hom.image_of_vertex_element(i, g)
            Q = np.zeros((k, k))
            for t in range(k):
                Q[hom.target.mul(s, t), t] = 1.0
            blocks[key] = Q
        return OrthogonalTwist(k=k, blocks=blocks)


def extend_representation(rep: Representation, twist: OrthogonalTwist) -> Representation:
    """Block-diagonal extension into H^{p+k}, trivial on the new factor.

    Points of the original slice keep their mutual distances exactly; the
    twist can restore injectivity on finite subgroups that the base
    action collapses.
    """
    if set(twist.blocks) != set(rep.generators):
        raise InvalidInputError("twist must cover exactly the generator keys")
    p_new = rep.p + twist.k
    polygon = hyp.regular_polygon(rep.spec.n, ambient_dim=p_new)
    generators = {}
    for key, M in rep.generators.items():
        big = np.eye(p_new + 1)
        big[: rep.p + 1, : rep.p + 1] = M
        Q = np.asarray(twist.blocks[key], dtype=float)
        big[rep.p + 1:, rep.p + 1:] = Q
        generators[key] = big
    prov = dict(rep.provenance)
    prov["mode"] = "extended"
    prov["extension"] = {"k": twist.k, "baseMode": rep.mode}
    frames = None
    if rep.frames is not None:
        # indicator directions gain zero components on the new factor
        pad = np.zeros((twist.k, rep.frames[0].shape[1]))
        frames = [np.vstack([f, pad]) for f in rep.frames]
    return Representation(
        mode="extended", spec=rep.spec, p=p_new, polygon=polygon,
        generators=generators, seed=rep.seed, provenance=prov, frames=frames,
    )


# ---------------------------------------------------------------------------
# Displacement scan


@dataclass(frozen=True)
class DisplacementScan:
    scores: tuple  # (element, score) pairs in scan order
    min_score: float
    argmin: NormalForm | None

    def as_dict(self):
        return {
            "minScore": self.min_score,
            "count": len(self.scores),
        }


def min_displacement_scan(rep: Representation, elements) -> DisplacementScan:
    """Separation-from-identity score for each nontrivial element.

    The score is the larger of the matrix gap to the identity and the
    hyperbolic displacement of the polygon center.  ``elements`` may be a
    ball (its face labels are scanned) or any iterable of normal forms.
    """
    if isinstance(elements, ComplexBall):
        elements = elements.faces
    eye = np.eye(rep.p + 1)
    o = rep.polygon.center
    scores = []
    min_score = math.inf
    argmin = None
    for g in elements:
        M = rep.evaluate(g)
        gap = float(np.abs(M - eye).max())
        disp = hyp.distance(o, M @ o)
        score = max(gap, disp)
        scores.append((g, score))
        if g.syllables and score < min_score:
            min_score = score
            argmin = g
    return DisplacementScan(scores=tuple(scores), min_score=min_score, argmin=argmin)


# ---------------------------------------------------------------------------
# Serialization


def _config_hash(prov: dict) -> str:
    payload = json.dumps(
        {k: prov.get(k) for k in ("orders", "mode", "seed", "p", "quotient")},
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()


def representation_to_json(rep: Representation, timestamp: str | None = None) -> str:
    gens = []
    for key in rep.generator_keys():
        kind, idx, elem = key
        gens.append(
            {
                kind: idx,
                "element": elem,
                "matrix": [[float(x) for x in row] for row in rep.generators[key]],
            }
        )
    prov = dict(rep.provenance)
    prov["configHash"] = _config_hash(rep.provenance)
    prov["tolerances"] = {"build": TOL_BUILD, "orthogonality": hyp.TOL_ORTH}
    prov["timestamp"] = timestamp or datetime.datetime.now(
        datetime.timezone.utc
    ).isoformat()
    doc = {
        "mode": rep.mode,
        "p": rep.p,
        "form": "diag(-1,1,...,1)",
        "polygon": {"n": rep.polygon.n, "ambientDim": rep.polygon.ambient_dim},
        "generators": gens,
        "basepoints": {
            "vertices": [[float(x) for x in v] for v in rep.polygon.vertices],
            "midpoints": [[float(x) for x in m] for m in rep.polygon.midpoints],
            "center": [float(x) for x in rep.polygon.center],
        },
        "provenance": prov,
    }
    if rep.frames is not None:
        doc["frames"] = [
            [[float(x) for x in row] for row in f] for f in rep.frames
        ]
    return json.dumps(doc, sort_keys=True)


def representation_from_json(text: str) -> Representation:
    from .groups import make_cyclic_group

    try:
        doc = json.loads(text) if isinstance(text, str) else text
        mode = doc["mode"]
        p = int(doc["p"])
        prov = doc.get("provenance", {})
        orders = [int(t) for t in prov["orders"]]
        spec = GraphProductSpec(tuple(make_cyclic_group(t) for t in orders))
        polygon = hyp.regular_polygon(doc["polygon"]["n"], doc["polygon"]["ambientDim"])
        generators = {}
        for entry in doc["generators"]:
            M = np.array(entry["matrix"], dtype=float)
            if "edge" in entry:
                key = ("edge", int(entry["edge"]), int(entry["element"]))
            else:
                key = ("vertex", int(entry["vertex"]), int(entry["element"]))
            generators[key] = M
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"malformed representation JSON: {exc}") from exc
    stored = np.array(doc["basepoints"]["vertices"], dtype=float)
    if np.abs(stored - polygon.vertices).max() > 1e-9:
        raise VerificationError("stored base points disagree with the polygon")
    frames = None
    if "frames" in doc:
        frames = [np.array(f, dtype=float) for f in doc["frames"]]
    return Representation(
        mode=mode, spec=spec, p=p, polygon=polygon,
        generators=generators, seed=int(prov.get("seed", 0)), provenance=prov,
        frames=frames,
    )
