"""Empirical distortion of the orbit map on skeleton balls.

The quasi-isometry evidence pipeline: shortest paths in the 1-skeleton,
replacement of antipodal within-face runs by diagonals (even n), the
greedy selection of bisected edges, classification of consecutive image
bisectors, and the aggregated distance-vs-image-distance report.

Skeleton distances are integers (unit edges) and get scaled by the edge
length for comparison with hyperbolic image distances.  Distances are
measured inside the ball, which can only overestimate the distance in
the full complex; pairs are therefore restricted to a safe core and
the resulting lower envelope is conservative.
"""
from __future__ import annotations

import math
import statistics
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, VerificationError
from . import hyperbolic as hyp
from .complexes import ComplexBall
from .representation import (
    Representation,
    equivariant_map,
    min_displacement_scan,
)

__all__ = [
    "PathStep",
    "PathInComplex",
    "graph_geodesic",
    "insert_diagonals",
    "BisectedEdgeSet",
    "select_bisected_edges",
    "synthesize_pentagon",
    "pentagon_bisector_identity",
    "PairRecord",
    "SeparationSummary",
    "bisector_separation",
    "DistortionRow",
    "DistortionReport",
    "distortion_report",
    "report_csv",
    "report_json_dict",
]


# ---------------------------------------------------------------------------
# Paths in the 1-skeleton


@dataclass(frozen=True)
class PathStep:
    kind: str  # "edge" | "diagonal"
    cell: int  # edge id, or face id for a diagonal
    tail: int  # vertex ids
    head: int


@dataclass
class PathInComplex:
    ball: ComplexBall
    vertices: list
    steps: list

    def length(self) -> int:
        return len(self.steps)

    def step_faces(self, k: int) -> frozenset:
        st = self.steps[k]
        if st.kind == "diagonal":
            return frozenset([st.cell])
        return frozenset(self.ball.edge_faces[st.cell])

    def validate(self) -> None:
        n = self.ball.n
        if len(self.vertices) != len(self.steps) + 1:
            raise InvalidInputError("vertex/step counts disagree")
        for k, st in enumerate(self.steps):
            if st.tail != self.vertices[k] or st.head != self.vertices[k + 1]:
                raise InvalidInputError(f"step {k} detached from the vertex list")
            if st.kind == "edge":
                ends = set(self.ball.edge_vertices[st.cell])
                if {st.tail, st.head} != ends:
                    raise InvalidInputError(f"step {k} is not an edge of its cell")
            elif st.kind == "diagonal":
                corners = self.ball.face_vertices[st.cell]
                if st.tail not in corners or st.head not in corners:
                    raise InvalidInputError(f"diagonal {k} leaves its face")
                gap = abs(corners.index(st.tail) - corners.index(st.head))
                if min(gap, n - gap) != n // 2:
                    raise InvalidInputError(f"diagonal {k} is not antipodal")
            else:
                raise InvalidInputError(f"unknown step kind {st.kind!r}")
            if (
                k > 0
                and st.kind == "diagonal"
                and self.steps[k - 1].kind == "diagonal"
                and st.cell == self.steps[k - 1].cell
            ):
                raise InvalidInputError("consecutive diagonals share a face")


def _adjacency(ball: ComplexBall) -> list:
    adj = []
    for vid in range(len(ball.vertices)):
        adj.append(ball.vertex_neighbors(vid))
    return adj


def _bfs_tree(adj, source):
    dist = {source: 0}
    parent = {source: None}
    via = {source: None}
    queue = deque([source])
    while queue:
        v = queue.popleft()
        for w, eid in adj[v]:
            if w not in dist:
                dist[w] = dist[v] + 1
                parent[w] = v
                via[w] = eid
                queue.append(w)
    return dist, parent, via


def _safe_core(ball: ComplexBall) -> list:
    cutoff = ball.radius - 1
    return [
        vid
        for vid in range(len(ball.vertices))
        if ball.vertex_min_face_depth(vid) <= cutoff
    ]


def graph_geodesic(ball: ComplexBall, z: int, w: int) -> PathInComplex:
    """Shortest 1-skeleton path with BFS and smallest-id tie-breaks.

    Endpoints must touch a face strictly inside the ball, otherwise the
    computed distance could be an artifact of the boundary cut.
    """
    cutoff = ball.radius - 1
    for v in (z, w):
        if not 0 <= v < len(ball.vertices):
            raise InvalidInputError(f"vertex {v} is not in the ball")
        if ball.vertex_min_face_depth(v) > cutoff:
            raise InvalidInputError(
                f"vertex {v} sits on the ball boundary; distance inconclusive"
            )
    if z == w:
        return PathInComplex(ball=ball, vertices=[z], steps=[])
    adj = _adjacency(ball)
    dist, parent, via = _bfs_tree(adj, z)
    if w not in dist:
        raise VerificationError("ball 1-skeleton is disconnected")
    chain = [w]
    steps = []
    while parent[chain[-1]] is not None:
        v = chain[-1]
        steps.append(PathStep(kind="edge", cell=via[v], tail=parent[v], head=v))
        chain.append(parent[v])
    chain.reverse()
    steps.reverse()
    return PathInComplex(ball=ball, vertices=chain, steps=steps)


def insert_diagonals(path: PathInComplex) -> PathInComplex:
    """Replace antipodal within-face runs of n/2 edges by diagonals."""
    n = path.ball.n
    if n % 2 == 1:
        return PathInComplex(
            ball=path.ball, vertices=list(path.vertices), steps=list(path.steps)
        )
    half = n // 2
    steps = path.steps
    out_steps = []
    out_vertices = [path.vertices[0]]
    k = 0
    while k < len(steps):
        run = steps[k : k + half]
        replaced = False
        if len(run) == half and all(s.kind == "edge" for s in run):
            common = path.step_faces(k)
            for j in range(k + 1, k + half):
                common = common & path.step_faces(j)
            tail, head = run[0].tail, run[-1].head
            if common:
                fid = min(common)
                corners = path.ball.face_vertices[fid]
                if tail in corners and head in corners:
                    gap = abs(corners.index(tail) - corners.index(head))
                    antipodal = min(gap, n - gap) == half
                    prev_diag = (
                        out_steps
                        and out_steps[-1].kind == "diagonal"
                        and out_steps[-1].cell == fid
                    )
                    if antipodal and not prev_diag:
                        out_steps.append(
                            PathStep(kind="diagonal", cell=fid, tail=tail, head=head)
                        )
                        out_vertices.append(head)
                        k += half
                        replaced = True
        if not replaced:
            out_steps.append(steps[k])
            out_vertices.append(steps[k].head)
            k += 1
    return PathInComplex(ball=path.ball, vertices=out_vertices, steps=out_steps)


# ---------------------------------------------------------------------------
# Bisected-edge selection


@dataclass
class BisectedEdgeSet:
    path: PathInComplex
    indices: tuple
    max_gap: int

    def validate(self) -> None:
        for t in range(len(self.indices) - 1):
            i, k = self.indices[t], self.indices[t + 1]
            if not _admissible(self.path, i, k):
                raise VerificationError(
                    f"selected steps {i} and {k} violate the selection rules"
                )


def _touch(path: PathInComplex, i: int, k: int) -> bool:
    a = {path.steps[i].tail, path.steps[i].head}
    b = {path.steps[k].tail, path.steps[k].head}
    return bool(a & b)


def _admissible(path: PathInComplex, i: int, k: int) -> bool:
    if path.step_faces(i) & path.step_faces(k):
        return False
    if _touch(path, i, k):
        return (
            path.steps[i].kind == "diagonal" or path.steps[k].kind == "diagonal"
        )
    return True


def select_bisected_edges(path: PathInComplex) -> BisectedEdgeSet:
    """Greedy first-admissible subsequence of path steps.

    Two consecutive picks never lie in a common face, and if they share
    a vertex at least one of them is a diagonal.
    """
    if not path.steps:
        return BisectedEdgeSet(path=path, indices=(), max_gap=0)
    chosen = [0]
    for k in range(1, len(path.steps)):
        if _admissible(path, chosen[-1], k):
            chosen.append(k)
    gaps = [b - a for a, b in zip(chosen, chosen[1:])]
    return BisectedEdgeSet(
        path=path, indices=tuple(chosen), max_gap=max(gaps, default=0)
    )


# ---------------------------------------------------------------------------
# The synthesized pentagon (odd route)


def synthesize_pentagon(u: np.ndarray, v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Vertices of the regular right-angled pentagon through u, v, w.

    u, v, w must be consecutive corners: both gaps of edge length and a
    right angle at v.  The pentagon is carried into the plane of the
    three points by matching linear coordinates, which is exact.
    """
    trig = hyp.trig_table(5)
    for a, b in ((u, v), (v, w)):
        if abs(hyp.distance(a, b) - trig.edge_length) > 1e-8:
            raise InvalidInputError("synthesis needs edge-length gaps")
    t1 = hyp.unit_tangent(v, u)
    t2 = hyp.unit_tangent(v, w)
    if abs(hyp.mdot(t1, t2)) > 1e-8:
        raise InvalidInputError("synthesis needs a right angle at the middle point")
    std = hyp.regular_polygon(5, ambient_dim=2)
    x0, x1, x2 = std.vertex(0), std.vertex(1), std.vertex(2)
    basis_std = np.column_stack(
        [x1, hyp.unit_tangent(x1, x0), hyp.unit_tangent(x1, x2)]
    )
    basis_tgt = np.column_stack([v, t1, t2])
    verts = []
    for k in range(5):
        coeff = np.linalg.solve(basis_std, std.vertex(k))
        verts.append(basis_tgt @ coeff)
    return np.array(verts)


def _same_hyperplane_residual(h1: hyp.Hyperplane, h2: hyp.Hyperplane) -> float:
    n1, n2 = h1.normal, h2.normal
    return float(min(np.abs(n1 - n2).max(), np.abs(n1 + n2).max()))


def pentagon_bisector_identity(verts: np.ndarray) -> float:
    """Residual of Bis(edge v0 v1) = Bis(diagonal v2 v4)."""
    return _same_hyperplane_residual(
        hyp.bisector(verts[0], verts[1]), hyp.bisector(verts[2], verts[4])
    )


# ---------------------------------------------------------------------------
# Bisector separation along a path


@dataclass(frozen=True)
class PairRecord:
    first: int  # indices into the path's step list
    second: int
    kind: str
    required: bool
    distance: float
    thinned: bool


@dataclass
class SeparationSummary:
    n: int
    records: tuple
    delta_min: float
    all_required_disjoint: bool
    asymptotic_pairs: int
    crossing_count: int
    crossings_ok: bool
    c1_identity_residual: float
    triple_orthogonality_residual: float
    max_gap: int


def _classify_pair(h1, h2):
    cls = hyp.classify_hyperplane_pair(h1, h2)
    if cls.kind == "disjoint":
        return cls.kind, float(cls.distance)
    return cls.kind, 0.0


def bisector_separation(
    rep: Representation,
    ball: ComplexBall,
    path: PathInComplex,
    be: BisectedEdgeSet,
    em=None,
) -> SeparationSummary:
    """Classify consecutive image bisectors of the selected steps.

    For n >= 7 every consecutive pair must be disjoint; for n = 6 only
    diagonal-diagonal pairs and the even-thinned subsequence are
    required, others may be asymptotic; for n = 5 the even-thinned
    subsequence is required, and the three-orthogonal-segments route
    behind its disjointness criterion is verified on the actual
    configurations: per selected triple, the substitute diagonals are
    synthesized, their bisector identity is checked, and the mutual
    orthogonality of the diagonal-edge-diagonal triple is measured.
    """
    n = ball.n
    if em is None:
        em = equivariant_map(rep, ball)
    segs = []
    for idx in be.indices:
        st = path.steps[idx]
        a = em.vertex_images[st.tail]
        b = em.vertex_images[st.head]
        segs.append((idx, st.kind, a, b, hyp.bisector(a, b)))
    records = []
    required_positions = set()

    def add(t1, t2, required, thinned):
        kind, dist = _classify_pair(segs[t1][4], segs[t2][4])
        if required:
            required_positions.update((t1, t2))
        records.append(
            PairRecord(
                first=segs[t1][0], second=segs[t2][0], kind=kind,
                required=required, distance=dist, thinned=thinned,
            )
        )

    for t in range(len(segs) - 1):
        if n >= 7:
            required = True
        elif n == 6:
            required = segs[t][1] == "diagonal" and segs[t + 1][1] == "diagonal"
        else:
            required = False
        add(t, t + 1, required, thinned=False)
    if n in (5, 6):
        thin = list(range(0, len(segs), 2))
        for a, b in zip(thin, thin[1:]):
            add(a, b, True, thinned=True)
    required_recs = [r for r in records if r.required]
    delta_min = min((r.distance for r in required_recs), default=math.inf)
    all_ok = all(r.kind == "disjoint" for r in required_recs)
    asym = sum(1 for r in records if r.kind == "asymptotic") if n == 6 else 0
    # endpoint separation: selected bisectors should part the two images,
    # demanded only of the steps participating in required pairs
    crossings = 0
    crossed = []
    z_img = em.vertex_images[path.vertices[0]]
    w_img = em.vertex_images[path.vertices[-1]]
    for _, _, _, _, h in segs:
        hit = hyp.mdot(z_img, h.normal) * hyp.mdot(w_img, h.normal) < 0
        crossed.append(hit)
        if hit:
            crossings += 1
    if required_positions:
        ok_crossings = all(crossed[t] for t in required_positions)
    else:
        ok_crossings = all(crossed) if crossed else True
    c1_resid = 0.0
    triple_resid = 0.0
    if n == 5:
        for t in range(len(segs) - 2):
            # the route needs single-edge gaps on both sides of the middle
            if segs[t + 1][0] - segs[t][0] != 2 or segs[t + 2][0] - segs[t + 1][0] != 2:
                continue
            j = segs[t][0]
            pts = [em.vertex_images[v] for v in path.vertices[j:j + 6]]
            if len(pts) < 6:
                continue
            try:
                f1 = synthesize_pentagon(pts[0], pts[1], pts[2])
                f3 = synthesize_pentagon(pts[3], pts[4], pts[5])
            except InvalidInputError:
                continue
            # substitute diagonals share the middle edge's endpoints
            d1_far, d3_far = f1[4], f3[3]
            c1_resid = max(
                c1_resid,
                pentagon_bisector_identity(f1),
                _same_hyperplane_residual(
                    hyp.bisector(pts[4], pts[5]), hyp.bisector(f3[0], f3[3])
                ),
            )
            t_d1 = hyp.unit_tangent(pts[2], d1_far)
            t_mid = hyp.unit_tangent(pts[2], pts[3])
            t_mid_back = hyp.unit_tangent(pts[3], pts[2])
            t_d3 = hyp.unit_tangent(pts[3], d3_far)
            carried = hyp.translation_along(pts[2], pts[3]) @ t_d1
            triple_resid = max(
                triple_resid,
                abs(hyp.mdot(t_d1, t_mid)),
                abs(hyp.mdot(t_mid_back, t_d3)),
                abs(hyp.mdot(carried, t_d3)),
            )
    return SeparationSummary(
        n=n,
        records=tuple(records),
        delta_min=delta_min,
        all_required_disjoint=all_ok,
        asymptotic_pairs=asym,
        crossing_count=crossings,
        crossings_ok=ok_crossings,
        c1_identity_residual=c1_resid,
        triple_orthogonality_residual=triple_resid,
        max_gap=be.max_gap,
    )


# ---------------------------------------------------------------------------
# The distortion report


@dataclass(frozen=True)
class DistortionRow:
    k: int
    count: int
    dmin: float
    dmed: float
    dmax: float


@dataclass
class DistortionReport:
    n: int
    radius: int
    scale: float
    rows: tuple
    slope: float | None
    offset: float | None
    delta_min: float
    asymptotic_pairs: int
    all_required_disjoint: bool
    crossings_ok: bool
    c1_identity_residual: float
    triple_orthogonality_residual: float
    max_selection_gap: int
    min_displacement: float
    pair_count: int
    low_confidence: bool
    seed: int

    def envelope(self) -> list:
        return [(row.k, row.dmin) for row in self.rows]


EXHAUSTIVE_VERTEX_CAP = 10_000


def distortion_report(
    rep: Representation,
    ball: ComplexBall,
    sample: int | None = None,
    seed: int = 0,
    separation_paths: int = 20,
) -> DistortionReport:
    """Image distance against skeleton distance over safe-core pairs.

    Exhaustive when the pair count stays at or below 10^4 and no sample
    size is forced; otherwise a seeded sample.  Separation statistics
    come from the per-distance minimizing geodesics plus extra sampled
    paths.
    """
    if ball.radius < 3:
        raise InvalidInputError("distortion needs a ball of radius at least 3")
    if ball.spec.orders != rep.spec.orders:
        raise InvalidInputError("ball and representation disagree on the product")
    rng = np.random.default_rng(seed)
    em = equivariant_map(rep, ball)
    safe = _safe_core(ball)
    adj = _adjacency(ball)
    if sample is not None:
        size = min(len(safe), max(2, int(sample)))
        sources = sorted(int(v) for v in rng.choice(safe, size=size, replace=False))
    elif len(safe) <= EXHAUSTIVE_VERTEX_CAP:
        sources = safe
    else:
        size = min(len(safe), 200)
        sources = sorted(int(v) for v in rng.choice(safe, size=size, replace=False))
    buckets: dict = {}
    seen_pairs = 0
    argmin: dict = {}
    for z in sources:
        dist, _, _ = _bfs_tree(adj, z)
        for w in sources:
            if w <= z or w not in dist:
                continue
            k = dist[w]
            d_img = hyp.distance(em.vertex_images[z], em.vertex_images[w])
            bucket = buckets.setdefault(k, [])
            bucket.append(d_img)
            seen_pairs += 1
            if k not in argmin or d_img < argmin[k][0]:
                argmin[k] = (d_img, z, w)
    rows = [DistortionRow(k=0, count=len(safe), dmin=0.0, dmed=0.0, dmax=0.0)]
    for k in sorted(buckets):
        vals = buckets[k]
        rows.append(
            DistortionRow(
                k=k, count=len(vals), dmin=min(vals),
                dmed=float(statistics.median(vals)), dmax=max(vals),
            )
        )
    scale = rep.polygon.trig.edge_length
    fit_pts = [(row.k * scale, row.dmin) for row in rows if row.k >= 3]
    if len(fit_pts) >= 2:
        xs = np.array([p[0] for p in fit_pts])
        ys = np.array([p[1] for p in fit_pts])
        slope, offset = np.polyfit(xs, ys, 1)
        slope, offset = float(slope), float(offset)
    else:
        slope = offset = None
    # separation on the minimizing geodesics plus a seeded sample of pairs
    chosen_pairs = [(z, w) for _, (_, z, w) in sorted(argmin.items())]
    for _ in range(separation_paths):
        if len(safe) < 2:
            break
        z, w = (int(v) for v in rng.choice(safe, size=2, replace=False))
        chosen_pairs.append((min(z, w), max(z, w)))
    delta_min = math.inf
    asym = 0
    all_ok = True
    crossings_ok = True
    c1 = 0.0
    triple = 0.0
    max_gap = 0
    for z, w in chosen_pairs:
        path = graph_geodesic(ball, int(z), int(w))
        path = insert_diagonals(path)
        be = select_bisected_edges(path)
        if len(be.indices) < 1:
            continue
        summary = bisector_separation(rep, ball, path, be, em=em)
        if summary.records:
            delta_min = min(delta_min, summary.delta_min)
            all_ok = all_ok and summary.all_required_disjoint
            asym += summary.asymptotic_pairs
            c1 = max(c1, summary.c1_identity_residual)
            triple = max(triple, summary.triple_orthogonality_residual)
        crossings_ok = crossings_ok and summary.crossings_ok
        max_gap = max(max_gap, summary.max_gap)
    disp = min_displacement_scan(rep, ball)
    return DistortionReport(
        n=ball.n,
        radius=ball.radius,
        scale=scale,
        rows=tuple(rows),
        slope=slope,
        offset=offset,
        delta_min=delta_min,
        asymptotic_pairs=asym,
        all_required_disjoint=all_ok,
        crossings_ok=crossings_ok,
        c1_identity_residual=c1,
        triple_orthogonality_residual=triple,
        max_selection_gap=max_gap,
        min_displacement=disp.min_score,
        pair_count=seen_pairs,
        low_confidence=seen_pairs < 100,
        seed=seed,
    )


def report_csv(report: DistortionReport) -> str:
    lines = ["k,count,min,median,max"]
    for row in report.rows:
        lines.append(
            f"{row.k},{row.count},{row.dmin:.12g},{row.dmed:.12g},{row.dmax:.12g}"
        )
    return "\n".join(lines) + "\n"


def report_json_dict(report: DistortionReport) -> dict:
    return {
        "n": report.n,
        "radius": report.radius,
        "scale": report.scale,
        "slope": report.slope,
        "offset": report.offset,
        "deltaMin": None if math.isinf(report.delta_min) else report.delta_min,
        "asymptoticPairs": report.asymptotic_pairs,
        "allRequiredDisjoint": report.all_required_disjoint,
        "crossingsOk": report.crossings_ok,
        "tripleOrthogonalityResidual": report.triple_orthogonality_residual,
        "maxSelectionGap": report.max_selection_gap,
        "minDisplacement": report.min_displacement,
        "pairCount": report.pair_count,
        "lowConfidence": report.low_confidence,
        "seed": report.seed,
    }
