"""Polygons of finite groups and the combinatorics of their universal covers.

A polygon of groups carries a face group, edge groups, and vertex groups
glued by injective index maps (edge l runs from vertex l to vertex l+1 mod
n).  For cyclic graph products the face group is trivial, edge group l is
the factor A_l, and the vertex group at l is A_{l-1} x A_l; those polygons
carry their GraphProductSpec along, which unlocks the word-based
operations (balls, trees, element-level product classification).

Edge indices split into two alternating classes when n is even.  The class
containing edge n-1 (the edge entering the base vertex 0) is called
"even"; in 0-based terms those are the odd indices l.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, SizeLimitError, VerificationError
from .groups import (
    DEFAULT_ELEMENT_CAP,
    IDENTITY,
    FiniteGroup,
    GraphProductSpec,
    GroupHom,
    NormalForm,
    direct_product,
    finite_group_from_json,
    group_spec_from_json,
    inverse,
    make_cyclic_group,
    multiply,
    normal_form,
    subgroup_generated,
    support,
    syllable_word,
    vertex_element_word,
    vertex_group,
    vertex_pair,
)

__all__ = [
    "PolygonOfGroups",
    "cyclic_polygon",
    "polygon_from_json",
    "parity_class",
    "even_side_edge",
    "odd_side_edge",
    "LinkGraph",
    "link_graph",
    "CurvatureReport",
    "angle_and_curvature",
    "ComplexBall",
    "build_ball",
    "TreeSubgraph",
    "build_trees",
    "PhiSets",
    "phi_sets",
    "SeparationReport",
    "verify_separation",
    "QuotientComplex",
    "quotient_complex",
    "StabilizerReport",
    "stabilizer_check",
]


def _check_hom(m, src: FiniteGroup, dst: FiniteGroup, what: str) -> None:
    if len(m) != src.order:
        raise InvalidInputError(f"invalid polygon: {what} has wrong domain size")
    if m[0] != 0:
        raise InvalidInputError(f"invalid polygon: {what} moves the identity")
    if len(set(m)) != len(m):
        raise InvalidInputError(f"invalid polygon: {what} is not injective")
    for a in range(src.order):
        for b in range(src.order):
            if m[src.mul(a, b)] != dst.mul(m[a], m[b]):
                raise InvalidInputError(f"invalid polygon: {what} is not a homomorphism")


@dataclass(frozen=True)
class PolygonOfGroups:
    """An n-gon of finite groups with injective structure maps.

    ``edge_to_tail[l]`` embeds edge group l into the vertex group at l,
    ``edge_to_head[l]`` into the one at l+1; ``face_to_edge[l]`` embeds the
    face group into edge group l.  ``graph_product`` is set when the data
    came from a cyclic graph product.
    """

    n: int
    vertex_groups: tuple
    edge_groups: tuple
    face_group: FiniteGroup
    face_to_edge: tuple
    edge_to_tail: tuple
    edge_to_head: tuple
    graph_product: GraphProductSpec | None = None

    def __post_init__(self):
        if self.n < 3:
            raise InvalidInputError("a polygon needs at least 3 sides")
        sizes = (len(self.vertex_groups), len(self.edge_groups),
                 len(self.face_to_edge), len(self.edge_to_tail), len(self.edge_to_head))
        if sizes != (self.n,) * 5:
            raise InvalidInputError("invalid polygon: per-side data has wrong length")

    def validate(self) -> None:
        for l in range(self.n):
            _check_hom(self.face_to_edge[l], self.face_group, self.edge_groups[l],
                       f"face map into edge {l}")
            _check_hom(self.edge_to_tail[l], self.edge_groups[l], self.vertex_groups[l],
                       f"tail map of edge {l}")
            _check_hom(self.edge_to_head[l], self.edge_groups[l],
                       self.vertex_groups[(l + 1) % self.n], f"head map of edge {l}")
        for i in range(self.n):
            # both routes from the face group into the vertex group at i
            prev = (i - 1) % self.n
            for c in range(self.face_group.order):
                via_tail = self.edge_to_tail[i][self.face_to_edge[i][c]]
                via_head = self.edge_to_head[prev][self.face_to_edge[prev][c]]
                if via_tail != via_head:
                    raise InvalidInputError(
                        f"invalid polygon: face square at vertex {i} does not commute"
                    )

    def tail_image(self, l: int) -> frozenset:
        """Image of edge group l in the vertex group at l."""
        return frozenset(self.edge_to_tail[l])

    def head_image(self, l: int) -> frozenset:
        """Image of edge group l in the vertex group at l+1."""
        return frozenset(self.edge_to_head[l])

    def edge_images_at_vertex(self, i: int) -> tuple[frozenset, frozenset]:
        """Images in G_{x_i} of the two incident edge groups (e_i, e_{i-1})."""
        return self.tail_image(i), self.head_image((i - 1) % self.n)

    @staticmethod
    def from_graph_product(spec: GraphProductSpec) -> "PolygonOfGroups":
        n = spec.n
        edge_groups = tuple(make_cyclic_group(t) for t in spec.orders)
        vertex_groups = tuple(vertex_group(spec, i) for i in range(n))
        trivial = make_cyclic_group(1)
        face_to_edge = tuple((0,) for _ in range(n))
        # vertex group at i indexes pairs (u, v) as u * t_i + v
        edge_to_tail = tuple(
            tuple(range(spec.orders[l])) for l in range(n)
        )
        edge_to_head = tuple(
            tuple(a * spec.orders[(l + 1) % n] for a in range(spec.orders[l]))
            for l in range(n)
        )
        poly = PolygonOfGroups(
            n=n, vertex_groups=vertex_groups, edge_groups=edge_groups,
            face_group=trivial, face_to_edge=face_to_edge,
            edge_to_tail=edge_to_tail, edge_to_head=edge_to_head,
            graph_product=spec,
        )
        poly.validate()
        return poly


def cyclic_polygon(orders) -> PolygonOfGroups:
    """Polygon with cyclic edge groups and product vertex groups.

    Unlike the graph-product route this allows any n >= 3, at the price of
    carrying no word machinery.
    """
    orders = tuple(int(t) for t in orders)
    n = len(orders)
    if n < 3:
        raise InvalidInputError("need at least 3 edge orders")
    if any(t < 1 for t in orders):
        raise InvalidInputError("edge orders must be positive")
    edge_groups = tuple(make_cyclic_group(t) for t in orders)
    vertex_groups = tuple(
        direct_product(edge_groups[(i - 1) % n], edge_groups[i]) for i in range(n)
    )
    trivial = make_cyclic_group(1)
    poly = PolygonOfGroups(
        n=n,
        vertex_groups=vertex_groups,
        edge_groups=edge_groups,
        face_group=trivial,
        face_to_edge=tuple((0,) for _ in range(n)),
        edge_to_tail=tuple(tuple(range(orders[l])) for l in range(n)),
        edge_to_head=tuple(
            tuple(a * orders[(l + 1) % n] for a in range(orders[l])) for l in range(n)
        ),
    )
    poly.validate()
    return poly


def polygon_from_json(obj) -> PolygonOfGroups:
    if isinstance(obj, str):
        import json

        obj = json.loads(obj)
    if "orders" in obj or "factors" in obj or obj.get("type") == "cyclic-graph-product":
        return PolygonOfGroups.from_graph_product(group_spec_from_json(obj))
    try:
        n = int(obj["n"])
        vgs = tuple(finite_group_from_json(g) for g in obj["vertexGroups"])
        egs = tuple(finite_group_from_json(g) for g in obj["edgeGroups"])
        fg = finite_group_from_json(obj["faceGroup"])
        maps = obj["maps"]
        poly = PolygonOfGroups(
            n=n, vertex_groups=vgs, edge_groups=egs, face_group=fg,
            face_to_edge=tuple(tuple(m) for m in maps["faceToEdge"]),
            edge_to_tail=tuple(tuple(m) for m in maps["edgeToTail"]),
            edge_to_head=tuple(tuple(m) for m in maps["edgeToHead"]),
        )
    except (KeyError, TypeError) as exc:
        raise InvalidInputError(f"malformed polygon JSON: {exc}") from exc
    poly.validate()
    return poly


# ---------------------------------------------------------------------------
# Parity classes of edge indices (n even)


def parity_class(n: int, parity: str) -> tuple:
    """Edge indices of one alternating class; "even" is the class of edge n-1."""
    if n % 2:
        raise InvalidInputError("parity classes need an even-sided polygon")
    if parity not in ("even", "odd"):
        raise InvalidInputError(f"unknown parity {parity!r}")
    want_odd_index = parity == "even"
    return tuple(l for l in range(n) if (l % 2 == 1) == want_odd_index)


def even_side_edge(i: int, n: int) -> int:
    """The even-class edge incident to vertex i."""
    return (i - 1) % n if i % 2 == 0 else i


def odd_side_edge(i: int, n: int) -> int:
    """The odd-class edge incident to vertex i."""
    return i if i % 2 == 0 else (i - 1) % n


# ---------------------------------------------------------------------------
# Links and curvature


@dataclass
class LinkGraph:
    """Link of a polygon vertex: bipartite coset graph of the two edges."""

    vertex_index: int
    tail_cosets: list  # cosets of the edge-i image, frozensets
    head_cosets: list  # cosets of the edge-(i-1) image
    edges: set  # pairs (tail coset id, head coset id)

    @property
    def vertex_count(self) -> int:
        return len(self.tail_cosets) + len(self.head_cosets)

    def is_complete_bipartite(self) -> bool:
        return len(self.edges) == len(self.tail_cosets) * len(self.head_cosets)

    def adjacency(self) -> dict:
        adj: dict = {}
        for a, b in sorted(self.edges):
            adj.setdefault(("t", a), []).append(("h", b))
            adj.setdefault(("h", b), []).append(("t", a))
        for v in [("t", a) for a in range(len(self.tail_cosets))] + [
            ("h", b) for b in range(len(self.head_cosets))
        ]:
            adj.setdefault(v, [])
        return adj

    def girth(self) -> float:
        """Length of a shortest cycle, math.inf for a forest.

        Breadth-first search from every vertex; ties broken by vertex id
        through the sorted iteration order.
        """
        adj = self.adjacency()
        best = math.inf
        for start in sorted(adj):
            dist = {start: 0}
            parent = {start: None}
            queue = [start]
            while queue:
                nxt = []
                for u in queue:
                    for v in adj[u]:
                        if v not in dist:
                            dist[v] = dist[u] + 1
                            parent[v] = u
                            nxt.append(v)
                        elif parent[u] != v and parent.get(v) != u:
                            best = min(best, dist[u] + dist[v] + 1)
                queue = nxt
        return best

    def is_connected(self) -> bool:
        adj = self.adjacency()
        if not adj:
            return True
        seen = set()
        stack = [sorted(adj)[0]]
        while stack:
            u = stack.pop()
            if u in seen:
                continue
            seen.add(u)
            stack.extend(adj[u])
        return len(seen) == len(adj)


def _cosets(group: FiniteGroup, subgroup: frozenset) -> tuple[list, dict]:
    reps = []
    member = {}
    for g in range(group.order):
        if g in member:
            continue
        coset = frozenset(group.mul(g, h) for h in subgroup)
        cid = len(reps)
        reps.append(coset)
        for x in coset:
            member[x] = cid
    return reps, member


def link_graph(poly: PolygonOfGroups, i: int) -> LinkGraph:
    if not 0 <= i < poly.n:
        raise InvalidInputError(f"vertex index {i} out of range")
    poly.validate()
    gx = poly.vertex_groups[i]
    tail_img, head_img = poly.edge_images_at_vertex(i)
    tail_cosets, tail_member = _cosets(gx, tail_img)
    head_cosets, head_member = _cosets(gx, head_img)
    edges = {(tail_member[g], head_member[g]) for g in range(gx.order)}
    return LinkGraph(vertex_index=i, tail_cosets=tail_cosets,
                     head_cosets=head_cosets, edges=edges)


@dataclass(frozen=True)
class CurvatureReport:
    n: int
    girths: tuple
    angles: tuple
    acute: bool
    negatively_curved: bool
    degenerate: tuple  # vertex indices with forest links

    def verdict(self) -> str:
        return "negatively-curved-right-angled" if self.negatively_curved else "no"


def angle_and_curvature(poly: PolygonOfGroups) -> CurvatureReport:
    """Vertex angles 2 pi / girth(link) and the curvature verdict.

    The right-angled hyperbolic polygon supporting the development exists
    only from n = 5 on, so n = 4 never earns the negative verdict even
    with all angles at pi/2.
    """
    girths = []
    angles = []
    degenerate = []
    for i in range(poly.n):
        g = link_graph(poly, i).girth()
        girths.append(g)
        angles.append(0.0 if math.isinf(g) else 2.0 * math.pi / g)
        if math.isinf(g):
            degenerate.append(i)
    acute = all(a <= math.pi / 2 + 1e-12 for a in angles)
    negatively = acute and poly.n >= 5 and not degenerate
    return CurvatureReport(
        n=poly.n, girths=tuple(girths), angles=tuple(angles),
        acute=acute, negatively_curved=negatively, degenerate=tuple(degenerate),
    )


# ---------------------------------------------------------------------------
# Finite balls of the developed complex (graph products only)


@dataclass
class ComplexBall:
    """Finite chunk of the developed polygon complex around the base face.

    Faces are group elements; vertices and edges are cosets of the vertex
    and edge groups, keyed by their minimal normal form.  Ids are assigned
    in breadth-first face order, scanning corners 0..n-1, so they are
    reproducible across runs.
    """

    spec: GraphProductSpec
    radius: int
    faces: list
    face_ids: dict
    face_depth: list
    vertices: list  # (i, representative NormalForm)
    vertex_ids: dict
    edges: list  # (l, representative NormalForm)
    edge_ids: dict
    face_vertices: list
    face_edges: list
    edge_faces: dict
    edge_vertices: dict
    vertex_faces: dict

    @property
    def n(self) -> int:
        return self.spec.n

    def face_count(self) -> int:
        return len(self.faces)

    def edge_type(self, eid: int) -> int:
        return self.edges[eid][0]

    def vertex_type(self, vid: int) -> int:
        return self.vertices[vid][0]

    def edge_is_interior(self, eid: int) -> bool:
        l = self.edge_type(eid)
        return len(self.edge_faces[eid]) == self.spec.orders[l]

    def vertex_min_face_depth(self, vid: int) -> int:
        return min(self.face_depth[f] for f in self.vertex_faces[vid])

    def vertex_neighbors(self, vid: int):
        """Adjacent (vertex id, edge id) pairs in the 1-skeleton."""
        out = []
        for eid, (a, b) in self.edge_vertices.items():
            if a == vid:
                out.append((b, eid))
            elif b == vid:
                out.append((a, eid))
        return sorted(out)

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "radius": self.radius,
            "faces": [[list(s) for s in f.syllables] for f in self.faces],
            "vertices": [
                {"corner": i, "rep": [list(s) for s in r.syllables]}
                for i, r in self.vertices
            ],
            "edges": [
                {
                    "side": l,
                    "rep": [list(s) for s in r.syllables],
                    "faces": self.edge_faces[eid],
                    "vertices": list(self.edge_vertices[eid]),
                }
                for eid, (l, r) in enumerate(self.edges)
            ],
            "faceVertices": self.face_vertices,
            "faceEdges": self.face_edges,
        }


def _vertex_coset_rep(spec: GraphProductSpec, g: NormalForm, i: int) -> NormalForm:
    gx = vertex_group(spec, i)
    return min(
        multiply(g, vertex_element_word(spec, i, k), spec) for k in range(gx.order)
    )


def _edge_coset_rep(spec: GraphProductSpec, g: NormalForm, l: int) -> NormalForm:
    best = g
    for a in range(1, spec.orders[l]):
        cand = multiply(g, syllable_word(l, a, spec), spec)
        if cand < best:
            best = cand
    return best


def build_ball(spec: GraphProductSpec, radius: int,
               cap: int = DEFAULT_ELEMENT_CAP) -> ComplexBall:
    """Ball of faces within face-graph distance ``radius`` of the base face.

    Faces adjacent to g are the g*a for nontrivial a in one edge group, so
    the breadth-first layers stay polynomial even though plain word balls
    of the same depth would not.
    """
    if radius < 0:
        raise InvalidInputError("radius must be nonnegative")
    n = spec.n
    faces = [IDENTITY]
    depth = {IDENTITY: 0}
    frontier = [IDENTITY]
    for d in range(1, radius + 1):
        nxt = []
        for g in frontier:
            for l in range(n):
                for a in range(1, spec.orders[l]):
                    h = multiply(g, syllable_word(l, a, spec), spec)
                    if h not in depth:
                        depth[h] = d
                        nxt.append(h)
                        if len(depth) > cap:
                            raise SizeLimitError(
                                f"face ball exceeded the cap of {cap} elements"
                            )
        nxt.sort()
        faces.extend(nxt)
        frontier = nxt
    face_ids = {g: k for k, g in enumerate(faces)}
    vertices: list = []
    vertex_ids: dict = {}
    edges: list = []
    edge_ids: dict = {}
    face_vertices = []
    face_edges = []
    edge_faces: dict = {}
    edge_vertices: dict = {}
    vertex_faces: dict = {}
    for fid, g in enumerate(faces):
        vrow = []
        for i in range(n):
            key = (i, _vertex_coset_rep(spec, g, i))
            vid = vertex_ids.get(key)
            if vid is None:
                vid = len(vertices)
                vertices.append(key)
                vertex_ids[key] = vid
            vrow.append(vid)
            vertex_faces.setdefault(vid, []).append(fid)
        erow = []
        for l in range(n):
            key = (l, _edge_coset_rep(spec, g, l))
            eid = edge_ids.get(key)
            if eid is None:
                eid = len(edges)
                edges.append(key)
                edge_ids[key] = eid
                edge_vertices[eid] = (vrow[l], vrow[(l + 1) % n])
            else:
                # the same coset seen from another face must give the same ends
                if edge_vertices[eid] != (vrow[l], vrow[(l + 1) % n]):
                    raise VerificationError(f"edge coset {key} has unstable endpoints")
            erow.append(eid)
            edge_faces.setdefault(eid, []).append(fid)
        face_vertices.append(vrow)
        face_edges.append(erow)
    return ComplexBall(
        spec=spec, radius=radius, faces=faces, face_ids=face_ids,
        face_depth=[depth[g] for g in faces],
        vertices=vertices, vertex_ids=vertex_ids,
        edges=edges, edge_ids=edge_ids,
        face_vertices=face_vertices, face_edges=face_edges,
        edge_faces=edge_faces, edge_vertices=edge_vertices,
        vertex_faces=vertex_faces,
    )


# ---------------------------------------------------------------------------
# The two trees


@dataclass
class TreeSubgraph:
    parity: str
    class_indices: tuple
    face_nodes: list  # face ids whose element lies in the class subgroup
    edge_nodes: list  # edge ids of class-side midpoints met by those faces
    tree_edges: list  # (face id, edge id) rays
    acyclic: bool

    def face_node_set(self):
        return frozenset(self.face_nodes)

    def edge_node_set(self):
        return frozenset(self.edge_nodes)


def build_trees(ball: ComplexBall, parity: str) -> TreeSubgraph:
    """The parity tree inside the ball: class faces coned to class midpoints."""
    cls = parity_class(ball.n, parity)
    cls_set = frozenset(cls)
    face_nodes = [
        fid for fid, g in enumerate(ball.faces) if support(g) <= cls_set
    ]
    edge_nodes: list = []
    seen = set()
    tree_edges = []
    for fid in face_nodes:
        for l in cls:
            eid = ball.face_edges[fid][l]
            if eid not in seen:
                seen.add(eid)
                edge_nodes.append(eid)
            tree_edges.append((fid, eid))
    # union-find cycle sweep
    parent: dict = {}

    def find(x):
        while parent.get(x, x) != x:
            parent[x] = parent.get(parent[x], parent[x])
            x = parent[x]
        return x

    acyclic = True
    for fid, eid in tree_edges:
        a, b = find(("f", fid)), find(("e", eid))
        if a == b:
            acyclic = False
            break
        parent[a] = b
    return TreeSubgraph(
        parity=parity, class_indices=cls, face_nodes=face_nodes,
        edge_nodes=edge_nodes, tree_edges=tree_edges, acyclic=acyclic,
    )


# ---------------------------------------------------------------------------
# Product classification


@dataclass
class PhiSets:
    """Classification of the products h_j^{-1} g_i over all vertex groups.

    A product is "obvious" for a parity when some representation exhibits
    it inside the corresponding class subgroup: either both factors come
    from class-side edge groups (i != j), or the in-vertex product does
    (i == j).  Classification is by group element, so a product with any
    obvious representation counts as obvious; the witness tuples
    (j, h, i, g) are carried for each element.
    """

    obvious_even: list
    nonobvious_even: list
    obvious_odd: list
    nonobvious_odd: list
    obvious_even_elements: frozenset
    nonobvious_even_elements: frozenset
    obvious_odd_elements: frozenset
    nonobvious_odd_elements: frozenset
    product_count: int

    def partition_ok(self) -> bool:
        return (
            len(self.obvious_even) + len(self.nonobvious_even) == self.product_count
            and len(self.obvious_odd) + len(self.nonobvious_odd) == self.product_count
        )


def _graph_product_phi(spec: GraphProductSpec) -> PhiSets:
    n = spec.n
    orders = spec.orders
    vertex_sizes = [orders[(i - 1) % n] * orders[i] for i in range(n)]
    elements = [
        (i, k) for i in range(n) for k in range(vertex_sizes[i])
    ]
    words = {
        (i, k): vertex_element_word(spec, i, k) for i, k in elements
    }
    inv_words = {key: inverse(w, spec) for key, w in words.items()}

    def side_member(i: int, k: int, parity: str) -> bool:
        u, v = vertex_pair(spec, i, k)
        edge = even_side_edge(i, n) if parity == "even" else odd_side_edge(i, n)
        if edge == (i - 1) % n:
            return v == 0
        return u == 0

    record: dict = {}
    tuples = []
    for j, h in elements:
        for i, g in elements:
            f = multiply(inv_words[(j, h)], words[(i, g)], spec)
            if i != j:
                ob_even = side_member(i, g, "even") and side_member(j, h, "even")
                ob_odd = side_member(i, g, "odd") and side_member(j, h, "odd")
            else:
                gx = vertex_group(spec, i)
                prod = gx.mul(gx.inv(h), g)
                ob_even = side_member(i, prod, "even")
                ob_odd = side_member(i, prod, "odd")
            entry = record.setdefault(f, [False, False])
            entry[0] = entry[0] or ob_even
            entry[1] = entry[1] or ob_odd
            tuples.append((j, h, i, g, f))
    buckets = {"oe": [], "ne": [], "oo": [], "no": []}
    for j, h, i, g, f in tuples:
        ob_even, ob_odd = record[f]
        buckets["oe" if ob_even else "ne"].append((j, h, i, g))
        buckets["oo" if ob_odd else "no"].append((j, h, i, g))
    return PhiSets(
        obvious_even=buckets["oe"],
        nonobvious_even=buckets["ne"],
        obvious_odd=buckets["oo"],
        nonobvious_odd=buckets["no"],
        obvious_even_elements=frozenset(f for f, e in record.items() if e[0]),
        nonobvious_even_elements=frozenset(f for f, e in record.items() if not e[0]),
        obvious_odd_elements=frozenset(f for f, e in record.items() if e[1]),
        nonobvious_odd_elements=frozenset(f for f, e in record.items() if not e[1]),
        product_count=len(tuples),
    )


def phi_sets(poly: PolygonOfGroups) -> PhiSets:
    if poly.n % 2:
        raise InvalidInputError("product classification needs an even-sided polygon")
    if poly.graph_product is not None:
        return _graph_product_phi(poly.graph_product)
    # General polygons: no word problem available, so elements are
    # identified only when forced (same vertex, equal in-vertex product).
    # That can split one group element over several keys, which errs on
    # the side of calling products non-obvious.
    n = poly.n
    elements = [
        (i, k) for i in range(n) for k in range(poly.vertex_groups[i].order)
    ]

    def side_images(i, parity):
        edge = even_side_edge(i, n) if parity == "even" else odd_side_edge(i, n)
        return poly.tail_image(edge) if edge == i else poly.head_image(edge)

    record: dict = {}
    tuples = []
    for j, h in elements:
        for i, g in elements:
            if i == j:
                gx = poly.vertex_groups[i]
                prod = gx.mul(gx.inv(h), g)
                key = ("id",) if prod == 0 else ("diag", i, prod)
                ob_even = prod in side_images(i, "even")
                ob_odd = prod in side_images(i, "odd")
            else:
                key = ("id",) if h == 0 and g == 0 else ("pair", j, h, i, g)
                ob_even = g in side_images(i, "even") and h in side_images(j, "even")
                ob_odd = g in side_images(i, "odd") and h in side_images(j, "odd")
            entry = record.setdefault(key, [False, False])
            entry[0] = entry[0] or ob_even
            entry[1] = entry[1] or ob_odd
            tuples.append((j, h, i, g, key))
    buckets = {"oe": [], "ne": [], "oo": [], "no": []}
    for j, h, i, g, key in tuples:
        ob_even, ob_odd = record[key]
        buckets["oe" if ob_even else "ne"].append((j, h, i, g))
        buckets["oo" if ob_odd else "no"].append((j, h, i, g))
    return PhiSets(
        obvious_even=buckets["oe"],
        nonobvious_even=buckets["ne"],
        obvious_odd=buckets["oo"],
        nonobvious_odd=buckets["no"],
        obvious_even_elements=frozenset(k for k, e in record.items() if e[0]),
        nonobvious_even_elements=frozenset(k for k, e in record.items() if not e[0]),
        obvious_odd_elements=frozenset(k for k, e in record.items() if e[1]),
        nonobvious_odd_elements=frozenset(k for k, e in record.items() if not e[1]),
        product_count=len(tuples),
    )


# ---------------------------------------------------------------------------
# Separation under a finite quotient


@dataclass
class SeparationReport:
    passed: bool
    even_image: tuple
    odd_image: tuple
    violations: list
    phi: PhiSets

    def certificate(self) -> dict:
        return {
            "passed": self.passed,
            "evenImageOrder": len(self.even_image),
            "oddImageOrder": len(self.odd_image),
            "violations": self.violations,
        }


def class_subgroup_image(spec: GraphProductSpec, hom: GroupHom, parity: str) -> tuple:
    gens = []
    for l in parity_class(spec.n, parity):
        gens.extend(hom.factor_images[l][a] for a in range(1, spec.orders[l]))
    return subgroup_generated(hom.target, gens)


def verify_separation(poly: PolygonOfGroups, hom: GroupHom) -> SeparationReport:
    """Check that non-obvious products stay out of the class images.

    For each parity, no element of the non-obvious set may map into the
    image of the class subgroup.  Violations are returned as certificate
    entries; an empty list means the quotient separates.
    """
    spec = poly.graph_product
    if spec is None:
        raise InvalidInputError("separation checking needs a graph-product polygon")
    if hom.spec.orders != spec.orders:
        raise InvalidInputError("homomorphism is defined over a different product")
    phi = phi_sets(poly)
    violations = []
    images = {}
    for parity, bad in (
        ("even", phi.nonobvious_even_elements),
        ("odd", phi.nonobvious_odd_elements),
    ):
        img = class_subgroup_image(spec, hom, parity)
        images[parity] = img
        img_set = frozenset(img)
        for f in sorted(bad):
            if hom.image_of(f) in img_set:
                violations.append(
                    {
                        "parity": parity,
                        "word": [list(s) for s in f.syllables],
                        "image": hom.image_of(f),
                    }
                )
    return SeparationReport(
        passed=not violations,
        even_image=images["even"],
        odd_image=images["odd"],
        violations=violations,
        phi=phi,
    )


# ---------------------------------------------------------------------------
# The finite quotient complex and the orbit span


@dataclass
class QuotientComplex:
    """Edge set of the quotient complex with the two indicator vectors.

    Edges split into n components, one per side; component l holds the
    cosets of the image of edge group l in the image group.  xi and eta
    are the normalized indicators of the class-side coset families met by
    the class subgroups, and ``basis`` spans their orbit under the image
    group action (dimension p).
    """

    spec: GraphProductSpec
    hom: GroupHom
    group_elements: tuple  # sorted image subgroup
    components: list  # per side: list of coset frozensets
    coset_offsets: list
    coset_lookup: dict  # (l, member element) -> global coset index
    s_even: tuple
    s_odd: tuple
    xi: np.ndarray
    eta: np.ndarray
    basis: np.ndarray | None
    p: int
    invariance_residual: float

    @property
    def edge_count(self) -> int:
        return self.coset_offsets[-1]

    def permutation_of(self, s: int):
        """Global coset permutation induced by left multiplication by s."""
        t = self.hom.target
        perm = np.empty(self.edge_count, dtype=np.int64)
        for l in range(self.spec.n):
            for local, coset in enumerate(self.components[l]):
                rep = next(iter(coset))
                src = self.coset_offsets[l] + local
                perm[src] = self.coset_lookup[(l, t.mul(s, rep))]
        return perm

    def apply_permutation(self, s: int, vec):
        perm = self.permutation_of(s)
        out = np.zeros_like(vec)
        out[perm] = vec
        return out

    def action_matrix(self, s: int):
        """Orbit-span action of s with its invariance residual."""
        PB = np.zeros_like(self.basis)
        perm = self.permutation_of(s)
        PB[perm, :] = self.basis
        A = self.basis.T @ PB
        residual = float(np.abs(PB - self.basis @ A).max())
        return A, residual

    def vertex_action_matrix(self, i: int, k: int):
        return self.action_matrix(self.hom.image_of_vertex_element(i, k))


def quotient_complex(
    poly: PolygonOfGroups, hom: GroupHom,
    report: SeparationReport | None = None,
) -> QuotientComplex:
    spec = poly.graph_product
    if spec is None:
        raise InvalidInputError("quotient complexes need a graph-product polygon")
    if report is None:
        report = verify_separation(poly, hom)
    if not report.passed:
        raise VerificationError(
            "quotient does not separate the non-obvious products",
            certificate=report.certificate(),
        )
    t = hom.target
    elements = hom.image_subgroup()
    elem_set = frozenset(elements)
    components = []
    coset_offsets = [0]
    coset_lookup: dict = {}
    for l in range(spec.n):
        sub = [hom.factor_images[l][a] for a in range(spec.orders[l])]
        cosets = []
        for s in elements:
            if (l, s) in coset_lookup:
                continue
            coset = frozenset(t.mul(s, x) for x in sub)
            cid = coset_offsets[l] + len(cosets)
            cosets.append(coset)
            for x in coset:
                coset_lookup[(l, x)] = cid
        components.append(cosets)
        coset_offsets.append(coset_offsets[l] + len(cosets))
    total = coset_offsets[-1]

    even_img = frozenset(report.even_image)
    odd_img = frozenset(report.odd_image)
    s_even = []
    s_odd = []
    for parity, img, out in (("even", even_img, s_even), ("odd", odd_img, s_odd)):
        for l in parity_class(spec.n, parity):
            for local, coset in enumerate(components[l]):
                if coset & img:
                    out.append(coset_offsets[l] + local)
    if set(s_even) & set(s_odd):
        raise VerificationError("parity coset families overlap")
    xi = np.zeros(total)
    xi[sorted(s_even)] = 1.0 / math.sqrt(len(s_even))
    eta = np.zeros(total)
    eta[sorted(s_odd)] = 1.0 / math.sqrt(len(s_odd))

    qc = QuotientComplex(
        spec=spec, hom=hom, group_elements=elements,
        components=components, coset_offsets=coset_offsets,
        coset_lookup=coset_lookup,
        s_even=tuple(sorted(s_even)), s_odd=tuple(sorted(s_odd)),
        xi=xi, eta=eta, basis=None, p=0, invariance_residual=0.0,
    )
    ortho: list = []
    for vec in [xi, eta] + [
        qc.apply_permutation(s, v) for s in elements for v in (xi, eta)
    ]:
        w = vec.copy()
        for b in ortho:
            w -= (w @ b) * b
        nw = float(np.linalg.norm(w))
        if nw > 1e-8:
            ortho.append(w / nw)
    qc.basis = np.column_stack(ortho)
    qc.p = len(ortho)
    resid = 0.0
    for s in elements:
        _, r = qc.action_matrix(s)
        resid = max(resid, r)
    qc.invariance_residual = resid
    if qc.p > 2 * len(elements):
        raise VerificationError("orbit span exceeded its bound")
    return qc


# ---------------------------------------------------------------------------
# Local tree-stabilizer scan


@dataclass
class StabilizerReport:
    parity: str
    checked: int
    preserving: list  # elements that carry the restricted tree into the tree
    violations: list  # preserving elements that are not obvious

    def ok(self) -> bool:
        return not self.violations


def stabilizer_check(
    ball: ComplexBall, parity: str, products=None
) -> StabilizerReport:
    """Scan products h_j^{-1} g_i for unexpected local tree stabilizers.

    Images of tree nodes within face depth radius-2 stay inside the ball,
    so tree membership of the image decides preservation; any preserving
    product outside the obvious set is a violation.
    """
    spec = ball.spec
    n = spec.n
    if n % 2:
        raise InvalidInputError("stabilizer scan needs an even-sided polygon")
    if ball.radius < 3:
        raise InvalidInputError("ball radius below 3 is inconclusive")
    cls = frozenset(parity_class(n, parity))
    tree = build_trees(ball, parity)
    inner = [
        fid for fid in tree.face_nodes if ball.face_depth[fid] <= ball.radius - 2
    ]
    if not inner:
        raise InvalidInputError("no interior tree nodes at this radius")
    phi = phi_sets(PolygonOfGroups.from_graph_product(spec))
    obvious = (
        phi.obvious_even_elements if parity == "even" else phi.obvious_odd_elements
    )
    if products is None:
        elements = [
            (i, k)
            for i in range(n)
            for k in range(vertex_group(spec, i).order)
        ]
        words = {key: vertex_element_word(spec, key[0], key[1]) for key in elements}
        seen = set()
        products = []
        for j, h in elements:
            for i, g in elements:
                f = multiply(inverse(words[(j, h)], spec), words[(i, g)], spec)
                if f not in seen:
                    seen.add(f)
                    products.append(f)
    preserving = []
    violations = []
    for f in products:
        ok = True
        for fid in inner:
            image = multiply(f, ball.faces[fid], spec)
            if not support(image) <= cls:
                ok = False
                break
            for l in cls:
                # image of the midpoint node: the coset image*A_l, which
                # meets the class subgroup iff some translate does
                if not any(
                    support(multiply(image, syllable_word(l, a, spec), spec)) <= cls
                    for a in range(spec.orders[l])
                ):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            preserving.append(f)
            if f not in obvious:
                violations.append(
                    {"parity": parity, "word": [list(s) for s in f.syllables]}
                )
    return StabilizerReport(
        parity=parity, checked=len(products),
        preserving=preserving, violations=violations,
    )
