"""Polygon-of-groups combinatorics tests.

Expected counts were derived by hand before wiring them here: the
radius-1 face count is 1 + sum(t_l - 1) by direct gluing, the hexagon
tree at radius 2 has 10 face nodes, 21 midpoint nodes and 30 rays
(1 + 3 + 6 reduced words in a free product of three involutions, with
coset partners sharing or leaving the ball), and the orbit span of the
order-64 quotient decomposes into 8 + 8 coset-indicator blocks.
"""
from __future__ import annotations

import math

import networkx as nx
import numpy as np
import pytest

from polyrep import complexes as cx
from polyrep.errors import InvalidInputError, SizeLimitError, VerificationError
from polyrep.groups import (
    GraphProductSpec,
    GroupHom,
    IDENTITY,
    enumerate_ball,
    make_cyclic_group,
    multiply,
    normal_form,
    support,
    tautological_quotient,
    vertex_group,
)


def z2_spec(n):
    return GraphProductSpec(tuple(make_cyclic_group(2) for _ in range(n)))


def hexagon_poly():
    return cx.PolygonOfGroups.from_graph_product(z2_spec(6))


def nx_link(link):
    g = nx.Graph()
    for a in range(len(link.tail_cosets)):
        g.add_node(("t", a))
    for b in range(len(link.head_cosets)):
        g.add_node(("h", b))
    for a, b in link.edges:
        g.add_edge(("t", a), ("h", b))
    return g


def brute_girth(g):
    best = math.inf
    for u, v in list(g.edges):
        g.remove_edge(u, v)
        try:
            best = min(best, nx.shortest_path_length(g, u, v) + 1)
        except nx.NetworkXNoPath:
            pass
        g.add_edge(u, v)
    return best


# ---------------------------------------------------------------------------
# Polygon data and links


def test_graph_product_polygon_validates():
    poly = hexagon_poly()
    assert poly.n == 6
    assert all(g.order == 4 for g in poly.vertex_groups)
    poly.validate()


def test_non_injective_map_rejected():
    poly = cx.cyclic_polygon([2, 2, 2, 2, 2])
    bad = cx.PolygonOfGroups(
        n=5,
        vertex_groups=poly.vertex_groups,
        edge_groups=poly.edge_groups,
        face_group=poly.face_group,
        face_to_edge=poly.face_to_edge,
        edge_to_tail=((0, 0),) + poly.edge_to_tail[1:],
        edge_to_head=poly.edge_to_head,
    )
    with pytest.raises(InvalidInputError):
        bad.validate()


def test_link_is_k22_for_involution_pentagon():
    poly = cx.PolygonOfGroups.from_graph_product(z2_spec(5))
    for i in range(5):
        link = cx.link_graph(poly, i)
        assert link.is_complete_bipartite()
        assert nx.is_isomorphic(nx_link(link), nx.complete_bipartite_graph(2, 2))
        assert link.girth() == 4


def test_link_is_k33_for_order3_factors():
    spec = GraphProductSpec(tuple(make_cyclic_group(3) for _ in range(5)))
    poly = cx.PolygonOfGroups.from_graph_product(spec)
    link = cx.link_graph(poly, 2)
    assert nx.is_isomorphic(nx_link(link), nx.complete_bipartite_graph(3, 3))
    assert link.girth() == brute_girth(nx_link(link)) == 4


def test_link_girth_matches_brute_force_mixed_orders():
    poly = cx.cyclic_polygon([2, 3, 2, 3, 2, 3])
    for i in range(6):
        link = cx.link_graph(poly, i)
        g = nx_link(link)
        assert link.girth() == brute_girth(g)
        t_prev = poly.edge_groups[(i - 1) % 6].order
        t_cur = poly.edge_groups[i].order
        # sides: cosets of the edge-i image number t_{i-1}, and vice versa
        assert len(link.tail_cosets) == t_prev
        assert len(link.head_cosets) == t_cur


def test_trivial_edge_groups_make_a_forest_link():
    z2 = make_cyclic_group(2)
    triv = make_cyclic_group(1)
    poly = cx.PolygonOfGroups(
        n=4,
        vertex_groups=(z2,) * 4,
        edge_groups=(triv,) * 4,
        face_group=triv,
        face_to_edge=((0,),) * 4,
        edge_to_tail=((0,),) * 4,
        edge_to_head=((0,),) * 4,
    )
    link = cx.link_graph(poly, 0)
    assert not link.is_connected()
    assert math.isinf(link.girth())
    rep = cx.angle_and_curvature(poly)
    assert rep.degenerate == (0, 1, 2, 3)
    assert rep.angles[0] == 0.0
    assert not rep.negatively_curved


def test_curvature_verdict_needs_five_sides():
    square = cx.cyclic_polygon([2, 2, 2, 2])
    rep = cx.angle_and_curvature(square)
    assert all(abs(a - math.pi / 2) < 1e-12 for a in rep.angles)
    assert rep.acute and not rep.negatively_curved

    pent = cx.PolygonOfGroups.from_graph_product(z2_spec(5))
    rep5 = cx.angle_and_curvature(pent)
    assert all(g == 4 for g in rep5.girths)
    assert rep5.negatively_curved
    assert rep5.verdict() == "negatively-curved-right-angled"


def test_polygon_json_roundtrip():
    poly = cx.polygon_from_json({"type": "cyclic-graph-product", "orders": [2] * 6})
    assert poly.graph_product is not None
    full = cx.polygon_from_json(
        {
            "n": 3,
            "vertexGroups": [{"type": "cyclic", "order": 2}] * 3,
            "edgeGroups": [{"type": "cyclic", "order": 1}] * 3,
            "faceGroup": {"type": "cyclic", "order": 1},
            "maps": {
                "faceToEdge": [[0]] * 3,
                "edgeToTail": [[0]] * 3,
                "edgeToHead": [[0]] * 3,
            },
        }
    )
    assert full.n == 3
    with pytest.raises(InvalidInputError):
        cx.polygon_from_json({"n": 3})


# ---------------------------------------------------------------------------
# Parity classes


def test_parity_classes():
    assert cx.parity_class(6, "even") == (1, 3, 5)
    assert cx.parity_class(6, "odd") == (0, 2, 4)
    with pytest.raises(InvalidInputError):
        cx.parity_class(5, "even")
    with pytest.raises(InvalidInputError):
        cx.parity_class(6, "sideways")
    # the even-side edge at the base vertex is the last one
    assert cx.even_side_edge(0, 6) == 5
    assert cx.odd_side_edge(0, 6) == 0
    assert cx.even_side_edge(1, 6) == 1
    assert cx.odd_side_edge(1, 6) == 0


# ---------------------------------------------------------------------------
# Balls


def test_ball_radius_zero():
    ball = cx.build_ball(z2_spec(5), 0)
    assert ball.face_count() == 1
    assert len(ball.vertices) == 5
    assert len(ball.edges) == 5
    assert not ball.edge_is_interior(0)


def test_pentagon_ball_counts():
    spec = z2_spec(5)
    ball1 = cx.build_ball(spec, 1)
    assert ball1.face_count() == 1 + 5 * (2 - 1)
    for l in range(5):
        eid = ball1.face_edges[0][l]
        assert len(ball1.edge_faces[eid]) == 2
        assert ball1.edge_is_interior(eid)
    ball2 = cx.build_ball(spec, 2)
    assert ball2.face_count() == 21
    # face-graph depth coincides with syllable length, so the face set is
    # exactly the word ball
    assert set(ball2.faces) == set(enumerate_ball(spec, 2))


def test_radius_one_count_formula_mixed_orders():
    spec = GraphProductSpec(tuple(make_cyclic_group(t) for t in (2, 3, 2, 3, 2, 3)))
    ball = cx.build_ball(spec, 1)
    assert ball.face_count() == 1 + sum(t - 1 for t in spec.orders)
    ball2 = cx.build_ball(spec, 2)
    assert set(ball2.faces) == set(enumerate_ball(spec, 2))
    # interior edge thickness equals the edge-group order
    for l in range(6):
        eid = ball2.face_edges[0][l]
        assert len(ball2.edge_faces[eid]) == spec.orders[l]


def test_ball_determinism_and_cap():
    spec = z2_spec(6)
    a = cx.build_ball(spec, 2)
    b = cx.build_ball(spec, 2)
    assert a.faces == b.faces
    assert a.vertices == b.vertices
    assert a.edges == b.edges
    assert a.face_edges == b.face_edges
    with pytest.raises(SizeLimitError):
        cx.build_ball(spec, 2, cap=5)
    with pytest.raises(InvalidInputError):
        cx.build_ball(spec, -1)


def test_ball_vertex_face_links():
    ball = cx.build_ball(z2_spec(5), 1)
    # corner vertices of the base face touch it and both glued neighbors
    for i in range(5):
        vid = ball.face_vertices[0][i]
        assert 0 in ball.vertex_faces[vid]
        assert ball.vertex_min_face_depth(vid) == 0
    data = ball.to_json_dict()
    assert data["n"] == 5 and len(data["faces"]) == 6


# ---------------------------------------------------------------------------
# Trees


def test_tree_star_at_radius_zero():
    ball = cx.build_ball(z2_spec(6), 0)
    tree = cx.build_trees(ball, "even")
    assert tree.face_nodes == [0]
    assert len(tree.edge_nodes) == 3
    assert len(tree.tree_edges) == 3
    assert tree.acyclic


def test_trees_undefined_for_odd_n():
    ball = cx.build_ball(z2_spec(5), 1)
    with pytest.raises(InvalidInputError):
        cx.build_trees(ball, "even")


def test_hexagon_trees_radius_two():
    ball = cx.build_ball(z2_spec(6), 2)
    even = cx.build_trees(ball, "even")
    odd = cx.build_trees(ball, "odd")
    for tree in (even, odd):
        assert tree.acyclic
        assert len(tree.face_nodes) == 10
        assert len(tree.edge_nodes) == 21
        assert len(tree.tree_edges) == 30
        g = nx.Graph()
        for fid, eid in tree.tree_edges:
            g.add_edge(("f", fid), ("e", eid))
        assert nx.is_forest(g)
        assert nx.is_connected(g)
    # the trees share the base face but no rays
    assert set(even.tree_edges).isdisjoint(odd.tree_edges)
    assert set(even.edge_nodes).isdisjoint(odd.edge_nodes)
    assert set(even.face_nodes) & set(odd.face_nodes) == {0}


def test_tree_faces_lie_in_class_subgroup():
    ball = cx.build_ball(z2_spec(6), 2)
    tree = cx.build_trees(ball, "even")
    for fid in tree.face_nodes:
        assert support(ball.faces[fid]) <= set(tree.class_indices)


# ---------------------------------------------------------------------------
# Product classification


@pytest.fixture(scope="module")
def hex_phi():
    return cx.phi_sets(hexagon_poly())


def test_phi_partition_count(hex_phi):
    # six vertex groups of order 4: 24 elements, 576 ordered products
    assert hex_phi.product_count == 576
    assert hex_phi.partition_ok()


def test_identity_is_obvious_both_ways(hex_phi):
    assert IDENTITY in hex_phi.obvious_even_elements
    assert IDENTITY in hex_phi.obvious_odd_elements


def test_single_odd_syllable_classification(hex_phi):
    spec = z2_spec(6)
    f = normal_form([(0, 1)], spec)
    assert f in hex_phi.obvious_odd_elements
    assert f in hex_phi.nonobvious_even_elements
    g = normal_form([(5, 1)], spec)
    assert g in hex_phi.obvious_even_elements
    assert g in hex_phi.nonobvious_odd_elements


def test_mixed_vertex_element_is_nonobvious(hex_phi):
    spec = z2_spec(6)
    f = normal_form([(5, 1), (0, 1)], spec)
    assert f in hex_phi.nonobvious_even_elements
    assert f in hex_phi.nonobvious_odd_elements


def test_obvious_elements_lie_in_class_subgroups(hex_phi):
    for f in hex_phi.obvious_even_elements:
        assert support(f) <= {1, 3, 5}
    for f in hex_phi.obvious_odd_elements:
        assert support(f) <= {0, 2, 4}


def test_general_polygon_phi_is_conservative():
    # table-backed copy of the hexagon: no word problem, so only forced
    # identifications; obvious tuple counts can only shrink
    hexagon = hexagon_poly()
    general = cx.PolygonOfGroups(
        n=6,
        vertex_groups=hexagon.vertex_groups,
        edge_groups=hexagon.edge_groups,
        face_group=hexagon.face_group,
        face_to_edge=hexagon.face_to_edge,
        edge_to_tail=hexagon.edge_to_tail,
        edge_to_head=hexagon.edge_to_head,
    )
    exact = cx.phi_sets(hexagon)
    rough = cx.phi_sets(general)
    assert rough.product_count == exact.product_count
    assert rough.partition_ok()
    assert len(rough.obvious_even) <= len(exact.obvious_even)


# ---------------------------------------------------------------------------
# Separation and the quotient complex


@pytest.fixture(scope="module")
def hex_separation():
    poly = hexagon_poly()
    hom = tautological_quotient(poly.graph_product)
    return poly, hom, cx.verify_separation(poly, hom)


def test_tautological_hexagon_separates(hex_separation):
    _, _, report = hex_separation
    assert report.passed
    assert report.violations == []
    assert len(report.even_image) == 8
    assert len(report.odd_image) == 8


def test_trivial_quotient_fails_separation():
    poly = hexagon_poly()
    spec = poly.graph_product
    hom = GroupHom(
        spec=spec,
        target=make_cyclic_group(1),
        factor_images=tuple((0, 0) for _ in range(6)),
    )
    report = cx.verify_separation(poly, hom)
    assert not report.passed
    assert report.violations
    with pytest.raises(VerificationError):
        cx.quotient_complex(poly, hom)


def test_quotient_complex_hexagon(hex_separation):
    poly, hom, report = hex_separation
    qc = cx.quotient_complex(poly, hom, report)
    assert qc.edge_count == 6 * 64 // 2
    assert len(qc.s_even) == 12
    assert len(qc.s_odd) == 12
    assert abs(qc.xi @ qc.xi - 1.0) < 1e-12
    assert abs(qc.eta @ qc.eta - 1.0) < 1e-12
    assert abs(qc.xi @ qc.eta) < 1e-15
    # orbit span: 8 even-coset blocks plus 8 odd ones
    assert qc.p == 16
    assert qc.p <= 2 * len(qc.group_elements)
    assert np.abs(qc.basis.T @ qc.basis - np.eye(qc.p)).max() < 1e-12
    assert qc.invariance_residual < 1e-9


def test_quotient_action_matrices(hex_separation):
    poly, hom, report = hex_separation
    qc = cx.quotient_complex(poly, hom, report)
    rng = np.random.default_rng(0)
    for s in rng.choice(qc.group_elements, size=6, replace=False):
        A, resid = qc.action_matrix(int(s))
        assert resid < 1e-9
        assert np.abs(A.T @ A - np.eye(qc.p)).max() < 1e-9
    # identity acts as the identity matrix
    A0, r0 = qc.action_matrix(0)
    assert np.abs(A0 - np.eye(qc.p)).max() < 1e-12
    A, r = qc.vertex_action_matrix(0, 3)
    assert r < 1e-9
    assert np.abs(A @ A - np.eye(qc.p)).max() < 1e-9  # involution


def test_quotient_determinism(hex_separation):
    poly, hom, report = hex_separation
    a = cx.quotient_complex(poly, hom, report)
    b = cx.quotient_complex(poly, hom, report)
    assert a.s_even == b.s_even
    assert np.array_equal(a.basis, b.basis)


# ---------------------------------------------------------------------------
# Stabilizer scan


def test_stabilizer_check_preconditions():
    spec = z2_spec(6)
    with pytest.raises(InvalidInputError):
        cx.stabilizer_check(cx.build_ball(spec, 2), "even")
    with pytest.raises(InvalidInputError):
        cx.stabilizer_check(cx.build_ball(z2_spec(5), 3), "odd")


def test_stabilizer_check_hexagon_no_violations():
    ball = cx.build_ball(z2_spec(6), 3)
    for parity, cls in (("even", {1, 3, 5}), ("odd", {0, 2, 4})):
        report = cx.stabilizer_check(ball, parity)
        assert report.ok()
        assert report.violations == []
        assert report.preserving
        for f in report.preserving:
            assert support(f) <= cls


def test_stabilizer_check_finds_planted_violation():
    # a single non-class generator must move the tree off itself
    spec = z2_spec(6)
    ball = cx.build_ball(spec, 3)
    f = normal_form([(0, 1)], spec)
    report = cx.stabilizer_check(ball, "even", products=[f])
    assert report.preserving == []
    assert report.ok()
