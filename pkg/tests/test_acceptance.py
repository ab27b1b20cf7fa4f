"""End-to-end acceptance criteria, one test per criterion.

Each test pins its tolerances inline and runs against freshly built
objects, so the file doubles as an executable summary of what the
package promises.  Two asserts are expected to fail, and fail for a
geometric reason rather than a software one: a pentagon of order-2
side groups cannot have all non-adjacent wall planes mutually
orthogonal while the generated group stays discrete, so criterion 5's
plane clause and criterion 9's thinned-bisector disjointness clause
report the true measured residuals instead of being weakened.  The
failing clause sits last in each test so the attainable clauses are
all exercised first.
"""
from __future__ import annotations

import math
import time

import networkx as nx
import numpy as np
import pytest

import polyrep.hyperbolic as hyp
from polyrep import distortion as dst
from polyrep.complexes import build_ball, stabilizer_check
from polyrep.groups import (
    GraphProductSpec,
    enumerate_ball,
    make_cyclic_group,
    tautological_quotient,
    vertex_element_word,
)
from polyrep.representation import (
    OrthogonalTwist,
    build_even,
    build_flag_space,
    build_odd,
    extend_representation,
    reflection_chain,
    verify_orthogonality,
    verify_relations,
)

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


def z2_spec(n):
    return GraphProductSpec(tuple(make_cyclic_group(2) for _ in range(n)))


def test_01_polygon_constants():
    start = time.perf_counter()
    t5, t6, t7 = hyp.trig_table(5), hyp.trig_table(6), hyp.trig_table(7)
    elapsed = time.perf_counter() - start
    assert abs(t5.cosh_edge - 1.6180) <= 5e-5
    assert abs(t7.short_diagonal - 2.302366350) <= 1e-8
    assert abs(2.0 * t6.circumradius - 2.292431670) <= 1e-8
    assert elapsed < 1.0


def test_02_diameter_edge_tangency():
    t6 = hyp.trig_table(6)
    product = math.sinh(t6.circumradius) * math.sinh(t6.edge_length / 2.0)
    assert abs(product - 1.0) <= 1e-12
    for n in range(7, 33):
        t = hyp.trig_table(n)
        check = hyp.disjoint_bisectors_test(2.0 * t.circumradius, t.edge_length)
        assert check.margin > 0.0


def test_03_diagonal_chain_margin():
    t5 = hyp.trig_table(5)
    value = math.sinh(t5.short_diagonal / 2.0) ** 2 * t5.cosh_edge
    assert abs(value - 1.309017) <= 1e-5
    assert value > 1.0


def test_04_reflection_cycle_parity():
    even_chain = reflection_chain(hyp.regular_polygon(6, ambient_dim=2))
    assert even_chain.closure_defect() <= 1e-9
    odd_chain = reflection_chain(hyp.regular_polygon(5, ambient_dim=2))
    J = odd_chain.prefix[-1]
    eye = np.eye(J.shape[0])
    assert np.abs(J - eye).max() > 0.1
    assert np.abs(J @ J - eye).max() <= 1e-9


def test_05_pentagon_builder_end_to_end():
    start = time.perf_counter()
    spec = z2_spec(5)
    rep = build_odd(spec, seed=0)
    elapsed = time.perf_counter() - start
    assert rep.p == 10
    for M in rep.generators.values():
        assert hyp.is_isometry_residual(M) <= 1e-9
        assert np.abs(M @ M - np.eye(11)).max() <= 1e-9
    rel = verify_relations(rep)
    assert rel.commutator_residual <= 1e-9
    # continuing the frame chain one extra step must land on side 0 again
    flags = build_flag_space(spec)
    again = hyp.elliptic_at(
        rep.polygon.edge_midpoint(0), rep.frames[5], flags.regular_action_matrix(0, 1)
    )
    assert np.abs(again - rep.generators[("edge", 0, 1)]).max() <= 1e-9
    assert elapsed < 10.0
    # unattainable jointly with a discrete image: the five non-adjacent
    # plane pairs settle at residual 1/2 (walls one edge length apart)
    scan = verify_orthogonality(rep)
    assert scan.all_orthogonal and scan.worst_residual <= 1e-9


def test_06_hexagon_builder_end_to_end():
    start = time.perf_counter()
    spec = z2_spec(6)
    hom = tautological_quotient(spec)
    rep = build_even(spec, hom, seed=0)
    rel = verify_relations(rep)
    scan = verify_orthogonality(rep)
    elapsed = time.perf_counter() - start
    assert rep.p == 16
    assert rel.max_residual() <= 1e-9
    assert scan.all_orthogonal
    assert scan.worst_residual <= 1e-9
    assert elapsed < 60.0


def test_07_ball_matches_enumeration_oracle():
    spec = z2_spec(5)
    assert len(enumerate_ball(spec, 1)) == 6
    assert len(enumerate_ball(spec, 2)) == 21
    ball = build_ball(spec, radius=2)
    g = nx.Graph()
    g.add_nodes_from(range(len(ball.vertices)))
    for a, b in ball.edge_vertices.values():
        g.add_edge(a, b)
    core = [
        v
        for v in range(len(ball.vertices))
        if ball.vertex_min_face_depth(v) <= ball.radius - 1
    ]
    for z in core:
        for w in core:
            if w <= z:
                continue
            path = dst.graph_geodesic(ball, z, w)
            assert path.length() == nx.shortest_path_length(g, z, w)


def test_08_tree_stabilizers_are_obvious():
    start = time.perf_counter()
    ball = build_ball(z2_spec(6), radius=3)
    for parity in ("even", "odd"):
        report = stabilizer_check(ball, parity)
        assert report.ok()
        assert report.checked > 50
        assert len(report.preserving) > 0
    elapsed = time.perf_counter() - start
    assert elapsed < 120.0


def test_09_distortion_evidence():
    spec = z2_spec(5)
    rep = build_odd(spec, seed=0)
    ball = build_ball(spec, radius=4)
    rpt = dst.distortion_report(rep, ball, seed=0)
    a5 = rep.polygon.trig.edge_length
    rows = {row.k: row for row in rpt.rows}
    assert abs(rows[1].dmin - a5) <= 1e-9
    env = rpt.envelope()
    for (k, lo), (k2, hi) in zip(env, env[1:]):
        if k2 <= 2 * ball.radius:
            assert hi >= lo - 1e-12
    assert rpt.slope is not None and rpt.slope > 0.0
    assert rpt.min_displacement > 1e-6
    # unattainable jointly with a discrete image: the bisector thinning
    # argument needs mutually orthogonal diagonal triples, and the carried
    # twist leaves them torsioned, so the thinned pairs intersect
    assert rpt.all_required_disjoint and rpt.delta_min > 1e-3


def test_10_orthogonal_extension():
    spec = z2_spec(5)
    rep = build_odd(spec, seed=0)
    hom = tautological_quotient(spec)
    subgroup = [(0, k) for k in range(4)]
    images = {hom.image_of_vertex_element(i, k) for i, k in subgroup}
    assert len(images) == 4
    twist = OrthogonalTwist.from_group_hom(rep, hom)
    ext = extend_representation(rep, twist)
    assert ext.p == rep.p + hom.target.order
    for M in ext.generators.values():
        assert hyp.is_isometry_residual(M) <= 1e-9
    pad = np.zeros(hom.target.order)
    words = [[(0, 1)], [(0, 1), (2, 1)], [(1, 1), (3, 1), (0, 1)]]
    for word in words:
        base_img = rep.evaluate(word)
        ext_img = ext.evaluate(word)
        for i in range(5):
            for j in range(i + 1, 5):
                u = ext_img @ np.concatenate([rep.polygon.vertex(i), pad])
                v = ext_img @ np.concatenate([rep.polygon.vertex(j), pad])
                want = hyp.distance(
                    base_img @ rep.polygon.vertex(i),
                    base_img @ rep.polygon.vertex(j),
                )
                assert abs(hyp.distance(u, v) - want) <= 1e-12
    eye = np.eye(ext.p + 1)
    for i, k in subgroup[1:]:
        M = ext.evaluate(vertex_element_word(spec, i, k))
        assert np.abs(M - eye).max() > 1e-6
