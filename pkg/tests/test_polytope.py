import numpy as np
import pytest

import attnverify as av
from attnverify import polytope as pt
from attnverify.errors import InfeasibleError, InputError, UnboundedError


def unit_box(dim=2):
    return av.box_polytope(np.array([[0.0, 1.0]] * dim))


def random_polytope(rng, n_cuts=5):
    """Unit box plus random cutting half-spaces through it (2-D, bounded)."""
    P = unit_box()
    rows_A, rows_b, labels = [], [], []
    for k in range(n_cuts):
        a = rng.normal(size=2)
        point = rng.uniform(0.15, 0.85, 2)
        rows_A.append(a)
        rows_b.append(float(a @ point))
        labels.append((0, k))
    cuts = pt.HPolytope(A=np.array(rows_A), b=np.array(rows_b), row_labels=tuple(labels))
    return P.stack(cuts)


def micro_region(micro_f, micro_g, micro_box):
    comp = av.compose(micro_f, micro_g)
    p = av.activation_pattern(comp, [0.6])
    return av.region_halfspaces(comp, p).stack(micro_box)


def test_interior_point_unit_box():
    point = av.feasible_interior_point(unit_box())
    assert point is not None
    assert np.all(point > 0) and np.all(point < 1)


def test_interior_point_empty():
    P = pt.HPolytope(
        A=np.array([[1.0], [-1.0]]), b=np.array([0.0, -1.0]), row_labels=("a", "b")
    )
    assert av.feasible_interior_point(P) is None


def test_interior_point_micro_region(micro_f, micro_g, micro_box):
    point = av.feasible_interior_point(micro_region(micro_f, micro_g, micro_box))
    assert point is not None and 0.5 < point[0] < 1.0


def test_face_point_unit_box():
    P = unit_box()
    point = av.interior_point_on_face(P, (pt.BOX, 0, "hi"))
    assert point is not None
    assert abs(point[0] - 1.0) < 1e-9 and 0 < point[1] < 1


def test_face_point_redundant_row_absent():
    P = unit_box()
    extra = pt.HPolytope(
        A=np.array([[1.0, 0.0]]), b=np.array([2.0]), row_labels=(("r", 0),)
    )
    assert av.interior_point_on_face(P.stack(extra), ("r", 0)) is None


def test_face_point_micro_region(micro_f, micro_g, micro_box):
    P = micro_region(micro_f, micro_g, micro_box)
    # neuron (0,1) of g flips at theta = 0.5
    point = av.interior_point_on_face(P, (0, 1))
    assert point is not None and abs(point[0] - 0.5) < 1e-9


def test_line_point_box_cases():
    P = unit_box()
    along = av.interior_point_on_line(
        P, (pt.BOX, 0, "hi"), (np.zeros(2), np.array([1.0, 0.5]))
    )
    assert along is not None and np.allclose(along, [1.0, 0.5], atol=1e-9)
    # the diagonal exits through the shared corner: no slack on the other row
    corner = av.interior_point_on_line(
        P, (pt.BOX, 0, "hi"), (np.zeros(2), np.array([1.0, 1.0]))
    )
    assert corner is None
    parallel = av.interior_point_on_line(
        P, (pt.BOX, 0, "hi"), (np.zeros(2), np.array([0.0, 1.0]))
    )
    assert parallel is None


def test_line_point_matches_ray_cast_oracle():
    rng = np.random.default_rng(4)
    for _ in range(30):
        P = random_polytope(rng)
        if av.feasible_interior_point(P) is None:
            continue
        direction = rng.uniform(0.2, 1.0, 2)
        for label in P.row_labels:
            got = av.interior_point_on_line(P, label, (np.zeros(2), direction))
            # oracle: parametric crossing of the labelled row, then exhaustive
            # slack check on all other rows
            i = P.row_labels.index(label)
            a, b = P.A[i], P.b[i]
            denom = a @ direction
            expect = None
            if abs(denom) > 1e-12:
                t = (b - 0.0) / denom
                x = t * direction
                if t >= 0:
                    ok = True
                    for jj in range(P.n_rows):
                        if jj == i:
                            continue
                        nrm = max(np.linalg.norm(P.A[jj]), 1e-12)
                        if (P.b[jj] - P.A[jj] @ x) / nrm < pt.EPS:
                            ok = False
                            break
                    if ok:
                        expect = x
            if expect is None:
                assert got is None
            else:
                assert got is not None and np.allclose(got, expect, atol=1e-9)


def test_minimize_linear_box():
    val, arg = av.minimize_linear(unit_box(), np.array([1.0, 0.0]))
    assert abs(val) < 1e-9 and abs(arg[0]) < 1e-9


def test_minimize_linear_micro(micro_f, micro_g, micro_box):
    P = micro_region(micro_f, micro_g, micro_box)
    lo, _ = av.minimize_linear(P, np.array([1.0]))
    hi, _ = av.minimize_linear(P, np.array([-1.0]))
    assert abs(lo - 0.5) < 1e-9
    assert abs(hi + 1.0) < 1e-9


def test_minimize_linear_matches_vertex_enumeration():
    rng = np.random.default_rng(6)
    for _ in range(25):
        P = random_polytope(rng)
        if av.feasible_interior_point(P) is None:
            continue
        c = rng.normal(size=2)
        val, _ = av.minimize_linear(P, c)
        verts = av.vertices_2d(P)
        assert verts, "feasible bounded polytope must have vertices"
        assert abs(val - min(float(c @ v) for v in verts)) < 1e-8


def test_minimize_linear_infeasible():
    P = pt.HPolytope(
        A=np.array([[1.0], [-1.0]]), b=np.array([0.0, -1.0]), row_labels=("a", "b")
    )
    with pytest.raises(InfeasibleError):
        av.minimize_linear(P, np.array([1.0]))


def test_minimize_linear_unbounded():
    P = pt.HPolytope(A=np.array([[1.0, 0.0]]), b=np.array([1.0]), row_labels=("a",))
    with pytest.raises(UnboundedError):
        av.minimize_linear(P, np.array([0.0, 1.0]))


def test_is_stable_examples():
    box = np.array([[0.0, 1.0], [0.0, 1.0]])
    assert av.is_stable((np.array([1.0, 0.0]), 2.0), box)
    assert not av.is_stable((np.array([1.0, 0.0]), 0.5), box)


def test_is_stable_matches_lp_sign_test():
    rng = np.random.default_rng(12)
    box = np.array([[-0.5, 1.0], [0.0, 2.0]])
    P = av.box_polytope(box)
    for _ in range(200):
        a = rng.normal(size=2)
        b = rng.normal()
        lo, _ = av.minimize_linear(P, a)
        hi, _ = av.minimize_linear(P, -a)
        vmin, vmax = lo - b, -hi - b
        assert av.is_stable((a, b), box) == (vmin > 0 or vmax <= 0)


def test_simplify_drops_redundant_row():
    P = unit_box()
    extra = pt.HPolytope(
        A=np.array([[1.0, 0.0]]), b=np.array([2.0]), row_labels=(("r", 0),)
    )
    S = av.simplify(P.stack(extra), fs=set())
    assert ("r", 0) not in S.row_labels
    assert S.n_rows == 4


def test_simplify_micro_region(micro_f, micro_g, micro_box):
    P = micro_region(micro_f, micro_g, micro_box)
    fs = {
        label
        for label in P.row_labels
        if label[0] != pt.BOX
        and av.interior_point_on_face(P, label) is not None
    }
    S = av.simplify(P, fs)
    for theta in np.linspace(-0.2, 1.2, 1001):
        assert S.contains(np.array([theta])) == P.contains(np.array([theta]))


def test_simplify_preserves_feasible_set_sampling():
    rng = np.random.default_rng(9)
    P = random_polytope(rng, n_cuts=6)
    while av.feasible_interior_point(P) is None:
        P = random_polytope(rng, n_cuts=6)
    fs = {
        label
        for label in P.row_labels
        if label[0] != pt.BOX
        and av.interior_point_on_face(P, label) is not None
    }
    S = av.simplify(P, fs)
    pts = rng.uniform(-0.2, 1.2, size=(10_000, 2))
    mismatches = sum(
        P.contains(x) != S.contains(x) for x in pts
    )
    assert mismatches == 0


def test_vertices_unit_box():
    verts = av.vertices_2d(unit_box())
    assert len(verts) == 4
    got = sorted(tuple(np.round(v, 9)) for v in verts)
    assert got == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_vertices_triangle():
    P = pt.HPolytope(
        A=np.array([[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]]),
        b=np.array([0.0, 0.0, 1.0]),
        row_labels=("a", "b", "c"),
    )
    assert len(av.vertices_2d(P)) == 3


def test_vertices_residuals_and_activity():
    rng = np.random.default_rng(14)
    for _ in range(20):
        P = random_polytope(rng)
        norms = np.maximum(np.linalg.norm(P.A, axis=1), 1e-12)
        for v in av.vertices_2d(P):
            slack = (P.b - P.A @ v) / norms
            assert np.all(slack >= -1e-8)
            assert np.sum(np.abs(slack) < 1e-7) >= 2


def test_vertices_requires_2d():
    with pytest.raises(InputError):
        av.vertices_2d(av.box_polytope(np.array([[0.0, 1.0]])))


def test_facet_flip_yields_feasible_neighbor(micro_f, micro_g, micro_box):
    comp = av.compose(micro_f, micro_g)
    p = av.activation_pattern(comp, [0.6])
    P = av.region_halfspaces(comp, p).stack(micro_box)
    for label in P.row_labels:
        if label[0] == pt.BOX:
            continue
        point = av.interior_point_on_face(P, label)
        if point is None:
            continue
        q = av.flip(p, *label)
        Q = av.region_halfspaces(comp, q).stack(micro_box)
        assert av.feasible_interior_point(Q) is not None
