import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gstructure import exprcore as ex
from gstructure.fields import (
    Chart,
    DegenerateFieldError,
    Frame,
    FrameField,
    OneForm,
    ScalarField,
    VectorField,
    adapted_coframe,
    components_in_frame,
    covector_components,
    dual_coframe,
    eval_matrix,
    exterior_derivative,
    frame_right_action,
    lie_bracket,
)
from gstructure.liealg import SingularMatrixError, act

CHART = Chart((0.5, 0.5, 0.5), (1.5, 1.5, 1.5), (4, 4, 4))


def random_poly(rng, degree=2):
    terms = []
    for _ in range(4):
        c = round(float(rng.uniform(-2, 2)), 3)
        powers = rng.integers(0, degree + 1, size=3)
        mono = "*".join(f"X{i + 1}^{p}" for i, p in enumerate(powers) if p) or "1"
        terms.append(f"({c})*{mono}")
    return ex.parse(" + ".join(terms))


def random_invertible(rng):
    while True:
        g = rng.normal(size=(3, 3))
        if abs(np.linalg.det(g)) > 0.2:
            return g


def test_chart_validation():
    with pytest.raises(ValueError):
        Chart((0, 0, 0), (1, 0, 1))
    with pytest.raises(ValueError):
        Chart(resolution=(1, 3, 3))
    assert Chart(resolution=(2, 3, 4)).grid().shape == (24, 3)


def test_grid_order_is_lexicographic():
    pts = Chart(resolution=(2, 2, 2)).grid()
    assert pts[1].tolist() == [0.0, 0.0, 1.0]
    assert pts[4].tolist() == [1.0, 0.0, 0.0]


def test_frame_right_action():
    f = Frame([1, 1, 1], np.eye(3))
    assert np.array_equal(frame_right_action(f, np.eye(3)).matrix, f.matrix)
    g = np.diag([2.0, 1, 1])
    out = frame_right_action(f, g)
    np.testing.assert_array_equal(out.matrix[:, 0], [2, 0, 0])
    np.testing.assert_array_equal(out.point, f.point)
    rng = np.random.default_rng(0)
    f2 = Frame([0, 0, 0], random_invertible(rng))
    g2 = random_invertible(rng)
    back = frame_right_action(frame_right_action(f2, g2), np.linalg.inv(g2))
    np.testing.assert_allclose(back.matrix, f2.matrix, atol=1e-12)
    with pytest.raises(SingularMatrixError):
        frame_right_action(f, np.zeros((3, 3)))


def test_covector_components_examples():
    w = OneForm(["1", "0", "0"])
    np.testing.assert_array_equal(covector_components(w, Frame([1, 1, 1], np.eye(3))), [1, 0, 0])
    f = Frame([1, 1, 1], np.array([[1.0, 1, 0], [0, 1, 0], [0, 0, 1]]))  # columns e1, e2+e1, e3
    np.testing.assert_array_equal(covector_components(w, f), [1, 1, 0])


def test_covector_components_equivariance():
    rng = np.random.default_rng(1)
    for _ in range(50):
        w = OneForm([random_poly(rng) for _ in range(3)])
        x = rng.uniform(0.5, 1.5, size=3)
        f = Frame(x, random_invertible(rng))
        g = random_invertible(rng)
        lhs = covector_components(w, frame_right_action(f, g))
        rhs = covector_components(w, f) @ g
        np.testing.assert_allclose(lhs, rhs, atol=1e-10 * (1 + np.abs(rhs).max()))
        # and the generic type-H law t(fg) = g^-1 t(f)
        t = components_in_frame(w, f)
        np.testing.assert_allclose(lhs, act(np.linalg.inv(g), t, "covector"), atol=1e-10 * (1 + np.abs(t).max()))


def test_exterior_derivative_examples():
    pts = CHART.grid()
    assert np.all(eval_matrix(exterior_derivative(OneForm(["1", "0", "0"])), pts) == 0)
    dw = eval_matrix(exterior_derivative(OneForm(["X2", "0", "0"])), pts)
    assert np.all(dw[:, 0, 1] == -1.0) and np.all(dw[:, 1, 0] == 1.0)
    assert np.all(dw[:, 0, 2] == 0) and np.all(dw[:, 1, 2] == 0)
    exact = ScalarField("X1*X2*X3").differential()
    assert np.max(np.abs(eval_matrix(exterior_derivative(exact), pts))) == 0.0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_d_squared_vanishes(seed):
    rng = np.random.default_rng(seed)
    f = ScalarField(ex.add(random_poly(rng, 3), ex.parse("sin(X1*X2) + exp(X3)*X1")))
    dw = eval_matrix(exterior_derivative(f.differential()), CHART.grid())
    assert np.max(np.abs(dw)) <= 1e-12


def test_lie_bracket_examples():
    pts = CHART.grid()
    d1, d2 = VectorField(["1", "0", "0"]), VectorField(["0", "1", "0"])
    assert np.all(lie_bracket(d1, d2).at(pts) == 0)
    out = lie_bracket(d1, VectorField(["0", "X1", "0"])).at(pts)
    assert np.all(out == np.array([0.0, 1.0, 0.0]))


def test_lie_bracket_antisymmetry_and_self_bracket():
    rng = np.random.default_rng(4)
    pts = CHART.grid()
    for _ in range(10):
        v = VectorField([random_poly(rng) for _ in range(3)])
        w = VectorField([random_poly(rng) for _ in range(3)])
        np.testing.assert_allclose(lie_bracket(v, w).at(pts), -lie_bracket(w, v).at(pts), atol=1e-12)
        assert np.max(np.abs(lie_bracket(v, v).at(pts))) <= 1e-12


def test_dual_coframe_examples():
    pts = CHART.grid()
    ident = FrameField([[1, 0, 0], [0, 1, 0], [0, 0, 1]])
    assert np.allclose(dual_coframe(ident, CHART).at(pts), np.eye(3))
    diag = FrameField([[2, 0, 0], [0, 1, 0], [0, 0, 1]])
    assert np.allclose(dual_coframe(diag, CHART).at(pts), np.diag([0.5, 1, 1]))


def test_dual_coframe_random_frames_against_numeric_inverse():
    rng = np.random.default_rng(7)
    pts = CHART.grid()
    done = 0
    while done < 5:
        m = [[random_poly(rng, 1) for _ in range(3)] for _ in range(3)]
        frame = FrameField(m)
        vals = frame.at(pts)
        if np.min(np.abs(np.linalg.det(vals))) < 0.05:
            continue
        cof = dual_coframe(frame, CHART).at(pts)
        np.testing.assert_allclose(cof, np.linalg.inv(vals), atol=1e-9)
        np.testing.assert_allclose(cof @ vals, np.broadcast_to(np.eye(3), vals.shape), atol=1e-10)
        done += 1


def test_dual_coframe_reports_singular_node():
    frame = FrameField([["X1 - 1", 0, 0], [0, 1, 0], [0, 0, 1]])
    with pytest.raises(DegenerateFieldError) as err:
        dual_coframe(frame, Chart((0, 0, 0), (2, 1, 1), (3, 2, 2)))
    assert err.value.node is not None


def test_adapted_coframe_examples():
    pts = CHART.grid()
    cof = adapted_coframe(OneForm(["1", "0", "0"]), CHART).at(pts)
    assert np.allclose(cof, np.eye(3))
    cof2 = adapted_coframe(OneForm(["0", "1", "0"]), CHART).at(pts)
    assert np.allclose(cof2, np.array([[0, 1, 0], [1, 0, 0], [0, 0, 1]]))
    chart0 = Chart((0, 0, 0), (1, 1, 1), (3, 3, 3))
    cof3 = adapted_coframe(OneForm(["1", "X1", "0"]), chart0).at(chart0.grid())
    np.testing.assert_allclose(cof3[:, 0, 1], chart0.grid()[:, 0])
    assert np.all(np.abs(np.linalg.det(cof3)) > 1e-10)


def test_adapted_coframe_rejects_vanishing_form():
    with pytest.raises(DegenerateFieldError):
        adapted_coframe(OneForm(["X1", "0", "0"]), Chart((0, 0, 0), (1, 1, 1), (3, 3, 3)))
