"""Single-chart body manifold, tensor fields, frames and differential operators."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import exprcore as ex
from .liealg import DET_TOL, Representation, as_rep, check_invertible

COORDS = ("X1", "X2", "X3")
NONVANISHING_TOL = 1e-8


class DegenerateFieldError(ValueError):
    """A field fails a pointwise nondegeneracy requirement on the grid."""

    def __init__(self, message, node=None, point=None):
        super().__init__(message)
        self.node = node
        self.point = point


def _exprs(items) -> tuple[ex.Expr, ...]:
    return tuple(ex.as_expr(x) for x in items)


def _eval_on(e: ex.Expr, points: np.ndarray) -> np.ndarray:
    """Evaluate at an (n, 3) array of points, always returning shape (n,)."""
    b = {name: points[:, i] for i, name in enumerate(COORDS)}
    return np.broadcast_to(np.asarray(ex.evaluate(e, b), dtype=float), (points.shape[0],)).copy()


@dataclass(frozen=True)
class Chart:
    """Axis-aligned box with a sampling grid."""

    lower: tuple[float, float, float] = (0.0, 0.0, 0.0)
    upper: tuple[float, float, float] = (1.0, 1.0, 1.0)
    resolution: tuple[int, int, int] = (3, 3, 3)
    names: tuple[str, str, str] = COORDS

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))
        object.__setattr__(self, "resolution", tuple(int(v) for v in self.resolution))
        object.__setattr__(self, "names", tuple(self.names))
        if len(self.lower) != 3 or len(self.upper) != 3 or len(self.resolution) != 3:
            raise ValueError("chart needs three bounds and three resolutions")
        for a, b in zip(self.lower, self.upper):
            if not a < b:
                raise ValueError(f"chart bounds must satisfy lower < upper, got [{a}, {b}]")
        for n in self.resolution:
            if int(n) < 2:
                raise ValueError("grid resolution must be at least 2 per axis")
        if tuple(self.names) != COORDS:
            raise ValueError(f"coordinate names must be {COORDS}")

    def grid(self) -> np.ndarray:
        """(n, 3) array of grid nodes in lexicographic order (X1 slowest)."""
        axes = [np.linspace(a, b, int(n)) for a, b, n in zip(self.lower, self.upper, self.resolution)]
        return np.array(list(itertools.product(*axes)), dtype=float)

    def contains(self, x, tol=1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= np.asarray(self.lower) - tol) and np.all(x <= np.asarray(self.upper) + tol))

    def node_index(self, x, tol=1e-9) -> int:
        pts = self.grid()
        d = np.max(np.abs(pts - np.asarray(x, dtype=float)), axis=1)
        i = int(np.argmin(d))
        if d[i] > tol:
            raise ValueError(f"point {list(x)} is not a grid node")
        return i


@dataclass(frozen=True)
class ScalarField:
    expr: ex.Expr

    def __init__(self, expr):
        object.__setattr__(self, "expr", ex.as_expr(expr))

    def at(self, points) -> np.ndarray:
        return _eval_on(self.expr, np.atleast_2d(points))

    def differential(self) -> "OneForm":
        return OneForm([ex.diff(self.expr, v) for v in COORDS])


@dataclass(frozen=True)
class VectorField:
    """Contravariant components in the coordinate basis."""

    components: tuple[ex.Expr, ex.Expr, ex.Expr]

    def __init__(self, components):
        comps = _exprs(components)
        if len(comps) != 3:
            raise ValueError("a vector field has 3 components")
        object.__setattr__(self, "components", comps)

    rep = Representation.from_tag("vector")

    def at(self, points) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.stack([_eval_on(c, pts) for c in self.components], axis=-1)


@dataclass(frozen=True)
class OneForm:
    """Covariant components w_i in the coordinate basis."""

    components: tuple[ex.Expr, ex.Expr, ex.Expr]

    def __init__(self, components):
        comps = _exprs(components)
        if len(comps) != 3:
            raise ValueError("a one-form has 3 components")
        object.__setattr__(self, "components", comps)

    rep = Representation.from_tag("covector")

    def at(self, points) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.stack([_eval_on(c, pts) for c in self.components], axis=-1)

    def check_nonvanishing(self, chart: Chart) -> None:
        pts = chart.grid()
        vals = self.at(pts)
        norms = np.max(np.abs(vals), axis=1)
        bad = np.nonzero(norms < NONVANISHING_TOL)[0]
        if bad.size:
            i = int(bad[0])
            raise DegenerateFieldError(
                f"one-form vanishes at grid node {i} (X={pts[i].tolist()})", node=i, point=pts[i]
            )


@dataclass(frozen=True)
class FrameField:
    """3x3 matrix of expressions; column a holds the components of e_a."""

    matrix: tuple[tuple[ex.Expr, ...], ...]

    def __init__(self, matrix):
        rows = tuple(_exprs(r) for r in matrix)
        if len(rows) != 3 or any(len(r) != 3 for r in rows):
            raise ValueError("frame field must be a 3x3 matrix of expressions")
        object.__setattr__(self, "matrix", rows)

    rep = Representation.from_tag("frame")

    @classmethod
    def from_vectors(cls, vectors: Sequence[VectorField]) -> "FrameField":
        return cls([[vectors[a].components[i] for a in range(3)] for i in range(3)])

    def vector(self, a: int) -> VectorField:
        return VectorField([self.matrix[i][a] for i in range(3)])

    def at(self, points) -> np.ndarray:
        pts = np.atleast_2d(points)
        out = np.empty((pts.shape[0], 3, 3))
        for i in range(3):
            for j in range(3):
                out[:, i, j] = _eval_on(self.matrix[i][j], pts)
        return out

    def check_invertible(self, chart: Chart) -> None:
        pts = chart.grid()
        dets = np.linalg.det(self.at(pts))
        bad = np.nonzero(np.abs(dets) <= DET_TOL)[0]
        if bad.size:
            i = int(bad[0])
            raise DegenerateFieldError(
                f"frame is singular at grid node {i} (X={pts[i].tolist()})", node=i, point=pts[i]
            )


@dataclass(frozen=True)
class CoframeField:
    """3x3 matrix of expressions; row a holds the components of e^a."""

    matrix: tuple[tuple[ex.Expr, ...], ...]

    def __init__(self, matrix):
        rows = tuple(_exprs(r) for r in matrix)
        if len(rows) != 3 or any(len(r) != 3 for r in rows):
            raise ValueError("coframe field must be a 3x3 matrix of expressions")
        object.__setattr__(self, "matrix", rows)

    def form(self, a: int) -> OneForm:
        return OneForm(self.matrix[a])

    def at(self, points) -> np.ndarray:
        return FrameField(self.matrix).at(points)


@dataclass(frozen=True)
class TensorField:
    """Generic tensor field: coordinate components as a nested expression
    array of shape ``rep.shape``."""

    rep: Representation
    components: np.ndarray  # object array of Expr

    def __init__(self, rep, components):
        rep = as_rep(rep)
        arr = np.empty(rep.shape, dtype=object)
        src = np.array(components, dtype=object).reshape(rep.shape) if rep.shape else np.array(components, dtype=object).reshape(())
        for idx in np.ndindex(rep.shape):
            arr[idx] = ex.as_expr(src[idx])
        object.__setattr__(self, "rep", rep)
        object.__setattr__(self, "components", arr)

    def at(self, points) -> np.ndarray:
        pts = np.atleast_2d(points)
        out = np.empty((pts.shape[0],) + self.rep.shape)
        for idx in np.ndindex(self.rep.shape):
            out[(slice(None),) + idx] = _eval_on(self.components[idx], pts)
        return out


# ------------------------------------------------------------------ frames

@dataclass(frozen=True)
class Frame:
    """A basis of the tangent space at ``point``; columns are the e_a."""

    point: np.ndarray
    matrix: np.ndarray

    def __init__(self, point, matrix):
        m = check_invertible(matrix, "frame")
        object.__setattr__(self, "point", np.asarray(point, dtype=float).reshape(3))
        object.__setattr__(self, "matrix", m)


def frame_right_action(f: Frame, g) -> Frame:
    """The frame f.g: new basis vectors are combinations of the old columns."""
    g = check_invertible(g)
    return Frame(f.point, f.matrix @ g)


def covector_components(form: OneForm, f: Frame) -> np.ndarray:
    """Row w_a = sum_i w_i(X) f^i_a."""
    w = form.at(f.point)[0]
    return w @ f.matrix


def field_value(field, point) -> np.ndarray:
    """Coordinate-basis components of a tensor field at one point."""
    return np.asarray(field.at(point))[0]


def components_in_frame(field, f: Frame, rep=None) -> np.ndarray:
    """Value of the type-H tensor t(f) defined by ``field``: its components
    in the frame f, i.e. the action of f^-1 on the coordinate components."""
    rep = as_rep(rep) if rep is not None else field.rep
    return rep.act(np.linalg.inv(f.matrix), field_value(field, f.point))


# ------------------------------------------------------- differential ops

def exterior_derivative(form: OneForm) -> tuple[tuple[ex.Expr, ...], ...]:
    """(dw)_ij = d_i w_j - d_j w_i as a 3x3 antisymmetric expression matrix."""
    w = form.components
    out = [[ex.ZERO] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(i + 1, 3):
            dij = ex.sub(ex.diff(w[j], COORDS[i]), ex.diff(w[i], COORDS[j]))
            out[i][j] = dij
            out[j][i] = ex.neg(dij)
    return tuple(tuple(r) for r in out)


def eval_matrix(m, points) -> np.ndarray:
    pts = np.atleast_2d(points)
    out = np.empty((pts.shape[0], 3, 3))
    for i in range(3):
        for j in range(3):
            out[:, i, j] = _eval_on(m[i][j], pts)
    return out


def lie_bracket(v: VectorField, w: VectorField) -> VectorField:
    """[V, W]^i = V^j d_j W^i - W^j d_j V^i."""
    comps = []
    for i in range(3):
        acc = ex.ZERO
        for j in range(3):
            acc = ex.add(acc, ex.mul(v.components[j], ex.diff(w.components[i], COORDS[j])))
            acc = ex.sub(acc, ex.mul(w.components[j], ex.diff(v.components[i], COORDS[j])))
        comps.append(acc)
    return VectorField(comps)


def symbolic_det(m) -> ex.Expr:
    a = m
    t1 = ex.mul(a[0][0], ex.sub(ex.mul(a[1][1], a[2][2]), ex.mul(a[1][2], a[2][1])))
    t2 = ex.mul(a[0][1], ex.sub(ex.mul(a[1][0], a[2][2]), ex.mul(a[1][2], a[2][0])))
    t3 = ex.mul(a[0][2], ex.sub(ex.mul(a[1][0], a[2][1]), ex.mul(a[1][1], a[2][0])))
    return ex.add(ex.sub(t1, t2), t3)


def symbolic_inverse(m):
    """Adjugate over determinant, entrywise expressions."""
    det = symbolic_det(m)
    inv = [[None] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(3):
            r = [k for k in range(3) if k != j]
            c = [k for k in range(3) if k != i]
            minor = ex.sub(ex.mul(m[r[0]][c[0]], m[r[1]][c[1]]), ex.mul(m[r[0]][c[1]], m[r[1]][c[0]]))
            cof = minor if (i + j) % 2 == 0 else ex.neg(minor)
            inv[i][j] = ex.div(cof, det)
    return inv


def dual_coframe(frame: FrameField, chart: Chart | None = None) -> CoframeField:
    """Coframe e^a with e^a(e_b) = delta^a_b, as exact expressions.

    When a chart is given the frame is checked for invertibility and the
    duality is verified at every grid node.
    """
    if chart is not None:
        frame.check_invertible(chart)
    cof = CoframeField(symbolic_inverse(frame.matrix))
    if chart is not None:
        pts = chart.grid()
        prod = cof.at(pts) @ frame.at(pts)
        err = np.max(np.abs(prod - np.eye(3)), axis=(1, 2))
        bad = np.nonzero(err > 1e-10)[0]
        if bad.size:
            i = int(bad[0])
            raise DegenerateFieldError(f"dual coframe inaccurate at node {i}", node=i, point=pts[i])
    return cof


def adapted_coframe(form: OneForm, chart: Chart) -> CoframeField:
    """Coframe with first row w; the other rows are the coordinate
    differentials not on the pivot axis.  The pivot is chosen from the
    largest |w_i| over the grid and must give an invertible coframe at
    every node."""
    form.check_nonvanishing(chart)
    pts = chart.grid()
    vals = form.at(pts)
    # pivot on the component of largest minimum magnitude so it never vanishes
    p = int(np.argmax(np.min(np.abs(vals), axis=0)))
    if np.min(np.abs(vals[:, p])) <= DET_TOL:
        p = int(np.argmax(np.max(np.abs(vals), axis=0)))
    rest = [k for k in range(3) if k != p]
    rows = [list(form.components)]
    for k in rest:
        row = [ex.ZERO] * 3
        row[k] = ex.ONE
        rows.append(row)
    cof = CoframeField(rows)
    dets = np.linalg.det(cof.at(pts))
    bad = np.nonzero(np.abs(dets) <= DET_TOL)[0]
    if bad.size:
        i = int(bad[0])
        raise DegenerateFieldError(
            f"no single coordinate pivot completes the one-form at node {i}", node=i, point=pts[i]
        )
    return cof


def adapted_frame(vector: VectorField, chart: Chart) -> FrameField:
    """Frame with first column V, completed by coordinate vectors."""
    pts = chart.grid()
    vals = vector.at(pts)
    if np.any(np.max(np.abs(vals), axis=1) < NONVANISHING_TOL):
        i = int(np.nonzero(np.max(np.abs(vals), axis=1) < NONVANISHING_TOL)[0][0])
        raise DegenerateFieldError(f"vector field vanishes at grid node {i}", node=i, point=pts[i])
    p = int(np.argmax(np.min(np.abs(vals), axis=0)))
    rest = [k for k in range(3) if k != p]
    cols = [list(vector.components)]
    for k in rest:
        col = [ex.ZERO] * 3
        col[k] = ex.ONE
        cols.append(col)
    ff = FrameField([[cols[a][i] for a in range(3)] for i in range(3)])
    ff.check_invertible(chart)
    return ff
