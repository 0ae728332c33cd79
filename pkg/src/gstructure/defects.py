"""Defect criteria and the comparison of geometric and material G-structures."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import numpy as np

from . import exprcore as ex
from .constitutive import (
    IsomorphismOptions,
    Response,
    Sampler,
    UniformBody,
    is_symmetry,
    recover_implant_field,
    symmetry_algebra,
)
from .fields import (
    Chart,
    DegenerateFieldError,
    Frame,
    FrameField,
    OneForm,
    VectorField,
    adapted_coframe,
    adapted_frame,
    components_in_frame,
    dual_coframe,
    eval_matrix,
    exterior_derivative,
    symbolic_inverse,
    lie_bracket,
)
from .liealg import (
    Representation,
    SubalgebraBasis,
    as_rep,
    check_invertible,
    conjugate_basis,
    isotropy_algebra,
    log_matrix,
    subalgebra_equal,
)

DEFECT_TOL = 1e-9
MEMBERSHIP_TOL = 1e-8

DISCRETE_NOTE = "structure groups compared at Lie-algebra level; components not reachable by exp are not represented"
CHART_NOTE = "coincidence checked on a single chart only"


class NonUniformBody(ValueError):
    def __init__(self, nodes, residuals):
        super().__init__(f"body is not materially uniform at grid nodes {list(nodes)}")
        self.nodes = list(nodes)
        self.residuals = list(residuals)


# ------------------------------------------------------------- reports

@dataclass
class DefectReport:
    criterion: str
    points: np.ndarray
    densities: np.ndarray
    tol: float

    @property
    def supremum(self) -> float:
        return float(np.max(self.densities)) if self.densities.size else 0.0

    @property
    def defect_free(self) -> bool:
        return self.supremum <= self.tol

    @property
    def verdict(self) -> str:
        return "defect-free" if self.defect_free else "defective"

    def to_json(self) -> dict:
        return {
            "criterion": self.criterion,
            "verdict": self.verdict,
            "supremum": _clean(self.supremum),
            "tolerance": self.tol,
            "densities": [_clean(v) for v in self.densities],
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["node", "X1", "X2", "X3", "density"])
            for i, (x, d) in enumerate(zip(self.points, self.densities)):
                w.writerow([i, repr(float(x[0])), repr(float(x[1])), repr(float(x[2])), repr(float(d))])


def _clean(v, digits=15):
    return float(f"{float(v):.{digits}g}") + 0.0


def smectic_defect_density(form: OneForm, chart: Chart, tol: float = DEFECT_TOL) -> DefectReport:
    """Closedness test: max |(dw)_ij| over the independent components at each node."""
    dw = exterior_derivative(form)
    pts = chart.grid()
    vals = eval_matrix(dw, pts)
    dens = np.max(np.abs(np.stack([vals[:, 0, 1], vals[:, 0, 2], vals[:, 1, 2]], axis=1)), axis=1)
    return DefectReport("closedness", pts, dens, tol)


def structure_coefficients(frame: FrameField, chart: Chart) -> np.ndarray:
    """c[n, g, a, b] with [e_a, e_b] = c^g_ab e_g at grid node n."""
    cof = dual_coframe(frame, chart)
    pts = chart.grid()
    coframe = cof.at(pts)
    out = np.zeros((pts.shape[0], 3, 3, 3))
    for a in range(3):
        for b in range(a + 1, 3):
            br = lie_bracket(frame.vector(a), frame.vector(b)).at(pts)
            c = np.einsum("nij,nj->ni", coframe, br)
            out[:, :, a, b] = c
            out[:, :, b, a] = -c
    return out


def frame_defect_density(frame: FrameField, chart: Chart, tol: float = DEFECT_TOL) -> DefectReport:
    """Holonomicity test: sup over index triples of |structure coefficients|."""
    c = structure_coefficients(frame, chart)
    dens = np.max(np.abs(c).reshape(c.shape[0], -1), axis=1)
    return DefectReport("holonomicity", chart.grid(), dens, tol)


@dataclass
class DefectSuite:
    """Shipped fields with analytically known closedness / holonomicity."""

    chart: Chart
    one_forms: list  # (name, OneForm, closed)
    frames: list  # (name, FrameField, holonomic)


def load_defect_suite() -> DefectSuite:
    text = resources.files("gstructure").joinpath("data/defect_suite.json").read_text(encoding="utf-8")
    raw = json.loads(text)
    ch = raw["chart"]
    chart = Chart(tuple(ch["lower"]), tuple(ch["upper"]), tuple(ch["resolution"]))
    forms = [(d["name"], OneForm(d["components"]), bool(d["closed"])) for d in raw["one_forms"]]
    frames = []
    for d in raw["frames"]:
        cols = d["columns"]
        frames.append((d["name"], FrameField([[cols[a][i] for a in range(3)] for i in range(3)]), bool(d["holonomic"])))
    return DefectSuite(chart, forms, frames)


# --------------------------------------------------------- G-structures

@dataclass
class GStructureSpec:
    """Adapted section on the chart grid plus the structure algebra.

    Tensor-defined structures carry the defining field, its value ``u`` and
    representation; material structures carry the archetype response whose
    symmetries form the structure group.
    """

    kind: str
    chart: Chart
    frames: np.ndarray  # (n, 3, 3) section at grid nodes
    algebra: SubalgebraBasis
    u: Optional[np.ndarray] = None
    rep: Optional[Representation] = None
    defining_field: object = None
    section: Optional[FrameField] = None
    archetype: Optional[Response] = None
    archetype_frame: Optional[np.ndarray] = None
    sampler: Optional[Sampler] = None
    notes: list[str] = field(default_factory=list)
    implant_residuals: Optional[np.ndarray] = None

    def frame_at(self, node: int) -> Frame:
        return Frame(self.chart.grid()[node], self.frames[node])

    def to_json(self) -> dict:
        out = {
            "kind": self.kind,
            "algebra": self.algebra.to_json(),
            "nodes": int(self.frames.shape[0]),
            "notes": list(self.notes),
        }
        if self.u is not None:
            out["tensor"] = {"rep": self.rep.tag, "value": np.asarray(self.u).tolist()}
        return out


def _completion(u: np.ndarray) -> np.ndarray:
    """Invertible matrix whose first row is u (other rows coordinate unit rows)."""
    p = int(np.argmax(np.abs(u)))
    rows = [u]
    for k in range(3):
        if k != p:
            e = np.zeros(3)
            e[k] = 1.0
            rows.append(e)
    return np.array(rows)


def _const_matmul(m, g: np.ndarray):
    """Expression matrix times a constant matrix."""
    return [
        [
            _sum(ex.mul(m[i][k], ex.Const(float(g[k, j]))) for k in range(3))
            for j in range(3)
        ]
        for i in range(3)
    ]


def _sum(terms):
    acc = ex.ZERO
    for t in terms:
        acc = ex.add(acc, t)
    return acc


def geometric_gstructure(u, rep, field, chart: Chart, unimodular: bool = False) -> GStructureSpec:
    """G-structure generated by a tensor field: the adapted frames in which
    the field has the constant value ``u``, with the isotropy group of ``u``.

    Supported fields: one-forms (covector ``u``), vector fields (vector
    ``u``) and frame fields (``frame`` rep, invertible ``u``).
    """
    rep = as_rep(rep)
    u = np.asarray(u, dtype=float).reshape(rep.shape)
    if isinstance(field, OneForm):
        if rep.tag != "covector" and (rep.upper, rep.lower) != (0, 1):
            raise ValueError("a one-form defines a covector-valued tensor")
        if np.max(np.abs(u)) < 1e-8:
            raise DegenerateFieldError("defining covector value must be nonzero")
        cof = adapted_coframe(field, chart)
        # the inverse of the adapted coframe is a frame with t(frame) = <1,0,0>;
        # right-multiplying by g with <1,0,0> g = u moves the value to u
        frame_m = symbolic_inverse(cof.matrix)
        section = FrameField(_const_matmul(frame_m, _completion(u)))
    elif isinstance(field, VectorField):
        if (rep.upper, rep.lower) != (1, 0) or rep.tag == "frame":
            raise ValueError("a vector field defines a vector-valued tensor")
        if np.max(np.abs(u)) < 1e-8:
            raise DegenerateFieldError("defining vector value must be nonzero")
        f0 = adapted_frame(field, chart)
        # need g^-1 e1 = u: g^-1 has first column u
        h = _completion(u).T
        section = FrameField(_const_matmul(f0.matrix, np.linalg.inv(h)))
    elif isinstance(field, FrameField):
        if rep.tag != "frame":
            raise ValueError("a frame field defines a frame-valued tensor")
        field.check_invertible(chart)
        section = FrameField(_const_matmul(field.matrix, np.linalg.inv(check_invertible(u, "frame value"))))
    else:
        raise TypeError(f"unsupported defining field {type(field).__name__}")

    section.check_invertible(chart)
    pts = chart.grid()
    frames = section.at(pts)
    algebra = isotropy_algebra(u, rep, unimodular=unimodular)
    spec = GStructureSpec(
        "geometric", chart, frames, algebra, u=u, rep=rep, defining_field=field, section=section,
        notes=[DISCRETE_NOTE],
    )
    worst = max(_tensor_residual(spec, spec.frame_at(i)) for i in range(len(pts)))
    if worst > MEMBERSHIP_TOL:
        raise DegenerateFieldError(f"adapted section misses the tensor value by {worst:.3e}")
    return spec


def _tensor_residual(spec: GStructureSpec, f: Frame) -> float:
    t = components_in_frame(spec.defining_field, f, spec.rep)
    return float(np.linalg.norm(t - spec.u))


def _group_residual(spec: GStructureSpec, g: np.ndarray) -> float:
    """How far g is from the structure group of ``spec``."""
    if spec.u is not None:
        return float(np.linalg.norm(spec.rep.act(g, spec.u) - spec.u))
    if spec.archetype is not None:
        f0 = spec.archetype_frame if spec.archetype_frame is not None else np.eye(3)
        _, dev = is_symmetry(spec.archetype, f0 @ g @ np.linalg.inv(f0), spec.sampler or Sampler())
        return dev
    try:
        a = log_matrix(g)
    except ValueError:
        return np.inf
    return spec.algebra.residual(a)


def membership(f: Frame, spec: GStructureSpec, tol: float = MEMBERSHIP_TOL) -> bool:
    """Is the frame f in the reduced bundle?"""
    if spec.u is not None and spec.defining_field is not None:
        return _tensor_residual(spec, f) <= tol
    node = spec.chart.node_index(f.point)
    g = np.linalg.solve(spec.frames[node], f.matrix)
    return _group_residual(spec, g) <= tol


def material_gstructure(
    body,
    archetype: Response,
    chart: Chart,
    archetype_frame=None,
    sampler: Sampler | None = None,
    opts: IsomorphismOptions | None = None,
) -> GStructureSpec:
    """G-structure of a smoothly uniform body.

    ``body`` is a :class:`UniformBody` or a point-dependent response.  The
    implant field P(X) is recovered on the grid; the section at X is the
    archetype frame carried over by P(X), and the structure algebra is the
    archetype's symmetry algebra expressed in that frame.
    """
    sampler = sampler or Sampler()
    opts = opts or IsomorphismOptions()
    body_response = body.response() if isinstance(body, UniformBody) else body
    field_ = recover_implant_field(body_response, archetype, chart, sampler, opts)
    if not field_.uniform:
        bad = field_.failed_nodes
        raise NonUniformBody(bad, [field_.isomorphisms[i].residual for i in bad])
    f0 = np.eye(3) if archetype_frame is None else check_invertible(archetype_frame, "archetype frame")
    frames = np.einsum("nij,jk->nik", field_.matrices, f0)
    algebra = conjugate_basis(symmetry_algebra(archetype, sampler), f0)
    notes = [DISCRETE_NOTE, "implant field verified on sampled deformation gradients only"]
    spec = GStructureSpec(
        "material", chart, frames, algebra,
        archetype=archetype, archetype_frame=f0, sampler=sampler, notes=notes,
    )
    spec.implant_residuals = field_.residuals
    return spec


@dataclass
class ComparisonReport:
    dims: tuple[int, int]
    max_principal_angle: float
    node_residuals: np.ndarray
    angle_tol: float
    membership_tol: float
    notes: list[str] = field(default_factory=list)

    @property
    def algebras_equal(self) -> bool:
        return self.dims[0] == self.dims[1] and self.max_principal_angle <= self.angle_tol

    @property
    def max_node_residual(self) -> float:
        return float(np.max(self.node_residuals)) if self.node_residuals.size else 0.0

    @property
    def coincide(self) -> bool:
        return self.algebras_equal and self.max_node_residual <= self.membership_tol

    @property
    def verdict(self) -> str:
        return "coincide" if self.coincide else "differ"

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "dimensions": list(self.dims),
            "max_principal_angle": _clean(self.max_principal_angle, 6),
            "angle_tolerance": self.angle_tol,
            "max_transition_residual": _clean(self.max_node_residual, 6),
            "membership_tolerance": self.membership_tol,
            "notes": list(self.notes),
        }


def compare_gstructures(
    a: GStructureSpec, b: GStructureSpec, tol: float = 1e-6, membership_tol: float = 1e-7
) -> ComparisonReport:
    """Equal structure algebras, and sections related by structure-group
    elements at every grid node."""
    if a.chart != b.chart:
        raise ValueError("G-structures live on different charts")
    _, angle = subalgebra_equal(a.algebra, b.algebra, tol)
    # transition g = A^-1 B; test against whichever side defines the group
    g = np.linalg.solve(a.frames, b.frames)
    if a.u is None and b.u is not None:
        ref, gs = b, np.linalg.inv(g)
    else:
        ref, gs = a, g
    res = np.array([_group_residual(ref, gi) for gi in gs])
    return ComparisonReport((a.algebra.dim, b.algebra.dim), angle, res, tol, membership_tol, [DISCRETE_NOTE, CHART_NOTE])


# ---------------------------------------------------------- equivariance

def _random_invertible(rng, min_abs_det=0.1):
    while True:
        m = rng.normal(size=(3, 3))
        if abs(np.linalg.det(m)) >= min_abs_det:
            return m


@dataclass
class EquivarianceReport:
    count: int
    max_deviation: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tol

    def to_json(self) -> dict:
        return {"count": self.count, "max_deviation": self.max_deviation, "tolerance": self.tol, "passed": self.passed}


def equivariance_suite(field, chart: Chart, seed: int = 0, count: int = 100, tol: float = 1e-10, rep=None):
    """Check t(f g) = g^-1 t(f) for random grid points, frames and group elements.

    Deviation is measured relative to 1 + |t(f)|.
    """
    rep = as_rep(rep) if rep is not None else field.rep
    rng = np.random.default_rng(seed)
    pts = chart.grid()
    worst = 0.0
    for _ in range(count):
        x = pts[rng.integers(len(pts))]
        f = Frame(x, _random_invertible(rng))
        g = _random_invertible(rng)
        lhs = components_in_frame(field, Frame(x, f.matrix @ g), rep)
        t = components_in_frame(field, f, rep)
        rhs = rep.act(np.linalg.inv(g), t)
        dev = float(np.max(np.abs(lhs - rhs)) / (1.0 + np.max(np.abs(t))))
        worst = max(worst, dev)
    return EquivarianceReport(count, worst, tol)
