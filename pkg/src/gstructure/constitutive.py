"""Constitutive responses, material symmetry and material isomorphisms.

A response maps a deformation gradient F (det F > 0) to a vector in R^m.
In ``"C"`` mode the component expressions are written in the right
Cauchy-Green components C11..C33 and C = F^T F is substituted, which
makes the response frame indifferent.  ``"smectic_rd"`` responses are
written in the two invariants r and d and are rewritten into ``"C"`` mode
on construction.  Any response may also depend on the body coordinates
X1, X2, X3.

Every symmetry and isomorphism verdict is checked on a finite sample of
deformation gradients; it is evidence for, not proof of, the identity
holding for all F.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.linalg

from . import exprcore as ex
from .fields import COORDS, Chart
from .liealg import SubalgebraBasis, canonical_basis, check_invertible, nullspace_basis, random_group_element

C_NAMES = tuple(f"C{i}{j}" for i in range(1, 4) for j in range(1, 4))
F_NAMES = tuple(f"F{i}{j}" for i in range(1, 4) for j in range(1, 4))

SAMPLED_NOTE = "verified on sampled deformation gradients only"


class NonPositiveJacobian(ValueError):
    pass


def _c(i, j):
    return ex.Var(f"C{i}{j}")


R_EXPR = ex.sub(ex.mul(_c(2, 2), _c(3, 3)), ex.power(_c(2, 3), ex.Const(2.0)))


def _det_expr():
    from .fields import symbolic_det

    return symbolic_det([[_c(i, j) for j in range(1, 4)] for i in range(1, 4)])


D_EXPR = _det_expr()


def invariants_r_d(c) -> tuple[float, float]:
    """r = C22 C33 - C23^2 and d = det C for a symmetric C."""
    c = np.asarray(c, dtype=float)
    r = c[1, 1] * c[2, 2] - c[1, 2] ** 2
    return float(r), float(np.linalg.det(c))


class Response:
    """Vector-valued constitutive response.

    ``mode`` is ``"C"``, ``"F"`` or ``"smectic_rd"``.
    """

    def __init__(self, components: Sequence, mode: str = "C", name: str = "response"):
        if mode not in ("C", "F", "smectic_rd"):
            raise ValueError(f"unknown response mode {mode!r}")
        comps = [ex.as_expr(c) for c in components]
        if not comps:
            raise ValueError("a response needs at least one component")
        self.name = name
        self.source_mode = mode
        self.source = tuple(comps)
        if mode == "smectic_rd":
            sub = {"r": R_EXPR, "d": D_EXPR}
            comps = [ex.substitute(c, sub) for c in comps]
            mode = "C"
        self.mode = mode
        self.components = tuple(comps)
        allowed = set(C_NAMES if mode == "C" else F_NAMES) | set(COORDS)
        for c in self.components:
            extra = ex.variables(c) - allowed
            if extra:
                raise ValueError(f"response {name!r} uses unknown variables {sorted(extra)}")

    @property
    def dim(self) -> int:
        return len(self.components)

    @property
    def names(self):
        return C_NAMES if self.mode == "C" else F_NAMES

    @cached_property
    def depends_on_point(self) -> bool:
        return any(ex.variables(c) & set(COORDS) for c in self.components)

    @cached_property
    def _gradients(self):
        return [[ex.diff(c, v) for v in self.names] for c in self.components]

    def _bindings(self, f: np.ndarray, x=None) -> dict:
        if self.mode == "C":
            m = np.einsum("nki,nkj->nij", f, f)
        else:
            m = f
        b = {name: m[:, k // 3, k % 3] for k, name in enumerate(self.names)}
        if x is not None:
            x = np.asarray(x, dtype=float)
            for i, name in enumerate(COORDS):
                b[name] = x[..., i]
        return b

    def _eval(self, f, x=None, check_det=True) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        single = f.ndim == 2
        f = f.reshape(-1, 3, 3)
        if check_det or self.mode == "F":
            if np.any(np.linalg.det(f) <= 0):
                raise NonPositiveJacobian("deformation gradient must have det F > 0")
        b = self._bindings(f, x)
        n = f.shape[0]
        out = np.empty((n, self.dim))
        for k, c in enumerate(self.components):
            out[:, k] = np.broadcast_to(ex.evaluate(c, b), (n,))
        return out[0] if single else out

    def evaluate(self, f, x=None) -> np.ndarray:
        """Response at F (a 3x3 array or an (n, 3, 3) batch)."""
        return self._eval(f, x, check_det=True)

    def gradient(self, f, x=None) -> np.ndarray:
        """dR_k/dF as an (n, m, 3, 3) array."""
        f = np.asarray(f, dtype=float).reshape(-1, 3, 3)
        b = self._bindings(f, x)
        n = f.shape[0]
        out = np.empty((n, self.dim, 3, 3))
        for k, row in enumerate(self._gradients):
            s = np.empty((n, 3, 3))
            for q, g in enumerate(row):
                s[:, q // 3, q % 3] = np.broadcast_to(ex.evaluate(g, b), (n,))
            if self.mode == "C":
                # dpsi/dF = F (S + S^T) with S_IJ = dpsi/dC_IJ
                s = np.einsum("nij,njk->nik", f, s + np.transpose(s, (0, 2, 1)))
            out[:, k] = s
        return out

    def at_point(self, x) -> "Response":
        """The response with X1..X3 fixed to ``x``."""
        x = np.asarray(x, dtype=float).reshape(3)
        sub = {name: ex.Const(float(v)) for name, v in zip(COORDS, x)}
        out = Response.__new__(Response)
        out.name = f"{self.name}@{x.tolist()}"
        out.source_mode = self.source_mode
        out.source = self.source
        out.mode = self.mode
        out.components = tuple(ex.substitute(c, sub) for c in self.components)
        return out

    def precompose(self, q) -> "Response":
        """Response F -> R(F Q), expressed symbolically."""
        q = check_invertible(q, "reference change")
        return self.precompose_exprs([[ex.Const(float(v)) for v in row] for row in q], name=f"{self.name}.Q")

    def precompose_exprs(self, p, name=None) -> "Response":
        """Response F -> R(F P) for an expression matrix P (may depend on X)."""
        p = [[ex.as_expr(v) for v in row] for row in p]
        if self.mode == "C":
            # C -> P^T C P
            sub = {}
            for i in range(3):
                for j in range(3):
                    acc = ex.ZERO
                    for k in range(3):
                        for l in range(3):
                            acc = ex.add(acc, ex.mul(ex.mul(p[k][i], _c(k + 1, l + 1)), p[l][j]))
                    sub[f"C{i + 1}{j + 1}"] = acc
        else:
            sub = {}
            for i in range(3):
                for j in range(3):
                    acc = ex.ZERO
                    for k in range(3):
                        acc = ex.add(acc, ex.mul(ex.Var(f"F{i + 1}{k + 1}"), p[k][j]))
                    sub[f"F{i + 1}{j + 1}"] = acc
        out = Response.__new__(Response)
        out.name = name or f"{self.name}.P"
        out.source_mode = self.mode
        out.mode = self.mode
        out.components = tuple(ex.substitute(c, sub) for c in self.components)
        out.source = out.components
        return out

    def to_json(self) -> dict:
        return {"name": self.name, "mode": self.source_mode, "components": [ex.to_string(c) for c in self.source]}


def smectic_response(psi, name="smectic") -> Response:
    """Free energy psi(r, d) with r = C22 C33 - C23^2 and d = det C."""
    return Response([psi], mode="smectic_rd", name=name)


@dataclass(frozen=True)
class Sampler:
    """Deformation gradients F = exp(s Z), Z uniform in [-1, 1]^(3x3)."""

    count: int = 60
    seed: int = 0
    spread: float = 0.5

    def samples(self) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        z = rng.uniform(-1.0, 1.0, size=(self.count, 3, 3))
        return np.stack([scipy.linalg.expm(self.spread * zi) for zi in z])


def evaluate(response: Response, f, x=None) -> np.ndarray:
    return response.evaluate(f, x)


def _norms(v):
    return np.linalg.norm(v, axis=-1)


def is_symmetry(response: Response, g, sampler: Sampler, tol: float = 1e-8, x=None):
    """Return ``(ok, max_deviation)``; deviation is ||R(FG) - R(F)|| / (1 + ||R(F)||)."""
    g = check_invertible(g)
    f = sampler.samples()
    base = response._eval(f, x, check_det=True)
    moved = response._eval(f @ g, x, check_det=False)
    dev = float(np.max(_norms(moved - base) / (1.0 + _norms(base))))
    return dev <= tol, dev


def symmetry_rows(response: Response, f, x=None) -> np.ndarray:
    """Rows vec(F^T dR_k/dF): the linear conditions <dR(F), F A> = 0."""
    grads = response.gradient(f, x)
    rows = np.einsum("nki,nmkj->nmij", f, grads).reshape(-1, 9)
    return rows


def symmetry_algebra(response: Response, sampler: Sampler | None = None, x=None) -> SubalgebraBasis:
    """Infinitesimal material symmetries: all A with <dR(F), F A> = 0 on every sample."""
    sampler = sampler or Sampler()
    f = sampler.samples()
    rows = symmetry_rows(response, f, x)
    norms = np.linalg.norm(rows, axis=1)
    live = norms > 0
    rows = rows[live] / norms[live, None]
    null = nullspace_basis(rows)
    notes = [SAMPLED_NOTE]
    if rows.shape[0] < 9:
        notes.append("undersampled: fewer than 9 nonzero constraint rows")
    return SubalgebraBasis(canonical_basis(null), notes=notes)


# ----------------------------------------------------------- isomorphisms

@dataclass
class IsomorphismOptions:
    tol: float = 1e-6
    max_iter: int = 200
    starts: int = 8
    seed: int = 0
    start_scale: float = 0.5


@dataclass
class MaterialIsomorphism:
    """Best P with R2(F) = R1(F P) on the samples."""

    matrix: np.ndarray
    residual: float
    relative_residual: float
    verdict: str
    iterations: int = 0
    start: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def isomorphic(self) -> bool:
        return self.verdict == "isomorphic"

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "P": [[float(round(float(v), 12)) + 0.0 for v in row] for row in self.matrix],
            "residual": float(self.residual),
            "relative_residual": float(self.relative_residual),
            "iterations": self.iterations,
            "start": self.start,
            "notes": list(self.notes),
        }


def _residual_fn(r1: Response, target: np.ndarray, f: np.ndarray):
    def res(p):
        fp = f @ p
        if np.any(np.linalg.det(fp) <= 0):
            return None
        try:
            return (r1._eval(fp, check_det=False) - target).reshape(-1)
        except ex.DomainError:
            return None

    return res


MAX_STEP = 2.0  # largest accepted |A| per iteration, keeps expm well scaled


def _gauss_newton(r1, target, f, p0, tol_abs, max_iter):
    """Minimise ||R1(F P) - target||^2 over P = P0 exp(A).

    Returns (P, rms, iterations, stationary).
    """
    res = _residual_fn(r1, target, f)
    p = p0.copy()
    r = res(p)
    if r is None:
        return p, np.inf, 0, True
    cost = float(r @ r)
    n = r.size
    for it in range(1, max_iter + 1):
        rms = np.sqrt(cost / n)
        if rms <= tol_abs:
            return p, rms, it - 1, True
        fp = f @ p
        grads = r1.gradient(fp)
        jac = np.einsum("nki,nmkj->nmij", fp, grads).reshape(-1, 9)
        step, *_ = np.linalg.lstsq(jac, -r, rcond=1e-12)
        a = step.reshape(3, 3)
        size = np.linalg.norm(a)
        if not np.isfinite(size):
            return p, np.sqrt(cost / n), it, True
        if size > MAX_STEP:
            a = a * (MAX_STEP / size)
        alpha = 1.0
        accepted = False
        while alpha >= 1e-6:
            cand = p @ scipy.linalg.expm(alpha * a)
            rc = res(cand)
            if rc is not None:
                cc = float(rc @ rc)
                if cc < cost:
                    accepted = True
                    break
            alpha *= 0.5
        if not accepted:
            return p, np.sqrt(cost / n), it, True
        improvement = cost - cc
        p, r, cost = cand, rc, cc
        if improvement <= 1e-15 * max(cost, 1e-300) or np.linalg.norm(alpha * a) < 1e-14:
            return p, np.sqrt(cost / n), it, True
    return p, np.sqrt(cost / n), max_iter, False


def solve_isomorphism(
    r1: Response,
    r2: Response,
    sampler: Sampler | None = None,
    opts: IsomorphismOptions | None = None,
    start=None,
) -> MaterialIsomorphism:
    """Find P with R2(F) = R1(F P) for all sampled F.

    Gauss-Newton on P = P_start exp(A) with backtracking line search.  The
    first start is ``start`` (identity by default); the others are random
    exponential perturbations of it.  Stops at the first start that meets
    the tolerance.
    """
    if r1.dim != r2.dim:
        raise ValueError("responses have different output dimensions")
    sampler = sampler or Sampler()
    opts = opts or IsomorphismOptions()
    f = sampler.samples()
    target = r2.evaluate(f)
    scale = 1.0 + float(np.sqrt(np.mean(target**2)))
    tol_abs = opts.tol * scale

    p_start = np.eye(3) if start is None else check_invertible(start, "start")
    if np.linalg.det(p_start) < 0:
        raise ValueError("start must have positive determinant")
    rng = np.random.default_rng(opts.seed)
    best = None
    any_stationary = False
    for k in range(max(1, opts.starts)):
        if k == 0:
            p0 = p_start
        else:
            z = rng.uniform(-1.0, 1.0, size=(3, 3))
            p0 = p_start @ scipy.linalg.expm(opts.start_scale * z)
        p, rms, its, stationary = _gauss_newton(r1, target, f, p0, tol_abs * 1e-3, opts.max_iter)
        any_stationary = any_stationary or stationary
        if best is None or rms < best[1]:
            best = (p, rms, its, k)
        if rms <= tol_abs:
            break

    p, rms, its, k = best
    rel = rms / scale
    if rms <= tol_abs:
        verdict = "isomorphic"
    elif any_stationary:
        verdict = "not_isomorphic"
    else:
        verdict = "nonconvergence"
    return MaterialIsomorphism(p, float(rms), float(rel), verdict, its, k, [SAMPLED_NOTE])


def conjugacy_check(
    r1: Response,
    r2: Response,
    iso: MaterialIsomorphism | np.ndarray,
    sampler: Sampler | None = None,
    tol: float = 1e-5,
    count: int = 10,
    seed: int = 0,
    scale: float = 0.5,
):
    """Check that P G P^-1 is a symmetry of R2 for sampled symmetries G of R1.

    Returns ``(ok, max_deviation)``.
    """
    sampler = sampler or Sampler()
    p = iso.matrix if isinstance(iso, MaterialIsomorphism) else check_invertible(iso)
    pinv = np.linalg.inv(p)
    basis = symmetry_algebra(r1, sampler)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        g = random_group_element(basis, scale, rng)
        ok, dev = is_symmetry(r2, p @ g @ pinv, sampler, tol)
        worst = max(worst, dev)
    return worst <= tol, worst


# --------------------------------------------------------- uniform bodies

@dataclass
class UniformBody:
    """Body response s(F, X) = s_bar(F P(X)) built from an archetype."""

    archetype: Response
    implant: list  # 3x3 expressions in X1..X3
    chart: Chart

    def __post_init__(self):
        self.implant = [[ex.as_expr(v) for v in row] for row in self.implant]
        from .fields import eval_matrix

        dets = np.linalg.det(eval_matrix(self.implant, self.chart.grid()))
        if np.any(np.abs(dets) <= 1e-10):
            raise ValueError("implant field is singular at a grid node")

    def implant_at(self, x) -> np.ndarray:
        from .fields import eval_matrix

        return eval_matrix(self.implant, np.asarray(x, dtype=float).reshape(1, 3))[0]

    def response(self) -> Response:
        return self.archetype.precompose_exprs(self.implant, name=f"{self.archetype.name}.implanted")


def uniform_response(body: UniformBody, f, x) -> np.ndarray:
    p = check_invertible(body.implant_at(x), "implant")
    return body.archetype.evaluate(np.asarray(f, dtype=float) @ p)


@dataclass
class ImplantField:
    points: np.ndarray
    isomorphisms: list[MaterialIsomorphism]

    @property
    def matrices(self) -> np.ndarray:
        return np.stack([m.matrix for m in self.isomorphisms])

    @property
    def residuals(self) -> np.ndarray:
        return np.array([m.residual for m in self.isomorphisms])

    @property
    def failed_nodes(self) -> list[int]:
        return [i for i, m in enumerate(self.isomorphisms) if not m.isomorphic]

    @property
    def uniform(self) -> bool:
        return not self.failed_nodes


def _warm_neighbor(index: int, resolution) -> int | None:
    """Previously visited grid neighbour in the lexicographic sweep."""
    n1, n2, n3 = (int(r) for r in resolution)
    i, rem = divmod(index, n2 * n3)
    j, k = divmod(rem, n3)
    if k > 0:
        return index - 1
    if j > 0:
        return index - n3
    if i > 0:
        return index - n2 * n3
    return None


def recover_implant_field(
    body: Response,
    archetype: Response,
    chart: Chart,
    sampler: Sampler | None = None,
    opts: IsomorphismOptions | None = None,
) -> ImplantField:
    """Solve for P(X) at every grid node, warm-starting from a solved neighbour."""
    sampler = sampler or Sampler()
    opts = opts or IsomorphismOptions()
    pts = chart.grid()
    solved: list[MaterialIsomorphism] = []
    for idx, x in enumerate(pts):
        nb = _warm_neighbor(idx, chart.resolution)
        start = solved[nb].matrix if nb is not None else None
        r2 = body.at_point(x)
        solved.append(solve_isomorphism(archetype, r2, sampler, opts, start=start))
    return ImplantField(pts, solved)
