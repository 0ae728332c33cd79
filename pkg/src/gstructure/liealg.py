"""GL(3) and gl(3) machinery.

Group elements are invertible 3x3 arrays, algebra elements are arbitrary
3x3 arrays.  Tensor values ("H-values") are numpy arrays whose shape is
fixed by a :class:`Representation`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

DET_TOL = 1e-10
NULL_RTOL = 1e-9


class SingularMatrixError(ValueError):
    pass


def check_invertible(g, what="group element"):
    g = np.asarray(g, dtype=float)
    if g.shape != (3, 3):
        raise ValueError(f"{what} must be 3x3, got shape {g.shape}")
    if abs(np.linalg.det(g)) <= DET_TOL:
        raise SingularMatrixError(f"{what} is singular (|det| <= {DET_TOL})")
    return g


def elementary(i: int, j: int) -> np.ndarray:
    e = np.zeros((3, 3))
    e[i, j] = 1.0
    return e


E = [elementary(i, j) for i in range(3) for j in range(3)]


# ----------------------------------------------------------- representations

_ALIASES = {
    "scalar": (0, 0),
    "vector": (1, 0),
    "covector": (0, 1),
    "bilinear": (0, 2),
    "bilinear-form": (0, 2),
    "bivector": (2, 0),
    "endomorphism": (1, 1),
}


@dataclass(frozen=True)
class Representation:
    """Tensor representation of GL(3) with ``upper`` contravariant and
    ``lower`` covariant slots.

    The special tag ``"frame"`` is the space of three stacked vectors
    (a 3x3 array whose columns transform as vectors); its isotropy at an
    invertible value is trivial.
    """

    tag: str
    upper: int = 0
    lower: int = 0

    @classmethod
    def from_tag(cls, tag: str) -> "Representation":
        if tag == "frame":
            return cls("frame", 1, 0)
        if tag in _ALIASES:
            p, q = _ALIASES[tag]
            return cls(tag, p, q)
        if tag.startswith("(") and tag.endswith(")"):
            p, q = (int(s) for s in tag[1:-1].split(","))
            if p < 0 or q < 0 or p + q > 2:
                raise ValueError(f"unsupported tensor type {tag}")
            return cls(tag, p, q)
        raise ValueError(f"unknown representation {tag!r}")

    @property
    def shape(self) -> tuple[int, ...]:
        if self.tag == "frame":
            return (3, 3)
        return (3,) * (self.upper + self.lower)

    @property
    def dim(self) -> int:
        return int(np.prod(self.shape, dtype=int))

    def _slot_matrices(self, up, down):
        if self.tag == "frame":
            return [up]  # columns are vectors: act on the row index only
        return [up] * self.upper + [down] * self.lower

    def _apply_slots(self, mats, u):
        u = np.asarray(u, dtype=float)
        if u.shape != self.shape:
            raise ValueError(f"{self.tag} value must have shape {self.shape}, got {u.shape}")
        out = u
        for axis, m in enumerate(mats):
            # contract m's second index with the given axis of out
            out = np.moveaxis(np.tensordot(m, out, axes=([1], [axis])), 0, axis)
        return out

    def act(self, g, u) -> np.ndarray:
        g = check_invertible(g)
        if not self.shape:
            return np.asarray(u, dtype=float)
        ginv_t = np.linalg.inv(g).T
        return self._apply_slots(self._slot_matrices(g, ginv_t), u)

    def algebra_act(self, a, u) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        u = np.asarray(u, dtype=float)
        if not self.shape:
            return np.zeros_like(u)
        mats = self._slot_matrices(a, -a.T)
        total = np.zeros(self.shape)
        eye = np.eye(3)
        # Leibniz rule: differentiate one slot at a time.
        for k in range(len(mats)):
            slot = [eye] * len(mats)
            slot[k] = mats[k]
            total = total + self._apply_slots(slot, u)
        return total


def as_rep(rep) -> Representation:
    return rep if isinstance(rep, Representation) else Representation.from_tag(rep)


def act(g, u, rep) -> np.ndarray:
    """Left action of ``g`` on the tensor value ``u``.

    vector ``g v``; covector ``w g^-1``; bilinear form ``g^-T B g^-1``.
    """
    return as_rep(rep).act(g, u)


def algebra_act(a, u, rep) -> np.ndarray:
    """Derivative at the identity of ``t -> act(exp(t a), u)``."""
    return as_rep(rep).algebra_act(a, u)


# ------------------------------------------------------------ subalgebras

@dataclass
class SubalgebraBasis:
    """Frobenius-orthonormal basis of a linear subspace of gl(3)."""

    matrices: list[np.ndarray]
    unimodular: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return len(self.matrices)

    def as_columns(self) -> np.ndarray:
        """9 x dim array of row-major flattened basis matrices."""
        if not self.matrices:
            return np.zeros((9, 0))
        return np.column_stack([m.reshape(9) for m in self.matrices])

    def projector(self) -> np.ndarray:
        q = self.as_columns()
        return q @ q.T

    def contains(self, a, tol=1e-8) -> bool:
        return self.residual(a) <= tol * (1.0 + np.linalg.norm(a))

    def residual(self, a) -> float:
        v = np.asarray(a, dtype=float).reshape(9)
        return float(np.linalg.norm(v - self.projector() @ v))

    def combine(self, coeffs) -> np.ndarray:
        out = np.zeros((3, 3))
        for c, m in zip(coeffs, self.matrices):
            out = out + c * m
        return out

    def to_json(self) -> dict:
        return {
            "dimension": self.dim,
            "unimodular": self.unimodular,
            "basis": [_round_matrix(m) for m in self.matrices],
        }


def _round_matrix(m, digits=12):
    # rounding removes sign-of-zero and last-ulp noise from serialized bases
    out = []
    for row in np.asarray(m):
        out.append([float(round(float(x), digits)) + 0.0 for x in row])
    return out


def canonical_basis(columns: np.ndarray, tol=1e-10) -> list[np.ndarray]:
    """Orthonormal basis of span(columns) that depends only on the span.

    Greedy pivoted Gram-Schmidt on the projections of the elementary
    matrices E_ij: at each step the E_ij with the largest remaining
    component is taken, ties going to the earlier row-major index.
    """
    columns = np.asarray(columns, dtype=float)
    if columns.size == 0 or columns.shape[1] == 0:
        return []
    u, s, _ = np.linalg.svd(columns, full_matrices=False)
    k = int(np.sum(s > tol * max(1.0, s[0])))
    if k == 0:
        return []
    q = u[:, :k]
    cand = (q @ q.T).copy()  # column j = projection of E_j
    basis = []
    for _ in range(k):
        norms = np.linalg.norm(cand, axis=0)
        best = norms.max()
        j = int(np.nonzero(norms >= best * (1 - 1e-9))[0][0])
        v = cand[:, j] / norms[j]
        basis.append(v)
        cand = cand - np.outer(v, v @ cand)
    # re-orthonormalise inside the span to remove accumulated drift
    b = np.column_stack(basis)
    qq, r = np.linalg.qr(b)
    qq = qq * np.sign(np.diag(r))
    return [qq[:, c].reshape(3, 3).copy() for c in range(k)]


def nullspace_basis(rows: np.ndarray, rtol=NULL_RTOL) -> np.ndarray:
    """Columns spanning {x : rows @ x = 0}; singular values below
    ``rtol * sigma_max`` count as zero."""
    rows = np.asarray(rows, dtype=float)
    n = rows.shape[1]
    if rows.shape[0] == 0:
        return np.eye(n)
    _, s, vt = np.linalg.svd(rows, full_matrices=True)
    smax = s[0] if s.size else 0.0
    if smax == 0.0:
        return np.eye(n)
    rank = int(np.sum(s > rtol * smax))
    return vt[rank:].T


def action_matrix(u, rep) -> np.ndarray:
    """dim(H) x 9 matrix whose column k is algebra_act(E_k, u)."""
    rep = as_rep(rep)
    return np.column_stack([rep.algebra_act(e, u).reshape(-1) for e in E]).reshape(rep.dim, 9)


TRACE_ROW = np.eye(3).reshape(1, 9)


def isotropy_algebra(u, rep, unimodular: bool = False) -> SubalgebraBasis:
    """Lie algebra of the stabilizer of ``u``: all A with algebra_act(A, u) = 0,
    optionally intersected with the trace-zero matrices."""
    rep = as_rep(rep)
    u = np.asarray(u, dtype=float)
    m = action_matrix(u, rep)
    scale = np.linalg.norm(m)
    rows = m / scale if scale > 0 else np.zeros((0, 9))
    if unimodular:
        rows = np.vstack([rows, TRACE_ROW / np.sqrt(3.0)])
    null = nullspace_basis(rows)
    return SubalgebraBasis(canonical_basis(null), unimodular=unimodular)


def orbit_tangent_dim(u, rep) -> int:
    """Dimension of the GL(3)-orbit through ``u`` (rank of the action map)."""
    return 9 - isotropy_algebra(u, rep).dim


def exp_matrix(a) -> np.ndarray:
    return scipy.linalg.expm(np.asarray(a, dtype=float))


def log_matrix(g) -> np.ndarray:
    """Real principal logarithm; raises if ``g`` has none."""
    out = scipy.linalg.logm(np.asarray(g, dtype=float))
    if np.iscomplexobj(out):
        if np.max(np.abs(out.imag)) > 1e-8:
            raise ValueError("matrix has no real principal logarithm")
        out = out.real
    return out


def principal_angles(b1: SubalgebraBasis, b2: SubalgebraBasis) -> np.ndarray:
    if b1.dim == 0 or b2.dim == 0:
        return np.zeros(0)
    return scipy.linalg.subspace_angles(b1.as_columns(), b2.as_columns())


def subalgebra_equal(b1: SubalgebraBasis, b2: SubalgebraBasis, tol=1e-6):
    """Return ``(equal, max_principal_angle)``.  Dimensions must match."""
    angles = principal_angles(b1, b2)
    max_angle = float(np.max(angles)) if angles.size else 0.0
    if b1.dim != b2.dim:
        return False, max_angle
    return max_angle <= tol, max_angle


def random_group_element(basis: SubalgebraBasis, scale: float = 1.0, seed=0) -> np.ndarray:
    """exp of a random combination of the basis, coefficients in [-scale, scale]."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if basis.dim == 0:
        return np.eye(3)
    coeffs = rng.uniform(-scale, scale, size=basis.dim)
    return exp_matrix(basis.combine(coeffs))


def commutator(a, b) -> np.ndarray:
    return a @ b - b @ a


def bracket_closure_residual(basis: SubalgebraBasis) -> float:
    """Largest residual of [A, B] after projection onto the span."""
    worst = 0.0
    for i, a in enumerate(basis.matrices):
        for b in basis.matrices[i + 1:]:
            worst = max(worst, basis.residual(commutator(a, b)))
    return worst


def span_basis(matrices) -> SubalgebraBasis:
    """Orthonormal canonical basis for the span of arbitrary 3x3 matrices."""
    cols = np.column_stack([np.asarray(m, dtype=float).reshape(9) for m in matrices]) if matrices else np.zeros((9, 0))
    return SubalgebraBasis(canonical_basis(cols))


def conjugate_basis(basis: SubalgebraBasis, f) -> SubalgebraBasis:
    """Basis of f^-1 . span . f."""
    f = check_invertible(f, "frame")
    finv = np.linalg.inv(f)
    out = span_basis([finv @ m @ f for m in basis.matrices])
    out.unimodular = basis.unimodular
    out.notes = list(basis.notes)
    return out
