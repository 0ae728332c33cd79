"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

The lines are printed in the pytest terminal summary (see conftest.py) and
when this file is run directly with ``python3 tests/test_acceptance.py``.
"""

import json
from pathlib import Path

import numpy as np
import pytest
import scipy.linalg

from gstructure import liealg as la
from gstructure.cli import COMMANDS, run
from gstructure.config import default_demo_config, load_config, parse_config
from gstructure.constitutive import Response, Sampler, conjugacy_check, invariants_r_d, is_symmetry, smectic_response, solve_isomorphism, symmetry_algebra
from gstructure.defects import frame_defect_density, load_defect_suite, smectic_defect_density
from gstructure.fields import Frame, FrameField, OneForm, TensorField, VectorField, components_in_frame

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
RESULTS: dict[int, str] = {}


def record(n, ok, detail):
    RESULTS[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    return ok


def first_row_zero(unimodular):
    mats = [la.elementary(i, j) for i in (1, 2) for j in range(3)]
    if unimodular:
        mats = [m for m in mats if np.trace(m) == 0] + [np.diag([0.0, 1, -1])]
    return la.span_basis(mats)


# 1 ------------------------------------------------------------------
def test_criterion_1_isotropy_of_layer_covector():
    full = la.isotropy_algebra([1, 0, 0], "covector")
    uni = la.isotropy_algebra([1, 0, 0], "covector", unimodular=True)
    _, angle = la.subalgebra_equal(full, first_row_zero(False))
    _, angle_u = la.subalgebra_equal(uni, first_row_zero(True))
    ok = full.dim == 6 and angle <= 1e-8 and uni.dim == 5 and angle_u <= 1e-8
    assert record(1, ok, f"dims {full.dim}/{uni.dim}, max angles {angle:.2e}/{angle_u:.2e}")


# 2 ------------------------------------------------------------------
def test_criterion_2_paper_demo_coincidence():
    rep = run("paper-demo", parse_config(default_demo_config()))
    res = rep.results[0]
    cmp = res["comparison"]
    ok = (
        res["verdict"] == "coincide"
        and cmp["dimensions"] == [5, 5]
        and cmp["max_principal_angle"] <= 1e-6
        and cmp["max_transition_residual"] <= 1e-7
    )
    assert record(
        2, ok,
        f"verdict {res['verdict']}, dims {cmp['dimensions']}, angle {cmp['max_principal_angle']:.2e}, "
        f"residual {cmp['max_transition_residual']:.2e}",
    )


# 3 ------------------------------------------------------------------
def test_criterion_3_symmetry_algebra_oracles():
    sampler = Sampler(60, seed=0)
    det = symmetry_algebra(smectic_response("d"), sampler)
    tr = symmetry_algebra(Response(["C11 + C22 + C33"]), sampler)
    sl3 = la.span_basis([la.elementary(i, j) for i in range(3) for j in range(3) if i != j]
                        + [np.diag([1.0, -1, 0]), np.diag([0.0, 1, -1])])
    so3 = la.span_basis([la.elementary(i, j) - la.elementary(j, i) for i in range(3) for j in range(i + 1, 3)])
    ok_d, a_d = la.subalgebra_equal(det, sl3, 1e-6)
    ok_t, a_t = la.subalgebra_equal(tr, so3, 1e-6)
    ok = ok_d and ok_t and det.dim == 8 and tr.dim == 3
    assert record(3, ok, f"det C dim {det.dim} (angle {a_d:.2e}), tr C dim {tr.dim} (angle {a_t:.2e})")


# 4 ------------------------------------------------------------------
def test_criterion_4_cross_product_identity():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        f = rng.normal(size=(3, 3))
        if np.linalg.det(f) < 0:
            f[:, 0] *= -1
        r, _ = invariants_r_d(f.T @ f)
        c = np.cross(f[:, 1], f[:, 2])
        worst = max(worst, abs(r - c @ c) / (c @ c))
    assert record(4, worst <= 1e-10, f"max relative error {worst:.2e} over 1000 samples")


# 5 and 8 ------------------------------------------------------------
SAMPLER = Sampler(60, seed=0)
R1 = smectic_response("r + 2*d")


def planted_transforms(count=20, seed=7):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        a = rng.normal(size=(3, 3))
        a *= rng.uniform(0.1, 1.0) / np.linalg.norm(a)  # ||log P0|| <= 1
        out.append(scipy.linalg.expm(a))
    return out


@pytest.fixture(scope="module")
def solved():
    out = []
    for p0 in planted_transforms():
        r2 = R1.precompose(p0)
        out.append((p0, r2, solve_isomorphism(R1, r2, SAMPLER)))
    return out


def test_criterion_5_isomorphism_recovery(solved):
    good = 0
    worst = 0.0
    for p0, _, iso in solved:
        sym_ok, _ = is_symmetry(R1, np.linalg.inv(p0) @ iso.matrix, SAMPLER, 1e-5)
        if iso.residual <= 1e-6 and sym_ok:
            good += 1
        worst = max(worst, iso.residual)
    assert record(5, good >= 19, f"{good}/20 recovered, worst RMS residual {worst:.2e}")


def test_criterion_8_conjugacy(solved):
    passed = 0
    worst = 0.0
    n = 0
    for _, r2, iso in solved:
        if not iso.isomorphic:
            continue
        n += 1
        ok, dev = conjugacy_check(R1, r2, iso, SAMPLER, count=10, seed=n)
        passed += ok
        worst = max(worst, dev)
    assert record(8, n > 0 and passed == n, f"{passed}/{n} isomorphisms conjugate symmetries, max deviation {worst:.2e}")


# 6 ------------------------------------------------------------------
def test_criterion_6_defect_classification():
    suite = load_defect_suite()
    wrong = [n for n, f, closed in suite.one_forms if smectic_defect_density(f, suite.chart).defect_free != closed]
    wrong += [n for n, f, hol in suite.frames if frame_defect_density(f, suite.chart).defect_free != hol]
    total = len(suite.one_forms) + len(suite.frames)
    assert record(6, not wrong, f"{total - len(wrong)}/{total} fields classified correctly {wrong or ''}".rstrip())


# 7 ------------------------------------------------------------------
def _poly(rng):
    terms = []
    for _ in range(3):
        c = round(float(rng.uniform(-2, 2)), 3)
        p = rng.integers(0, 3, size=3)
        mono = "*".join(f"X{i + 1}^{k}" for i, k in enumerate(p) if k) or "1"
        terms.append(f"({c})*{mono}")
    return " + ".join(terms)


def _random_field(kind, rng):
    if kind == "covector":
        return OneForm([_poly(rng) for _ in range(3)])
    if kind == "vector":
        return VectorField([_poly(rng) for _ in range(3)])
    if kind == "frame":
        return FrameField([[_poly(rng) for _ in range(3)] for _ in range(3)])
    return TensorField(kind, [[_poly(rng) for _ in range(3)] for _ in range(3)])


def _direct_components(kind, value, f):
    # closed-form contractions with the frame, independent of Representation.act
    fi = np.linalg.inv(f)
    if kind == "covector":
        return value @ f
    if kind == "vector":
        return fi @ value
    if kind == "frame":
        return fi @ value
    if kind == "bilinear":
        return f.T @ value @ f
    return fi @ value @ f  # (1,1)


def test_criterion_7_equivariance():
    rng = np.random.default_rng(11)
    kinds = ["covector", "vector", "frame", "bilinear", "(1,1)"]
    worst = 0.0
    for k in range(100):
        kind = kinds[k % len(kinds)]
        field = _random_field(kind, rng)
        x = rng.uniform(0, 1, size=3)
        while True:
            f, g = rng.normal(size=(3, 3)), rng.normal(size=(3, 3))
            if abs(np.linalg.det(f)) > 0.1 and abs(np.linalg.det(g)) > 0.1:
                break
        value = field.at(x)[0]
        lhs = _direct_components(kind, value, f @ g)
        t = components_in_frame(field, Frame(x, f))
        rhs = la.act(np.linalg.inv(g), t, field.rep)
        worst = max(worst, float(np.max(np.abs(lhs - rhs)) / (1.0 + np.max(np.abs(t)))))
    assert record(7, worst <= 1e-10, f"100 triples, max deviation {worst:.2e}")


# 9 ------------------------------------------------------------------
def test_criterion_9_determinism():
    mismatched = []
    files = {
        "isotropy": "isotropy.json",
        "symmetry": "symmetry.json",
        "isomorphism": "isomorphism.json",
        "defects": "defects.json",
        "compare": "compare.json",
        "paper-demo": "paper_demo.json",
    }
    assert set(files) == set(COMMANDS)
    for cmd, name in files.items():
        a = run(cmd, load_config(CONFIGS / name)).dumps(timing=False)
        b = run(cmd, load_config(CONFIGS / name)).dumps(timing=False)
        if a != b:
            mismatched.append(cmd)
        json.loads(a)
    assert record(9, not mismatched, f"{len(files) - len(mismatched)}/{len(files)} commands byte-identical")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
