"""Command line entry point: ``gstructure <command> --config <path>``.

Exit codes: 0 success, 1 negative verdict, 2 invalid configuration,
3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ScenarioConfig, default_demo_config, load_config, parse_config
from .constitutive import UniformBody, conjugacy_check, solve_isomorphism, symmetry_algebra
from .defects import (
    NonUniformBody,
    compare_gstructures,
    frame_defect_density,
    geometric_gstructure,
    material_gstructure,
    smectic_defect_density,
)
from .fields import DegenerateFieldError, FrameField, OneForm
from .liealg import as_rep, isotropy_algebra, orbit_tangent_dim

EXIT_OK, EXIT_NEGATIVE, EXIT_CONFIG, EXIT_NONCONVERGENCE = 0, 1, 2, 3


@dataclass
class RunReport:
    command: str
    config_hash: str
    seed: int
    results: list = field(default_factory=list)
    exit_code: int = EXIT_OK
    wall_time: float = 0.0

    def flag(self, code: int) -> None:
        # non-convergence (3) outranks a negative verdict (1)
        self.exit_code = max(self.exit_code, code)

    def to_json(self, timing: bool = True) -> dict:
        out = {
            "command": self.command,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "exit_code": self.exit_code,
            "results": self.results,
        }
        if timing:
            out["timing"] = {"wall_time_s": round(self.wall_time, 6)}
        return out

    def dumps(self, timing: bool = True) -> str:
        return json.dumps(self.to_json(timing), indent=2, sort_keys=True) + "\n"


def _new(cmd: str, cfg: ScenarioConfig) -> RunReport:
    return RunReport(cmd, cfg.hash, cfg.seed)


# -------------------------------------------------------------- commands

def cmd_isotropy(cfg: ScenarioConfig) -> RunReport:
    rep = _new("isotropy", cfg)
    for item in cfg.raw.get("isotropy", []):
        value, r = cfg.tensor(item["tensor"])
        uni = bool(item.get("unimodular", False))
        basis = isotropy_algebra(value, r, unimodular=uni)
        rep.results.append({
            "tensor": item["tensor"],
            "rep": r.tag,
            "unimodular": uni,
            "algebra": basis.to_json(),
            "orbit_dimension": orbit_tangent_dim(value, r),
        })
    return rep


def cmd_symmetry(cfg: ScenarioConfig) -> RunReport:
    rep = _new("symmetry", cfg)
    for item in cfg.raw.get("symmetry", []):
        resp = cfg.response(item["response"])
        basis = symmetry_algebra(resp, cfg.sampler)
        rep.results.append({
            "response": resp.to_json(),
            "algebra": basis.to_json(),
            "samples": cfg.sampler.count,
            "spread": cfg.sampler.spread,
            "notes": basis.notes,
        })
    return rep


def cmd_isomorphism(cfg: ScenarioConfig) -> RunReport:
    rep = _new("isomorphism", cfg)
    for item in cfg.raw.get("isomorphism", []):
        r1 = cfg.response(item["source"])
        r2 = cfg.response(item["target"])
        iso = solve_isomorphism(r1, r2, cfg.sampler, cfg.solver)
        entry = {"source": item["source"], "target": item["target"], "isomorphism": iso.to_json()}
        if iso.isomorphic:
            n = int(item.get("conjugacy_samples", 10))
            ok, dev = conjugacy_check(r1, r2, iso, cfg.sampler, count=n, seed=cfg.seed)
            entry["conjugacy"] = {"passed": ok, "max_deviation": float(f"{dev:.6g}"), "samples": n}
            if not ok:
                rep.flag(EXIT_NEGATIVE)
        elif iso.verdict == "not_isomorphic":
            rep.flag(EXIT_NEGATIVE)
        else:
            rep.flag(EXIT_NONCONVERGENCE)
        rep.results.append(entry)
    return rep


def _defect_report(fld, cfg, tol):
    if isinstance(fld, OneForm):
        return smectic_defect_density(fld, cfg.chart, tol)
    if isinstance(fld, FrameField):
        return frame_defect_density(fld, cfg.chart, tol)
    raise ConfigError("defect criteria apply to one-forms and frame fields")


def cmd_defects(cfg: ScenarioConfig, csv_dir=None) -> RunReport:
    rep = _new("defects", cfg)
    for item in cfg.raw.get("defects", []):
        fld = cfg.field(item["field"])
        report = _defect_report(fld, cfg, float(item.get("tol", 1e-9)))
        if csv_dir is not None:
            Path(csv_dir).mkdir(parents=True, exist_ok=True)
            report.write_csv(Path(csv_dir) / f"{item['field']}.csv")
        if not report.defect_free:
            rep.flag(EXIT_NEGATIVE)
        rep.results.append({"field": item["field"], **report.to_json()})
    return rep


def _build_gspec(g: dict, cfg: ScenarioConfig):
    if g["type"] == "geometric":
        value, r = cfg.tensor(g["tensor"])
        return geometric_gstructure(value, r, cfg.field(g["field"]), cfg.chart, bool(g.get("unimodular", False)))
    body, arche = cfg.body(g["body"])
    return material_gstructure(body, arche, cfg.chart, sampler=cfg.sampler, opts=cfg.solver)


def cmd_compare(cfg: ScenarioConfig) -> RunReport:
    rep = _new("compare", cfg)
    for item in cfg.raw.get("compare", []):
        try:
            a = _build_gspec(item["a"], cfg)
            b = _build_gspec(item["b"], cfg)
        except NonUniformBody as err:
            rep.results.append({"verdict": "non-uniform", "nodes": err.nodes})
            rep.flag(EXIT_NEGATIVE)
            continue
        cmp = compare_gstructures(a, b, float(item.get("tol", 1e-6)), float(item.get("membership_tol", 1e-7)))
        if not cmp.coincide:
            rep.flag(EXIT_NEGATIVE)
        rep.results.append({"a": a.to_json(), "b": b.to_json(), "comparison": cmp.to_json()})
    return rep


def cmd_paper_demo(cfg: ScenarioConfig) -> RunReport:
    """Layering form versus constitutive law: build both G-structures and compare."""
    rep = _new("paper-demo", cfg)
    demo = cfg.raw.get("paper_demo", {})
    form = cfg.field(demo.get("form", "omega"))
    arche = cfg.response(demo.get("response", "smectic"))
    if "tensor" in demo:
        value, r = cfg.tensor(demo["tensor"])
    else:
        value, r = np.array([1.0, 0.0, 0.0]), as_rep("covector")
    unimodular = bool(demo.get("unimodular", True))
    if not isinstance(form, OneForm):
        raise ConfigError("the smectic demo needs a one-form")

    geo = geometric_gstructure(value, r, form, cfg.chart, unimodular)
    defects = smectic_defect_density(form, cfg.chart)
    implant = demo.get("implant", [[1, 0, 0], [0, 1, 0], [0, 0, 1]])
    body = UniformBody(arche, implant, cfg.chart)
    result = {
        "geometric": geo.to_json(),
        "defects": defects.to_json(),
    }
    try:
        mat = material_gstructure(body, arche, cfg.chart, sampler=cfg.sampler, opts=cfg.solver)
    except NonUniformBody as err:
        result["material"] = {"verdict": "non-uniform", "nodes": err.nodes}
        result["verdict"] = "differ"
        rep.flag(EXIT_NEGATIVE)
        rep.results.append(result)
        return rep
    cmp = compare_gstructures(geo, mat)
    result["material"] = {
        **mat.to_json(),
        "max_implant_residual": float(f"{np.max(mat.implant_residuals):.6g}"),
    }
    result["comparison"] = cmp.to_json()
    result["verdict"] = cmp.verdict
    if cmp.coincide:
        result["conclusion"] = (
            f"material and geometric G-structures coincide: structure algebras of dimension "
            f"{cmp.dims[0]}, sections related by structure-group elements at all "
            f"{len(cmp.node_residuals)} grid nodes"
        )
    else:
        if cmp.algebras_equal:
            result["conclusion"] = (
                f"G-structures differ: equal {cmp.dims[0]}-dimensional algebras but sections are not related "
                f"by structure-group elements (max transition residual {cmp.max_node_residual:.3g})"
            )
        else:
            result["conclusion"] = f"G-structures differ (dimensions {cmp.dims[0]} vs {cmp.dims[1]})"
        rep.flag(EXIT_NEGATIVE)
    rep.results.append(result)
    return rep


COMMANDS = {
    "isotropy": cmd_isotropy,
    "symmetry": cmd_symmetry,
    "isomorphism": cmd_isomorphism,
    "defects": cmd_defects,
    "compare": cmd_compare,
    "paper-demo": cmd_paper_demo,
}


def run(command: str, cfg: ScenarioConfig, csv_dir=None) -> RunReport:
    t0 = time.perf_counter()
    if command == "defects":
        report = cmd_defects(cfg, csv_dir)
    else:
        report = COMMANDS[command](cfg)
    report.wall_time = time.perf_counter() - t0
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gstructure", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "paper-demo", help="scenario JSON file")
        p.add_argument("--out", help="write the JSON report here instead of stdout")
        p.add_argument("--csv", help="directory for per-node density CSV files (defects)")
        p.add_argument("--no-timing", action="store_true", help="omit wall-clock timing from the report")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else parse_config(default_demo_config())
        report = run(args.command, cfg, args.csv)
    except (ConfigError, DegenerateFieldError) as err:
        print(f"gstructure: configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    text = report.dumps(timing=not args.no_timing)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"{args.command}: exit {report.exit_code}, report written to {args.out}")
    else:
        sys.stdout.write(text)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
