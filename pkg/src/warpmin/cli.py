"""Command line interface: verify-metric, run, export, diagnose.

Exit codes: 0 success, 1 validation error, 2 pipeline incomplete,
3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
from pathlib import Path

import numpy as np

from .charts import BoxChart, build_glue_profile, wall_mean_curvature
from .config import RunConfig, config_hash, load_config
from .diagnostics import (
    Transversal,
    curvature_map,
    disk_check,
    lamination_trend,
    sheet_census,
    trace_monotonicity,
)
from .errors import (
    AssemblyError,
    ConfigError,
    DegenerateMeshError,
    DomainError,
    GlueConstructionError,
    InvalidProfileError,
    PerturbationTooLargeError,
    PipelineError,
)
from .metric import BaseMetric
from .pipeline import load_manifest, load_stage_mesh, run_sequence
from .warp import (
    graph_second_variation,
    scalar_curvature,
    slice_area,
    slice_mean_curvature,
    validate_warp,
)

_FORMATS = ("obj", "csv", "json", "all")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is reserved for incomplete runs
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def _write_json(payload: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(payload), indent=1, sort_keys=True) + "\n")


def _load_run_config(args) -> RunConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    return RunConfig()


def _apply_threads(n: int) -> None:
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


def _metric_checks(cfg: RunConfig) -> list[dict]:
    profile = cfg.build_profile()
    checks = []

    validation = validate_warp(profile)
    checks.append(
        {
            "name": "admissibility",
            "passed": validation.passed,
            "detail": "; ".join(
                f"{c.name}:{'ok' if c.passed else 'FAIL'}" for c in validation.checks
            ),
        }
    )

    zs = np.linspace(-np.pi, np.pi, 10_000)
    scal = scalar_curvature(profile, zs)
    i = int(np.argmin(scal))
    checks.append(
        {
            "name": "curvature-positive",
            "passed": bool(np.all(scal > 0.0)),
            "detail": f"min {scal[i]:.9f} at z = {zs[i]:.6f}",
            "min": float(scal[i]),
            "argmin": float(zs[i]),
        }
    )

    worst = 0.0
    h = 1e-5
    for a in (0.0, np.pi / 4, np.pi / 2, 3 * np.pi / 4):
        fd = (np.log(slice_area(profile, a + h)) - np.log(slice_area(profile, a - h))) / (
            2.0 * h
        )
        worst = max(worst, abs(slice_mean_curvature(profile, a) - fd))
    checks.append(
        {
            "name": "slice-consistency",
            "passed": bool(worst <= 1e-6),
            "detail": f"max |H - (log area)'| = {worst:.3e} over sample heights",
        }
    )

    glue = build_glue_profile(cfg.eps0)
    chart = BoxChart(n=1, eps=cfg.eps0)
    reports = wall_mean_curvature(profile, glue, chart)
    res = max(r.max_residual for r in reports)
    dih = max(r.max_dihedral_deviation for r in reports)
    checks.append(
        {
            "name": "wall-minimality",
            "passed": bool(res < 1e-3),
            "detail": f"max first-variation residual {res:.3e}",
        }
    )
    checks.append(
        {
            "name": "wall-orthogonality",
            "passed": bool(dih <= 1e-6),
            "detail": f"max dihedral deviation from pi/2: {dih:.3e}",
        }
    )

    q0 = graph_second_variation(profile, lambda phi, th: np.ones_like(phi))
    if profile.mode == "product":
        ok = abs(q0) <= 1e-6
        detail = f"constant mode {q0:.3e} (expected ~0 in product mode)"
    else:
        expect = 8.0 * np.pi * float(profile.d2omega(0.0))
        ok = expect > 0 and abs(q0 - expect) <= 0.01 * expect
        detail = f"constant mode {q0:.6f}, closed form {expect:.6f}"
    rng = np.random.default_rng(cfg.seed)
    rand_ok = True
    for _ in range(3):
        a, b, c = rng.uniform(-1.0, 1.0, size=3)
        q = graph_second_variation(
            profile,
            lambda phi, th, a=a, b=b, c=c: a * np.cos(phi)
            + b * np.sin(phi) * np.cos(th + c),
        )
        if profile.mode == "product":
            rand_ok = rand_ok and abs(q) <= 1e-6
        else:
            rand_ok = rand_ok and q > 0.0
    checks.append(
        {
            "name": "second-variation",
            "passed": bool(ok and rand_ok),
            "detail": detail + ("" if rand_ok else "; randomized mode check failed"),
        }
    )
    return checks


def _cmd_verify(args) -> int:
    cfg = _load_run_config(args)
    checks = _metric_checks(cfg)
    passed = all(c["passed"] for c in checks)
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}: {c['detail']}")
    report = {
        "profile": cfg.profile,
        "config_hash": config_hash(cfg),
        "checks": checks,
        "passed": passed,
    }
    out = Path(args.out or ".")
    _write_json(report, out / "metric_report.json")
    print(f"report: {out / 'metric_report.json'}")
    return 0 if passed else 1


def _final_complete_stage(record: dict) -> int | None:
    idx = None
    for j, st in enumerate(record.get("stages", [])):
        if st.get("status") == "complete":
            idx = j
    return idx


def _diagnose_dir(run_dir: Path, cfg: RunConfig | None = None) -> tuple[dict, bool]:
    manifest = load_manifest(run_dir)
    conf = dict(manifest.get("config") or {})
    if cfg is None:
        kwargs = {k: v for k, v in conf.items() if k in RunConfig.__dataclass_fields__}
        for key in ("n_list", "cosine_coeffs"):
            if key in kwargs and isinstance(kwargs[key], list):
                kwargs[key] = tuple(kwargs[key])
        cfg = RunConfig(**kwargs) if kwargs else RunConfig()
    profile = cfg.build_profile()
    transversal = cfg.transversal()
    base_metric = BaseMetric(profile)

    records_out = []
    entries = []
    complete = manifest.get("status") == "complete"
    for record in manifest["records"]:
        n = record["n"]
        if record.get("status") == "error" or not record.get("stages"):
            records_out.append(
                {"n": n, "status": record.get("status"), "message": record.get("message")}
            )
            continue
        j = _final_complete_stage(record)
        if j is None:
            records_out.append({"n": n, "status": "incomplete"})
            continue
        stage = record["stages"][j]
        assembled = load_stage_mesh(run_dir, record, j, "assembled")
        solved = load_stage_mesh(run_dir, record, j, "solved")
        census = sheet_census(assembled, transversal)
        trace = trace_monotonicity(solved, cfg.monotone_planes)
        curv = curvature_map(assembled, base_metric, profile=profile)
        eps = float(stage["eps"])
        disks = {
            "interior": disk_check(
                assembled,
                base_metric,
                (cfg.phi_star, cfg.theta_star, 0.5),
                0.4,
            ),
            "axis-seam": disk_check(
                assembled, base_metric, (eps, cfg.theta_star, 0.0), 0.3
            ),
        }
        entries.append(
            {"n": n, "census": census, "trace_fraction": trace["fraction"]}
        )
        records_out.append(
            {
                "n": n,
                "status": record["status"],
                "eps_final": eps,
                "census": census.to_dict(),
                "trace": {
                    "fraction": trace["fraction"],
                    "planes_hit": trace["planes_hit"],
                    "planes_skipped": trace["planes_skipped"],
                    "worst": trace["worst"],
                },
                "curvature_bands": curv["bands"],
                "disks": disks,
            }
        )
    trend = lamination_trend(entries).to_dict() if entries else None
    report = {
        "run": str(run_dir),
        "config_hash": manifest.get("config_hash", ""),
        "transversal": transversal.to_dict(),
        "records": records_out,
        "trend": trend,
        "complete": complete,
    }
    return report, complete


def _cmd_run(args) -> int:
    cfg = _load_run_config(args)
    chash = config_hash(cfg)
    out = Path(args.out) if args.out else Path("runs") / chash
    profile = cfg.build_profile()
    validation = validate_warp(profile)
    if not validation.passed:
        bad = ", ".join(c.name for c in validation.checks if not c.passed)
        raise ConfigError(f"profile failed admissibility checks: {bad}")
    manifest = run_sequence(
        profile,
        cfg.n_list,
        cfg.schedule(),
        cfg.solver(),
        out,
        config_fields=cfg.to_dict(),
        config_hash=chash,
    )
    for record in manifest["records"]:
        stages = record.get("stages", [])
        areas = ", ".join(f"{st['area']:.6f}" for st in stages if st.get("area"))
        print(f"n={record['n']}: {record['status']} ({len(stages)} stages; areas {areas})")
    report, complete = _diagnose_dir(out, cfg)
    _write_json(report, out / "report.json")
    print(f"manifest: {out / 'manifest.json'}")
    print(f"report: {out / 'report.json'}")
    if args.format:
        code = _export_dir(out, args.format)
        if code != 0:
            return code
    return 0 if complete else 2


def _export_dir(run_dir: Path, fmt: str) -> int:
    manifest = load_manifest(run_dir)
    dest = run_dir / "export"
    dest.mkdir(parents=True, exist_ok=True)
    missing = []
    copied = 0
    want_obj = fmt in ("obj", "all")
    want_csv = fmt in ("csv", "all")
    want_json = fmt in ("json", "all")
    for record in manifest["records"]:
        for stage in record.get("stages", []):
            if want_obj:
                for name in stage.get("files", {}).values():
                    src = run_dir / name
                    if src.exists():
                        shutil.copy2(src, dest / name)
                        copied += 1
                    else:
                        missing.append(name)
                    # the sidecar travels with the mesh; without it the
                    # chart tag and stage parameters are lost on reimport
                    side = src.with_suffix(".json")
                    if side.exists():
                        shutil.copy2(side, dest / side.name)
                        copied += 1
            if want_csv and stage.get("telemetry"):
                src = run_dir / stage["telemetry"]
                if src.exists():
                    shutil.copy2(src, dest / src.name)
                    copied += 1
                else:
                    missing.append(stage["telemetry"])
    if want_json:
        payload = {"manifest": manifest}
        report_path = run_dir / "report.json"
        if report_path.exists():
            payload["report"] = json.loads(report_path.read_text())
        _write_json(payload, dest / "export.json")
        copied += 1
    if missing:
        for name in missing:
            print(f"missing: {name}", file=sys.stderr)
        return 3
    print(f"exported {copied} files to {dest}")
    return 0


def _cmd_export(args) -> int:
    run_dir = Path(args.out or ".")
    if not (run_dir / "manifest.json").exists():
        print(f"no manifest.json under {run_dir}", file=sys.stderr)
        return 3
    return _export_dir(run_dir, args.format or "all")


def _cmd_diagnose(args) -> int:
    run_dir = Path(args.out or ".")
    if not (run_dir / "manifest.json").exists():
        print(f"no manifest.json under {run_dir}", file=sys.stderr)
        return 3
    cfg = load_config(args.config) if args.config else None
    report, complete = _diagnose_dir(run_dir, cfg)
    _write_json(report, run_dir / "report.json")
    trend = report.get("trend") or {}
    for rec in report["records"]:
        if "census" in rec:
            c = rec["census"]
            print(
                f"n={rec['n']}: crossings +{c['count_positive']}/-{c['count_negative']}"
                f", min height {c['min_abs_height']:.4f}"
                f", trace fraction {rec['trace']['fraction']:.3f}"
            )
        else:
            print(f"n={rec['n']}: {rec.get('status')}")
    if trend:
        print(
            "trend: counts nondecreasing = "
            f"{trend.get('counts_nondecreasing')}, min height decreasing = "
            f"{trend.get('min_height_decreasing')}, two sided = "
            f"{trend.get('all_two_sided')}"
        )
    print(f"report: {run_dir / 'report.json'}")
    return 0 if complete else 2


def _build_parser() -> _Parser:
    parser = _Parser(prog="warpmin", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH", help="key=value config file")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--threads", type=int, default=None, metavar="N")
        p.add_argument("--format", choices=_FORMATS, default=None)

    for name, func, desc in (
        ("verify-metric", _cmd_verify, "check the analytic metric properties"),
        ("run", _cmd_run, "run the minimization pipeline and diagnostics"),
        ("export", _cmd_export, "re-emit artifacts from a finished run"),
        ("diagnose", _cmd_diagnose, "recompute diagnostics for a run directory"),
    ):
        p = sub.add_parser(name, help=desc)
        common(p)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("--threads must be >= 1", file=sys.stderr)
            return 1
        _apply_threads(args.threads)
    try:
        return args.func(args)
    except (
        ConfigError,
        DomainError,
        InvalidProfileError,
        GlueConstructionError,
        PerturbationTooLargeError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (PipelineError, AssemblyError, DegenerateMeshError) as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
