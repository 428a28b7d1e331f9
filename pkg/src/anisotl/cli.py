"""Command-line front end: experiment orchestration and artifact emission.

Results land in results/<label>/ as summary.json, one CSV per experiment
kind, and manifest.json listing every tolerance and truncation flag.
Outputs contain no timestamps, so identical configs and seeds yield
byte-identical files.  Exit codes: 0 all pass, 1 criterion failure,
2 config/validation failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .errors import AnisoError
from .experiments import RUNNERS, merged_config
from .grids import GridSpec
from .linalg_expansive import build_ellipsoid, diagnostic_record, matrix_from_json
from .analyzers import make_analyzing_pair, make_covering_profile
from .norms import NormParams, besov_norm, tl_norm_inf, tl_norm_q
from .storage import ensure_dir, load_field, save_field, write_csv, write_json
from .suite import SuiteSpec, suite_generate

_GROUP_KINDS = {
    "wavelet": "wavelet-repro",
    "reproduce": "wavelet-repro",
    "ptinorm": "coorbit",
    "weights": "control-weight",
    "translations": "translation-bounds",
}

_FRAMES_KINDS = {
    "sample-gamma": "frames",
    "bounds": "frames",
    "reconstruct": "frames",
    "moments": "frames",
    "molecule-check": "frames",
}


def _load_config(path: str | None, overrides: list[str]) -> dict:
    cfg: dict = {}
    if path:
        try:
            with open(path) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise SystemExit(_fail_config(f"cannot read config {path}: {exc}"))
    for item in overrides or []:
        if "=" not in item:
            raise SystemExit(_fail_config(f"--set needs key=value, got {item!r}"))
        key, _, value = item.partition("=")
        node = cfg
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        try:
            node[parts[-1]] = json.loads(value)
        except json.JSONDecodeError:
            node[parts[-1]] = value
    return cfg


def _fail_config(msg: str) -> int:
    print(f"config error: {msg}", file=sys.stderr)
    return 2


def run(kind: str, config: dict, out_dir: str = "results") -> int:
    """Run one experiment kind and write its artifact directory."""
    if kind not in RUNNERS:
        return _fail_config(f"unknown experiment kind {kind!r}")
    cfg = merged_config(kind, config)
    try:
        result = RUNNERS[kind](cfg)
    except AnisoError as exc:
        print(f"experiment failed to run: {exc}", file=sys.stderr)
        return 2
    label = cfg.get("label", kind)
    dest = ensure_dir(Path(out_dir) / label)
    write_csv(dest / f"{kind}.csv", result["columns"], result["rows"])
    for name, (cols, rows) in result.get("extra_tables", {}).items():
        write_csv(dest / f"{kind}-{name}.csv", cols, rows)
    write_json(
        dest / "summary.json",
        {"kind": kind, "label": label, "pass": result["pass"]},
    )
    write_json(
        dest / "manifest.json",
        {"kind": kind, "config": cfg, "manifest": result["manifest"]},
    )
    status = "PASS" if result["pass"] else "FAIL"
    print(f"{kind}: {status} ({len(result['rows'])} rows) -> {dest}")
    return 0 if result["pass"] else 1


def _cmd_validate(args) -> int:
    cfg = _load_config(args.config, args.set)
    worst = 0
    for kind in ("quasinorm-axioms", "calderon", "admissibility"):
        code = run(kind, cfg.get(kind, {}), args.out)
        worst = max(worst, code)
    if args.diagnostics:
        E = matrix_from_json(
            cfg.get("matrix", {"dim": 1, "entries": [2.0]})
        )
        S = build_ellipsoid(E)
        rec = diagnostic_record(
            "build_ellipsoid",
            E.to_json(),
            {"c": S.c, "r": S.r, "quasi_triangle_c": S.quasi_triangle_c},
            1e-14,
        )
        print(json.dumps(rec, sort_keys=True))
    return worst


def _cmd_norm(args) -> int:
    cfg = _load_config(args.config, args.set)
    if args.field:
        return _single_field_norm(args, cfg)
    worst = 0
    for kind in ("norm-equivalence", "embedding"):
        worst = max(worst, run(kind, cfg.get(kind, {}), args.out))
    return worst


def _single_field_norm(args, cfg: dict) -> int:
    base = merged_config("norm-equivalence", cfg.get("norm-equivalence", {}))
    E = matrix_from_json(base["matrix"])
    S = build_ellipsoid(E)
    grid_json = base["grid"]
    grid = GridSpec(d=E.d, extent=float(grid_json["extent"]), n=int(grid_json["n"]))
    phi = make_covering_profile(E, grid)
    pair = make_analyzing_pair(phi, check_grid=grid)
    f = load_field(args.field, phi.gauge)
    params = NormParams(
        alpha=args.alpha,
        q=math.inf if args.q == "inf" else float(args.q),
        beta=args.beta,
        scale_max=args.J,
        ell_min=-args.L,
        ell_max=args.L,
        window=args.window,
        s_step=args.ds,
    )
    reports = {
        "tl_q": tl_norm_q(f, pair, S, params).to_json(),
        "tl_inf": tl_norm_inf(f, pair, S, params).to_json(),
        "besov": besov_norm(f, pair, S, args.alpha, params).to_json(),
    }
    dest = ensure_dir(Path(args.out) / "norm")
    write_json(dest / "norm_report.json", reports)
    rows = [
        {"field": args.field, "norm": name, "value": rep["value"]}
        for name, rep in reports.items()
    ]
    write_csv(dest / "norms.csv", ["field", "norm", "value"], rows)
    print(json.dumps(reports, sort_keys=True))
    return 0


def _cmd_group(args) -> int:
    cfg = _load_config(args.config, args.set)
    kind = _GROUP_KINDS[args.what]
    return run(kind, cfg.get(kind, {}), args.out)


_FRAME_STAGES = {
    "sample-gamma": None,       # stats live in the manifest
    "bounds": None,
    "reconstruct": "reconstruction",
    "moments": "moments",
    "molecule-check": "molecules",
}


def _cmd_frames(args) -> int:
    cfg = _load_config(args.config, args.set)
    kind = "frames"
    merged = merged_config(kind, cfg.get(kind, {}))
    try:
        result = RUNNERS[kind](merged)
    except AnisoError as exc:
        print(f"experiment failed to run: {exc}", file=sys.stderr)
        return 2
    stage = _FRAME_STAGES.get(args.what)
    rows = result["rows"]
    if stage is not None:
        rows = [r for r in rows if r["stage"] == stage]
    passed = all(r["pass"] for r in rows) if rows else result["pass"]
    label = merged.get("label", kind)
    dest = ensure_dir(Path(args.out) / label)
    write_csv(dest / f"{kind}-{args.what}.csv", result["columns"], rows)
    write_json(dest / "summary.json", {"kind": kind, "stage": args.what, "pass": passed})
    write_json(
        dest / "manifest.json",
        {"kind": kind, "config": merged, "manifest": result["manifest"]},
    )
    print(f"frames/{args.what}: {'PASS' if passed else 'FAIL'} -> {dest}")
    return 0 if passed else 1


def _cmd_suite(args) -> int:
    cfg = _load_config(args.config, args.set)
    suite_cfg = cfg.get("suite", {"count": 8, "seed": 7})
    matrix = cfg.get("matrix", {"dim": 1, "entries": [2.0]})
    grid_json = cfg.get("grid", {"extent": 8.0, "n": 1024})
    E = matrix_from_json(matrix)
    grid = GridSpec(d=E.d, extent=float(grid_json["extent"]), n=int(grid_json["n"]))
    phi = make_covering_profile(E, grid)
    spec = SuiteSpec(
        count=int(suite_cfg.get("count", 8)),
        seed=int(suite_cfg.get("seed", 7)),
        t_range=tuple(suite_cfg.get("t_range", (1.8, 3.2))),
        kind=suite_cfg.get("kind", "random"),
    )
    fields = suite_generate(spec, grid, phi.gauge, phi)
    dest = ensure_dir(Path(args.out) / "suite")
    rows = []
    for i, f in enumerate(fields):
        path = dest / f"field_{i:03d}.bin"
        save_field(path, f)
        rows.append({"field": str(path), "l2": f.l2_norm(), "band_lo": f.band_t[0], "band_hi": f.band_t[1]})
    write_csv(dest / "suite.csv", ["field", "l2", "band_lo", "band_hi"], rows)
    print(f"suite: wrote {len(fields)} fields -> {dest}")
    return 0


def _cmd_run(args) -> int:
    cfg = _load_config(args.config, args.set)
    kind = cfg.get("experiment", args.kind)
    if kind is None:
        return _fail_config("config needs an 'experiment' kind (or pass --kind)")
    return run(kind, cfg, args.out)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="anisotl",
        description="Anisotropic endpoint smoothness-space experiments",
    )
    parser.add_argument("--out", default="results", help="results directory")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="JSON config path")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")

    p = sub.add_parser("validate", parents=[common], help="matrix/analyzer validation experiments")
    p.add_argument("--diagnostics", action="store_true")
    p.set_defaults(fn=_cmd_validate)

    p = sub.add_parser("norm", parents=[common], help="norm experiments or single-field reports")
    p.add_argument("--field", default=None, help="stored field container")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--q", default="2")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--J", type=int, default=5)
    p.add_argument("--L", type=int, default=2)
    p.add_argument("--window", choices=["cube", "ball"], default="cube")
    p.add_argument("--ds", type=float, default=0.125)
    p.set_defaults(fn=_cmd_norm)

    p = sub.add_parser("group", parents=[common], help="group-side experiments")
    p.add_argument("what", choices=sorted(_GROUP_KINDS))
    p.set_defaults(fn=_cmd_group)

    p = sub.add_parser("frames", parents=[common], help="frame decomposition experiments")
    p.add_argument(
        "what",
        choices=sorted(_FRAMES_KINDS),
        nargs="?",
        default="reconstruct",
    )
    p.set_defaults(fn=_cmd_frames)

    p = sub.add_parser("suite", parents=[common], help="generate and store a field suite")
    p.set_defaults(fn=_cmd_suite)

    p = sub.add_parser("run", parents=[common], help="run one experiment kind")
    p.add_argument("--kind", choices=sorted(RUNNERS), default=None)
    p.set_defaults(fn=_cmd_run)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else 2


if __name__ == "__main__":
    sys.exit(main())
