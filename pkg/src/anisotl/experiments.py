"""Experiment orchestration shared by the CLI and the acceptance suite.

Each experiment takes a JSON-able config (defaults below), runs
deterministically from its seed, and returns a result dict with
pass/fail per criterion, CSV rows, and a manifest of tolerances and
truncation flags.  Experiments are independent and can run in a worker
pool; all randomness flows through seeded generators.
"""

from __future__ import annotations

import math
import types
from dataclasses import replace

import numpy as np

from .analyzers import (
    admissibility_integral,
    make_admissible,
    make_analyzing_pair,
    make_covering_profile,
)
from .field_engine import field_from_closure
from .frames import (
    FrameSystem,
    MolecularSystem,
    dual_envelope,
    dual_reconstruct,
    frame_bounds,
    molecule_check,
    moment_problem,
    sample_index_set,
    sequence_norm,
)
from .grids import GridSpec
from .group_analysis import (
    GroupGrid,
    control_weight,
    envelope_compare,
    group_point,
    pti_norm,
    reproducing_check,
    translation_bound_check,
    wavelet_transform,
)
from .linalg_expansive import (
    WeightNu,
    build_ellipsoid,
    matrix_from_json,
    measure_nu_constant,
    measure_quasi_triangle,
    sample_points,
)
from .norms import (
    NormParams,
    band_arrays,
    besov_norm,
    peetre_arrays,
    sup_over_windows,
    tl_norm_inf,
    tl_norm_q,
    tl_peetre_norm,
)
from .suite import SuiteSpec, suite_generate

LINE_MATRIX = {"dim": 1, "entries": [2.0]}
PLANE_MATRICES = {
    "isotropic": {"dim": 2, "entries": [2.0, 0.0, 0.0, 2.0]},
    "diagonal": {"dim": 2, "entries": [2.0, 0.0, 0.0, 4.0]},
    "shear": {"dim": 2, "entries": [2.0, 1.0, 0.0, 2.0]},
}

DEFAULTS: dict = {
    "quasinorm-axioms": {
        "label": "quasinorm-axioms",
        "seed": 42,
        "points": 10_000,
        "matrices": [LINE_MATRIX] + list(PLANE_MATRICES.values()),
        "stability_tolerance": 0.10,
    },
    "calderon": {
        "label": "calderon",
        "seed": 42,
        "tolerance": 1e-10,
        "cases": [
            {"matrix": LINE_MATRIX, "grid": {"extent": 8.0, "n": 1024}},
            {"matrix": PLANE_MATRICES["isotropic"], "grid": {"extent": 2.0, "n": 64}},
            {"matrix": PLANE_MATRICES["diagonal"], "grid": {"extent": 2.0, "n": 64}},
            {"matrix": PLANE_MATRICES["shear"], "grid": {"extent": 2.0, "n": 64}},
        ],
    },
    "admissibility": {
        "label": "admissibility",
        "seed": 42,
        "tolerance": 1e-6,
        "stability_tolerance": 1e-8,
        "n_frequencies": 100,
        "cases": [
            {"matrix": LINE_MATRIX, "grid": {"extent": 8.0, "n": 1024}},
            {"matrix": PLANE_MATRICES["diagonal"], "grid": {"extent": 2.0, "n": 64}},
        ],
    },
    "wavelet-repro": {
        "label": "wavelet-repro",
        "seed": 42,
        "matrix": LINE_MATRIX,
        "grid": {"extent": 8.0, "n": 512},
        "suite": {"count": 8, "seed": 11, "t_range": [1.9, 3.1]},
        "s_range": [-3.5, 0.5],
        "ds": 0.25,
        "isometry_tolerance": 0.01,
        "repro_tolerance": 0.05,
        "refine_factor": 0.6,
    },
    "norm-equivalence": {
        "label": "norm-equivalence",
        "seed": 42,
        "matrix": LINE_MATRIX,
        "grid": {"extent": 8.0, "n": 1024},
        "suite": {"count": 32, "seed": 5, "t_range": [1.6, 3.4]},
        "qs": [0.5, 1.0, 2.0, "inf"],
        "alphas": [-1.0, 0.0, 1.0],
        "scale_max": 5,
        "ell_range": [-2, 2],
        "ds": 0.125,
        "search_shells": 2,
        "stability_tolerance": 0.20,
        "refine": True,
    },
    "embedding": {
        "label": "embedding",
        "seed": 42,
        "matrix": LINE_MATRIX,
        "grid": {"extent": 8.0, "n": 1024},
        "suite": {"count": 16, "seed": 9, "t_range": [1.6, 3.4]},
        "alpha": 0.0,
        "qs": [1.0, 2.0],
        "scale_max": 5,
        "ell_range": [-2, 2],
        "stability_tolerance": 0.25,
    },
    "translation-bounds": {
        "label": "translation-bounds",
        "seed": 42,
        "matrix": LINE_MATRIX,
        "grid": {"extent": 8.0, "n": 512},
        "suite": {"count": 4, "seed": 3, "t_range": [1.9, 3.1]},
        "s_range": [-3.5, 0.5],
        "ds": 0.25,
        "pairs_per_branch": 16,
        "alpha": 0.5,
        "q": 2.0,
        "beta": 1.0,
        "slack": 0.01,
    },
    "control-weight": {
        "label": "control-weight",
        "seed": 42,
        "matrix": LINE_MATRIX,
        "samples": 10_000,
        "symmetry_tolerance": 1e-9,
        "stability_tolerance": 0.20,
        "branches": [
            {"alpha": 0.5, "beta": 1.0, "q": 2.0},
            {"alpha": -3.0, "beta": 1.0, "q": 2.0},
        ],
    },
    "coorbit": {
        "label": "coorbit",
        "seed": 42,
        "matrix": LINE_MATRIX,
        "grid": {"extent": 8.0, "n": 512},
        "suite": {"count": 8, "seed": 13, "t_range": [1.9, 3.1]},
        "qs": [1.0, 2.0, "inf"],
        "alpha": 0.0,
        "beta": 2.0,
        "ds": 0.125,
        "ell_range": [-2, 2],
        "scale_max": 4,
        "stability_tolerance": 0.25,
    },
    "frames": {
        "label": "frames",
        "seed": 42,
        "matrix": LINE_MATRIX,
        "grid": {"extent": 8.0, "n": 1024},
        "suite": {"count": 6, "seed": 21, "t_range": [1.8, 2.6]},
        "s_range": [-3.0, 0.5],
        "ds": 0.25,
        "covering": {"U": [0.25, 0.25], "density": 0.5},
        "separated": {"U": [0.25, 0.125], "density": 4.0, "core": 0.75},
        "iterations": 50,
        "reconstruction_tolerance": 1e-3,
        "moment_tolerance": 1e-6,
    },
}


def merged_config(kind: str, config: dict | None) -> dict:
    base = dict(DEFAULTS[kind])
    if config:
        base.update(config)
    return base


def _setup(matrix_json: dict, grid_json: dict):
    E = matrix_from_json(matrix_json)
    grid = GridSpec(d=E.d, extent=float(grid_json["extent"]), n=int(grid_json["n"]))
    phi = make_covering_profile(E, grid)
    return E, grid, phi


def _suite(cfg_suite: dict, grid, gauge, profile=None):
    spec = SuiteSpec(
        count=int(cfg_suite["count"]),
        seed=int(cfg_suite["seed"]),
        t_range=tuple(cfg_suite.get("t_range", (1.8, 3.2))),
        kind=cfg_suite.get("kind", "random"),
    )
    return suite_generate(spec, grid, gauge, profile)


def _q_value(q) -> float:
    return math.inf if q in ("inf", math.inf) else float(q)


# ---------------------------------------------------------------------------
# 1. quasi-norm axioms
# ---------------------------------------------------------------------------


def run_quasinorm_axioms(config: dict | None = None) -> dict:
    cfg = merged_config("quasinorm-axioms", config)
    rows = []
    ok = True
    for mat in cfg["matrices"]:
        E = matrix_from_json(mat)
        S = build_ellipsoid(E)
        pts = sample_points(S, int(cfg["points"]), seed=int(cfg["seed"]))
        shell, sat = S.shell_index(pts)
        shell_a, sat_a = S.shell_index(pts @ E.A.T)
        usable = ~(sat | sat_a)
        hom_exact = bool(np.array_equal(shell_a[usable], shell[usable] + 1))
        vals = S.rho(pts[usable])
        hom_float = bool(
            np.array_equal(S.rho(pts[usable] @ E.A.T), E.absdet * vals)
        )
        sym_exact = bool(np.array_equal(S.rho(-pts[usable]), vals))
        positive = bool(np.all(vals > 0))
        c1 = measure_quasi_triangle(S, n=int(cfg["points"]), seed=int(cfg["seed"]))
        c2 = measure_quasi_triangle(S, n=4 * int(cfg["points"]), seed=int(cfg["seed"]))
        stable = abs(c2 - c1) <= cfg["stability_tolerance"] * c1
        nu = WeightNu(S, beta=1.0)
        k1 = measure_nu_constant(nu, n=int(cfg["points"]), seed=int(cfg["seed"]))
        k2 = measure_nu_constant(nu, n=4 * int(cfg["points"]), seed=int(cfg["seed"]))
        nu_stable = np.isfinite(k1) and abs(k2 - k1) <= 0.5 * k1
        passed = hom_exact and hom_float and sym_exact and positive and stable and nu_stable
        ok = ok and passed
        rows.append(
            {
                "matrix": mat["entries"],
                "homogeneity_exact": hom_exact,
                "symmetry_exact": sym_exact,
                "quasi_triangle_c": c1,
                "quasi_triangle_c_4x": c2,
                "nu_constant": k1,
                "usable_fraction": float(np.mean(usable)),
                "pass": passed,
            }
        )
    return {
        "kind": "quasinorm-axioms",
        "pass": ok,
        "rows": rows,
        "columns": [
            "matrix",
            "homogeneity_exact",
            "symmetry_exact",
            "quasi_triangle_c",
            "quasi_triangle_c_4x",
            "nu_constant",
            "usable_fraction",
            "pass",
        ],
        "manifest": {"stability_tolerance": cfg["stability_tolerance"]},
    }


# ---------------------------------------------------------------------------
# 2. Calderon identity
# ---------------------------------------------------------------------------


def run_calderon(config: dict | None = None) -> dict:
    cfg = merged_config("calderon", config)
    rows = []
    ok = True
    for case in cfg["cases"]:
        E, grid, phi = _setup(case["matrix"], case["grid"])
        pair = make_analyzing_pair(phi, check_grid=grid)
        t = phi.t_grid(grid)
        t = t[np.isfinite(t)]
        err = float(np.max(np.abs(pair.calderon_sum(t) - 1.0)))
        win = pair.window_shape(np.linspace(*phi.t_support, 2001))
        phi_line = phi.shape(np.linspace(*phi.t_support, 2001))
        win_err = float(np.max(np.abs(phi_line * win - phi_line)))
        passed = err <= cfg["tolerance"] and win_err <= cfg["tolerance"]
        ok = ok and passed
        rows.append(
            {
                "matrix": case["matrix"]["entries"],
                "dim": E.d,
                "grid_n": grid.n,
                "calderon_error": err,
                "window_error": win_err,
                "overlap_n": pair.overlap_n,
                "pass": passed,
            }
        )
    return {
        "kind": "calderon",
        "pass": ok,
        "rows": rows,
        "columns": [
            "matrix",
            "dim",
            "grid_n",
            "calderon_error",
            "window_error",
            "overlap_n",
            "pass",
        ],
        "manifest": {"tolerance": cfg["tolerance"]},
    }


# ---------------------------------------------------------------------------
# 3. admissibility
# ---------------------------------------------------------------------------


def run_admissibility(config: dict | None = None) -> dict:
    cfg = merged_config("admissibility", config)
    rows = []
    ok = True
    rng = np.random.default_rng(int(cfg["seed"]))
    for case in cfg["cases"]:
        E, grid, phi = _setup(case["matrix"], case["grid"])
        vec = make_admissible(phi)
        span = 0.4 * grid.nyquist
        xi = rng.uniform(-span, span, size=(int(cfg["n_frequencies"]) + 20, E.d))
        xi = xi[np.linalg.norm(xi, axis=1) > 1e-2][: int(cfg["n_frequencies"])]
        vals = admissibility_integral(vec, xi, s_step=1.0 / 32.0, independent=True)
        err = float(np.max(np.abs(vals - 1.0)))
        fine = admissibility_integral(vec, xi[:16], s_step=1.0 / 64.0, independent=True)
        coarse = admissibility_integral(vec, xi[:16], s_step=1.0 / 32.0, independent=True)
        drift = float(np.max(np.abs(fine - coarse)))
        passed = err <= cfg["tolerance"] and drift < cfg["stability_tolerance"]
        ok = ok and passed
        rows.append(
            {
                "matrix": case["matrix"]["entries"],
                "dim": E.d,
                "max_error": err,
                "halving_drift": drift,
                "n_frequencies": len(xi),
                "pass": passed,
            }
        )
    return {
        "kind": "admissibility",
        "pass": ok,
        "rows": rows,
        "columns": ["matrix", "dim", "max_error", "halving_drift", "n_frequencies", "pass"],
        "manifest": {
            "tolerance": cfg["tolerance"],
            "stability_tolerance": cfg["stability_tolerance"],
        },
    }


# ---------------------------------------------------------------------------
# 4. wavelet isometry and reproducing formula
# ---------------------------------------------------------------------------


def run_wavelet_repro(config: dict | None = None) -> dict:
    cfg = merged_config("wavelet-repro", config)
    E, grid, phi = _setup(cfg["matrix"], cfg["grid"])
    vec = make_admissible(phi)
    # a genuinely different receiving analyzer exercises the general identity
    phi_vec = make_admissible(make_covering_profile(E, grid, t_halfwidth=0.9))
    ggrid = GroupGrid(
        grid=grid, s_min=float(cfg["s_range"][0]), s_max=float(cfg["s_range"][1]),
        ds=float(cfg["ds"]),
    )
    fields = _suite(cfg["suite"], grid, phi.gauge, phi)
    rows = []
    ok = True
    fine = ggrid.refined()
    for i, f in enumerate(fields):
        W = wavelet_transform(f, vec, ggrid)
        iso = abs(W.l2_norm(E.absdet) - f.l2_norm()) / f.l2_norm()
        rep = reproducing_check(f, phi_vec, vec, ggrid)
        f2 = field_from_closure(fine.grid, phi.gauge, f.spectrum_fn)
        rep2 = reproducing_check(f2, phi_vec, vec, fine)
        improved = rep2["rel_l2"] <= cfg["refine_factor"] * max(rep["rel_l2"], 1e-12)
        passed = (
            iso <= cfg["isometry_tolerance"]
            and rep["rel_l2"] <= cfg["repro_tolerance"]
            and improved
        )
        ok = ok and passed
        rows.append(
            {
                "field": i,
                "isometry_error": iso,
                "repro_rel_l2": rep["rel_l2"],
                "repro_rel_l2_refined": rep2["rel_l2"],
                "pass": passed,
            }
        )
    return {
        "kind": "wavelet-repro",
        "pass": ok,
        "rows": rows,
        "columns": [
            "field",
            "isometry_error",
            "repro_rel_l2",
            "repro_rel_l2_refined",
            "pass",
        ],
        "manifest": {
            "isometry_tolerance": cfg["isometry_tolerance"],
            "repro_tolerance": cfg["repro_tolerance"],
            "refine_factor": cfg["refine_factor"],
        },
    }


# ---------------------------------------------------------------------------
# 5. maximal characterization
# ---------------------------------------------------------------------------


def _char_beta(q: float) -> float:
    return 2.0 if math.isinf(q) else 1.0 / q + 0.5


def _norm_params(cfg, alpha: float, q: float) -> NormParams:
    return NormParams(
        alpha=alpha,
        q=q,
        beta=_char_beta(q),
        scale_max=int(cfg["scale_max"]),
        ell_min=int(cfg["ell_range"][0]),
        ell_max=int(cfg["ell_range"][1]),
        window="cube",
        s_step=float(cfg.get("ds", 0.125)),
        search_shells=int(cfg.get("search_shells", 2)),
    )


def _characterization_table(cfg, grid, pair, S, fields, flag_counts=None) -> list[dict]:
    """Per (q, alpha): suite extremes of the characterization ratios.

    flag_counts, when given, accumulates saturation/tail flags from every
    windowed supremum so the manifest can report them.
    """
    absdet = S.owner.absdet
    qs = [_q_value(q) for q in cfg["qs"]]
    alphas = [float(a) for a in cfg["alphas"]]
    betas = sorted({_char_beta(q) for q in qs})
    base_step = float(cfg.get("ds", 0.125))

    ell_max = int(cfg["ell_range"][1])
    j_min, j_max = -ell_max, int(cfg["scale_max"])
    disc_scales = list(range(j_min, j_max + 1))
    fine_step = min(base_step, 1.0 / 16.0)
    n_fine = int(round((j_max - j_min) / fine_step))
    cont_scales = j_min + fine_step * np.arange(n_fine + 1)

    # per field and beta: plain bands once, maximal fields once on the
    # fine scale grid (coarser q-grids subsample it)
    table = {}
    for fi, f in enumerate(fields):
        bands = band_arrays(f, pair.phi, disc_scales)
        pmax: dict = {}
        for beta in betas:
            arr, flag = peetre_arrays(
                f, pair.phi, S, cont_scales, beta, int(cfg.get("search_shells", 2))
            )
            pmax[beta] = arr
        table[fi] = (bands, pmax)

    rows = []
    for q in qs:
        beta = _char_beta(q)
        step = fine_step if (not math.isinf(q) and q < 1.0) else base_step
        stride = int(round(step / fine_step))
        sel = cont_scales[::stride]
        for alpha in alphas:
            params = _norm_params(cfg, alpha, q)
            ratios_d, ratios_c, factors = [], [], []
            for fi, f in enumerate(fields):
                bands, pmax = table[fi]
                plain_terms = _terms_from(bands, alpha, q, absdet, lambda s: 1.0)
                plain = _tracked_sup(grid, S, plain_terms, params, flag_counts)
                disc_arrays = {float(j): pmax[beta][float(j)] for j in disc_scales}
                disc_terms = _terms_from(disc_arrays, alpha, q, absdet, lambda s: 1.0)
                disc = _tracked_sup(grid, S, disc_terms, params, flag_counts)
                cont_arrays = {float(s): pmax[beta][float(s)] for s in sel}
                cont_terms = _terms_from(
                    cont_arrays, alpha, q, absdet, lambda s: step
                )
                cont = _tracked_sup(grid, S, cont_terms, params, flag_counts)
                if plain > 0:
                    ratios_d.append(disc / plain)
                    ratios_c.append(cont / plain)
                if disc > 0:
                    factors.append(cont / disc)
            rows.append(
                {
                    "q": "inf" if math.isinf(q) else q,
                    "alpha": alpha,
                    "beta": beta,
                    "c_emp_discrete": max(ratios_d),
                    "min_ratio_discrete": min(ratios_d),
                    "c_emp_continuous": max(ratios_c),
                    "factor_cont_over_disc": max(factors),
                }
            )
    return rows


def _tracked_sup(grid, S, terms, params, flag_counts) -> float:
    rep = sup_over_windows(grid, S, terms, params, "fine")
    if flag_counts is not None:
        for key, val in rep.flags.items():
            if val is True:
                flag_counts[key] = flag_counts.get(key, 0) + 1
    return rep.value


def _terms_from(arrays, alpha, q, absdet, quad):
    terms = []
    for s, arr in arrays.items():
        scaled = absdet ** (alpha * s) * arr
        if math.isinf(q):
            terms.append((s, 1.0, scaled))
        else:
            terms.append((s, quad(s), scaled**q))
    return terms


def run_norm_equivalence(config: dict | None = None) -> dict:
    cfg = merged_config("norm-equivalence", config)
    E, grid, phi = _setup(cfg["matrix"], cfg["grid"])
    pair = make_analyzing_pair(phi, check_grid=grid)
    S = build_ellipsoid(E)
    fields = _suite(cfg["suite"], grid, phi.gauge, phi)
    flag_counts: dict = {}
    base_rows = _characterization_table(cfg, grid, pair, S, fields, flag_counts)

    rows = []
    ok = True
    if cfg.get("refine", True):
        fine_grid = grid.refined()
        fine_fields = [
            field_from_closure(fine_grid, phi.gauge, f.spectrum_fn) for f in fields
        ]
        fine_rows = _characterization_table(cfg, fine_grid, pair, S, fine_fields, flag_counts)
    else:
        fine_rows = base_rows
    tol = float(cfg["stability_tolerance"])
    for b, f in zip(base_rows, fine_rows):
        lower_ok = b["min_ratio_discrete"] >= 1.0 - 1e-9
        drift_c = abs(f["c_emp_discrete"] - b["c_emp_discrete"]) / b["c_emp_discrete"]
        drift_f = (
            abs(f["factor_cont_over_disc"] - b["factor_cont_over_disc"])
            / b["factor_cont_over_disc"]
        )
        passed = lower_ok and drift_c < tol and drift_f < tol
        ok = ok and passed
        rows.append(
            {
                **b,
                "c_emp_refined": f["c_emp_discrete"],
                "c_emp_drift": drift_c,
                "factor_drift": drift_f,
                "pass": passed,
            }
        )
    return {
        "kind": "norm-equivalence",
        "pass": ok,
        "rows": rows,
        "columns": [
            "q",
            "alpha",
            "beta",
            "min_ratio_discrete",
            "c_emp_discrete",
            "c_emp_continuous",
            "factor_cont_over_disc",
            "c_emp_refined",
            "c_emp_drift",
            "factor_drift",
            "pass",
        ],
        "manifest": {"stability_tolerance": tol, "flag_counts": flag_counts},
    }


# ---------------------------------------------------------------------------
# 6. Besov identification and embeddings
# ---------------------------------------------------------------------------


def run_embedding(config: dict | None = None) -> dict:
    cfg = merged_config("embedding", config)
    E, grid, phi = _setup(cfg["matrix"], cfg["grid"])
    pair = make_analyzing_pair(phi, check_grid=grid)
    S = build_ellipsoid(E)
    fields = _suite(cfg["suite"], grid, phi.gauge, phi)
    alpha = float(cfg["alpha"])
    rows = []
    ok = True
    for grid_now, tag in ((grid, "base"), (grid.refined(), "refined")):
        flds = (
            fields
            if tag == "base"
            else [field_from_closure(grid_now, phi.gauge, f.spectrum_fn) for f in fields]
        )
        for q in cfg["qs"]:
            qv = _q_value(q)
            params = NormParams(
                alpha=alpha,
                q=qv,
                scale_max=int(cfg["scale_max"]),
                ell_min=int(cfg["ell_range"][0]),
                ell_max=int(cfg["ell_range"][1]),
            )
            besov_over_inf = []
            inf_over_q = []
            for f in flds:
                n_q = tl_norm_q(f, pair, S, params).value
                n_inf = tl_norm_inf(f, pair, S, params).value
                n_b = besov_norm(f, pair, S, alpha, params).value
                if n_q > 0 and n_inf > 0:
                    besov_over_inf.append(n_b / n_inf)
                    inf_over_q.append(n_inf / n_q)
            rows.append(
                {
                    "grid": tag,
                    "q": qv,
                    "besov_over_inf_max": max(besov_over_inf),
                    "besov_over_inf_min": min(besov_over_inf),
                    "inf_over_q_max": max(inf_over_q),
                }
            )
    tol = float(cfg["stability_tolerance"])
    half = len(rows) // 2
    for i in range(half):
        b, f = rows[i], rows[half + i]
        drift = abs(f["besov_over_inf_max"] - b["besov_over_inf_max"]) / b[
            "besov_over_inf_max"
        ]
        passed = (
            b["besov_over_inf_min"] >= 1.0 - 1e-9
            and b["inf_over_q_max"] <= 1.0 + 1e-9
            and drift <= tol
        )
        ok = ok and passed
        b["stability_drift"] = drift
        b["pass"] = passed
        f["stability_drift"] = drift
        f["pass"] = passed
    return {
        "kind": "embedding",
        "pass": ok,
        "rows": rows,
        "columns": [
            "grid",
            "q",
            "besov_over_inf_min",
            "besov_over_inf_max",
            "inf_over_q_max",
            "stability_drift",
            "pass",
        ],
        "manifest": {"stability_tolerance": tol},
    }


# ---------------------------------------------------------------------------
# 7. translation bounds
# ---------------------------------------------------------------------------


def run_translation_bounds(config: dict | None = None) -> dict:
    cfg = merged_config("translation-bounds", config)
    E, grid, phi = _setup(cfg["matrix"], cfg["grid"])
    vec = make_admissible(phi)
    S = build_ellipsoid(E)
    ggrid = GroupGrid(
        grid=grid, s_min=float(cfg["s_range"][0]), s_max=float(cfg["s_range"][1]),
        ds=float(cfg["ds"]),
    )
    fields = _suite(cfg["suite"], grid, phi.gauge, phi)
    params = NormParams(
        alpha=float(cfg["alpha"]),
        q=_q_value(cfg["q"]),
        beta=float(cfg["beta"]),
        ell_min=-2,
        ell_max=2,
        window="ball",
    )
    rng = np.random.default_rng(int(cfg["seed"]))
    rows = []
    ok = True
    per_branch = int(cfg["pairs_per_branch"])
    ds = float(cfg["ds"])
    for branch, t_choices in (
        ("positive", np.array([ds, 2 * ds, 4 * ds, 1.0])),
        ("nonpositive", np.array([0.0, -ds, -2 * ds, -1.0])),
    ):
        for k in range(per_branch):
            f = fields[k % len(fields)]
            W = wavelet_transform(f, vec, ggrid)
            t = float(rng.choice(t_choices))
            y = rng.uniform(-1.5, 1.5, size=E.d)
            rep = translation_bound_check(
                W, group_point(y, t), S, params, slack=float(cfg["slack"])
            )
            passed = rep["left_ok"] and rep["right_ok"]
            ok = ok and passed
            rows.append(
                {
                    "branch": branch,
                    "t": t,
                    "y": float(y[0]),
                    "left_ratio": rep["left_ratio"],
                    "left_bound": rep["left_bound"],
                    "right_ratio": rep["right_ratio"],
                    "right_bound": rep["right_bound"],
                    "v": rep["v"],
                    "pass": passed,
                }
            )
    return {
        "kind": "translation-bounds",
        "pass": ok,
        "rows": rows,
        "columns": [
            "branch",
            "t",
            "y",
            "left_ratio",
            "left_bound",
            "right_ratio",
            "right_bound",
            "v",
            "pass",
        ],
        "manifest": {"slack": cfg["slack"]},
    }


# ---------------------------------------------------------------------------
# 8. control weights and envelopes
# ---------------------------------------------------------------------------


def run_control_weight(config: dict | None = None) -> dict:
    cfg = merged_config("control-weight", config)
    E = matrix_from_json(cfg["matrix"])
    S = build_ellipsoid(E)
    n = int(cfg["samples"])
    rng = np.random.default_rng(int(cfg["seed"]))
    rows = []
    ok = True
    for branch_cfg in cfg["branches"]:
        w = control_weight(
            S,
            alpha=float(branch_cfg["alpha"]),
            beta=float(branch_cfg["beta"]),
            q=_q_value(branch_cfg["q"]),
        )
        ys = rng.normal(size=(n, E.d)) * 3.0
        ts = np.round(rng.uniform(-3, 3, size=n) * 8) / 8
        lhs = w(ys, ts)
        inv_y = np.empty_like(ys)
        for t in np.unique(ts):
            mask = ts == t
            inv_y[mask] = -(ys[mask] @ np.asarray(E.power(-float(t))).T)
        rhs = E.absdet ** (ts / w.r) * w(inv_y, -ts)
        sym_err = float(np.max(np.abs(lhs - rhs) / lhs))

        half = n // 2
        rep_half = envelope_compare(w, ys[:half], ts[:half])
        rep_full = envelope_compare(w, ys, ts)
        drift_max = abs(rep_full["max_ratio"] - rep_half["max_ratio"]) / rep_half[
            "max_ratio"
        ]
        drift_min = abs(rep_full["min_ratio"] - rep_half["min_ratio"]) / rep_half[
            "min_ratio"
        ]
        passed = (
            sym_err <= float(cfg["symmetry_tolerance"])
            and rep_full["min_ratio"] > 0
            and drift_max <= float(cfg["stability_tolerance"])
            and drift_min <= float(cfg["stability_tolerance"])
        )
        ok = ok and passed
        rows.append(
            {
                "alpha": branch_cfg["alpha"],
                "beta": branch_cfg["beta"],
                "q": branch_cfg["q"],
                "upper_branch": rep_full["upper_branch"],
                "symmetry_error": sym_err,
                "envelope_min_ratio": rep_full["min_ratio"],
                "envelope_max_ratio": rep_full["max_ratio"],
                "min_ratio_drift": drift_min,
                "max_ratio_drift": drift_max,
                "pass": passed,
            }
        )
    branches = {bool(r["upper_branch"]) for r in rows}
    ok = ok and branches == {True, False}
    return {
        "kind": "control-weight",
        "pass": ok,
        "rows": rows,
        "columns": [
            "alpha",
            "beta",
            "q",
            "upper_branch",
            "symmetry_error",
            "envelope_min_ratio",
            "envelope_max_ratio",
            "min_ratio_drift",
            "max_ratio_drift",
            "pass",
        ],
        "manifest": {
            "symmetry_tolerance": cfg["symmetry_tolerance"],
            "stability_tolerance": cfg["stability_tolerance"],
        },
    }


# ---------------------------------------------------------------------------
# 9. coorbit identification
# ---------------------------------------------------------------------------


def run_coorbit(config: dict | None = None) -> dict:
    cfg = merged_config("coorbit", config)
    E, grid, phi = _setup(cfg["matrix"], cfg["grid"])
    vec = make_admissible(phi)
    S = build_ellipsoid(E)
    alpha = float(cfg["alpha"])
    beta = float(cfg["beta"])
    ds = float(cfg["ds"])
    fields = _suite(cfg["suite"], grid, phi.gauge, phi)

    rows = []
    ok = True
    flag_counts: dict = {}
    for grid_now, tag in ((grid, "base"), (grid.widened(2), "refined")):
        flds = (
            fields
            if tag == "base"
            else [field_from_closure(grid_now, phi.gauge, f.spectrum_fn) for f in fields]
        )
        lo, hi = vec.psi.t_support
        t_lo, t_hi = cfg["suite"]["t_range"]
        s_min = math.floor((lo - t_hi) / ds) * ds - ds
        s_max = math.ceil((hi - t_lo) / ds) * ds + ds
        ggrid = GroupGrid(grid=grid_now, s_min=s_min, s_max=s_max, ds=ds)
        for q in cfg["qs"]:
            qv = _q_value(q)
            alpha_prime = alpha + 0.5 if math.isinf(qv) else alpha + 0.5 - 1.0 / qv
            pti_params = NormParams(
                alpha=-alpha_prime,
                q=qv,
                beta=beta,
                scale_max=int(cfg["scale_max"]),
                ell_min=int(cfg["ell_range"][0]),
                ell_max=int(cfg["ell_range"][1]),
                window="ball",
                s_step=ds,
            )
            tl_params = replace(pti_params, alpha=alpha, window="cube")
            ratios = []
            exactness = []
            shim = types.SimpleNamespace(phi=vec.psi)
            for f in flds:
                W = wavelet_transform(f, vec, ggrid)
                coeff_rep = pti_norm(W, S, pti_params)
                coeff = coeff_rep.value
                for key, val in coeff_rep.flags.items():
                    if val is True:
                        flag_counts[key] = flag_counts.get(key, 0) + 1
                plain = (
                    tl_norm_q(f, shim, S, tl_params).value
                    if not math.isinf(qv)
                    else tl_norm_inf(f, shim, S, tl_params).value
                )
                if plain > 0:
                    ratios.append(coeff / plain)
                peetre_cont = tl_peetre_norm(
                    f, shim, S, replace(pti_params, alpha=alpha, window="ball"),
                    discrete=False,
                ).value
                if peetre_cont > 0:
                    exactness.append(coeff / peetre_cont)
            rows.append(
                {
                    "grid": tag,
                    "q": "inf" if math.isinf(qv) else qv,
                    "alpha_prime": alpha_prime,
                    "ratio_min": min(ratios),
                    "ratio_max": max(ratios),
                    "exactness_min": min(exactness),
                    "exactness_max": max(exactness),
                }
            )
    tol = float(cfg["stability_tolerance"])
    half = len(rows) // 2
    for i in range(half):
        b, f = rows[i], rows[half + i]
        drift = abs(f["ratio_max"] - b["ratio_max"]) / b["ratio_max"]
        passed = (
            b["ratio_min"] > 0
            and drift <= tol
            and 0.8 <= b["exactness_min"] <= b["exactness_max"] <= 1.25
        )
        ok = ok and passed
        for r in (b, f):
            r["ratio_drift"] = drift
            r["pass"] = passed
    return {
        "kind": "coorbit",
        "pass": ok,
        "rows": rows,
        "columns": [
            "grid",
            "q",
            "alpha_prime",
            "ratio_min",
            "ratio_max",
            "exactness_min",
            "exactness_max",
            "ratio_drift",
            "pass",
        ],
        "manifest": {"stability_tolerance": tol, "flag_counts": flag_counts},
    }


# ---------------------------------------------------------------------------
# 10. frames
# ---------------------------------------------------------------------------


def run_frames(config: dict | None = None) -> dict:
    cfg = merged_config("frames", config)
    E, grid, phi = _setup(cfg["matrix"], cfg["grid"])
    vec = make_admissible(phi)
    S = build_ellipsoid(E)
    ggrid = GroupGrid(
        grid=grid, s_min=float(cfg["s_range"][0]), s_max=float(cfg["s_range"][1]),
        ds=float(cfg["ds"]),
    )
    fields = _suite(cfg["suite"], grid, phi.gauge, phi)

    rows = []
    manifest: dict = {}
    cov = sample_index_set(
        ggrid, E, U=tuple(cfg["covering"]["U"]), kind="covering",
        density_factor=float(cfg["covering"]["density"]),
    )
    system = FrameSystem.build(vec, cov, grid)
    a_lo, b_hi = frame_bounds(system, fields)
    manifest["frame_bounds"] = [a_lo, b_hi]
    manifest["covering_stats"] = cov.stats
    ok = a_lo > 0
    rate = (b_hi - a_lo) / (b_hi + a_lo) + 0.05
    curve_rows = []
    for i, f in enumerate(fields):
        rec, errors = dual_reconstruct(
            f, system, iterations=int(cfg["iterations"]), bounds=(a_lo, b_hi)
        )
        curve_rows.extend(
            {"field": i, "iteration": k, "error": e} for k, e in enumerate(errors)
        )
        floor = max(100.0 * errors[-1], 1e-9)
        seg = [e for e in errors if e > floor]
        mean_ratio = (
            (seg[-1] / seg[0]) ** (1.0 / (len(seg) - 1)) if len(seg) >= 2 else 0.0
        )
        passed = errors[-1] <= float(cfg["reconstruction_tolerance"]) and (
            mean_ratio <= rate
        )
        ok = ok and passed
        rows.append(
            {
                "stage": "reconstruction",
                "field": i,
                "value": errors[-1],
                "detail": mean_ratio,
                "pass": passed,
            }
        )

    sep = sample_index_set(
        ggrid, E, U=tuple(cfg["separated"]["U"]), kind="separated",
        density_factor=float(cfg["separated"]["density"]),
        core_fraction=float(cfg["separated"].get("core", 0.75)),
    )
    sep_system = FrameSystem.build(vec, sep, grid)
    manifest["separated_stats"] = sep.stats
    rng = np.random.default_rng(int(cfg["seed"]))
    c = rng.normal(size=len(sep)) + 1j * rng.normal(size=len(sep))
    c *= np.exp(-0.1 * np.abs(sep.ss))
    f_sol, residuals, D = moment_problem(c, sep_system)
    res = float(np.max(residuals) / max(np.max(np.abs(c)), 1e-300))
    res_ok = res <= float(cfg["moment_tolerance"])
    ok = ok and res_ok
    rows.append(
        {"stage": "moments", "field": -1, "value": res, "detail": len(sep), "pass": res_ok}
    )

    hgrid = GroupGrid(grid=grid, s_min=-2.0, s_max=2.0, ds=float(cfg["ds"]))
    env, members = dual_envelope(sep_system, D, hgrid, stride=4)
    mol = MolecularSystem(members=members, Gamma=sep, envelope=env, vec=vec)
    rep = molecule_check(mol, hgrid, stride=4)
    w = control_weight(S, alpha=0.0, beta=1.0, q=2.0)
    from .group_analysis import wiener_amalgam_norm

    wnorm = wiener_amalgam_norm(env, w, r=1.0)
    mol_ok = rep["violations"] == [] and np.isfinite(wnorm) and wnorm > 0
    ok = ok and mol_ok
    rows.append(
        {"stage": "molecules", "field": -1, "value": wnorm, "detail": len(rep["violations"]), "pass": mol_ok}
    )
    manifest["molecule_floor"] = rep["floor"]

    seq = sequence_norm(
        np.abs(c),
        sep,
        ggrid,
        S,
        NormParams(alpha=0.0, q=2.0, beta=1.0, ell_min=-2, ell_max=1, window="ball"),
    )
    rows.append(
        {"stage": "sequence-norm", "field": -1, "value": seq.value, "detail": 0, "pass": seq.value > 0}
    )

    return {
        "kind": "frames",
        "pass": ok,
        "rows": rows,
        "columns": ["stage", "field", "value", "detail", "pass"],
        "manifest": manifest,
        "extra_tables": {
            "error-curves": (["field", "iteration", "error"], curve_rows)
        },
    }


RUNNERS = {
    "quasinorm-axioms": run_quasinorm_axioms,
    "calderon": run_calderon,
    "admissibility": run_admissibility,
    "wavelet-repro": run_wavelet_repro,
    "norm-equivalence": run_norm_equivalence,
    "embedding": run_embedding,
    "translation-bounds": run_translation_bounds,
    "control-weight": run_control_weight,
    "coorbit": run_coorbit,
    "frames": run_frames,
}
