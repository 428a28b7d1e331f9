"""Endpoint smoothness quasi-norms: localized window averages of scale
aggregates, their l-infinity variants, the sup-norm scale form, and the
Peetre-type characterizations.

Every norm here is a supremum of window averages over a truncated family
of windows (dilated cubes or quasi-norm balls), with the inner scale
aggregation coupled to the window level: only scales finer than the
window contribute.  The truncation ranges are explicit in NormParams and
the attaining window is reported with saturation flags, so every
approximated supremum is auditable.

Window enumeration and averaging are pure; evaluation parallelizes over
windows and scales.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import WindowOutOfDomain
from .field_engine import SampledField, convolve_scale
from .grids import GridSpec, offset_index_vectors, spatial_points
from .linalg_expansive import QuasiNormStructure
from .peetre import offset_shells, weighted_sup_multi

_COUPLE_TOL = 1e-9
_TAIL_FRACTION = 1e-6


@dataclass(frozen=True)
class NormParams:
    """Truncation and window policy shared by all norm evaluators.

    q may be math.inf.  beta is only consulted by the Peetre-type
    characterizations, which require beta > 1/q (q < inf) or beta > 1
    (q = inf).  scale_max (J) truncates the fine-scale sum; window levels
    run over [ell_min, ell_max].  s_step is the continuous-scale
    quadrature step; below q = 1 it is tightened to at most 1/16.
    """

    alpha: float
    q: float
    beta: float = 1.0
    scale_max: int = 5
    ell_min: int = -3
    ell_max: int = 2
    window: str = "cube"
    s_step: float = 0.125
    search_shells: int = 2
    center_stride: int = 1

    def __post_init__(self):
        if self.q <= 0:
            raise ValueError("q must lie in (0, inf]")
        if self.window not in ("cube", "ball"):
            raise ValueError(f"unknown window kind {self.window!r}")

    @property
    def effective_s_step(self) -> float:
        if self.q < 1.0:
            return min(self.s_step, 1.0 / 16.0)
        return self.s_step

    def require_characterization_beta(self) -> None:
        if math.isinf(self.q):
            if self.beta <= 1.0:
                raise ValueError("beta must exceed 1 for the q = inf characterization")
        elif self.beta <= 1.0 / self.q:
            raise ValueError("beta must exceed 1/q for the characterization")


@dataclass(frozen=True)
class NormReport:
    value: float
    arg_ell: int | None
    arg_window: tuple | None
    flags: dict

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "arg_ell": self.arg_ell,
            "arg_window": None if self.arg_window is None else list(self.arg_window),
            "flags": self.flags,
        }


# ---------------------------------------------------------------------------
# Window tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _CubeWindows:
    labels: np.ndarray      # (W, d) integer window indices k
    inverse: np.ndarray     # per grid point, window row
    counts: np.ndarray
    admissible: np.ndarray  # bool per window: fully inside the box


_WINDOW_CACHE: dict = {}


def cube_windows(grid: GridSpec, S: QuasiNormStructure, ell: int) -> _CubeWindows:
    key = ("cube", grid, id(S), ell)
    if key in _WINDOW_CACHE:
        return _WINDOW_CACHE[key]
    E = S.owner
    pts = spatial_points(grid)
    inv_pow = np.linalg.inv(np.asarray(E.power(ell)))
    y = pts @ inv_pow.T
    k = np.floor(y).astype(np.int64)
    labels, inverse, counts = np.unique(
        k, axis=0, return_inverse=True, return_counts=True
    )
    corners = np.stack(
        np.meshgrid(*([np.array([0.0, 1.0])] * grid.d), indexing="ij"), axis=-1
    ).reshape(-1, grid.d)
    pow_mat = np.asarray(E.power(ell))
    admissible = np.ones(len(labels), dtype=bool)
    for c in corners:
        corner_pts = (labels + c) @ pow_mat.T
        admissible &= np.all(np.abs(corner_pts) <= grid.extent + 1e-12, axis=1)
    out = _CubeWindows(
        labels=labels, inverse=inverse.ravel(), counts=counts, admissible=admissible
    )
    _WINDOW_CACHE[key] = out
    return out


@dataclass(frozen=True)
class _BallWindows:
    kernel_fft: np.ndarray   # FFT of indicator / count
    admissible: np.ndarray   # bool per grid point (flat): usable center
    count: int


def ball_windows(grid: GridSpec, S: QuasiNormStructure, ell: int, stride: int = 1) -> _BallWindows:
    key = ("ball", grid, id(S), ell, stride)
    if key in _WINDOW_CACHE:
        return _WINDOW_CACHE[key]
    offs = offset_index_vectors(grid)
    z = offs * grid.h
    inv_pow = np.linalg.inv(np.asarray(S.owner.power(ell)))
    inside = S.contains(z @ inv_pow.T)
    count = int(np.count_nonzero(inside))
    if count == 0:
        out = _BallWindows(
            kernel_fft=np.zeros(grid.shape, dtype=complex),
            admissible=np.zeros(grid.size, dtype=bool),
            count=0,
        )
        _WINDOW_CACHE[key] = out
        return out
    kern = np.zeros(grid.size)
    kern[inside] = 1.0 / count
    kernel_fft = np.fft.fftn(kern.reshape(grid.shape))
    ext = np.max(np.abs(z[inside]), axis=0)
    pts = spatial_points(grid)
    admissible = np.all(np.abs(pts) <= grid.extent - ext - grid.h, axis=1)
    if stride > 1:
        keep = np.zeros(grid.shape, dtype=bool)
        keep[(slice(None, None, stride),) * grid.d] = True
        admissible &= keep.ravel()
    out = _BallWindows(kernel_fft=kernel_fft, admissible=admissible, count=count)
    _WINDOW_CACHE[key] = out
    return out


def _cube_means(values_flat: np.ndarray, w: _CubeWindows) -> np.ndarray:
    sums = np.bincount(w.inverse, weights=values_flat, minlength=len(w.counts))
    return sums / w.counts


def _ball_means(values_flat: np.ndarray, grid: GridSpec, w: _BallWindows) -> np.ndarray:
    conv = np.fft.ifftn(
        np.fft.fftn(values_flat.reshape(grid.shape)) * w.kernel_fft
    ).real
    return conv.ravel()


# ---------------------------------------------------------------------------
# Aggregation engine
# ---------------------------------------------------------------------------


def sup_over_windows(
    grid: GridSpec,
    S: QuasiNormStructure,
    terms: list[tuple[float, float, np.ndarray]],
    params: NormParams,
    coupling: str = "fine",
) -> NormReport:
    """Supremum of window averages of coupled scale aggregates.

    terms: (scale, quadrature weight, nonnegative flat array); arrays are
    already alpha-weighted and q-powered for finite q.  coupling "fine"
    admits scale s into window level ell when s >= -ell; "group" when
    s <= ell.  For q = inf the weight entries are ignored and the sup
    over admitted scales of window means is taken instead.
    """
    q = params.q
    terms = sorted(terms, key=lambda it: it[0], reverse=(coupling == "fine"))
    # with this ordering, the admitted set only grows as ell increases
    best = -1.0
    best_ell = None
    best_window = None
    any_window = False
    tail_flag = False
    running: np.ndarray | None = None
    idx = 0
    finite_q = not math.isinf(q)

    for ell in range(params.ell_min, params.ell_max + 1):
        if coupling == "fine":
            def admitted(s):
                return s >= -ell - _COUPLE_TOL
        else:
            def admitted(s):
                return s <= ell + _COUPLE_TOL

        if finite_q:
            while idx < len(terms) and admitted(terms[idx][0]):
                s, w, arr = terms[idx]
                contrib = w * arr
                running = contrib.copy() if running is None else running + contrib
                idx += 1
            if running is None:
                continue
            stack = [running]
        else:
            stack = [arr for s, _, arr in terms if admitted(s)]
            if not stack:
                continue

        if params.window == "cube":
            table = cube_windows(grid, S, ell)
            if not np.any(table.admissible):
                continue
            any_window = True
            means = None
            for arr in stack:
                m = _cube_means(arr, table)
                means = m if means is None else np.maximum(means, m)
            means = means[table.admissible]
            local = int(np.argmax(means))
            val = float(means[local])
            window_id = tuple(
                int(v) for v in table.labels[table.admissible][local]
            )
        else:
            table = ball_windows(grid, S, ell, params.center_stride)
            if table.count == 0 or not np.any(table.admissible):
                continue
            any_window = True
            means = None
            for arr in stack:
                m = _ball_means(arr, grid, table)
                means = m if means is None else np.maximum(means, m)
            means = means[table.admissible]
            local = int(np.argmax(means))
            val = float(means[local])
            center = spatial_points(grid)[table.admissible][local]
            window_id = tuple(float(v) for v in center)

        if finite_q:
            val = val ** (1.0 / q) if val > 0 else 0.0
        if val > best:
            best = val
            best_ell = ell
            best_window = window_id

    if not any_window:
        raise WindowOutOfDomain(
            "no admissible window in the configured level range"
        )

    if best < 0:
        best = 0.0

    # tail audit: weight of the finest admitted scale at the optimum
    if finite_q and best > 0 and terms:
        fine_scale, w_f, arr_f = (
            max(terms, key=lambda it: it[0])
            if coupling == "fine"
            else min(terms, key=lambda it: it[0])
        )
        total = best**q
        if params.window == "cube":
            table = cube_windows(grid, S, best_ell)
            rows = np.flatnonzero(table.admissible)
            which = [
                r
                for r in rows
                if tuple(int(v) for v in table.labels[r]) == best_window
            ]
            if which:
                m = _cube_means(w_f * arr_f, table)[which[0]]
                tail_flag = bool(m > _TAIL_FRACTION * total)
        else:
            table = ball_windows(grid, S, best_ell, params.center_stride)
            m = _ball_means(w_f * arr_f, grid, table)
            pts = spatial_points(grid)
            d2 = np.sum((pts - np.asarray(best_window)) ** 2, axis=1)
            tail_flag = bool(m[int(np.argmin(d2))] > _TAIL_FRACTION * total)

    flags = {
        "ell_saturated": best_ell in (params.ell_min, params.ell_max),
        "scale_tail": tail_flag,
    }
    return NormReport(value=best, arg_ell=best_ell, arg_window=best_window, flags=flags)


# ---------------------------------------------------------------------------
# Term builders
# ---------------------------------------------------------------------------


def band_arrays(f: SampledField, profile, scales) -> dict[float, np.ndarray]:
    """|f * phi_s| on the grid per scale."""
    return {
        float(s): convolve_scale(f, profile, float(s)).abs_values.ravel()
        for s in scales
    }


def peetre_arrays(
    f: SampledField,
    profile,
    S: QuasiNormStructure,
    scales,
    beta: float,
    search_shells: int,
) -> tuple[dict[float, np.ndarray], bool]:
    """Peetre maximal fields per scale; returns the or-ed boundary flag."""
    out = {}
    flagged = False
    E = S.owner
    for s in scales:
        s = float(s)
        band = convolve_scale(f, profile, s)
        struct = offset_shells(
            f.grid,
            S,
            E.power(s),
            search_shells,
            cache_tag=("f", round(s, 9), search_shells),
        )
        res = weighted_sup_multi(band.abs_values, struct, [beta], E.absdet)
        vals, flag = res[beta]
        flagged = flagged or flag
        out[s] = vals.ravel()
    return out, flagged


def _weighted_terms(
    arrays: dict[float, np.ndarray],
    alpha: float,
    q: float,
    absdet: float,
    quad_weight,
) -> list[tuple[float, float, np.ndarray]]:
    terms = []
    for s, arr in arrays.items():
        scaled = absdet ** (alpha * s) * arr
        if math.isinf(q):
            terms.append((s, 1.0, scaled))
        else:
            terms.append((s, quad_weight(s), scaled**q))
    return terms


def _discrete_scales(params: NormParams) -> list[int]:
    return list(range(-params.ell_max, params.scale_max + 1))


def _continuous_scales(params: NormParams) -> np.ndarray:
    step = params.effective_s_step
    lo = -params.ell_max
    n = int(round((params.scale_max - lo) / step))
    return lo + step * np.arange(n + 1)


# ---------------------------------------------------------------------------
# Norm operations
# ---------------------------------------------------------------------------


def tl_norm_q(f: SampledField, pair, S: QuasiNormStructure, params: NormParams) -> NormReport:
    """Localized small-scale norm with the l^q sum inside the window average."""
    if math.isinf(params.q):
        return tl_norm_inf(f, pair, S, params)
    arrays = band_arrays(f, pair.phi, _discrete_scales(params))
    terms = _weighted_terms(arrays, params.alpha, params.q, S.owner.absdet, lambda s: 1.0)
    return sup_over_windows(f.grid, S, terms, params, coupling="fine")


def tl_norm_inf(f: SampledField, pair, S: QuasiNormStructure, params: NormParams) -> NormReport:
    """Variant with the sup over scales outside the window average."""
    arrays = band_arrays(f, pair.phi, _discrete_scales(params))
    p = replace(params, q=math.inf)
    terms = _weighted_terms(arrays, params.alpha, math.inf, S.owner.absdet, lambda s: 1.0)
    return sup_over_windows(f.grid, S, terms, p, coupling="fine")


def besov_norm(f: SampledField, pair, S: QuasiNormStructure, alpha: float, params: NormParams) -> NormReport:
    """sup_j |det A|^(alpha j) max_x |f * phi_j|."""
    arrays = band_arrays(f, pair.phi, _discrete_scales(params))
    absdet = S.owner.absdet
    best, arg = 0.0, None
    for s, arr in arrays.items():
        v = absdet ** (alpha * s) * float(np.max(arr))
        if v > best:
            best, arg = v, int(s)
    return NormReport(
        value=best,
        arg_ell=arg,
        arg_window=None,
        flags={"scale_saturated": arg in (-params.ell_max, params.scale_max)},
    )


def tl_peetre_norm(
    f: SampledField,
    pair,
    S: QuasiNormStructure,
    params: NormParams,
    discrete: bool = True,
) -> NormReport:
    """Maximal-function characterization value (discrete or continuous scales)."""
    params.require_characterization_beta()
    if discrete:
        scales = _discrete_scales(params)
        quad = lambda s: 1.0
    else:
        scales = _continuous_scales(params)
        step = params.effective_s_step
        quad = lambda s: step
    arrays, flagged = peetre_arrays(
        f, pair.phi, S, scales, params.beta, params.search_shells
    )
    terms = _weighted_terms(arrays, params.alpha, params.q, S.owner.absdet, quad)
    rep = sup_over_windows(f.grid, S, terms, params, coupling="fine")
    rep.flags["peetre_boundary"] = flagged
    return rep


def window_equivalence_check(
    arrays: dict[float, np.ndarray] | np.ndarray,
    S: QuasiNormStructure,
    grid: GridSpec,
    params: NormParams,
) -> dict:
    """Cube-window versus ball-window suprema for the same data."""
    if isinstance(arrays, np.ndarray):
        arrays = {0.0: np.asarray(arrays, dtype=float).ravel()}
    p_inf = replace(params, q=math.inf)
    terms = [(s, 1.0, arr) for s, arr in arrays.items()]
    cube = sup_over_windows(grid, S, terms, replace(p_inf, window="cube"), "fine")
    ball = sup_over_windows(grid, S, terms, replace(p_inf, window="ball"), "fine")
    ratio = cube.value / ball.value if ball.value > 0 else math.nan
    return {"cube": cube, "ball": ball, "ratio": ratio}


def embedding_check(
    f: SampledField, pair, S: QuasiNormStructure, alpha: float, q: float, params: NormParams
) -> dict:
    """Besov versus localized-norm comparisons for one field."""
    if math.isinf(q):
        raise ValueError("embedding check needs q < inf")
    p = replace(params, alpha=alpha, q=q)
    n_q = tl_norm_q(f, pair, S, p)
    n_inf = tl_norm_inf(f, pair, S, p)
    n_b = besov_norm(f, pair, S, alpha, p)
    if n_q.value == 0.0 or n_inf.value == 0.0:
        return {"skipped": True}
    return {
        "skipped": False,
        "inf_over_q": n_inf.value / n_q.value,
        "besov_over_inf": n_b.value / n_inf.value,
        "tl_q": n_q,
        "tl_inf": n_inf,
        "besov": n_b,
    }
