"""Fourier-domain analyzing vectors for the discrete and continuous
Calderon decompositions.

Every profile is a 1-D shape in the continuous scale coordinate t of the
transpose dilation, composed with that coordinate:  g_hat(xi) =
shape(t(xi)).  Dilating the frequency by (A^T)^j shifts t by exactly j,
so coverage, Calderon sums and admissibility integrals all reduce to 1-D
identities that hold to machine precision on any grid.

Profiles are immutable after construction; evaluations are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .errors import CoverageGap, DivisionUnderflow
from .grids import GridSpec, freq_points
from .linalg_expansive import ExpansiveMatrix, ScaleGauge, transpose_gauge, validate_expansive

_SUPPORT_TOL = 1e-12


def bump(u: np.ndarray) -> np.ndarray:
    """C-infinity bump on (-1, 1), normalized to peak value 1."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ui * ui))
    return out


@dataclass(frozen=True)
class SpectralProfile:
    """Band-limited frequency profile g_hat = shape(t(xi)).

    The support annulus is reported in gauge radii |det A|^t, bounded away
    from 0 and infinity.  shape_fn overrides the standard bump (used for
    derived shapes such as the Calderon partner); it must vanish outside
    [t_lo, t_hi].
    """

    matrix: ExpansiveMatrix
    gauge: ScaleGauge
    t_center: float
    t_halfwidth: float
    amplitude: float = 1.0
    shape_kind: str = "log-shell-bump"
    shape_fn: Callable[[np.ndarray], np.ndarray] | None = None

    @property
    def d(self) -> int:
        return self.matrix.d

    @property
    def t_support(self) -> tuple[float, float]:
        return (self.t_center - self.t_halfwidth, self.t_center + self.t_halfwidth)

    @property
    def annulus(self) -> tuple[float, float]:
        lo, hi = self.t_support
        b = self.matrix.absdet
        return (b**lo, b**hi)

    def shape(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.shape_fn is not None:
            return self.amplitude * self.shape_fn(t)
        return self.amplitude * bump((t - self.t_center) / self.t_halfwidth)

    def t_grid(self, grid: GridSpec) -> np.ndarray:
        return self.gauge.t_on_grid(("freq", grid), lambda: freq_points(grid))

    def multiplier(self, grid: GridSpec, s: float = 0.0) -> np.ndarray:
        """Samples of g_hat((A^T)^-s xi) = shape(t(xi) - s), FFT layout."""
        t = self.t_grid(grid)
        return self.shape(t - s).reshape(grid.shape)

    def samples(self, grid: GridSpec) -> np.ndarray:
        return self.multiplier(grid, 0.0)

    def to_json(self) -> dict:
        if self.shape_fn is not None:
            raise ValueError("profiles with derived shapes are not serializable")
        return {
            "shape": self.shape_kind,
            "params": {
                "t_center": self.t_center,
                "t_halfwidth": self.t_halfwidth,
                "amplitude": self.amplitude,
            },
            "matrix": self.matrix.to_json(),
        }


def profile_from_json(obj: dict) -> SpectralProfile:
    E = validate_expansive(
        np.asarray(obj["matrix"]["entries"], dtype=float).reshape(
            obj["matrix"]["dim"], obj["matrix"]["dim"]
        )
    )
    p = obj["params"]
    return SpectralProfile(
        matrix=E,
        gauge=transpose_gauge(E),
        t_center=float(p["t_center"]),
        t_halfwidth=float(p["t_halfwidth"]),
        amplitude=float(p.get("amplitude", 1.0)),
        shape_kind=obj.get("shape", "log-shell-bump"),
    )


def make_covering_profile(
    E: ExpansiveMatrix,
    grid: GridSpec,
    t_center: float = 1.0,
    t_halfwidth: float = 1.0,
    coverage_threshold: float = 0.1,
) -> SpectralProfile:
    """Smooth shell bump whose (A^T)^j dilates cover all grid frequencies.

    Requires the grid to resolve the base shell (gauge radius in
    [1, |det A|]) with at least 16 samples, and certifies max_j
    |g_hat((A^T)^j xi)| >= coverage_threshold for every grid xi != 0.
    """
    gauge = transpose_gauge(E)
    profile = SpectralProfile(
        matrix=E, gauge=gauge, t_center=t_center, t_halfwidth=t_halfwidth
    )
    t = profile.t_grid(grid)
    finite = np.isfinite(t)
    base_shell = np.count_nonzero((t >= -1e-9) & (t < 1.0 - 1e-9))
    if base_shell < 16:
        raise ValueError(
            f"grid resolves the base shell with only {base_shell} samples (< 16)"
        )
    check_coverage(profile, t[finite], threshold=coverage_threshold)
    return profile


def check_coverage(profile: SpectralProfile, t_values: np.ndarray, threshold: float = 0.1) -> None:
    lo, hi = profile.t_support
    if t_values.size == 0:
        return
    j_lo = math.floor(np.min(t_values) - hi)
    j_hi = math.ceil(np.max(t_values) - lo)
    best = np.zeros_like(t_values)
    for j in range(j_lo, j_hi + 1):
        np.maximum(best, np.abs(profile.shape(t_values - j)), out=best)
    if np.min(best) < threshold:
        worst = float(t_values[np.argmin(best)])
        raise CoverageGap(
            f"dilates reach only {np.min(best):.3g} < {threshold} at t = {worst:.3f}"
        )


def _overlap_sum(shape: Callable[[np.ndarray], np.ndarray], t: np.ndarray, lo: float, hi: float, fn) -> np.ndarray:
    """Sum (or fold) of shape(t + k) over all integer k with overlap."""
    t = np.asarray(t, dtype=float)
    k_lo = math.floor(lo - np.max(t)) if t.size else 0
    k_hi = math.ceil(hi - np.min(t)) if t.size else 0
    acc = np.zeros_like(t)
    for k in range(k_lo, k_hi + 1):
        acc = fn(acc, shape(t + k))
    return acc


def periodized_energy(profile: SpectralProfile, t: np.ndarray) -> np.ndarray:
    """D(t) = sum_k |shape(t + k)|^2 (1-periodic)."""
    lo, hi = profile.t_support
    return _overlap_sum(
        profile.shape, t, lo, hi, lambda acc, v: acc + np.abs(v) ** 2
    )


@dataclass(frozen=True)
class AnalyzingPair:
    """Profiles (phi, psi) satisfying the discrete Calderon identity.

    psi_hat = conj(phi_hat) / sum_k |phi_hat((A^T)^k .)|^2 pointwise, the
    overlap N = ceil(log_det(outer/inner)) bounds the scales with
    non-trivially intersecting supports, and the reproducing window
    aggregates the 2N+1 neighboring products.
    """

    phi: SpectralProfile
    psi: SpectralProfile
    overlap_n: int

    @property
    def matrix(self) -> ExpansiveMatrix:
        return self.phi.matrix

    def window_shape(self, t: np.ndarray) -> np.ndarray:
        """Phi_hat window: sum_{|k| <= N} phi(t+k) psi(t+k); equals 1 on supp phi."""
        t = np.asarray(t, dtype=float)
        acc = np.zeros_like(t)
        for k in range(-self.overlap_n, self.overlap_n + 1):
            acc = acc + self.phi.shape(t + k) * self.psi.shape(t + k)
        return acc

    def calderon_sum(self, t: np.ndarray, j_range: tuple[int, int] | None = None) -> np.ndarray:
        """sum_j phi_hat((A^T)^j xi) psi_hat((A^T)^j xi) evaluated in t."""
        t = np.asarray(t, dtype=float)
        if j_range is None:
            lo, hi = self.phi.t_support
            j_lo = math.floor(lo - np.max(t)) if t.size else 0
            j_hi = math.ceil(hi - np.min(t)) if t.size else 0
        else:
            j_lo, j_hi = j_range
        acc = np.zeros_like(t)
        for j in range(j_lo, j_hi + 1):
            acc = acc + self.phi.shape(t + j) * self.psi.shape(t + j)
        return acc


def make_analyzing_pair(phi: SpectralProfile, check_grid: GridSpec | None = None) -> AnalyzingPair:
    """Calderon partner psi for a covering profile phi.

    Raises DivisionUnderflow when the periodized energy dips below 1e-12
    somewhere on the support of phi (checked on a fine 1-D scale grid,
    plus the frequency grid when one is supplied).
    """
    lo, hi = phi.t_support
    t_fine = np.linspace(lo, hi, 4097)
    denom = periodized_energy(phi, t_fine)
    on_support = np.abs(phi.shape(t_fine)) > _SUPPORT_TOL
    if np.any(denom[on_support] < 1e-12):
        raise DivisionUnderflow("Calderon denominator below 1e-12 on the support")
    if check_grid is not None:
        t_g = phi.t_grid(check_grid)
        finite = np.isfinite(t_g)
        d_g = periodized_energy(phi, t_g[finite])
        supp = np.abs(phi.shape(t_g[finite])) > _SUPPORT_TOL
        if np.any(d_g[supp] < 1e-12):
            raise DivisionUnderflow("Calderon denominator below 1e-12 on the grid")

    def psi_shape(t: np.ndarray) -> np.ndarray:
        base = phi.shape(t)
        out = np.zeros_like(base)
        nz = np.abs(base) > _SUPPORT_TOL
        if np.any(nz):
            d = periodized_energy(phi, np.asarray(t, dtype=float)[nz])
            out[nz] = np.conj(base[nz]) / d
        return out

    inner, outer = phi.annulus
    n = math.ceil(math.log(outer / inner) / math.log(phi.matrix.absdet) - 1e-12)
    psi = replace(phi, shape_fn=psi_shape, amplitude=1.0, shape_kind="calderon-partner")
    return AnalyzingPair(phi=phi, psi=psi, overlap_n=n)


@dataclass(frozen=True)
class AdmissibleVector:
    """Wavelet psi with integral_R |psi_hat((A^T)^s xi)|^2 ds = 1.

    The normalization reduces to the 1-D energy of the shape in t,
    computed by composite quadrature with step s_step (<= 1/32).
    """

    psi: SpectralProfile
    s_step: float
    raw_energy: float

    @property
    def matrix(self) -> ExpansiveMatrix:
        return self.psi.matrix


def shape_energy(profile: SpectralProfile, step: float) -> float:
    """integral |shape(t)|^2 dt by trapezoid on the support."""
    lo, hi = profile.t_support
    m = int(math.ceil((hi - lo) / step))
    t = np.linspace(lo, hi, m + 1)
    vals = np.abs(profile.shape(t)) ** 2
    return float(np.trapezoid(vals, t))


def make_admissible(g: SpectralProfile, s_step: float = 1.0 / 64.0) -> AdmissibleVector:
    """Normalize a covering profile into an admissible vector."""
    if s_step > 1.0 / 32.0:
        raise ValueError("admissibility quadrature step must be <= 1/32")
    energy = shape_energy(g, s_step)
    if energy <= 0.0:
        raise CoverageGap("profile carries no scale energy")
    psi = replace(g, amplitude=g.amplitude / math.sqrt(energy))
    return AdmissibleVector(psi=psi, s_step=s_step, raw_energy=energy)


def admissibility_integral(
    vec: AdmissibleVector,
    xis: np.ndarray,
    s_step: float | None = None,
    independent: bool = True,
) -> np.ndarray:
    """integral |psi_hat((A^T)^s xi)|^2 ds per row of xis.

    With independent=True each node (A^T)^s xi is formed with an explicit
    matrix exponential and the scale coordinate re-solved from scratch, so
    the result is a genuine quadrature oracle rather than a restatement of
    the construction.
    """
    psi = vec.psi
    step = vec.s_step if s_step is None else s_step
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    t0 = psi.gauge.t(xis)
    lo, hi = psi.t_support
    # s must sweep t0 + s across [lo, hi]; pad by one step
    s_lo = float(np.min(lo - t0)) - step
    s_hi = float(np.max(hi - t0)) + step
    m = int(math.ceil((s_hi - s_lo) / step))
    s_nodes = s_lo + (s_hi - s_lo) * np.arange(m + 1) / m
    ds = (s_hi - s_lo) / m
    B = psi.gauge.B
    total = np.zeros(xis.shape[0])
    for idx, s in enumerate(s_nodes):
        if independent:
            moved = xis @ expm(float(s) * B).T
            t_here = psi.gauge.t(moved)
        else:
            t_here = t0 + s
        w = 0.5 if idx in (0, m) else 1.0
        total += w * np.abs(psi.shape(t_here)) ** 2
    return total * ds
