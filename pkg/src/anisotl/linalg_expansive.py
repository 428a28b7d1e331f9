"""Expansive dilation matrices and their derived structures.

Covers spectral validation, real matrix logarithms, fractional powers
A^s = exp(s B), the Lyapunov ellipsoid with its step homogeneous
quasi-norm, and a continuous scale coordinate t with t(Ax) = t(x) + 1
used by the frequency-side filter constructions.

All types are immutable after construction and all operations are pure,
so shared concurrent reads and parallel maps over sample points are safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm, logm, solve_continuous_lyapunov
from scipy.linalg import eigh as generalized_eigh

from .errors import NotExpansive, NotExponential, Singular

# Shell search range for the step quasi-norm; outside it the value
# saturates at the boundary shell and the caller is handed a flag.
SHELL_CLAMP = 64

_LOG_REL_TOL = 1e-10


def unit_ball_volume(d: int) -> float:
    """Volume of the Euclidean unit ball in dimension d."""
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ExpansiveMatrix:
    """An expansive dilation A with its derived spectral data.

    ``log`` is the real logarithm B with exp(B) = A and is None when A is
    not exponential.  lambda_minus/lambda_plus bracket the eigenvalue
    moduli strictly between 1 and infinity, and zeta_minus/zeta_plus are
    the corresponding Hoelder exponents ln(lambda)/ln|det A|.
    """

    d: int
    A: np.ndarray
    log: np.ndarray | None
    absdet: float
    lambda_minus: float
    lambda_plus: float
    zeta_minus: float
    zeta_plus: float

    def power(self, s: float) -> np.ndarray:
        """A^s = exp(s B) for real s; integer powers avoid the exponential."""
        if float(s).is_integer():
            return np.linalg.matrix_power(self.A, int(s))
        return fractional_power(self, s)

    def to_json(self) -> dict:
        return {"dim": self.d, "entries": [float(v) for v in self.A.ravel()]}


def _real_log(A: np.ndarray) -> np.ndarray:
    eig = np.linalg.eigvals(A)
    on_negative_axis = (np.abs(eig.imag) <= 1e-12 * np.abs(eig)) & (eig.real < 0)
    if np.any(on_negative_axis):
        raise NotExponential("eigenvalue on the closed negative real axis")
    B = logm(A)
    scale = max(np.max(np.abs(B)), 1.0)
    if np.max(np.abs(B.imag)) > 1e-9 * scale:
        raise NotExponential("matrix logarithm is not real")
    B = np.real(B)
    err = np.max(np.abs(expm(B) - A)) / max(np.max(np.abs(A)), 1.0)
    if err > _LOG_REL_TOL:
        raise NotExponential(f"exp(log A) reproduces A only to {err:.2e}")
    return B


def validate_expansive(A) -> ExpansiveMatrix:
    """Validate a candidate dilation and attach spectral data.

    lambda_minus is the geometric midpoint between 1 and min|sigma(A)|,
    lambda_plus is max|sigma(A)| * 1.01; any valid bracket works, this one
    is fixed for reproducibility.

    Raises Singular when det A = 0 and NotExpansive when some eigenvalue
    modulus is <= 1.  A missing real logarithm is not an error here; ops
    needing continuous powers raise NotExponential later.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    d = A.shape[0]
    det = np.linalg.det(A)
    if det == 0.0 or not np.isfinite(det):
        raise Singular("dilation matrix is singular")
    mods = np.abs(np.linalg.eigvals(A))
    if np.min(mods) <= 1.0:
        raise NotExpansive(
            f"eigenvalue modulus {np.min(mods):.6g} <= 1; not expansive"
        )
    lam_minus = math.sqrt(float(np.min(mods)))
    lam_plus = float(np.max(mods)) * 1.01
    absdet = abs(float(det))
    try:
        B = _real_log(A)
    except NotExponential:
        B = None
    return ExpansiveMatrix(
        d=d,
        A=_freeze(A),
        log=None if B is None else _freeze(B),
        absdet=absdet,
        lambda_minus=lam_minus,
        lambda_plus=lam_plus,
        zeta_minus=math.log(lam_minus) / math.log(absdet),
        zeta_plus=math.log(lam_plus) / math.log(absdet),
    )


def real_matrix_log(E: ExpansiveMatrix) -> np.ndarray:
    """The real matrix B with exp(B) = A (entrywise relative tol 1e-10)."""
    if E.log is None:
        # recompute so the error message names the actual failure
        return _freeze(_real_log(E.A))
    return E.log


def fractional_power(E: ExpansiveMatrix, s: float) -> np.ndarray:
    """A^s = exp(s B).  Raises NotExponential when no real log exists."""
    B = real_matrix_log(E)
    if s == 0.0:
        return np.eye(E.d)
    return expm(float(s) * B)


def matrix_from_json(obj: dict) -> ExpansiveMatrix:
    """Parse {"dim": d, "entries": row-major list} and validate."""
    d = int(obj["dim"])
    entries = np.asarray(obj["entries"], dtype=float).reshape(d, d)
    return validate_expansive(entries)


def diagnostic_record(op: str, inp, out, tolerance: float | None) -> dict:
    """Uniform JSON diagnostic record used by the validate CLI."""
    return {"op": op, "input": inp, "output": out, "tolerance": tolerance}


# ---------------------------------------------------------------------------
# Lyapunov ellipsoid and step homogeneous quasi-norm
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuasiNormStructure:
    """Ellipsoid Omega = {x : x^T Q x < c} with m(Omega) = 1, plus the
    expansion gap r > 1 with Omega subset r*Omega subset A*Omega, and the
    measured quasi-triangle constant.

    The quasi-norm takes the value |det A|^j on the shell
    A^(j+1)Omega \\ A^j Omega and 0 at the origin.
    """

    owner: ExpansiveMatrix
    Q: np.ndarray
    c: float
    r: float
    quasi_triangle_c: float
    _neg_powers: np.ndarray = field(repr=False)  # [k] = A^{-(k - SHELL_CLAMP)}
    _pow_table: np.ndarray = field(repr=False)   # |det A|^j, j in [-CL, CL+1]

    @property
    def shell_clamp(self) -> int:
        return SHELL_CLAMP

    def quadratic_form(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.einsum("ni,ij,nj->n", pts, self.Q, pts)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Membership of points in Omega."""
        return self.quadratic_form(pts) < self.c

    def boundary_points(self, n: int, rng=None) -> np.ndarray:
        """n points on the boundary of Omega (deterministic unless rng given)."""
        d = self.owner.d
        if rng is None:
            rng = np.random.default_rng(20240901)
        u = rng.normal(size=(n, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        L = np.linalg.cholesky(self.Q)
        half = np.linalg.solve(L.T, u.T).T  # points with x^T Q x = 1
        return half * math.sqrt(self.c)

    def shell_index(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Shell index j with x in A^(j+1)Omega \\ A^j Omega, vectorized.

        Membership in A^j Omega is monotone in j, so the smallest member
        level is found by binary search over the clamped range.  Returns
        (j, saturated); for x = 0 the index is meaningless and callers map
        it to rho = 0.  Saturated marks shells outside [-CL, CL].
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        n = pts.shape[0]
        lo = np.full(n, -SHELL_CLAMP, dtype=np.int64)
        hi = np.full(n, SHELL_CLAMP + 1, dtype=np.int64)  # virtual member level
        while True:
            active = lo < hi
            if not np.any(active):
                break
            mid = (lo + hi) // 2
            mats = self._neg_powers[np.clip(mid, -SHELL_CLAMP, SHELL_CLAMP) + SHELL_CLAMP]
            y = np.einsum("nij,nj->ni", mats[active], pts[active])
            member = np.einsum("ni,ij,nj->n", y, self.Q, y) < self.c
            hi_a = hi[active]
            lo_a = lo[active]
            hi[active] = np.where(member, mid[active], hi_a)
            lo[active] = np.where(member, lo_a, mid[active] + 1)
        j0 = lo
        saturated = (j0 == -SHELL_CLAMP) | (j0 == SHELL_CLAMP + 1)
        shell = j0 - 1
        return shell, saturated

    def rho(self, pts: np.ndarray) -> np.ndarray:
        """Step homogeneous quasi-norm rho_A, vectorized over points."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        shell, _ = self.shell_index(pts)
        clipped = np.clip(shell, -SHELL_CLAMP, SHELL_CLAMP + 1)
        vals = self._pow_table[clipped + SHELL_CLAMP]
        vals = np.where(np.all(pts == 0.0, axis=1), 0.0, vals)
        return vals


def build_ellipsoid(E: ExpansiveMatrix, max_condition: float = 1e12) -> QuasiNormStructure:
    """Canonical ellipsoid for the step quasi-norm.

    Q is the Lyapunov series sum_{j>=0} (A^-j)^T A^-j truncated at term
    norm 1e-14, then c is set from the closed-form ellipsoid volume so
    that m(Omega) = 1.  The expansion gap r is the generalized-eigenvalue
    bound certified on 256*d boundary samples, with the gap above 1
    shrunk by 1%.

    max_condition guards against nearly degenerate Lyapunov ellipsoids for
    strongly anisotropic dilations (configurable, see module notes).
    """
    d = E.d
    A_inv = np.linalg.inv(E.A)
    Q = np.zeros((d, d))
    term = np.eye(d)
    for _ in range(10_000):
        Q += term.T @ term
        term = term @ A_inv
        if np.linalg.norm(term) ** 2 < 1e-14:
            break
    Q = 0.5 * (Q + Q.T)
    cond = np.linalg.cond(Q)
    if cond > max_condition:
        raise ValueError(
            f"Lyapunov ellipsoid condition {cond:.3e} exceeds {max_condition:.1e}"
        )
    # m({x^T Q x < c}) = c^(d/2) * V_d / sqrt(det Q) = 1
    detQ = np.linalg.det(Q)
    c = (math.sqrt(detQ) / unit_ball_volume(d)) ** (2.0 / d)

    # Largest r with r*Omega inside A*Omega comes from the generalized
    # eigenproblem for (A^-1)^T Q A^-1 against Q.
    M = A_inv.T @ Q @ A_inv
    lam_max = float(np.max(generalized_eigh(M, Q, eigvals_only=True)))
    r_exact = 1.0 / math.sqrt(lam_max)
    if r_exact <= 1.0:
        raise NotExpansive("expansion gap certificate failed: r <= 1")
    r = 1.0 + 0.99 * (r_exact - 1.0)

    structure = QuasiNormStructure(
        owner=E,
        Q=_freeze(Q),
        c=float(c),
        r=float(r),
        quasi_triangle_c=float("nan"),
        _neg_powers=_power_chain(E.A, A_inv),
        _pow_table=_det_powers(E.absdet),
    )
    bnd = structure.boundary_points(256 * d)
    if not np.all(structure.contains(r * bnd @ A_inv.T)):
        raise NotExpansive("expansion gap certificate failed on boundary sample")
    if not np.all(structure.contains(bnd / r)):
        raise NotExpansive("Omega subset r*Omega failed on boundary sample")

    c_emp = measure_quasi_triangle(structure, n=4096, seed=7)
    object.__setattr__(structure, "quasi_triangle_c", c_emp)
    return structure


def _power_chain(A: np.ndarray, A_inv: np.ndarray) -> np.ndarray:
    """Stack of A^{-j} for j = -SHELL_CLAMP .. SHELL_CLAMP."""
    d = A.shape[0]
    out = np.empty((2 * SHELL_CLAMP + 1, d, d))
    out[SHELL_CLAMP] = np.eye(d)
    for k in range(1, SHELL_CLAMP + 1):
        out[SHELL_CLAMP + k] = out[SHELL_CLAMP + k - 1] @ A_inv
        out[SHELL_CLAMP - k] = out[SHELL_CLAMP - k + 1] @ A
    res = np.ascontiguousarray(out)
    res.flags.writeable = False
    return res


def _det_powers(absdet: float) -> np.ndarray:
    """|det A|^j for j in [-SHELL_CLAMP, SHELL_CLAMP + 1], built by repeated
    multiplication so that adjacent entries differ by an exact factor."""
    out = np.empty(2 * SHELL_CLAMP + 2)
    out[SHELL_CLAMP] = 1.0
    for k in range(SHELL_CLAMP + 1):
        out[SHELL_CLAMP + k + 1] = out[SHELL_CLAMP + k] * absdet
    for k in range(SHELL_CLAMP):
        out[SHELL_CLAMP - k - 1] = out[SHELL_CLAMP - k] / absdet
    out.flags.writeable = False
    return out


def quasi_norm(S: QuasiNormStructure, x) -> float | np.ndarray:
    """rho_A(x): |det A|^j on the shell A^(j+1)Omega \\ A^j Omega, 0 at 0."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    vals = S.rho(arr)
    return float(vals[0]) if single else vals


@dataclass(frozen=True)
class BallDescriptor:
    """Metric ball B(y, radius) = A^level * Omega + y."""

    center: np.ndarray
    level: int
    radius: float


def metric_ball(S: QuasiNormStructure, y, radius: float) -> BallDescriptor:
    """Shell level l with |det A|^(l-1) < radius <= |det A|^l."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    b = S.owner.absdet
    level = math.ceil(math.log(radius) / math.log(b))
    # fix rounding at exact powers
    while b ** (level - 1) >= radius:
        level -= 1
    while b ** level < radius:
        level += 1
    return BallDescriptor(center=np.asarray(y, dtype=float), level=level, radius=radius)


def sample_points(S: QuasiNormStructure, n: int, seed: int, shell_range: tuple[int, int] = (-8, 8)) -> np.ndarray:
    """Random points with log-uniform quasi-norm magnitudes.

    Directions uniform on the Omega boundary; radial factor A^u with u
    uniform over shell_range, so all shells are exercised evenly.
    """
    rng = np.random.default_rng(seed)
    dirs = S.boundary_points(n, rng=rng)
    u = rng.uniform(shell_range[0], shell_range[1], size=n)
    E = S.owner
    if E.log is not None:
        # snap to a shifted 1/16 grid (reuses exponentials, and the half-step
        # offset keeps flowed boundary directions off the exact shell boundaries)
        grid = (np.round(u * 16) + 0.5) / 16
        pts = np.empty_like(dirs)
        for val in np.unique(grid):
            mask = grid == val
            pts[mask] = dirs[mask] @ expm(val * E.log).T
        return pts
    k = np.round(u).astype(int)
    jitter = rng.uniform(1.02, 1.35, size=(n, 1))
    pts = np.empty_like(dirs)
    for val in np.unique(k):
        mask = k == val
        pts[mask] = (jitter[mask] * dirs[mask]) @ np.linalg.matrix_power(E.A, int(val)).T
    return pts


def measure_quasi_triangle(S: QuasiNormStructure, n: int = 4096, seed: int = 7) -> float:
    """Empirical quasi-triangle constant max rho(x+y)/(rho(x)+rho(y))."""
    x = sample_points(S, n, seed)
    y = sample_points(S, n, seed + 1)
    rx = S.rho(x)
    ry = S.rho(y)
    rs = S.rho(x + y)
    return float(np.max(rs / (rx + ry)))


@dataclass(frozen=True)
class WeightNu:
    """nu_beta(x) = (1 + rho_A(x))^beta."""

    structure: QuasiNormStructure
    beta: float

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return (1.0 + self.structure.rho(pts)) ** self.beta


def measure_nu_constant(w: WeightNu, n: int = 4096, seed: int = 11) -> float:
    """Empirical K with nu(x+y) <= K nu(x) nu(y)."""
    x = sample_points(w.structure, n, seed)
    y = sample_points(w.structure, n, seed + 1)
    return float(np.max(w(x + y) / (w(x) * w(y))))


# ---------------------------------------------------------------------------
# Continuous scale coordinate (dilation flow gauge)
# ---------------------------------------------------------------------------


class ScaleGauge:
    """Continuous anisotropic scale coordinate for an exponential dilation.

    t(x) is the unique real s with ||P^(1/2) exp(-sB) x|| = 1, where P
    solves B^T P + P B = I and is rescaled so the unit level set encloses
    measure 1.  Along the dilation flow t(A^u x) = t(x) + u holds exactly,
    which is what makes frequency-side filter dilations act as exact
    translations in t.

    Instances cache t-arrays per grid; treat them as immutable.
    """

    _TABLE_STEP = 0.25
    _TABLE_RANGE = 96.0
    _TAYLOR_ORDER = 10

    def __init__(self, A: np.ndarray, B: np.ndarray):
        A = np.asarray(A, dtype=float)
        if B is None:
            raise NotExponential("scale gauge requires an exponential dilation")
        B = np.asarray(B, dtype=float)
        self.d = A.shape[0]
        self.A = _freeze(A)
        self.B = _freeze(B)
        self.absdet = abs(float(np.linalg.det(A)))
        P = solve_continuous_lyapunov(-B.T, -np.eye(self.d))
        P = 0.5 * (P + P.T)
        # normalize so m({x^T P x < 1}) = 1
        scale = (unit_ball_volume(self.d) ** 2 / np.linalg.det(P)) ** (1.0 / self.d)
        P = P * scale
        self.P = _freeze(P)
        evals = np.linalg.eigvalsh(P)
        self._lam_min = float(evals[0])
        self._lam_max = float(evals[-1])
        self._sqrtP = np.linalg.cholesky(P).T  # upper, x -> sqrtP @ x
        self._inv_sqrtP = np.linalg.inv(self._sqrtP)
        n_tab = int(self._TABLE_RANGE / self._TABLE_STEP)
        step_mat = expm(-self._TABLE_STEP * B)
        step_inv = expm(self._TABLE_STEP * B)
        table = np.empty((2 * n_tab + 1, self.d, self.d))
        table[n_tab] = np.eye(self.d)
        for k in range(1, n_tab + 1):
            table[n_tab + k] = table[n_tab + k - 1] @ step_mat
            table[n_tab - k] = table[n_tab - k + 1] @ step_inv
        self._table = table
        self._n_tab = n_tab
        # Taylor coefficients of exp(-u B): powers (-B)^k / k!
        powers = [np.eye(self.d)]
        for k in range(1, self._TAYLOR_ORDER + 1):
            powers.append(powers[-1] @ (-B) / k)
        self._taylor = np.stack(powers)
        self._t_cache: dict = {}

    def flow(self, s: np.ndarray, pts: np.ndarray) -> np.ndarray:
        """exp(-s_i B) @ pts_i for per-point scales s_i (table + Taylor)."""
        s = np.asarray(s, dtype=float)
        idx = np.clip(
            np.rint(s / self._TABLE_STEP).astype(int), -self._n_tab, self._n_tab
        )
        u = s - idx * self._TABLE_STEP
        base = np.einsum("nij,nj->ni", self._table[idx + self._n_tab], pts)
        out = np.zeros_like(base)
        upow = np.ones_like(s)
        for k in range(self._TAYLOR_ORDER + 1):
            out += upow[:, None] * np.einsum("ij,nj->ni", self._taylor[k], base)
            upow = upow * u
        return out

    def dilate(self, u: float) -> np.ndarray:
        """A^u as a matrix."""
        return expm(float(u) * self.B)

    def t(self, pts: np.ndarray) -> np.ndarray:
        """Solve the gauge equation per point; -inf at the origin."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        n = pts.shape[0]
        out = np.full(n, -np.inf)
        nz = ~np.all(pts == 0.0, axis=1)
        if not np.any(nz):
            return out
        x = pts[nz]
        m = x.shape[0]

        def logG(s):
            y = self.flow(s, x)
            g = np.einsum("ni,ij,nj->n", y, self.P, y)
            ynorm = np.einsum("ni,ni->n", y, y)
            return np.log(g), ynorm / g  # value, |slope|

        # initial guess from the P-quadratic form at s = 0
        g0 = np.einsum("ni,ij,nj->n", x, self.P, x)
        lam_mid = 2.0 / (1.0 / self._lam_min + 1.0 / self._lam_max)
        s = np.log(np.maximum(g0, 1e-300)) * lam_mid
        lo = np.full(m, -np.inf)
        hi = np.full(m, np.inf)
        for _ in range(120):
            val, slope = logG(s)
            # logG is strictly decreasing: val > 0 means the root is above s
            lo = np.where(val > 0, np.maximum(lo, s), lo)
            hi = np.where(val < 0, np.minimum(hi, s), hi)
            if np.max(np.abs(val)) < 1e-13:
                break
            step = val / np.maximum(slope, 1e-300)
            nxt = s + step
            # bisect when Newton leaves the bracket
            need_mid = (nxt <= lo) | (nxt >= hi)
            mid_ok = np.isfinite(lo) & np.isfinite(hi)
            nxt = np.where(need_mid & mid_ok, 0.5 * (lo + hi), nxt)
            nxt = np.where(
                need_mid & ~mid_ok, s + np.sign(step) * np.minimum(np.abs(step), 8.0), nxt
            )
            s = nxt
        out[nz] = s
        return out

    def t_on_grid(self, key, pts_fn) -> np.ndarray:
        """Cached t-array for a hashable grid key; pts_fn() supplies points."""
        if key not in self._t_cache:
            arr = self.t(pts_fn())
            arr.flags.writeable = False
            self._t_cache[key] = arr
        return self._t_cache[key]

    def gauge_radius(self, pts: np.ndarray) -> np.ndarray:
        """|det A|^t(x): the continuous homogeneous companion of rho_A."""
        return self.absdet ** self.t(pts)

    def points_on_level(self, tau: float, n_dirs: int, seed: int = 3) -> np.ndarray:
        """Points on the level set {t = tau} via flowed sphere directions."""
        rng = np.random.default_rng(seed)
        u = rng.normal(size=(n_dirs, self.d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        base = u @ self._inv_sqrtP.T  # t = 0 level set
        return base @ expm(tau * self.B).T

    def level_extent(self, tau: float, n_dirs: int = 256) -> float:
        """Max coordinate magnitude on the level set {t = tau}."""
        pts = self.points_on_level(tau, n_dirs)
        return float(np.max(np.abs(pts)))

    def region_extent(self, tau: float) -> float:
        """Max coordinate magnitude over {t <= tau} = A^tau {x : x^T P x <= 1},
        closed form via the diagonal of the mapped inverse form."""
        M = expm(tau * self.B)
        inv_form = M @ np.linalg.inv(self.P) @ M.T
        return float(np.sqrt(np.max(np.diag(inv_form))))


def transpose_gauge(E: ExpansiveMatrix) -> ScaleGauge:
    """Scale gauge for A^T (the frequency-side dilation)."""
    B = real_matrix_log(E)
    return ScaleGauge(E.A.T, B.T)


def spatial_gauge(E: ExpansiveMatrix) -> ScaleGauge:
    return ScaleGauge(E.A, real_matrix_log(E))
