"""Spherical harmonics, quadrature grids, and rotational Brownian motion.

Complex orthonormal harmonics Y_lm with the Condon-Shortley phase, harmonic
analysis/synthesis on Gauss-Legendre x uniform-longitude grids (exact for
band-limited fields), and exact-in-law sampling of Brownian motion on the
unit sphere from its heat-kernel series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sp

__all__ = [
    "SphericalPoint",
    "SphericalGrid",
    "HarmonicCoeffs",
    "legendre_q",
    "eval_ylm",
    "analyze",
    "synthesize",
    "eval_at_points",
    "sample_sphere_bm",
    "sample_sphere_bm_euler",
    "heat_angle_pdf",
    "discrete_laplace_beltrami",
    "mu_ell",
]

#: hard cap on the heat-kernel series degree
L_BM_MAX = 4096


def mu_ell(l):
    """Laplace-Beltrami eigenvalue mu_l = l (l + 1)."""
    l = np.asarray(l)
    return l * (l + 1.0)


@dataclass(frozen=True)
class SphericalPoint:
    """Colatitude / longitude pair; the North Pole is theta = 0."""

    theta: float
    phi: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError(f"theta must lie in [0, pi], got {self.theta}")
        if not 0.0 <= self.phi < 2.0 * math.pi:
            raise ValueError(f"phi must lie in [0, 2 pi), got {self.phi}")

    def vector(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array([st * math.cos(self.phi), st * math.sin(self.phi),
                         math.cos(self.theta)])

    @staticmethod
    def from_vector(v) -> "SphericalPoint":
        x, y, z = v
        theta = math.acos(min(1.0, max(-1.0, z)))
        phi = math.atan2(y, x) % (2.0 * math.pi)
        return SphericalPoint(theta=theta, phi=phi)


class SphericalGrid:
    """Quadrature grid: Gauss-Legendre nodes in cos(theta), uniform longitudes.

    Exact (to rounding) for integrands band-limited to degree L when
    n_theta >= L + 1 and n_phi >= 2 L + 1.  Quadrature weights target the
    measure sin(theta) dtheta dphi; they sum to 4 pi.
    """

    def __init__(self, n_theta: int, n_phi: int):
        if n_theta < 1 or n_phi < 1:
            raise ValueError("grid sizes must be positive")
        self.n_theta = n_theta
        self.n_phi = n_phi
        x, w = np.polynomial.legendre.leggauss(n_theta)
        order = np.argsort(-x)                      # theta increasing from pole
        self.x = x[order]
        self.w_theta = w[order]
        self.thetas = np.arccos(self.x)
        self.phis = 2.0 * np.pi * np.arange(n_phi) / n_phi
        self.dphi = 2.0 * np.pi / n_phi

    @classmethod
    def for_lmax(cls, lmax: int) -> "SphericalGrid":
        """Minimal exact grid for degree lmax."""
        return cls(lmax + 1, 2 * lmax + 1)

    @property
    def total_weight(self) -> float:
        return float(self.w_theta.sum() * self.n_phi * self.dphi)

    def supports_lmax(self, lmax: int) -> bool:
        return self.n_theta >= lmax + 1 and self.n_phi >= 2 * lmax + 1


class HarmonicCoeffs:
    """Truncated complex coefficients a_lm, 0 <= l <= lmax, |m| <= l.

    Stored as a dense (lmax+1, 2 lmax+1) array with column index lmax + m.
    ``real_field``=True asserts the reality constraint
    a_{l,-m} = (-1)^m conj(a_{lm}).
    """

    def __init__(self, lmax: int, a: np.ndarray | None = None,
                 real_field: bool = False):
        if lmax < 0:
            raise ValueError("lmax must be nonnegative")
        self.lmax = lmax
        if a is None:
            a = np.zeros((lmax + 1, 2 * lmax + 1), dtype=complex)
        a = np.asarray(a, dtype=complex)
        if a.shape != (lmax + 1, 2 * lmax + 1):
            raise ValueError(f"coefficient array must be {(lmax+1, 2*lmax+1)}")
        self.a = a
        self.real_field = real_field

    def get(self, l: int, m: int) -> complex:
        self._check_lm(l, m)
        return complex(self.a[l, self.lmax + m])

    def set(self, l: int, m: int, value: complex) -> None:
        self._check_lm(l, m)
        self.a[l, self.lmax + m] = value

    def _check_lm(self, l, m):
        if not 0 <= l <= self.lmax or abs(m) > l:
            raise ValueError(f"(l, m) = ({l}, {m}) outside truncation")

    def copy(self) -> "HarmonicCoeffs":
        return HarmonicCoeffs(self.lmax, self.a.copy(), self.real_field)

    def scale_degrees(self, factors) -> "HarmonicCoeffs":
        """Multiply every order of degree l by factors[l] (m-independent)."""
        factors = np.asarray(factors, dtype=float)
        if factors.shape != (self.lmax + 1,):
            raise ValueError("need one factor per degree")
        return HarmonicCoeffs(self.lmax, self.a * factors[:, None], self.real_field)

    def reality_violation(self) -> float:
        """max |a_{l,-m} - (-1)^m conj(a_{lm})| over the truncation."""
        worst = 0.0
        for m in range(1, self.lmax + 1):
            lhs = self.a[:, self.lmax - m]
            rhs = (-1.0) ** m * np.conj(self.a[:, self.lmax + m])
            worst = max(worst, float(np.abs(lhs - rhs).max()))
        return worst

    def sobolev_diagnostic(self, s: float) -> float:
        """sum_l (2l+1)^(2s) sum_m |a_lm|^2, finite by truncation."""
        per_l = np.sum(np.abs(self.a) ** 2, axis=1)
        ls = np.arange(self.lmax + 1)
        return float(np.sum((2.0 * ls + 1.0) ** (2.0 * s) * per_l))


# ----------------------------------------------------------------------
# Legendre functions
# ----------------------------------------------------------------------

def legendre_q(l: int, m: int, x: float) -> float:
    """Associated Legendre function Q_lm(x) with the Condon-Shortley phase.

    Three-term recurrence in l at fixed m, seeded by the closed
    double-factorial diagonal term; negative m via the ratio of factorials.
    Unnormalized, so limited to moderate l + |m| before overflow.
    """
    if abs(m) > l:
        raise ValueError(f"|m| = {abs(m)} exceeds l = {l}")
    if not -1.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [-1, 1], got {x}")
    if m < 0:
        ratio = math.exp(sp.gammaln(l + m + 1) - sp.gammaln(l - m + 1))
        return (-1.0) ** (-m) * ratio * legendre_q(l, -m, x)
    pmm = (-1.0) ** m * sp.factorial2(max(2 * m - 1, 1)) * (1.0 - x * x) ** (m / 2.0)
    if l == m:
        return float(pmm)
    pm1 = x * (2.0 * m + 1.0) * pmm
    if l == m + 1:
        return float(pm1)
    for ll in range(m + 2, l + 1):
        pmm, pm1 = pm1, ((2.0 * ll - 1.0) * x * pm1 - (ll + m - 1.0) * pmm) / (ll - m)
    return float(pm1)


def _norm_legendre_table(lmax: int, m: int, x: np.ndarray) -> np.ndarray:
    """N_lm(x) for l = m..lmax at fixed m >= 0, rows indexed by l - m.

    N_lm = sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!) Q_lm; the recurrence is the
    standard fully normalized one and is stable to high degree.
    """
    x = np.asarray(x, dtype=float)
    n_l = lmax - m + 1
    out = np.empty((n_l, x.size))
    # diagonal seed N_mm
    cur = np.full(x.size, 1.0 / math.sqrt(4.0 * math.pi))
    sint = np.sqrt(np.maximum(0.0, 1.0 - x * x))
    for k in range(1, m + 1):
        cur = -math.sqrt((2.0 * k + 1.0) / (2.0 * k)) * sint * cur
    out[0] = cur
    if n_l == 1:
        return out
    prev = cur
    cur = math.sqrt(2.0 * m + 3.0) * x * prev
    out[1] = cur
    for l in range(m + 2, lmax + 1):
        a = math.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
        b = math.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
        prev, cur = cur, a * (x * cur - b * prev)
        out[l - m] = cur
    return out


def eval_ylm(l: int, m: int, p: SphericalPoint) -> complex:
    """Orthonormal complex spherical harmonic Y_lm at a point."""
    if abs(m) > l:
        raise ValueError(f"|m| = {abs(m)} exceeds l = {l}")
    am = abs(m)
    n = _norm_legendre_table(l, am, np.array([math.cos(p.theta)]))[l - am, 0]
    val = n * np.exp(1j * m * p.phi)
    if m < 0:
        val *= (-1.0) ** am
    return complex(val)


# ----------------------------------------------------------------------
# Analysis / synthesis
# ----------------------------------------------------------------------

def analyze(values: np.ndarray, lmax: int, grid: SphericalGrid) -> HarmonicCoeffs:
    """Quadrature harmonic coefficients f_lm of samples on the grid.

    Exact (to rounding) for inputs band-limited to degree <= lmax when the
    grid satisfies the exactness condition.
    """
    values = np.asarray(values)
    if values.shape != (grid.n_theta, grid.n_phi):
        raise ValueError(f"values must be shaped {(grid.n_theta, grid.n_phi)}")
    if not grid.supports_lmax(lmax):
        raise ValueError(
            f"grid {grid.n_theta}x{grid.n_phi} cannot resolve lmax={lmax}: "
            f"need n_theta >= {lmax+1}, n_phi >= {2*lmax+1}")
    ms = np.arange(-lmax, lmax + 1)
    phase = np.exp(-1j * np.outer(grid.phis, ms)) * grid.dphi   # (n_phi, 2L+1)
    g = values @ phase                                          # (n_theta, 2L+1)
    g *= grid.w_theta[:, None]
    coeffs = HarmonicCoeffs(lmax)
    for m in range(0, lmax + 1):
        table = _norm_legendre_table(lmax, m, grid.x)           # (L-m+1, n_theta)
        pos = table @ g[:, lmax + m]
        coeffs.a[m:, lmax + m] = pos
        if m > 0:
            neg = table @ g[:, lmax - m]
            coeffs.a[m:, lmax - m] = (-1.0) ** m * neg
    return coeffs


def synthesize(coeffs: HarmonicCoeffs, grid: SphericalGrid) -> np.ndarray:
    """Pointwise truncated sum of a_lm Y_lm on the grid (theta-major).

    Returns a real array when the coefficients are flagged as a real field
    (imaginary residue must stay below 1e-12 of scale and is dropped);
    complex otherwise.
    """
    lmax = coeffs.lmax
    ms = np.arange(-lmax, lmax + 1)
    s = np.zeros((grid.n_theta, 2 * lmax + 1), dtype=complex)
    for m in range(0, lmax + 1):
        table = _norm_legendre_table(lmax, m, grid.x)
        s[:, lmax + m] = table.T @ coeffs.a[m:, lmax + m]
        if m > 0:
            s[:, lmax - m] = (-1.0) ** m * (table.T @ coeffs.a[m:, lmax - m])
    phase = np.exp(1j * np.outer(ms, grid.phis))                # (2L+1, n_phi)
    out = s @ phase
    if coeffs.real_field:
        scale = max(np.abs(out).max(), 1.0)
        resid = np.abs(out.imag).max() / scale
        if resid > 1e-12:
            raise ValueError(
                f"imaginary residue {resid:.2e} violates the reality constraint")
        return out.real.copy()
    return out


def eval_at_points(coeffs: HarmonicCoeffs, thetas, phis) -> np.ndarray:
    """Truncated sum of a_lm Y_lm at scattered points (vectorized)."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    phis = np.atleast_1d(np.asarray(phis, dtype=float))
    x = np.cos(thetas)
    lmax = coeffs.lmax
    out = np.zeros(thetas.shape, dtype=complex)
    for m in range(0, lmax + 1):
        table = _norm_legendre_table(lmax, m, x)
        pos = table.T @ coeffs.a[m:, lmax + m]
        out += pos * np.exp(1j * m * phis)
        if m > 0:
            neg = table.T @ coeffs.a[m:, lmax - m]
            out += (-1.0) ** m * neg * np.exp(-1j * m * phis)
    if coeffs.real_field:
        return out.real.copy()
    return out


# ----------------------------------------------------------------------
# Rotational Brownian motion
# ----------------------------------------------------------------------

def _bm_series_degree(t: float) -> int:
    """Series truncation: first L with (2L+1) exp(-t mu_L) < 1e-14."""
    if t <= 0.0:
        raise ValueError(f"t must be positive, got {t}")
    # (2l+1) e^{-t l(l+1)} < 1e-14  <=>  t l(l+1) - log(2l+1) > 14 log 10
    lo = math.sqrt(14.0 * math.log(10.0) / t)
    l = max(1, int(lo))
    while (2 * l + 1) * math.exp(-t * l * (l + 1)) >= 1e-14:
        l += max(1, l // 8)
        if l > L_BM_MAX:
            raise ValueError(
                f"t={t} needs the heat-kernel series past degree {L_BM_MAX}; "
                "compose shorter steps instead")
    return l


def heat_angle_pdf(gamma, t: float, lmax: int | None = None) -> np.ndarray:
    """Density of the angular separation gamma of B_t from its start.

    f(gamma) = (1/2) sum_l (2l+1) exp(-t mu_l) P_l(cos gamma) sin gamma;
    the series is truncated adaptively (terms below 1e-14).
    """
    gam = np.atleast_1d(np.asarray(gamma, dtype=float))
    L = _bm_series_degree(t) if lmax is None else lmax
    c = np.cos(gam)
    acc = np.full(gam.shape, 0.5)                     # l = 0 term
    p_prev = np.ones_like(c)
    p_cur = c.copy()
    for l in range(1, L + 1):
        acc += 0.5 * (2 * l + 1) * math.exp(-t * l * (l + 1)) * p_cur
        p_prev, p_cur = p_cur, ((2 * l + 1) * c * p_cur - l * p_prev) / (l + 1)
    return acc * np.sin(gam)


def _angle_cdf(c: np.ndarray, w: np.ndarray) -> np.ndarray:
    """P(angle <= gamma) at c = cos gamma for weights w_l = exp(-t mu_l).

    Uses int_c^1 P_l = (P_{l-1}(c) - P_{l+1}(c)) / (2l+1); rows of w and c
    are per-sample.
    """
    L = w.shape[1] - 1
    acc = 0.5 * (1.0 - c)                      # l = 0 term
    p_prev = np.ones_like(c)                   # P_0
    p_cur = c.copy()                           # P_1
    for l in range(1, L + 1):
        p_next = ((2 * l + 1) * c * p_cur - l * p_prev) / (l + 1)
        acc += 0.5 * w[:, l] * (p_prev - p_next)
        p_prev, p_cur = p_cur, p_next
    return acc


#: below this time the heat kernel is numerically flat: the angle follows the
#: tangent-plane Rayleigh law gamma = 2 sqrt(t E), E ~ Exp(1), with curvature
#: corrections of order t
_T_TANGENT = 1e-5


def _sample_angles(ts: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF angles for per-sample times ts and uniforms u (bisection)."""
    n = ts.size
    out = np.empty(n)
    tiny = ts < _T_TANGENT
    if tiny.any():
        out[tiny] = np.minimum(
            2.0 * np.sqrt(-ts[tiny] * np.log1p(-u[tiny])), math.pi)
        if not (~tiny).any():
            return out
        full = np.nonzero(~tiny)[0]
        out[full] = _sample_angles(ts[full], u[full])
        return out
    order = np.argsort(-ts)                    # large t first: small degrees
    chunk = 8192
    for start in range(0, n, chunk):
        idx = order[start:start + chunk]
        t_chunk = ts[idx]
        L = _bm_series_degree(float(t_chunk.min()))
        ls = np.arange(1, L + 1)
        w = np.empty((idx.size, L + 1))
        w[:, 0] = 1.0
        w[:, 1:] = np.exp(-np.outer(t_chunk, ls * (ls + 1.0)))
        lo = np.zeros(idx.size)
        hi = np.full(idx.size, math.pi)
        target = u[idx]
        for _ in range(45):
            mid = 0.5 * (lo + hi)
            val = _angle_cdf(np.cos(mid), w)
            high = val >= target
            hi[high] = mid[high]
            lo[~high] = mid[~high]
        out[idx] = 0.5 * (lo + hi)
    return out


def _rotate_from_pole(start: SphericalPoint, gammas: np.ndarray,
                      psis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Displace `start` by angle gamma along azimuth psi; returns (theta, phi)."""
    v = start.vector()
    ct, st = math.cos(start.theta), math.sin(start.theta)
    cp, sp_ = math.cos(start.phi), math.sin(start.phi)
    e1 = np.array([ct * cp, ct * sp_, -st])    # unit theta direction
    e2 = np.array([-sp_, cp, 0.0])             # unit phi direction
    cg, sg = np.cos(gammas), np.sin(gammas)
    dirs = np.cos(psis)[:, None] * e1 + np.sin(psis)[:, None] * e2
    pts = cg[:, None] * v + sg[:, None] * dirs
    z = np.clip(pts[:, 2], -1.0, 1.0)
    theta = np.arccos(z)
    phi = np.arctan2(pts[:, 1], pts[:, 0]) % (2.0 * math.pi)
    return theta, phi


def bm_displacements(start: SphericalPoint, ts: np.ndarray, rng
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Batch of B_t endpoints from `start` for per-sample times ts."""
    ts = np.asarray(ts, dtype=float)
    gammas = _sample_angles(ts, rng.random(ts.size))
    psis = 2.0 * math.pi * rng.random(ts.size)
    return _rotate_from_pole(start, gammas, psis)


def sample_sphere_bm(start: SphericalPoint, t: float, rng_seed: int) -> SphericalPoint:
    """One endpoint of spherical Brownian motion run for time t from start.

    The angular separation is drawn from the exact heat-kernel series
    marginal (no tangent-plane discretization), the azimuth uniformly.
    Times below the series cap raise; batch callers fall back to the
    tangent-plane law instead.
    """
    _bm_series_degree(t)            # raises the step-too-small error
    rng = np.random.default_rng(rng_seed)
    theta, phi = bm_displacements(start, np.array([t]), rng)
    return SphericalPoint(theta=float(theta[0]), phi=float(phi[0]))


def _rotate_many(thetas, phis, gammas, psis):
    """Displace per-sample points by per-sample angles; returns (theta, phi)."""
    ct, st = np.cos(thetas), np.sin(thetas)
    cp, sp_ = np.cos(phis), np.sin(phis)
    v = np.stack([st * cp, st * sp_, ct], axis=1)
    e1 = np.stack([ct * cp, ct * sp_, -st], axis=1)
    e2 = np.stack([-sp_, cp, np.zeros_like(ct)], axis=1)
    dirs = np.cos(psis)[:, None] * e1 + np.sin(psis)[:, None] * e2
    pts = np.cos(gammas)[:, None] * v + np.sin(gammas)[:, None] * dirs
    theta = np.arccos(np.clip(pts[:, 2], -1.0, 1.0))
    phi = np.arctan2(pts[:, 1], pts[:, 0]) % (2.0 * math.pi)
    return theta, phi


def sample_sphere_bm_euler(start: SphericalPoint, t: float, n_substeps: int,
                           rng_seed: int, n_samples: int = 1
                           ) -> tuple[np.ndarray, np.ndarray]:
    """Tangent-plane Euler stepping, kept as a cross-check for the exact
    sampler: composes n_substeps flat displacements (Rayleigh angle, uniform
    azimuth) with O(t / n_substeps) discretization bias.  Returns per-sample
    (theta, phi) arrays.
    """
    if n_substeps < 1:
        raise ValueError("n_substeps must be >= 1")
    rng = np.random.default_rng(rng_seed)
    dt = t / n_substeps
    th = np.full(n_samples, start.theta)
    ph = np.full(n_samples, start.phi)
    for _ in range(n_substeps):
        gam = np.minimum(2.0 * np.sqrt(dt * rng.standard_exponential(n_samples)),
                         math.pi)
        psi = 2.0 * math.pi * rng.random(n_samples)
        th, ph = _rotate_many(th, ph, gam, psi)
    return th, ph


# ----------------------------------------------------------------------
# Discretized Laplace-Beltrami operator (collocation derivatives)
# ----------------------------------------------------------------------

def _diff_matrix(x: np.ndarray, w_quad: np.ndarray) -> np.ndarray:
    """Collocation differentiation matrix on Gauss-Legendre nodes.

    Barycentric weights for GL points are proportional to
    (-1)^i sqrt((1 - x_i^2) w_i).
    """
    signs = np.cumprod(np.concatenate([[1.0], -np.ones(x.size - 1)]))
    wb = signs * np.sqrt((1.0 - x * x) * w_quad)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    D = (wb[None, :] / wb[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


def discrete_laplace_beltrami(values: np.ndarray, grid: SphericalGrid) -> np.ndarray:
    """Grid discretization of the spherical Laplace operator.

    theta part: d/dx[(1 - x^2) d/dx] via collocation differentiation
    matrices on the Gauss-Legendre nodes; phi part: second-order central
    differences of the periodic longitude direction.
    """
    values = np.asarray(values)
    if values.shape != (grid.n_theta, grid.n_phi):
        raise ValueError(f"values must be shaped {(grid.n_theta, grid.n_phi)}")
    D = _diff_matrix(grid.x, grid.w_theta)
    flux = (1.0 - grid.x ** 2)[:, None] * (D @ values)
    theta_part = D @ flux
    dphi2 = grid.dphi ** 2
    phi_second = (np.roll(values, 1, axis=1) - 2.0 * values
                  + np.roll(values, -1, axis=1)) / dphi2
    return theta_part + phi_second / (1.0 - grid.x ** 2)[:, None]
