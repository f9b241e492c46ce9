"""Perturbation series for the heat kernel of the fractional Laplacian with a
Hardy-type potential kappa |x|^{-alpha}.

The perturbed kernel is built as p_tilde = sum_n p_n where p_0 is the free
kernel and

    p_{n+1}(t, x, y) = kappa int_0^t int p(s, x, z) |z|^{-alpha}
                                       p_n(t - s, z, y) dz ds.

Two engines are provided:

* ``RadialWeightedEngine`` computes the weighted masses
  F_beta(t, x) = int p_tilde(t, x, y) |y|^{-beta} dy, which are radial in x
  and reduce to t = 1 by exact self-similar scaling.  These carry the
  invariance and supermedian checks.
* ``PlanarKernelEngine`` (d = 2 only) computes p_tilde(t, x, y) pointwise on
  a log-polar grid around a fixed y, by sweeping the Duhamel operator.

Both treat the kernel concentration at small times by singularity
subtraction: int p(s, x, z) g(z) dz = g(x) + int p(s, x, z) (g(z) - g(x)) dz,
which stays accurate when the kernel peak is narrower than the grid spacing.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import log, pi

import numpy as np

from .errors import DivergenceError, DomainError
from .params import ModelParams, Regime, kappa_of_beta
from .quadrature import epsilon_accelerate, log_panel_nodes, refined_unit_nodes
from .stable_kernel import (
    KernelValue,
    Method,
    angular_average,
    free_kernel,
    is_cauchy,
    kernel_t,
    levy_constant,
    sphere_area,
    weighted_mass,
)


@dataclass
class QuadratureConfig:
    """Discretization knobs for the series engines."""

    rel_tol: float = 1e-3
    eps0: float = 1e-5            # inner radius; the |z|^{-alpha} ring below it
                                  # is integrated by an exact power-law substitution
    time_subdivisions: int = 16   # time-grid points of the pointwise engine
    max_terms: int = 60
    r_max: float = 1e3
    radial_per_decade: int = 3    # log panels per decade (8 Gauss points each)
    n_angular: int = 32           # angular grid of the pointwise engine (d = 2)
    sigma_per_decade: float = 2.0  # time-quadrature panels per decade
    sigma_per_panel: int = 6
    sigma_edge: float = 1e-8      # relative refinement depth at the time endpoints

    def __post_init__(self):
        if not (0.0 < self.rel_tol < 0.1):
            raise DomainError(f"rel_tol must lie in (0, 0.1), got {self.rel_tol}")
        if self.eps0 <= 0.0:
            raise DomainError(f"eps0 must be positive, got {self.eps0}")
        if self.max_terms < 1 or self.time_subdivisions < 4:
            raise DomainError("max_terms >= 1 and time_subdivisions >= 4 required")

    def refined(self, factor: float = 1.5) -> "QuadratureConfig":
        """A copy with the grid densities scaled up, for drift studies."""
        return replace(
            self,
            time_subdivisions=int(round(self.time_subdivisions * factor)),
            radial_per_decade=int(round(self.radial_per_decade * factor)),
            n_angular=int(round(self.n_angular * factor / 2.0) * 2),
            sigma_per_decade=self.sigma_per_decade * factor,
        )


@dataclass
class SeriesState:
    """Partial sums of the perturbation series at one evaluation point."""

    terms: list
    tail_bound: float
    converged: bool

    @property
    def value(self) -> float:
        return float(np.sum(self.terms))

    @property
    def quotient(self) -> float:
        """Last increment ratio (estimate of the geometric decay rate)."""
        if len(self.terms) < 2 or self.terms[-2] == 0.0:
            return 0.0
        return float(self.terms[-1] / self.terms[-2])


def _log_interp_matrix(r_grid: np.ndarray, targets: np.ndarray, gamma: float) -> np.ndarray:
    """Matrix mapping values on r_grid to values at target radii.

    Interpolates r^gamma * phi linearly in log r (exact for phi ~ r^{-gamma});
    beyond the last node the power law r^{-gamma} is continued, below the
    first node the first value's power law is continued likewise.
    """
    lg = np.log(r_grid)
    lt = np.log(targets)
    n = len(r_grid)
    mat = np.zeros((len(targets), n))
    idx = np.clip(np.searchsorted(lg, lt) - 1, 0, n - 2)
    f = (lt - lg[idx]) / (lg[idx + 1] - lg[idx])
    low = lt <= lg[0]
    high = lt >= lg[-1]
    mid = ~(low | high)
    rows = np.arange(len(targets))
    mat[rows[mid], idx[mid]] = (1.0 - f[mid]) * (r_grid[idx[mid]] / targets[mid]) ** gamma
    mat[rows[mid], idx[mid] + 1] = f[mid] * (r_grid[idx[mid] + 1] / targets[mid]) ** gamma
    mat[rows[low], 0] = (r_grid[0] / targets[low]) ** gamma
    mat[rows[high], n - 1] = (r_grid[-1] / targets[high]) ** gamma
    return mat


class RadialWeightedEngine:
    """Weighted masses F_beta(t, x) = int p_tilde(t, x, y)|y|^{-beta} dy.

    Self-similarity reduces everything to t = 1: F(t, x) =
    t^{-beta/alpha} F(1, t^{-1/alpha} x).  At t = 1 the series terms obey

        phi_{n+1}(r) = kappa int_0^1 (1-s)^{-beta/alpha}
                       [P_s (|.|^{-alpha} phi_n((1-s)^{-1/alpha} .))](r) ds

    which is discretized into a single dense matrix K on a log-radial grid;
    the series is then summed by sweeps or by solving (I - K) F = phi_0.
    """

    def __init__(self, params: ModelParams, beta: float, cfg: QuadratureConfig | None = None):
        if not (0.0 <= beta < params.d):
            raise DomainError(f"beta must lie in [0, d), got {beta}")
        self.params = params
        self.beta = float(beta)
        self.cfg = cfg or QuadratureConfig()
        d, alpha = params.d, params.alpha
        c = self.cfg
        self.r_grid, self.r_weights = log_panel_nodes(
            c.eps0, c.r_max, n_per_panel=8, per_decade=c.radial_per_decade
        )
        self.s_nodes, self.s_weights = refined_unit_nodes(
            n_per_panel=c.sigma_per_panel, edge_ratio=c.sigma_edge,
            per_decade=c.sigma_per_decade,
        )
        # inner-ring extrapolation exponent: the solution behaves like
        # r^{-max(beta, delta)} at the origin
        delta = params.delta if np.isfinite(params.delta) else (d - alpha) / 2.0
        self._slope_in = max(self.beta, delta)
        self._operator = self._build_operator()
        self._phi0 = np.array(
            [weighted_mass(1.0, r, beta, d, alpha).value for r in self.r_grid]
        ) if beta > 0.0 else np.ones_like(self.r_grid)

    # -- operator assembly --------------------------------------------------

    def _build_operator(self) -> np.ndarray:
        d, alpha = self.params.d, self.params.alpha
        kappa, beta = self.params.kappa, self.beta
        r = self.r_grid
        n = len(r)
        area = sphere_area(d)
        K = np.zeros((n, n))
        a_levy = levy_constant(d, alpha)
        for s, ws in zip(self.s_nodes, self.s_weights):
            cs = (1.0 - s) ** (-1.0 / alpha)
            pref = (1.0 - s) ** (-beta / alpha)
            # Theta[i, j]: quadrature-weighted angular-averaged kernel
            theta = angular_average(s, r[:, None], r[None, :], d, alpha) * (
                area * self.r_weights * r ** (d - 1)
            )
            mass = theta.sum(axis=1)
            # resample phi at (1-s)^{-1/alpha} a_j, then weight by a^{-alpha}
            R = _log_interp_matrix(r, cs * r, beta)
            DR = (pref * r[:, None] ** (-alpha)) * R
            # the kernel peak (width s^{1/alpha}) is unresolved by the local
            # grid spacing when lam -> 1; there the singularity-subtracted
            # form g(r) + int p (g - g(r)) is used.  In the resolved regime
            # the rows are rescaled to the exact mass (1 minus the ring
            # masses outside the grid), removing the leading quadrature error.
            lam = np.clip(np.log((0.5 * r) ** alpha / s) / log(16.0), 0.0, 1.0)
            a_in, w_in = log_panel_nodes(1e-4 * self.cfg.eps0, self.cfg.eps0, 8, 2)
            th_in = angular_average(s, r[:, None], a_in[None, :], d, alpha)
            mass_in = area * (th_in @ (w_in * a_in ** (d - 1)))
            mass_out = area * s * a_levy * self.cfg.r_max ** (-alpha) / alpha
            factor = np.clip((1.0 - mass_in - mass_out) / np.maximum(mass, 1e-300),
                             0.5, 2.0)
            scale = 1.0 + (1.0 - lam) * (factor - 1.0)
            theta = theta * scale[:, None]
            mass = mass * scale
            K += (kappa * ws) * ((theta @ DR) + (lam * (1.0 - mass))[:, None] * DR)
            # ring corrections outside the grid: below eps0 the integrand is
            # continued as the power law phi(x) ~ phi(r_0) (x/r_0)^{-slope}
            # and integrated against the angular-averaged kernel on a sub-grid
            sl = self._slope_in
            prof_in = a_in ** (d - 1 - alpha - sl)
            ring_in = (
                area * pref * (cs / r[0]) ** (-sl) * (th_in @ (w_in * prof_in))
            )
            K[:, 0] += (kappa * ws) * ring_in
            expo_out = 1.0 + 2.0 * alpha + beta
            ring_out = (
                area * s * a_levy * pref * r[-1] ** beta * cs ** (-beta)
                * self.cfg.r_max ** (-expo_out + 1.0) / (expo_out - 1.0)
            )
            K[:, -1] += (kappa * ws) * ring_out
        return K

    # -- series / solve routes ---------------------------------------------

    def series_terms(self, n_terms: int) -> np.ndarray:
        """Array of shape (n_terms + 1, n_r): phi_0 .. phi_{n_terms}."""
        terms = [self._phi0]
        for _ in range(n_terms):
            terms.append(self._operator @ terms[-1])
        return np.array(terms)

    def solve(self) -> np.ndarray:
        """Sum of the series by direct solve of (I - K) F = phi_0."""
        n = len(self.r_grid)
        return np.linalg.solve(np.eye(n) - self._operator, self._phi0)

    def series_sum(self, rel_tol: float | None = None):
        """(profile, converged): accelerated series sum on the radial grid."""
        tol = rel_tol if rel_tol is not None else self.cfg.rel_tol
        partial = self._phi0.copy()
        term = self._phi0
        history = [partial.copy()]
        for _ in range(self.cfg.max_terms):
            term = self._operator @ term
            partial = partial + term
            history.append(partial.copy())
            if np.all(np.abs(term) <= tol * np.abs(partial)):
                return partial, True
        # accelerate the slowly converging (critical) case pointwise
        hist = np.array(history)
        out = np.empty(len(self.r_grid))
        for i in range(len(self.r_grid)):
            out[i], _ = epsilon_accelerate(hist[-30:, i])
        return out, False

    # -- evaluation ---------------------------------------------------------

    def profile(self, route: str = "solve") -> np.ndarray:
        if route == "solve":
            return self.solve()
        prof, _ = self.series_sum()
        return prof

    def evaluator(self, route: str = "solve"):
        """Callable F(t, radius) built from the t = 1 profile by scaling."""
        prof = self.profile(route)
        alpha, beta = self.params.alpha, self.beta
        r = self.r_grid
        logr = np.log(r)
        logw = np.log(np.maximum(prof, 1e-300)) + beta * logr  # r^beta * F, smooth
        slope_in = -self._slope_in + beta

        def F(t, radius):
            t = np.asarray(t, dtype=float)
            rho = np.asarray(radius, dtype=float) * t ** (-1.0 / alpha)
            rho = np.maximum(rho, 1e-300)
            lw = np.interp(np.log(rho), logr, logw)
            lo = rho < r[0]
            hi = rho > r[-1]
            lw = np.where(lo, logw[0] + slope_in * (np.log(rho) - logr[0]), lw)
            lw = np.where(hi, logw[-1], lw)
            return np.exp(lw) * rho ** (-beta) * t ** (-beta / alpha)

        return F


def time_integrated_profile(engine: RadialWeightedEngine, t: float, radius,
                            route: str = "solve"):
    """int_0^t F_beta(s, x) ds at |x| = radius, from the engine's t=1 profile."""
    F = engine.evaluator(route)
    radius = np.asarray(radius, dtype=float)
    s_lo = 1e-7 * t
    xs, ws = log_panel_nodes(s_lo, t, n_per_panel=12, per_decade=4)
    vals = F(xs[:, None], radius[None, :]) if radius.ndim else F(xs, radius)
    out = np.sum(ws[:, None] * vals, axis=0) if radius.ndim else float(np.sum(ws * vals))
    # left endpoint: F(s, x) -> |x|^{-beta} as s -> 0 for x != 0
    out = out + radius ** (-engine.beta) * s_lo
    return out


# ---------------------------------------------------------------------------
# Pointwise engine on a log-polar grid (d = 2)


class PlanarKernelEngine:
    """Pointwise p_tilde(tau, z, y) for d = 2 on a log-polar grid around a
    fixed y, for all tau on a geometric time grid up to t.

    The angular direction is uniform, so every convolution with the free
    kernel is a circular convolution contracted by FFT.  The same
    peak-resolution blend as the radial engine is applied: singularity
    subtraction where the kernel is narrower than the grid, row mass
    normalization where it is resolved.
    """

    def __init__(self, params: ModelParams, t: float, y, cfg: QuadratureConfig | None = None,
                 r_min: float = 1e-3, r_max: float = 3e2):
        if params.d != 2:
            raise DomainError("the pointwise grid engine supports d = 2 only")
        if t <= 0.0:
            raise DomainError(f"t must be positive, got {t}")
        self.params = params
        self.cfg = cfg or QuadratureConfig()
        self.t = float(t)
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if y.size == 1:
            y = np.array([float(y[0]), 0.0])
        self.ry = float(np.hypot(y[0], y[1]))
        self.y_angle = float(np.arctan2(y[1], y[0]))
        if self.ry <= 0.0:
            raise DomainError("y must be nonzero")
        c = self.cfg
        self.r_grid, self.r_weights = log_panel_nodes(
            r_min, r_max, n_per_panel=8, per_decade=c.radial_per_decade
        )
        self.n_theta = c.n_angular
        self.theta = 2.0 * pi * np.arange(self.n_theta) / self.n_theta
        self.w_theta = 2.0 * pi / self.n_theta
        self.r_min, self.r_max = r_min, r_max
        nt = c.time_subdivisions
        self.tau = t * np.geomspace(1e-2, 1.0, nt)
        self.v_nodes, self.v_weights = refined_unit_nodes(
            n_per_panel=5, edge_ratio=1e-4, per_decade=1.2
        )
        # the V-side integrand is smooth after subtraction; a leaner rule does
        self.v_nodes_lean, self.v_weights_lean = refined_unit_nodes(
            n_per_panel=4, edge_ratio=1e-3, per_decade=0.8
        )
        r = self.r_grid
        cosd = np.cos(self.theta)
        # squared distances between grid points, circulant in the angle index
        self.dist2 = (r[:, None, None] ** 2 + r[None, :, None] ** 2
                      - 2.0 * r[:, None, None] * r[None, :, None] * cosd[None, None, :])
        # distances from grid points to y (y at angle 0 in engine coordinates)
        self.dist_y = np.sqrt(np.maximum(
            r[:, None] ** 2 + self.ry ** 2 - 2.0 * r[:, None] * self.ry * cosd[None, :],
            0.0,
        ))
        self.cell_w = (self.r_weights * r)[:, None] * self.w_theta  # area weights
        delta = params.delta if np.isfinite(params.delta) else (params.d - params.alpha) / 2.0
        self._slope_in = delta
        self._p0 = np.array([self._free_at_y(tk) for tk in self.tau])
        self._p1 = None
        self._terms_cache: list = []
        self._fp_cache: dict = {}

    # -- free-kernel helpers -------------------------------------------------

    def _free_at_y(self, s: float) -> np.ndarray:
        """p(s, z, y) on the spatial grid."""
        return kernel_t(s, self.dist_y, 2, self.params.alpha)

    def _kernel_fft(self, s: float) -> np.ndarray:
        """rfft over the angle lag of p(s, |z - w|) between grid circles."""
        if is_cauchy(self.params.alpha):
            q = s * s + self.dist2
            P = (s / (2.0 * pi)) / (q * np.sqrt(q))
        else:
            P = kernel_t(s, np.sqrt(self.dist2), 2, self.params.alpha)
        return np.fft.rfft(P, axis=-1)

    def _apply(self, khat: np.ndarray, G: np.ndarray) -> np.ndarray:
        """sum_w cell_w[w] p(s, z, w) G[w] via the circulant angle structure."""
        ghat = np.fft.rfft(self.cell_w * G, axis=-1)
        return np.fft.irfft(np.einsum("jkf,kf->jf", khat, ghat), n=self.n_theta, axis=-1)

    def _mass(self, khat: np.ndarray) -> np.ndarray:
        """Discrete kernel mass per radius (angle-independent)."""
        col = (self.cell_w[:, 0] * self.n_theta)  # sum over angles of cell_w
        return (khat[:, :, 0].real @ col) / self.n_theta * 1.0  # f=0 term carries the sum

    def _lam(self, s: float) -> np.ndarray:
        alpha = self.params.alpha
        return np.clip(np.log((0.5 * self.r_grid) ** alpha / s) / log(16.0), 0.0, 1.0)

    def _convolve(self, s: float, G: np.ndarray) -> np.ndarray:
        """int p(s, z, w) G(w) dw with the resolution blend and inner ring.

        G lives on the grid; below r_min it is continued per angle as the
        power law a^{-alpha - slope} carried by the first radial circle.
        """
        alpha = self.params.alpha
        khat = self._kernel_fft(s)
        mass = self._mass(khat)
        lam = self._lam(s)
        disc = pi * self.r_min ** 2 * kernel_t(s, self.r_grid, 2, alpha)
        factor = np.clip((1.0 - disc) / np.maximum(mass, 1e-300), 0.5, 2.0)
        scale = 1.0 + (1.0 - lam) * (factor - 1.0)
        out = scale[:, None] * self._apply(khat, G)
        out += (lam * (1.0 - scale * mass))[:, None] * G
        return out

    def _ring_in(self, s: float, G0: np.ndarray, q: float) -> np.ndarray:
        """Inner-disc contribution of int p(s, z, w) G(w) dw.

        G0 is G on the first radial circle; G is continued inward as the
        power law G0(theta) (a / r_0)^{-q}, and the kernel is frozen at its
        value at distance |z|.
        """
        expo = 2.0 - q
        r0 = self.r_grid[0]
        radial = self.r_min ** expo / expo * r0 ** q
        angsum = self.w_theta * float(np.sum(G0))
        return kernel_t(s, self.r_grid, 2, self.params.alpha)[:, None] * (radial * angsum)

    # -- first perturbation term --------------------------------------------

    def first_term(self) -> np.ndarray:
        """p_1 on the (tau, r, theta) grid, via both closed-form factors."""
        if self._p1 is not None:
            return self._p1
        alpha, kappa = self.params.alpha, self.params.kappa
        out = np.empty((len(self.tau), len(self.r_grid), self.n_theta))
        ry = self.ry
        for k, tk in enumerate(self.tau):
            acc = np.zeros((len(self.r_grid), self.n_theta))
            for v, wv in zip(self.v_nodes, self.v_weights):
                s, sp = tk * v, tk * (1.0 - v)
                s = max(s, 1e-300)
                sp = max(sp, 1e-300)
                if s <= sp:
                    # outer kernel peaked at z: subtract around z
                    G = self.r_grid[:, None] ** (-alpha) * self._free_at_y(sp)
                    I = self._convolve(s, G) + self._ring_in(s, G[0], alpha)
                else:
                    # free factor peaked at y: subtract around y
                    py = self._free_at_y(sp)
                    massY = float(np.sum(self.cell_w * py))
                    lamY = float(np.clip(log((0.5 * ry) ** alpha / sp) / log(16.0), 0.0, 1.0))
                    scaleY = 1.0 + (1.0 - lamY) * (np.clip(1.0 / max(massY, 1e-300), 0.5, 2.0) - 1.0)
                    khat = self._kernel_fft(s)
                    I = self._apply(khat, scaleY * py * self.r_grid[:, None] ** (-alpha))
                    fy = kernel_t(s, self.dist_y, 2, alpha) * ry ** (-alpha)
                    I += lamY * (1.0 - scaleY * massY) * fy
                    # inner disc of the w-integral (|w|^{-alpha} singular ring)
                    I += (kernel_t(sp, ry, 2, alpha)
                          * kernel_t(s, self.r_grid, 2, alpha)[:, None]
                          * 2.0 * pi * self.r_min ** (2.0 - alpha) / (2.0 - alpha))
                acc += wv * I
            out[k] = kappa * tk * acc
        self._p1 = out
        return out

    # -- Duhamel sweeps ------------------------------------------------------

    def _interp_time(self, V: np.ndarray, t_target: float) -> np.ndarray:
        """V at an off-grid time, log-log linear; V ~ tau below the grid."""
        tau = self.tau
        if t_target <= tau[0]:
            return V[0] * (t_target / tau[0])
        if t_target >= tau[-1]:
            return V[-1]
        i = int(np.searchsorted(tau, t_target)) - 1
        f = log(t_target / tau[i]) / log(tau[i + 1] / tau[i])
        logV = np.log(np.maximum(V[i:i + 2], 1e-300))
        return np.exp((1.0 - f) * logV[0] + f * logV[1])

    def apply_duhamel(self, V: np.ndarray) -> np.ndarray:
        """One application of the perturbation operator to V(tau, r, theta)."""
        alpha, kappa = self.params.alpha, self.params.kappa
        out = np.empty_like(V)
        rinv = self.r_grid[:, None] ** (-alpha)
        for k, tk in enumerate(self.tau):
            acc = np.zeros((len(self.r_grid), self.n_theta))
            for v, wv in zip(self.v_nodes_lean, self.v_weights_lean):
                s = max(tk * v, 1e-300)
                G = rinv * self._interp_time(V, tk * (1.0 - v))
                acc += wv * (self._convolve(s, G) + self._ring_in(s, G[0], alpha + self._slope_in))
            out[k] = kappa * tk * acc
        return out

    # -- series / fixed point ------------------------------------------------

    def terms(self, n_terms: int) -> list:
        """Grid series terms [p_0, p_1, ..., p_{n_terms}] (cached)."""
        cache = self._terms_cache
        if not cache:
            cache.append(self._p0)
        if n_terms >= 1 and len(cache) < 2:
            cache.append(self.first_term())
        while len(cache) <= n_terms:
            cache.append(self.apply_duhamel(cache[-1]))
        return cache[: n_terms + 1]

    def fixed_point(self, rel_tol: float | None = None, max_iter: int | None = None):
        """(V, converged, n_iter): iterate V <- p_1 + K V to stall.

        The convergence norm is the relative sup norm against the running
        total p_0 + V, which tracks the natural p H H weight.
        """
        tol = rel_tol if rel_tol is not None else self.cfg.rel_tol
        mx = max_iter if max_iter is not None else self.cfg.max_terms
        key = (tol, mx)
        if key in self._fp_cache:
            return self._fp_cache[key]
        p1 = self.first_term()
        V = p1.copy()
        V_prev = None
        for it in range(mx):
            Vn = p1 + self.apply_duhamel(V)
            if not np.all(np.isfinite(Vn)):
                raise DivergenceError("fixed-point iteration diverged")
            change = np.max(np.abs(Vn - V) / (self._p0 + np.abs(Vn) + 1e-300))
            if change < tol:
                self._fp_cache[key] = (Vn, True, it + 1)
                return self._fp_cache[key]
            if V_prev is not None and (it + 1) % 5 == 0:
                # pointwise Aitken jump; the next sweep re-enters the
                # contraction, so an imperfect jump is self-correcting
                d1 = V - V_prev
                d2 = Vn - V
                den = d2 - d1
                safe = np.abs(den) > 1e-10 * (np.abs(Vn) + 1e-300)
                jump = Vn - np.where(safe, d2 * d2 / np.where(safe, den, 1.0), 0.0)
                V_prev, V = Vn, np.maximum(jump, 0.0)
            else:
                V_prev, V = V, Vn
        self._fp_cache[key] = (V, False, mx)
        return self._fp_cache[key]

    # -- evaluation ----------------------------------------------------------

    def _value_from_grid(self, U_slice: np.ndarray, x) -> float:
        """Bilinear (log r, theta) interpolation of a grid slice at point x."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.size == 1:
            x = np.array([float(x[0]), 0.0])
        rx = float(np.hypot(x[0], x[1]))
        th = (float(np.arctan2(x[1], x[0])) - self.y_angle) % (2.0 * pi)
        r = self.r_grid
        rx = min(max(rx, r[0]), r[-1])
        i = int(np.clip(np.searchsorted(r, rx) - 1, 0, len(r) - 2))
        fr = log(rx / r[i]) / log(r[i + 1] / r[i])
        j = int(th / (2.0 * pi) * self.n_theta) % self.n_theta
        ft = th / self.w_theta - j
        j2 = (j + 1) % self.n_theta
        logs = np.log(np.maximum(U_slice[i:i + 2][:, [j, j2]], 1e-300))
        val = ((1 - fr) * (1 - ft) * logs[0, 0] + (1 - fr) * ft * logs[0, 1]
               + fr * (1 - ft) * logs[1, 0] + fr * ft * logs[1, 1])
        return float(np.exp(val))

    def value_at(self, x, tau_index: int = -1, route: str = "fixed_point") -> KernelValue:
        if route == "fixed_point":
            V, ok, _ = self.fixed_point()
        else:
            terms = self.terms(self.cfg.max_terms)
            V, ok = sum(terms[1:]), True
        U = self._p0 + V
        val = self._value_from_grid(U[tau_index], x)
        err = max(self.cfg.rel_tol, 2e-2) * val
        return KernelValue(val, err if ok else 5.0 * err, Method.FIXED_POINT)


# ---------------------------------------------------------------------------
# Module-level operations (thin wrappers over the pointwise engine)


_ENGINE_CACHE: dict = {}
_ENGINE_CACHE_MAX = 6


def _as_point(x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size == 1:
        x = np.array([float(x[0]), 0.0])
    return x


def _get_engine(params: ModelParams, t: float, y,
                cfg: QuadratureConfig | None) -> PlanarKernelEngine:
    """Pointwise engine centered at y, cached across wrapper calls."""
    cfg = cfg or QuadratureConfig()
    y = _as_point(y)
    key = (params.d, params.alpha, params.kappa, float(t), float(y[0]), float(y[1]),
           cfg.rel_tol, cfg.eps0, cfg.time_subdivisions, cfg.max_terms,
           cfg.r_max, cfg.radial_per_decade, cfg.n_angular,
           cfg.sigma_per_decade, cfg.sigma_per_panel, cfg.sigma_edge)
    if key not in _ENGINE_CACHE:
        if len(_ENGINE_CACHE) >= _ENGINE_CACHE_MAX:
            _ENGINE_CACHE.pop(next(iter(_ENGINE_CACHE)))
        _ENGINE_CACHE[key] = PlanarKernelEngine(params, t, y, cfg)
    return _ENGINE_CACHE[key]


_RADIAL_CACHE: dict = {}
_RADIAL_CACHE_MAX = 10


def get_radial_engine(params: ModelParams, beta: float,
                      cfg: QuadratureConfig | None = None) -> RadialWeightedEngine:
    """Weighted-mass engine for (params, beta), cached across calls."""
    cfg = cfg or QuadratureConfig()
    key = (params.d, params.alpha, params.kappa, float(beta),
           cfg.rel_tol, cfg.eps0, cfg.time_subdivisions, cfg.max_terms,
           cfg.r_max, cfg.radial_per_decade, cfg.n_angular,
           cfg.sigma_per_decade, cfg.sigma_per_panel, cfg.sigma_edge)
    if key not in _RADIAL_CACHE:
        if len(_RADIAL_CACHE) >= _RADIAL_CACHE_MAX:
            _RADIAL_CACHE.pop(next(iter(_RADIAL_CACHE)))
        _RADIAL_CACHE[key] = RadialWeightedEngine(params, beta, cfg)
    return _RADIAL_CACHE[key]


def perturbation_term(n: int, t: float, x, y, params: ModelParams,
                      cfg: QuadratureConfig | None = None) -> KernelValue:
    """n-th term of the perturbation series at (t, x, y).

    The zeroth term is the free kernel (exact); higher terms are read off the
    grid sweep p_{n} = K p_{n-1} of the pointwise engine.
    """
    if n < 0:
        raise DomainError(f"n must be nonnegative, got {n}")
    if t <= 0.0:
        raise DomainError(f"t must be positive, got {t}")
    x, y = _as_point(x), _as_point(y)
    if n == 0:
        return free_kernel(t, x - y, params.d, params.alpha)
    if params.kappa == 0.0:
        return KernelValue(0.0, 0.0, Method.SERIES)
    eng = _get_engine(params, t, y, cfg)
    term = eng.terms(n)[n]
    val = eng._value_from_grid(term[-1], x)
    return KernelValue(val, max(eng.cfg.rel_tol, 2e-2) * val, Method.SERIES)


def tilde_p(t: float, x, y, params: ModelParams,
            cfg: QuadratureConfig | None = None) -> SeriesState:
    """Partial sums of the perturbed kernel at (t, x, y).

    Stops once the increments decay geometrically with quotient below one and
    the geometric tail estimate is below rel_tol of the partial sum, or at
    max_terms (converged = False, expected at the critical coupling).  The
    reported tail_bound is the weighted-integral bound kappa^{N+1} /
    kappa_star^{N+2}-type tail at beta = (d - alpha)/2, infinite at critical.
    """
    if params.regime is Regime.SUPERCRITICAL:
        raise DomainError("tilde_p requires a subcritical or critical coupling")
    if t <= 0.0:
        raise DomainError(f"t must be positive, got {t}")
    x, y = _as_point(x), _as_point(y)
    cfg = cfg or QuadratureConfig()
    d, alpha, kappa = params.d, params.alpha, params.kappa
    p0 = free_kernel(t, x - y, d, alpha).value
    terms = [p0]
    if kappa == 0.0:
        return SeriesState(terms=terms, tail_bound=0.0, converged=True)
    eng = _get_engine(params, t, y, cfg)
    converged = False
    for n in range(1, cfg.max_terms + 1):
        grid_terms = eng.terms(n)
        terms.append(eng._value_from_grid(grid_terms[n][-1], x))
        if n >= 3:
            q = abs(terms[-1]) / max(abs(terms[-2]), 1e-300)
            partial = float(np.sum(terms))
            if q < 1.0 and q / (1.0 - q) * abs(terms[-1]) < cfg.rel_tol * abs(partial):
                converged = True
                break
    beta = (d - alpha) / 2.0
    ks = kappa_of_beta(d, alpha, beta)
    rx = max(float(np.hypot(x[0], x[1])), 1e-300)
    if kappa < ks:
        n_used = len(terms) - 1
        tail = (kappa / ks) ** (n_used + 1) * rx ** (-beta) / (ks - kappa)
    else:
        tail = float("inf")
    return SeriesState(terms=terms, tail_bound=tail, converged=converged)


def tilde_p_fixed_point(t: float, x, y_grid, params: ModelParams,
                        cfg: QuadratureConfig | None = None) -> list:
    """Perturbed kernel at (t, x, y) for every y in y_grid, fixed-point route.

    One engine is centered at x; the kernel's symmetry turns each requested y
    into a grid read of the same converged iterate.
    """
    if params.regime is Regime.SUPERCRITICAL:
        raise DomainError("the fixed point requires a subcritical or critical coupling")
    x = _as_point(x)
    eng = _get_engine(params, t, x, cfg)
    return [eng.value_at(_as_point(y), route="fixed_point") for y in y_grid]


def duhamel_residual(t: float, x, y, p_tilde_eval, params: ModelParams) -> float:
    """Relative defect of the second Duhamel form at (t, x, y).

    Checks |p_tilde - p - kappa int_0^t int p_tilde(s,x,z) |z|^{-alpha}
    p(t-s,z,y) dz ds| / p_tilde with a quadrature independent of the sweep
    that produced p_tilde.  The evaluator must be a pointwise engine centered
    at x with horizon t; the free-kernel part of p_tilde integrates to the
    first series term exactly, so only the smooth remainder V = p_tilde - p
    is integrated numerically.
    """
    if not isinstance(p_tilde_eval, PlanarKernelEngine):
        raise DomainError("duhamel_residual needs a pointwise engine evaluator")
    eng = p_tilde_eval
    x, y = _as_point(x), _as_point(y)
    if abs(float(np.hypot(x[0], x[1])) - eng.ry) > 1e-12 * max(1.0, eng.ry):
        raise DomainError("the evaluator must be centered at x")
    if abs(t - eng.tau[-1]) > 1e-12 * t:
        raise DomainError("the evaluator horizon must equal t")
    alpha, kappa = params.alpha, params.kappa
    dxy = float(np.hypot(x[0] - y[0], x[1] - y[1]))
    p0_xy = kernel_t(t, dxy, 2, alpha)
    V, _, _ = eng.fixed_point()
    v_xy = eng._value_from_grid(V[-1], y)
    p1_xy = eng._value_from_grid(eng.first_term()[-1], y)
    ptilde = p0_xy + v_xy
    if kappa == 0.0:
        return abs(v_xy) / ptilde
    # geometry of the grid relative to the requested y
    r = eng.r_grid
    ry = float(np.hypot(y[0], y[1]))
    th_global = eng.theta + eng.y_angle
    th_y = float(np.arctan2(y[1], y[0]))
    dz_y = np.sqrt(np.maximum(
        r[:, None] ** 2 + ry ** 2
        - 2.0 * r[:, None] * ry * np.cos(th_global[None, :] - th_y), 0.0))
    rinv = r[:, None] ** (-alpha)
    q_in = alpha + eng._slope_in
    acc = 0.0
    for v, wv in zip(eng.v_nodes, eng.v_weights):
        s, sp = max(t * v, 1e-300), max(t * (1.0 - v), 1e-300)
        Vs = eng._interp_time(V, s)
        G = Vs * rinv
        P = kernel_t(sp, dz_y, 2, alpha)
        mass = float(np.sum(eng.cell_w * P))
        # resolution blend around the kernel peak at z = y
        lam_y = float(np.clip(log((0.5 * ry) ** alpha / sp) / log(16.0), 0.0, 1.0))
        scale = 1.0 + (1.0 - lam_y) * (np.clip(1.0 / max(mass, 1e-300), 0.5, 2.0) - 1.0)
        g_y = eng._value_from_grid(np.maximum(Vs, 1e-300), y) * max(ry, 1e-300) ** (-alpha)
        I = float(np.sum(eng.cell_w * P * G)) * scale
        I += lam_y * (1.0 - scale * mass) * g_y
        # inner disc: continue V |z|^{-alpha} inward as a power law, kernel
        # frozen at distance |y|
        G0 = G[0]
        I += (kernel_t(sp, ry, 2, alpha)
              * r[0] ** q_in * eng.r_min ** (2.0 - q_in) / (2.0 - q_in)
              * eng.w_theta * float(np.sum(G0)))
        acc += wv * I
    J = kappa * t * acc
    return abs(v_xy - p1_xy - J) / ptilde
