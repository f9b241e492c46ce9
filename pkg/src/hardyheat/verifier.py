"""Identity and bound suites for the perturbed kernel.

Every check measures a defect against an independently computed reference:
Chapman-Kolmogorov by grid convolution of two engine runs, the supermedian
and invariance identities by the weighted-mass engine (and optionally the
Feynman-Kac sampler), the two-sided comparability estimate by a pointwise
grid scan, and supercritical blow-up by iterating the series operator on a
deep radial grid.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from math import log, pi

import numpy as np
from scipy.optimize import curve_fit

from .errors import DomainError
from .mc_oracle import McConfig, feynman_kac
from .params import ModelParams, Regime, kappa_of_beta
from .quadrature import log_panel_nodes
from .duhamel import (
    PlanarKernelEngine,
    QuadratureConfig,
    RadialWeightedEngine,
    get_radial_engine,
    time_integrated_profile,
    _get_engine,
)
from .stable_kernel import kernel_t


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one verification check."""

    name: str
    status: str            # "pass" | "fail" | "warn"
    defect: float
    tolerance: float
    runtime: float
    details: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RatioReport:
    """Comparability-constant scan of the two-sided kernel estimate."""

    t_values: tuple
    radii: tuple
    angles: tuple
    ratios: dict           # t -> 2-d array (radius, angle) of p~/(p H H)
    c_lower: float
    c_upper: float
    refinement_drift: float
    slope: float
    slope_target: float


@dataclass(frozen=True)
class BlowupReport:
    """Evidence record of the series probe at one coupling."""

    kappa: float
    regime: str
    n_terms: int
    s_over_reference: float
    last_ratios: tuple
    diverged: bool
    converged: bool


def H_weight(t: float, radius, delta: float, alpha: float):
    """The comparability weight H(t, x) = t^{delta/alpha}|x|^{-delta} + 1."""
    radius = np.asarray(radius, dtype=float)
    return t ** (delta / alpha) * radius ** (-delta) + 1.0


def _result(name: str, defect: float, tol: float, t0: float,
            warn_only: bool = False, **details) -> CheckResult:
    ok = defect <= tol
    status = "pass" if ok else ("warn" if warn_only else "fail")
    return CheckResult(name=name, status=status, defect=float(defect),
                       tolerance=float(tol), runtime=time.time() - t0,
                       details=details)


# ---------------------------------------------------------------------------
# Chapman-Kolmogorov


def _free_convolution(s: float, t: float, x, y, d: int, alpha: float) -> float:
    """int p(s,x,z) p(t,z,y) dz by polar quadrature around y (d = 2)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r, w = log_panel_nodes(1e-4, 1e3, n_per_panel=8, per_decade=5)
    n_th = 128
    th = 2.0 * pi * np.arange(n_th) / n_th
    zx = y[0] + r[:, None] * np.cos(th)
    zy = y[1] + r[:, None] * np.sin(th)
    dx = np.hypot(zx - x[0], zy - x[1])
    dy = r[:, None] * np.ones(n_th)
    vals = kernel_t(s, dx, d, alpha) * kernel_t(t, dy, d, alpha)
    return float(np.sum((w * r)[:, None] * vals) * (2.0 * pi / n_th))


def check_chapman_kolmogorov(s: float, t: float, x, y, params: ModelParams,
                             cfg: QuadratureConfig | None = None) -> CheckResult:
    """Relative defect of int p~(s,x,z) p~(t,z,y) dz = p~(s+t,x,y)."""
    t0 = time.time()
    if params.regime is Regime.SUPERCRITICAL:
        raise DomainError("Chapman-Kolmogorov requires a finite kernel")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if params.kappa == 0.0:
        lhs = _free_convolution(s, t, x, y, params.d, params.alpha)
        rhs = kernel_t(s + t, float(np.hypot(*(x - y))), params.d, params.alpha)
        defect = abs(lhs - rhs) / rhs
        return _result("chapman_kolmogorov", defect, 1e-6, t0,
                       lhs=lhs, rhs=rhs)
    cfg = cfg or QuadratureConfig()
    eng_a = _get_engine(params, t, y, cfg)      # p~(t, z, y) on grid A
    eng_b = _get_engine(params, s, x, cfg)      # p~(s, x, z) via symmetry
    Va, _, _ = eng_a.fixed_point()
    Vb, _, _ = eng_b.fixed_point()
    Va_slice = Va[-1]
    Vb_slice = Vb[-1]

    # split p~ = p0 + V on both sides: the p0*p0 term is the free semigroup
    # in closed form, each p0*V cross term is integrated on a polar grid
    # centered at its kernel peak, and only the smooth V*V term uses the
    # origin-refined engine grid
    lhs = kernel_t(s + t, float(np.hypot(*(x - y))), params.d, params.alpha)
    lhs += _peaked_cross(t, y, eng_b, Vb_slice, params)
    lhs += _peaked_cross(s, x, eng_a, Va_slice, params)
    r = eng_a.r_grid
    th = eng_a.theta + eng_a.y_angle
    zx = r[:, None] * np.cos(th)[None, :]
    zy = r[:, None] * np.sin(th)[None, :]
    Vb_on_a = np.empty_like(Va_slice)
    for i in range(len(r)):
        for j in range(len(th)):
            Vb_on_a[i, j] = eng_b._value_from_grid(
                Vb_slice, (zx[i, j], zy[i, j]))
    lhs += float(np.sum(eng_a.cell_w * Va_slice * Vb_on_a))
    # inner disc: both corrections behave like |z|^{-delta} there
    delta = params.delta
    q = 2.0 * delta
    lhs += (float(np.mean(Va_slice[0] * Vb_on_a[0])) * 2.0 * pi
            * r[0] ** q * eng_a.r_min ** (2.0 - q) / (2.0 - q))
    eng_c = _get_engine(params, s + t, y, cfg)
    rhs = eng_c.value_at(x).value
    defect = abs(lhs - rhs) / rhs
    return _result("chapman_kolmogorov", defect, 1e-2, t0, lhs=lhs, rhs=rhs)


def _peaked_cross(t_free: float, c_free, eng, V_slice,
                  params: ModelParams) -> float:
    """int p0(t_free, z - c_free) V(z) dz on a peak-centered polar grid.

    The free factor peaks at z = c_free with width t_free^{1/alpha}; the
    Duhamel correction V is read off the engine grid by interpolation and is
    smooth away from the origin, so the grid needs an extra refinement ring
    only around z = 0 (where V ~ |z|^{-delta}).
    """
    c_free = np.asarray(c_free, dtype=float)
    w_scale = t_free ** (1.0 / params.alpha)
    r, w = log_panel_nodes(1e-3 * w_scale, 3e2 * w_scale,
                           n_per_panel=6, per_decade=4)
    n_th = 48
    th = 2.0 * pi * np.arange(n_th) / n_th
    zx = c_free[0] + r[:, None] * np.cos(th)[None, :]
    zy = c_free[1] + r[:, None] * np.sin(th)[None, :]
    rad = np.hypot(zx, zy)
    p0 = kernel_t(t_free, r, params.d, params.alpha)
    V = np.empty_like(zx)
    for i in range(len(r)):
        for j in range(n_th):
            V[i, j] = eng._value_from_grid(V_slice, (zx[i, j], zy[i, j]))
    total = float(np.sum((w * r * p0)[:, None] * V) * (2.0 * pi / n_th))
    # origin refinement: V ~ |z|^{-delta} is not resolved by the peak grid
    # when the origin sits off-center, so add a local patch minus the coarse
    # grid's own estimate of the same disc
    r_org = float(np.hypot(*c_free))
    if r_org > 0.0:
        rc = 0.3 * r_org
        inside = rad < rc
        # remove the coarse contribution attributed to the origin disc
        coarse = float(np.sum(np.where(
            inside, (w * r * p0)[:, None] * V, 0.0)) * (2.0 * pi / n_th))
        rp, wp = log_panel_nodes(1e-6 * rc, rc, n_per_panel=6, per_decade=4)
        thp = 2.0 * pi * np.arange(n_th) / n_th
        px = rp[:, None] * np.cos(thp)[None, :]
        py = rp[:, None] * np.sin(thp)[None, :]
        dfree = np.hypot(px - c_free[0], py - c_free[1])
        p0p = kernel_t(t_free, dfree, params.d, params.alpha)
        Vp = np.empty_like(px)
        for i in range(len(rp)):
            for j in range(n_th):
                Vp[i, j] = eng._value_from_grid(V_slice, (px[i, j], py[i, j]))
        patch = float(np.sum((wp * rp)[:, None] * p0p * Vp)
                      * (2.0 * pi / n_th))
        total += patch - coarse
    return total


# ---------------------------------------------------------------------------
# Supermedian / invariance identities


def check_supermedian(t: float, x, params: ModelParams,
                      cfg: QuadratureConfig | None = None,
                      mc: McConfig | None = None) -> CheckResult:
    """Equality int p~(t,x,y)|y|^{-delta} dy = |x|^{-delta} (and never above).

    The quadrature route uses the weighted-mass engine; when an MC config is
    given the Feynman-Kac route is run as well and both must agree.
    """
    t0 = time.time()
    if params.regime is Regime.SUPERCRITICAL:
        raise DomainError("supermedian checks require a finite kernel")
    rx = float(np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=float))))
    delta = params.delta
    cfg = cfg or QuadratureConfig()
    eng = get_radial_engine(params, delta, cfg)
    F = eng.evaluator("solve")
    lhs = float(F(t, rx))
    target = rx ** -delta
    defect = abs(lhs - target) / target
    tol = 5e-3
    details = {"quadrature": lhs, "target": target}
    # the one-sided (supermedian) inequality with the quadrature error margin
    violated = lhs > target * (1.0 + 3.0 * tol)
    if mc is not None:
        est = feynman_kac(np.atleast_1d(np.asarray(x, dtype=float)), t,
                          delta, params, mc)
        z = abs(est.mean - target) / max(est.std_error, 1e-300)
        details.update(mc_mean=est.mean, mc_std_error=est.std_error, mc_z=z)
        violated = violated or est.mean > target + 3.0 * est.std_error
        defect = max(defect, 0.0 if z <= 3.0 else z * est.std_error / target)
    res = _result("supermedian_equality", defect, tol, t0, **details)
    if violated and res.status == "pass":
        res = replace(res, status="fail")
    return res


def check_H_supermedian(t: float, x, params: ModelParams,
                        cfg: QuadratureConfig | None = None) -> CheckResult:
    """int p~(t,x,y) H(t,y) dy <= (M+1) H(t,x) with an empirical M.

    The ratio is scanned over a grid of radii (scaling reduces all t to 1);
    the check passes when the scan is finite and the ratio at (t, x) agrees
    with the scaling-mapped ratio at (1, t^{-1/alpha} x).
    """
    t0 = time.time()
    if params.regime is Regime.SUPERCRITICAL:
        raise DomainError("supermedian checks require a finite kernel")
    d, alpha, delta = params.d, params.alpha, params.delta
    rx = float(np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=float))))
    cfg = cfg or QuadratureConfig()
    eng_0 = get_radial_engine(params, 0.0, cfg)
    F0 = eng_0.evaluator("solve")
    Fd = get_radial_engine(params, delta, cfg).evaluator("solve") \
        if delta > 0.0 else F0

    def ratio(tt: float, rr) -> np.ndarray:
        num = F0(tt, rr) + tt ** (delta / alpha) * Fd(tt, rr)
        return num / H_weight(tt, rr, delta, alpha)

    radii = np.geomspace(1e-2, 1e2, 25)
    grid_ratio = ratio(1.0, radii)
    m_plus_1 = float(np.max(grid_ratio))
    r1 = float(ratio(t, np.array([rx]))[0])
    r2 = float(ratio(1.0, np.array([rx * t ** (-1.0 / alpha)]))[0])
    scale_defect = abs(r1 - r2) / r2
    return _result("H_supermedian", scale_defect, 1e-10 if t == 1.0 else 1e-6,
                   t0, empirical_M=m_plus_1 - 1.0, ratio_at_x=r1,
                   grid_max=m_plus_1, grid_min=float(np.min(grid_ratio)))


def check_invariance(beta: float, t: float, x, params: ModelParams,
                     cfg: QuadratureConfig | None = None) -> CheckResult:
    """Defect of the weighted invariance identity with the coupling correction.

    LHS = int p~(t,x,y)|y|^{-beta} dy; RHS = |x|^{-beta}
    + (kappa - kappa_beta) int_0^t int p~(s,x,y)|y|^{-beta-alpha} dy ds.
    """
    t0 = time.time()
    if params.regime is Regime.SUPERCRITICAL:
        raise DomainError("invariance checks require a finite kernel")
    d, alpha = params.d, params.alpha
    if not (0.0 <= beta < d - alpha):
        raise DomainError(f"beta must lie in [0, d - alpha), got {beta}")
    rx = float(np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=float))))
    cfg = cfg or QuadratureConfig()
    kb = kappa_of_beta(d, alpha, beta)
    eng_lhs = get_radial_engine(params, beta, cfg)
    lhs = float(eng_lhs.evaluator("solve")(t, rx))
    eng_ta = get_radial_engine(params, beta + alpha, cfg)
    ti = float(time_integrated_profile(eng_ta, t, np.float64(rx), "solve"))
    rhs = rx ** -beta + (params.kappa - kb) * ti
    defect = abs(lhs - rhs) / abs(rhs)
    return _result("invariance", defect, 1e-2, t0, lhs=lhs, rhs=rhs,
                   beta=beta, kappa_beta=kb)


# ---------------------------------------------------------------------------
# Two-sided estimate scan


def _scan_ratios(params: ModelParams, cfg: QuadratureConfig, radii, angles,
                 y0) -> np.ndarray:
    eng = _get_engine(params, 1.0, y0, cfg)
    V, _, _ = eng.fixed_point()
    U = eng._p0[-1] + V[-1]
    delta = params.delta
    hy = float(H_weight(1.0, np.hypot(*y0), delta, params.alpha))
    out = np.empty((len(radii), len(angles)))
    for i, r in enumerate(radii):
        for j, a in enumerate(angles):
            xx = (r * np.cos(a), r * np.sin(a))
            dist = np.hypot(xx[0] - y0[0], xx[1] - y0[1])
            if dist < 1e-6:
                out[i, j] = np.nan
                continue
            val = eng._value_from_grid(U, xx)
            p = kernel_t(1.0, dist, params.d, params.alpha)
            hx = float(H_weight(1.0, r, delta, params.alpha))
            out[i, j] = val / (p * hx * hy)
    return out


def bounds_scan(params: ModelParams, cfg: QuadratureConfig | None = None,
                radii=None, angles=None, t_values=(0.25, 1.0, 4.0),
                refine_factor: float = 1.25) -> RatioReport:
    """Comparability scan of p~ against p H(t,x) H(t,y) around y0 = (1, 0).

    t != 1 grids are produced by the exact scaling map (a consistency check
    of the reduction, not new information); the refinement drift compares
    c_upper/c_lower against a run with all grid densities scaled up.
    """
    if params.regime is Regime.SUPERCRITICAL:
        raise DomainError("the two-sided estimate requires a finite kernel")
    cfg = cfg or QuadratureConfig()
    radii = np.asarray(radii if radii is not None else np.geomspace(1e-3, 1e2, 11))
    angles = np.asarray(angles if angles is not None else [0.0, pi / 2.0, pi])
    y0 = (1.0, 0.0)
    base = _scan_ratios(params, cfg, radii, angles, y0)
    ratios = {1.0: base}
    alpha, delta = params.alpha, params.delta
    eng = _get_engine(params, 1.0, y0, cfg)
    V, _, _ = eng.fixed_point()
    U = eng._p0[-1] + V[-1]
    for t in t_values:
        if t == 1.0:
            continue
        lam = t ** (1.0 / alpha)     # (t, lam x, lam y0) maps to (1, x, y0)
        out = np.empty_like(base)
        hy = float(H_weight(t, lam * 1.0, delta, alpha))
        for i, r in enumerate(radii):
            for j, a in enumerate(angles):
                xx = (r * np.cos(a), r * np.sin(a))
                dist = lam * np.hypot(xx[0] - y0[0], xx[1] - y0[1])
                if dist < 1e-6 * lam:
                    out[i, j] = np.nan
                    continue
                val = eng._value_from_grid(U, xx) * t ** (-params.d / alpha)
                p = kernel_t(t, dist, params.d, alpha)
                hx = float(H_weight(t, lam * r, delta, alpha))
                out[i, j] = val / (p * hx * hy)
        ratios[t] = out
    c_lower = float(np.nanmin(base))
    c_upper = float(np.nanmax(base))
    fine = _scan_ratios(params, cfg.refined(refine_factor), radii, angles, y0)
    drift = max(abs(float(np.nanmax(fine)) - c_upper) / c_upper,
                abs(float(np.nanmin(fine)) - c_lower) / c_lower)
    # |x|^{-delta} slope fit at small radii, along the axis away from y0.
    # The raw kernel carries two known finite-radius factors that tilt a
    # plain log-log fit: the free-kernel variation along the ray (divided
    # out exactly) and the additive part of the comparability weight
    # r^{-delta} + 1 (modeled when the window can identify it, i.e. when
    # r^{-delta} varies appreciably across the window).
    fit_r = np.geomspace(2e-3, 3e-2, 6)
    vals = np.array([eng._value_from_grid(U, (-r, 0.0)) for r in fit_r])
    p_ray = kernel_t(1.0, 1.0 + fit_r, params.d, alpha)
    log_r, log_v = np.log(fit_r), np.log(vals / p_ray)
    span = float(log_r[-1] - log_r[0])
    if delta * span >= 1.0:
        def h_model(lr, log_c, s):
            return log_c + np.log(np.exp(lr) ** -s + 1.0)
        popt, _ = curve_fit(h_model, log_r, log_v, p0=(0.0, delta))
        slope = -float(popt[1])
    else:
        slope = float(np.polyfit(log_r, log_v, 1)[0])
    return RatioReport(t_values=tuple(t_values), radii=tuple(radii.tolist()),
                       angles=tuple(angles.tolist()), ratios=ratios,
                       c_lower=c_lower, c_upper=c_upper,
                       refinement_drift=float(drift), slope=slope,
                       slope_target=-delta)


# ---------------------------------------------------------------------------
# Blow-up probe


def blowup_probe(t: float, x, y, params: ModelParams,
                 cfg: QuadratureConfig | None = None,
                 n_max: int = 4000) -> BlowupReport:
    """Partial-sum divergence probe of the perturbation series.

    The series is tracked through its weighted pairing against
    |y|^{-(d-alpha)/2} on a deep radial grid, where each term is one matrix
    application; S_N is compared against the free-kernel weighted mass (the
    n = 0 term).  Supercritical couplings must show S_N running past 1000x
    that reference with increment ratios above 1; subcritical couplings must
    show geometric decay.  At the critical coupling the probe refuses: the
    trichotomy is undecidable from finitely many terms there, and the
    fixed-point evaluator is the right tool.
    """
    if params.regime is Regime.CRITICAL:
        raise DomainError(
            "the probe is undecidable at the critical coupling; "
            "use the fixed-point evaluator instead"
        )
    base = cfg or QuadratureConfig()
    probe_cfg = replace(base, eps0=min(base.eps0, 1e-10), r_max=max(base.r_max, 1e3))
    beta = (params.d - params.alpha) / 2.0
    eng = get_radial_engine(params, beta, probe_cfg)
    rx = float(np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=float))))
    rho = rx * t ** (-1.0 / params.alpha)   # scaling reduction to t = 1
    i = int(np.argmin(np.abs(np.log(eng.r_grid) - log(rho))))
    K = eng._operator
    phi = eng._phi0.copy()
    ref = float(eng._phi0[i])
    log_scale = 0.0
    S = 0.0
    vals = []
    for _ in range(n_max):
        vals.append(float(phi[i]) * np.exp(log_scale))
        S += vals[-1]
        if S > 2e3 * ref:
            break
        if len(vals) > 10 and vals[-1] < 1e-12 * S:
            break
        m = float(np.max(np.abs(phi)))
        if m > 1e100:
            log_scale += log(m)
            phi = phi / m
        phi = K @ phi
    last = [vals[k + 1] / vals[k] for k in range(max(0, len(vals) - 6), len(vals) - 1)]
    diverged = S > 1e3 * ref and len(last) == 5 and min(last) > 1.0
    converged = (not diverged) and len(vals) > 10 and vals[-1] < 1e-10 * S
    return BlowupReport(kappa=params.kappa, regime=params.regime.value,
                        n_terms=len(vals), s_over_reference=S / ref,
                        last_ratios=tuple(last), diverged=bool(diverged),
                        converged=bool(converged))


# ---------------------------------------------------------------------------
# Continuity diagnostic


def continuity_scan(params: ModelParams,
                    cfg: QuadratureConfig | None = None) -> CheckResult:
    """Warn-only scan of normalized jumps of p~ between adjacent grid cells.

    Jumps are normalized by the local bound p H H; on the nested coarse grid
    (every second node) the maximum jump must be larger than on the fine
    grid, as it is for any continuous function sampled at half the spacing.
    """
    t0 = time.time()
    if params.regime is Regime.SUPERCRITICAL:
        raise DomainError("continuity diagnostics require a finite kernel")
    cfg = cfg or QuadratureConfig()
    y0 = (1.0, 0.0)
    eng = _get_engine(params, 1.0, y0, cfg)
    V, _, _ = eng.fixed_point()
    U = eng._p0[-1] + V[-1]
    delta, alpha = params.delta, params.alpha
    r = eng.r_grid
    hy = float(H_weight(1.0, 1.0, delta, alpha))
    dist = np.maximum(eng.dist_y, 1e-6)
    bound = kernel_t(1.0, dist, params.d, alpha) \
        * H_weight(1.0, r, delta, alpha)[:, None] * hy
    norm = U / bound

    def max_jump(A: np.ndarray) -> float:
        dr = np.abs(np.diff(A, axis=0))
        dth = np.abs(A - np.roll(A, 1, axis=1))
        return float(max(dr.max(), dth.max()))

    fine = max_jump(norm)
    coarse = max_jump(norm[::2, ::2])
    defect = fine / max(coarse, 1e-300)
    return _result("continuity", defect, 1.0, t0, warn_only=True,
                   fine_jump=fine, coarse_jump=coarse)
