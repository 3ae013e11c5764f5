"""Field solvers: formal power series and Newton iterations.

Two solution families appear throughout.  The background pair solves the
fine-space equations

    phi_(*) = s^(*) qm* fq psi_(*) - s^(*) P'_(*)(phi_star, phi)

for given middle sources, and the critical pair solves

    (b q*q + fq) psi_(*) = b q* theta_(*) + fq qm phi_(*)bg(psi_star, psi)

for given coarse sources.  The next-scale pair solves the background-type
equation one scale up (s -> scheck, qm -> qcm, fq -> qcheck).  All three
are solved jointly over the starred/unstarred pair, one total degree at a
time; interactions with quadratic monomials couple the pair at equal
degree, which shows up as a 2x2 block solve below.
"""

from __future__ import annotations

import numpy as np

from . import tensorpoly as tp
from .action import ActionSpec, effective_action, grad_base_action
from .errors import ConvergenceError
from .linalg import (
    DEFAULT_COND_LIMIT,
    FieldVector,
    components,
    gated_solve,
    pairing,
)
from .series import FormalSeries, SeriesPair, compose_pair, series_difference_norms


# ---------------------------------------------------------------------------
# formal power series solvers


def _paired_block_solve(block: np.ndarray, k_star: np.ndarray, k_unstar: np.ndarray,
                        assumption: str, cond_limit: float):
    """Solve the 2x2 block system coupling a starred/unstarred tensor pair.

    The tensors share their trailing shape; the block matrix acts on the
    stacked output axis.
    """
    dim = k_star.shape[0]
    rest = k_star.shape[1:]
    rhs = np.concatenate([k_star.reshape(dim, -1), k_unstar.reshape(dim, -1)], axis=0)
    sol = gated_solve(block, rhs, assumption, cond_limit)
    return sol[:dim].reshape((dim,) + rest), sol[dim:].reshape((dim,) + rest)


def _linear_blocks(grad_map: dict, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Degree-one part of a gradient coefficient map, as two matrices."""
    a_star = grad_map.get((1, 0), np.zeros((dim, dim), dtype=complex))
    a_unstar = grad_map.get((0, 1), np.zeros((dim, dim), dtype=complex))
    return np.asarray(a_star, dtype=complex), np.asarray(a_unstar, dtype=complex)


def _solve_background_form(spec: ActionSpec, green_star: np.ndarray, green: np.ndarray,
                           drive_star: np.ndarray, drive: np.ndarray, input_space,
                           max_order: int, what: str, cond_limit: float,
                           g_unstar_map: dict | None = None,
                           g_star_map: dict | None = None) -> SeriesPair:
    """Shared solver for the background and next-scale fixed-point form.

    The interaction enters through its two gradient coefficient maps; the
    starred equation is driven by the unstarred-slot gradient and vice
    versa.  Custom maps (with linear parts) cover the re-centered equation
    for increments around a solved point.
    """
    dm = spec.rg.space_minus.dim
    if g_unstar_map is None:
        g_unstar_map = spec.p.grad_unstar_coeffs()
    if g_star_map is None:
        g_star_map = spec.p.grad_star_coeffs()
    a11, a12 = _linear_blocks(g_unstar_map, dm)
    a21, a22 = _linear_blocks(g_star_map, dm)
    block = np.block([
        [np.eye(dm) + green_star @ a11, green_star @ a12],
        [green @ a21, np.eye(dm) + green @ a22],
    ])
    assumption = f"1 + {what} (degree-two interaction coupling)"
    high_unstar = {k: v for k, v in sorted(g_unstar_map.items()) if k[0] + k[1] >= 2}
    high_star = {k: v for k, v in sorted(g_star_map.items()) if k[0] + k[1] >= 2}

    coeffs_star: dict = {}
    coeffs_unstar: dict = {}
    for n in range(1, max_order + 1):
        rhs_star: dict = {}
        rhs_unstar: dict = {}
        if n == 1:
            rhs_star[(1, 0)] = drive_star
            rhs_unstar[(0, 1)] = drive
        if high_unstar:
            comp = tp.compose(high_unstar, coeffs_star, coeffs_unstar, n)
            for key, t in sorted(comp.items()):
                if key[0] + key[1] == n:
                    tp.add_into(rhs_star, key,
                                -np.tensordot(green_star, t, axes=([1], [0])))
        if high_star:
            comp = tp.compose(high_star, coeffs_star, coeffs_unstar, n)
            for key, t in sorted(comp.items()):
                if key[0] + key[1] == n:
                    tp.add_into(rhs_unstar, key,
                                -np.tensordot(green, t, axes=([1], [0])))
        in_dim = input_space.dim
        for key in sorted(set(rhs_star) | set(rhs_unstar)):
            shape = (dm,) + (in_dim,) * key[0] + (in_dim,) * key[1]
            ks = rhs_star.get(key, np.zeros(shape, dtype=complex))
            ku = rhs_unstar.get(key, np.zeros(shape, dtype=complex))
            t_star, t_unstar = _paired_block_solve(block, ks, ku, assumption, cond_limit)
            coeffs_star[key] = t_star
            coeffs_unstar[key] = t_unstar
    sm = spec.rg.space_minus
    return SeriesPair(FormalSeries(input_space, sm, max_order, coeffs_star),
                      FormalSeries(input_space, sm, max_order, coeffs_unstar))


def fps_background(spec: ActionSpec, max_order: int = 4,
                   cond_limit: float = DEFAULT_COND_LIMIT) -> SeriesPair:
    """Background pair as a series in the middle sources (psi_star, psi)."""
    m = spec.mats
    return _solve_background_form(
        spec, m["s_star"], m["s"],
        m["s_star"] @ m["qms_fq"], m["s"] @ m["qms_fq"],
        spec.rg.space_mid, max_order, "s^(*) P'", cond_limit)


def fps_nextscale(spec: ActionSpec, max_order: int = 4,
                  cond_limit: float = DEFAULT_COND_LIMIT) -> SeriesPair:
    """Next-scale background pair as a series in the coarse sources."""
    m = spec.mats
    # qcheck is form-symmetric, so the starred drive uses the same matrix
    drive_star = m["scheck_star"] @ m["qcms"] @ m["qc"]
    drive = m["scheck"] @ m["qcms"] @ m["qc"]
    return _solve_background_form(
        spec, m["scheck_star"], m["scheck"], drive_star, drive,
        spec.rg.space_plus, max_order, "scheck^(*) P'", cond_limit)


def fps_critical(spec: ActionSpec, background: SeriesPair | None = None,
                 max_order: int = 4,
                 cond_limit: float = DEFAULT_COND_LIMIT) -> SeriesPair:
    """Critical middle pair as a series in the coarse sources (theta_star, theta)."""
    if background is None:
        background = fps_background(spec, max_order, cond_limit)
    m = spec.mats
    dim = spec.rg.space_mid.dim
    dp = spec.rg.space_plus.dim
    fq_qm = m["fq_qm"]
    x11 = background.starred.coefficient(1, 0)
    x12 = background.starred.coefficient(0, 1)
    x21 = background.unstarred.coefficient(1, 0)
    x22 = background.unstarred.coefficient(0, 1)
    lhs = m["crit_lhs"]
    block = np.block([
        [lhs - fq_qm @ x11, -fq_qm @ x12],
        [-fq_qm @ x21, lhs - fq_qm @ x22],
    ])
    assumption = "b q*q + fq - fq qm L (linearized critical system)"
    drive = spec.rg.b * m["qs"]

    bg_high_star = {k: v for k, v in sorted(background.starred.coeffs.items())
                    if k[0] + k[1] >= 2}
    bg_high_unstar = {k: v for k, v in sorted(background.unstarred.coeffs.items())
                      if k[0] + k[1] >= 2}
    coeffs_star: dict = {}
    coeffs_unstar: dict = {}
    for n in range(1, max_order + 1):
        rhs_star: dict = {}
        rhs_unstar: dict = {}
        if n == 1:
            rhs_star[(1, 0)] = drive.astype(complex)
            rhs_unstar[(0, 1)] = drive.astype(complex)
        if bg_high_star:
            comp = tp.compose(bg_high_star, coeffs_star, coeffs_unstar, n)
            for key, t in sorted(comp.items()):
                if key[0] + key[1] == n:
                    tp.add_into(rhs_star, key, np.tensordot(fq_qm, t, axes=([1], [0])))
        if bg_high_unstar:
            comp = tp.compose(bg_high_unstar, coeffs_star, coeffs_unstar, n)
            for key, t in sorted(comp.items()):
                if key[0] + key[1] == n:
                    tp.add_into(rhs_unstar, key, np.tensordot(fq_qm, t, axes=([1], [0])))
        for key in sorted(set(rhs_star) | set(rhs_unstar)):
            shape = (dim,) + (dp,) * key[0] + (dp,) * key[1]
            ks = rhs_star.get(key, np.zeros(shape, dtype=complex))
            ku = rhs_unstar.get(key, np.zeros(shape, dtype=complex))
            t_star, t_unstar = _paired_block_solve(block, ks, ku, assumption, cond_limit)
            coeffs_star[key] = t_star
            coeffs_unstar[key] = t_unstar
    smid = spec.rg.space_mid
    sp = spec.rg.space_plus
    return SeriesPair(FormalSeries(sp, smid, max_order, coeffs_star),
                      FormalSeries(sp, smid, max_order, coeffs_unstar))


def compose_cp(background: SeriesPair, critical: SeriesPair, max_order: int = 4) -> SeriesPair:
    """Background series evaluated on the critical series: the composed
    next-scale background in the coarse sources."""
    return compose_pair(background, critical, max_order)


def verify_composition(spec: ActionSpec, max_order: int = 4,
                       cond_limit: float = DEFAULT_COND_LIMIT) -> dict:
    """Coefficientwise comparison of the composed and directly solved
    next-scale background series."""
    bg = fps_background(spec, max_order, cond_limit)
    cr = fps_critical(spec, bg, max_order, cond_limit)
    cp = compose_cp(bg, cr, max_order)
    ns = fps_nextscale(spec, max_order, cond_limit)
    res_star = series_difference_norms(cp.starred, ns.starred)
    res_unstar = series_difference_norms(cp.unstarred, ns.unstarred)
    worst = max([*res_star.values(), *res_unstar.values()], default=0.0)
    return {
        "max_residual": worst,
        "starred": {f"({a},{b})": v for (a, b), v in sorted(res_star.items())},
        "unstarred": {f"({a},{b})": v for (a, b), v in sorted(res_unstar.items())},
    }


def verify_crit_representation(spec: ActionSpec, max_order: int = 4,
                               cond_limit: float = DEFAULT_COND_LIMIT) -> dict:
    """Check that the critical series satisfies its closed representation:
    psi_(*)cr = (b q*q + fq)^{-1} (b q* theta_(*) + fq qm phicheck_(*)cp),
    and that its degree-one block is the covariance form b cov^(*) q*."""
    bg = fps_background(spec, max_order, cond_limit)
    cr = fps_critical(spec, bg, max_order, cond_limit)
    cp = compose_cp(bg, cr, max_order)
    m = spec.mats
    lhs_inv = gated_solve(m["crit_lhs"], np.eye(spec.rg.space_mid.dim),
                          "b q*q + fq", cond_limit)
    drive = spec.rg.b * lhs_inv @ m["qs"]
    rhs_star = tp.apply_matrix(lhs_inv @ m["fq_qm"], cp.starred.coeffs)
    rhs_unstar = tp.apply_matrix(lhs_inv @ m["fq_qm"], cp.unstarred.coeffs)
    tp.add_into(rhs_star, (1, 0), drive.astype(complex))
    tp.add_into(rhs_unstar, (0, 1), drive.astype(complex))
    sp, smid = spec.rg.space_plus, spec.rg.space_mid
    res_star = series_difference_norms(
        cr.starred, FormalSeries(sp, smid, max_order, rhs_star))
    res_unstar = series_difference_norms(
        cr.unstarred, FormalSeries(sp, smid, max_order, rhs_unstar))
    lead_star = cr.starred.coefficient(1, 0) - spec.rg.b * m["cov_star"] @ m["qs"]
    lead_unstar = cr.unstarred.coefficient(0, 1) - spec.rg.b * m["cov"] @ m["qs"]
    worst = max([*res_star.values(), *res_unstar.values()], default=0.0)
    return {
        "max_residual": worst,
        "leading_vs_covariance": max(
            float(np.linalg.norm(lead_star, 2)), float(np.linalg.norm(lead_unstar, 2))),
        "starred": {f"({a},{b})": v for (a, b), v in sorted(res_star.items())},
        "unstarred": {f"({a},{b})": v for (a, b), v in sorted(res_unstar.items())},
    }


# ---------------------------------------------------------------------------
# Newton solvers


def background_residual(spec: ActionSpec, phi_star, phi, psi_star, psi
                        ) -> tuple[FieldVector, FieldVector]:
    """Residual pair of the fine-space stationarity equations."""
    m = spec.mats
    sm = spec.rg.space_minus
    fs, fu = components(phi_star), components(phi)
    core = m["qms_fq"] @ m["qm"]
    g_star, g_unstar = grad_base_action(spec, phi_star, phi)
    r_star = core @ fs + g_unstar.components - m["qms_fq"] @ components(psi_star)
    r_unstar = core @ fu + g_star.components - m["qms_fq"] @ components(psi)
    return FieldVector(sm, r_star), FieldVector(sm, r_unstar)


def _background_jacobian(spec: ActionSpec, fs: np.ndarray, fu: np.ndarray) -> np.ndarray:
    m = spec.mats
    dm = spec.rg.space_minus.dim
    core = m["qms_fq"] @ m["qm"]
    ju_s, ju_u = tp.jacobians(spec.p.grad_unstar_coeffs(), fs, fu, dm, dm)
    js_s, js_u = tp.jacobians(spec.p.grad_star_coeffs(), fs, fu, dm, dm)
    return np.block([
        [core + m["dstar"] + ju_s, ju_u],
        [js_s, core + m["d"] + js_u],
    ])


def _damped_newton(residual, jacobian, z0: np.ndarray, tol: float, max_iter: int,
                   what: str, cond_limit: float) -> np.ndarray:
    """Newton iteration with step halving; residual is measured sup-norm."""
    z = z0.copy()
    r = residual(z)
    best = float(np.abs(r).max(initial=0.0))
    for _ in range(max_iter):
        if best <= tol:
            return z
        step = gated_solve(jacobian(z), -r, f"{what} jacobian", cond_limit)
        scale = 1.0
        for _ in range(20):
            z_try = z + scale * step
            r_try = residual(z_try)
            n_try = float(np.abs(r_try).max(initial=0.0))
            if n_try < best:
                z, r, best = z_try, r_try, n_try
                break
            scale *= 0.5
        else:
            raise ConvergenceError(
                f"{what}: residual stalled at {best:.3e} (tolerance {tol:.3e})")
    if best <= tol:
        return z
    raise ConvergenceError(
        f"{what}: no convergence after {max_iter} iterations "
        f"(residual {best:.3e}, tolerance {tol:.3e})")


def newton_background(spec: ActionSpec, psi_star, psi, tol: float = 1e-12,
                      max_iter: int = 50, cond_limit: float = DEFAULT_COND_LIMIT
                      ) -> tuple[FieldVector, FieldVector]:
    """Solve the background equations at one middle-source point.

    Starts from the linear-response solution, which is already exact for a
    vanishing interaction.
    """
    m = spec.mats
    dm = spec.rg.space_minus.dim
    sm = spec.rg.space_minus
    ps, pu = components(psi_star), components(psi)
    z0 = np.concatenate([m["s_star"] @ m["qms_fq"] @ ps, m["s"] @ m["qms_fq"] @ pu])

    def residual(z):
        r_star, r_unstar = background_residual(spec, z[:dm], z[dm:], ps, pu)
        return np.concatenate([r_star.components, r_unstar.components])

    def jacobian(z):
        return _background_jacobian(spec, z[:dm], z[dm:])

    z = _damped_newton(residual, jacobian, z0, tol, max_iter,
                       "background solve", cond_limit)
    return FieldVector(sm, z[:dm]), FieldVector(sm, z[dm:])


def critical_residual(spec: ActionSpec, psi_star, psi, theta_star, theta,
                      tol: float = 1e-13, cond_limit: float = DEFAULT_COND_LIMIT
                      ) -> tuple[FieldVector, FieldVector]:
    """Residual of the critical equations; solves the inner background."""
    m = spec.mats
    smid = spec.rg.space_mid
    b = spec.rg.b
    ps, pu = components(psi_star), components(psi)
    phi_star, phi = newton_background(spec, ps, pu, tol=tol, cond_limit=cond_limit)
    r_star = (m["crit_lhs"] @ ps - b * m["qs"] @ components(theta_star)
              - m["fq_qm"] @ phi_star.components)
    r_unstar = (m["crit_lhs"] @ pu - b * m["qs"] @ components(theta)
                - m["fq_qm"] @ phi.components)
    return FieldVector(smid, r_star), FieldVector(smid, r_unstar)


def newton_critical(spec: ActionSpec, theta_star, theta, tol: float = 1e-12,
                    max_iter: int = 50, cond_limit: float = DEFAULT_COND_LIMIT
                    ) -> tuple[FieldVector, FieldVector]:
    """Solve the critical equations at one coarse-source point.

    The inner background problem is re-solved at every iterate; its
    derivative enters the outer jacobian through the implicit function
    theorem.
    """
    m = spec.mats
    d = spec.rg.space_mid.dim
    dm = spec.rg.space_minus.dim
    smid = spec.rg.space_mid
    b = spec.rg.b
    ts, tu = components(theta_star), components(theta)
    inner_tol = min(tol * 1e-1, 1e-13)
    z0 = np.concatenate([b * m["cov_star"] @ m["qs"] @ ts, b * m["cov"] @ m["qs"] @ tu])

    def residual(z):
        r_star, r_unstar = critical_residual(spec, z[:d], z[d:], ts, tu,
                                             tol=inner_tol, cond_limit=cond_limit)
        return np.concatenate([r_star.components, r_unstar.components])

    def jacobian(z):
        phi_star, phi = newton_background(spec, z[:d], z[d:], tol=inner_tol,
                                          cond_limit=cond_limit)
        j_bg = _background_jacobian(spec, phi_star.components, phi.components)
        src = np.zeros((2 * dm, 2 * d), dtype=complex)
        src[:dm, :d] = m["qms_fq"]
        src[dm:, d:] = m["qms_fq"]
        dphi_dpsi = gated_solve(j_bg, src, "background jacobian", cond_limit)
        jac = np.zeros((2 * d, 2 * d), dtype=complex)
        jac[:d, :d] = m["crit_lhs"]
        jac[d:, d:] = m["crit_lhs"]
        jac[:d, :] -= m["fq_qm"] @ dphi_dpsi[:dm, :]
        jac[d:, :] -= m["fq_qm"] @ dphi_dpsi[dm:, :]
        return jac

    z = _damped_newton(residual, jacobian, z0, tol, max_iter,
                       "critical solve", cond_limit)
    return FieldVector(smid, z[:d]), FieldVector(smid, z[d:])


# ---------------------------------------------------------------------------
# increment fields and the action increment


def delta_phi_variants(spec: ActionSpec, theta_star, theta, dpsi_star, dpsi,
                       tol: float = 1e-13, cond_limit: float = DEFAULT_COND_LIMIT,
                       _base: tuple | None = None):
    """The two increment fields induced by a middle-field fluctuation.

    Returns (d_bg_star, d_bg, d_plus_star, d_plus): the raw background
    increments between the shifted and critical points, and the same with
    the linear response to the fluctuation removed.
    """
    if _base is None:
        _base = _critical_base(spec, theta_star, theta, tol, cond_limit)
    psi_star_cr, psi_cr, phi_star_base, phi_base = _base
    m = spec.mats
    sm = spec.rg.space_minus
    shift_star, shift = newton_background(
        spec, psi_star_cr + components(dpsi_star), psi_cr + components(dpsi),
        tol=tol, cond_limit=cond_limit)
    d_bg_star = FieldVector(sm, shift_star.components - phi_star_base)
    d_bg = FieldVector(sm, shift.components - phi_base)
    lin_star = m["s_star"] @ m["qms_fq"] @ components(dpsi_star)
    lin = m["s"] @ m["qms_fq"] @ components(dpsi)
    d_plus_star = FieldVector(sm, d_bg_star.components - lin_star)
    d_plus = FieldVector(sm, d_bg.components - lin)
    return d_bg_star, d_bg, d_plus_star, d_plus


def _critical_base(spec, theta_star, theta, tol, cond_limit):
    psi_star_cr, psi_cr = newton_critical(spec, theta_star, theta,
                                          tol=tol, cond_limit=cond_limit)
    phi_star_base, phi_base = newton_background(spec, psi_star_cr, psi_cr,
                                                tol=tol, cond_limit=cond_limit)
    return (psi_star_cr.components, psi_cr.components,
            phi_star_base.components, phi_base.components)


def delta_a_direct(spec: ActionSpec, theta_star, theta, dpsi_star, dpsi,
                   tol: float = 1e-13, cond_limit: float = DEFAULT_COND_LIMIT,
                   _base: tuple | None = None) -> complex:
    """Action increment by direct evaluation at shifted and critical fields."""
    if _base is None:
        _base = _critical_base(spec, theta_star, theta, tol, cond_limit)
    psi_star_cr, psi_cr, phi_star_base, phi_base = _base
    ps = psi_star_cr + components(dpsi_star)
    pu = psi_cr + components(dpsi)
    phi_star_shift, phi_shift = newton_background(spec, ps, pu, tol=tol,
                                                  cond_limit=cond_limit)
    shifted = effective_action(spec, theta_star, theta, ps, pu,
                               phi_star_shift, phi_shift)
    base = effective_action(spec, theta_star, theta, psi_star_cr, psi_cr,
                            phi_star_base, phi_base)
    return shifted - base


def delta_phi_plus_series(spec: ActionSpec, theta_star, theta, max_degree: int = 4,
                          tol: float = 1e-13, cond_limit: float = DEFAULT_COND_LIMIT,
                          _base: tuple | None = None) -> SeriesPair:
    """Truncated series of the nonlinear background increment around the
    critical point.

    Re-centering the background equation at the critical base turns the
    interaction gradients into polynomials in (dpsi_star, dpsi) whose
    coefficients are trailing contractions against the base fields; the
    same per-degree recursion then applies, and subtracting the linear
    response s^(*) qm* fq dpsi_(*) leaves the increment the line-integral
    formula needs.
    """
    if _base is None:
        _base = _critical_base(spec, theta_star, theta, tol, cond_limit)
    _, _, phi_star_base, phi_base = _base
    m = spec.mats
    gu = tp.shift_map(spec.p.grad_unstar_coeffs(), phi_star_base, phi_base)
    gs = tp.shift_map(spec.p.grad_star_coeffs(), phi_star_base, phi_base)
    gu.pop((0, 0), None)
    gs.pop((0, 0), None)
    pair = _solve_background_form(
        spec, m["s_star"], m["s"], m["s_star"] @ m["qms_fq"], m["s"] @ m["qms_fq"],
        spec.rg.space_mid, max_degree, "s^(*) (re-centered interaction)",
        cond_limit, g_unstar_map=gu, g_star_map=gs)
    coeffs_star = dict(pair.starred.coeffs)
    coeffs_unstar = dict(pair.unstarred.coeffs)
    lin_star = (m["s_star"] @ m["qms_fq"]).astype(complex)
    lin = (m["s"] @ m["qms_fq"]).astype(complex)
    tp.add_into(coeffs_star, (1, 0), -lin_star)
    tp.add_into(coeffs_unstar, (0, 1), -lin)
    sm = spec.rg.space_minus
    smid = spec.rg.space_mid
    return SeriesPair(FormalSeries(smid, sm, max_degree, coeffs_star),
                      FormalSeries(smid, sm, max_degree, coeffs_unstar))


def delta_a_formula(spec: ActionSpec, theta_star, theta, dpsi_star, dpsi,
                    max_degree: int = 4, nodes: int | None = None,
                    increment_plus=None, tol: float = 1e-13,
                    cond_limit: float = DEFAULT_COND_LIMIT,
                    _base: tuple | None = None) -> complex:
    """Action increment through the quadratic-plus-line-integral identity:

        delta_a = <dpsi_star, (delta + b q*q) dpsi>
                  - int_0^1 <dpsi_star, fq qm d_plus(t dpsi_star, t dpsi)> dt
                  - int_0^1 <fq qm d_plus_star(t dpsi_star, t dpsi), dpsi> dt

    The increment d_plus is evaluated from its degree-``max_degree`` series
    around the critical point, so the integrand is a polynomial in t and
    ceil((max_degree+1)/2) Gauss-Legendre nodes integrate it exactly; the
    only approximation left is the series truncation.  ``increment_plus``
    overrides the evaluator: a SeriesPair or a callable
    (dpsi_star, dpsi) -> (d_plus_star, d_plus).
    """
    m = spec.mats
    smid = spec.rg.space_mid
    ds = components(dpsi_star)
    du = components(dpsi)
    quad_form = m["delta"] + spec.rg.b * m["qs"] @ m["q"]
    value = pairing(FieldVector(smid, ds), FieldVector(smid, quad_form @ du))
    if spec.p.is_zero and increment_plus is None:
        return complex(value)

    if increment_plus is None:
        increment_plus = delta_phi_plus_series(spec, theta_star, theta, max_degree,
                                               tol=tol, cond_limit=cond_limit,
                                               _base=_base)
    if isinstance(increment_plus, SeriesPair):
        series = increment_plus

        def increment_plus(ts, tu):
            return series.evaluate(ts, tu)

    if nodes is None:
        nodes = max(1, (max_degree + 2) // 2)
    x, w = np.polynomial.legendre.leggauss(nodes)
    t_nodes = 0.5 * (x + 1.0)
    weights = 0.5 * w
    correction = 0.0 + 0.0j
    for t, wt in zip(t_nodes, weights):
        d_plus_star, d_plus = increment_plus(t * ds, t * du)
        correction += wt * (ds @ smid.gram @ (m["fq_qm"] @ components(d_plus)))
        correction += wt * ((m["fq_qm"] @ components(d_plus_star)) @ smid.gram @ du)
    return complex(value - correction)


# ---------------------------------------------------------------------------
# series residual checks against the defining equations


def _fixed_point_residuals(green_star, green, drive_star, drive,
                           g_unstar_map, g_star_map, pair: SeriesPair) -> dict:
    n = pair.starred.max_order
    res_star = {k: v.copy() for k, v in sorted(pair.starred.coeffs.items())}
    res_unstar = {k: v.copy() for k, v in sorted(pair.unstarred.coeffs.items())}
    if g_unstar_map:
        comp = tp.compose(g_unstar_map, pair.starred.coeffs, pair.unstarred.coeffs, n)
        for key, t in sorted(comp.items()):
            tp.add_into(res_star, key, np.tensordot(green_star, t, axes=([1], [0])))
    if g_star_map:
        comp = tp.compose(g_star_map, pair.starred.coeffs, pair.unstarred.coeffs, n)
        for key, t in sorted(comp.items()):
            tp.add_into(res_unstar, key, np.tensordot(green, t, axes=([1], [0])))
    tp.add_into(res_star, (1, 0), -drive_star.astype(complex))
    tp.add_into(res_unstar, (0, 1), -drive.astype(complex))
    out = {}
    for label, res in (("starred", res_star), ("unstarred", res_unstar)):
        for key, t in sorted(res.items()):
            out[f"{label} ({key[0]},{key[1]})"] = float(np.linalg.norm(t.reshape(-1)))
    return out


def background_series_residuals(spec: ActionSpec, pair: SeriesPair) -> dict:
    """Per-bidegree norms of the fine-space fixed-point equation residual."""
    m = spec.mats
    return _fixed_point_residuals(
        m["s_star"], m["s"], m["s_star"] @ m["qms_fq"], m["s"] @ m["qms_fq"],
        spec.p.grad_unstar_coeffs(), spec.p.grad_star_coeffs(), pair)


def nextscale_series_residuals(spec: ActionSpec, pair: SeriesPair) -> dict:
    """Per-bidegree norms of the coarse-space fixed-point equation residual."""
    m = spec.mats
    drive = m["qcms"] @ m["qc"]
    return _fixed_point_residuals(
        m["scheck_star"], m["scheck"], m["scheck_star"] @ drive, m["scheck"] @ drive,
        spec.p.grad_unstar_coeffs(), spec.p.grad_star_coeffs(), pair)


def critical_series_residuals(spec: ActionSpec, background: SeriesPair,
                              critical: SeriesPair) -> dict:
    """Per-bidegree norms of the stationarity system for the middle pair,
    with the fine pair substituted."""
    m = spec.mats
    n = critical.starred.max_order
    res_star = tp.apply_matrix(m["crit_lhs"], critical.starred.coeffs)
    res_unstar = tp.apply_matrix(m["crit_lhs"], critical.unstarred.coeffs)
    comp_star = tp.compose(background.starred.coeffs,
                           critical.starred.coeffs, critical.unstarred.coeffs, n)
    comp_unstar = tp.compose(background.unstarred.coeffs,
                             critical.starred.coeffs, critical.unstarred.coeffs, n)
    for key, t in sorted(comp_star.items()):
        tp.add_into(res_star, key, -np.tensordot(m["fq_qm"], t, axes=([1], [0])))
    for key, t in sorted(comp_unstar.items()):
        tp.add_into(res_unstar, key, -np.tensordot(m["fq_qm"], t, axes=([1], [0])))
    drive = (spec.rg.b * m["qs"]).astype(complex)
    tp.add_into(res_star, (1, 0), -drive)
    tp.add_into(res_unstar, (0, 1), -drive)
    out = {}
    for label, res in (("starred", res_star), ("unstarred", res_unstar)):
        for key, t in sorted(res.items()):
            out[f"{label} ({key[0]},{key[1]})"] = float(np.linalg.norm(t.reshape(-1)))
    return out
