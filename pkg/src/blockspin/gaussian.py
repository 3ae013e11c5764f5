"""Gaussian integral identities and their quadrature cross-checks.

Normalization: on a complexified space with bilinear form G the measure is
dmu = det(G) prod_x dRe phi(x) dIm phi(x) / pi, so the identity kernel
integrates to one and int exp(-<phi*, M phi>) dmu = 1/det(M).  Integrals
are evaluated on the conjugate slice phi* = conj(phi); shifting the starred
contour off the slice does not change the value (entire integrand, Gaussian
decay), which is what makes the source formula and the insertion constant
shift-independent.

The quadrature checks are deliberately restricted to one-dimensional spaces
with identity forms and real kernels.  That keeps the integration domain at
two real dimensions per field and lets the background and critical systems
be solved vectorized over whole node grids.
"""

from __future__ import annotations

import numpy as np

from .action import ActionSpec, delta_e
from .errors import BlockspinError, ConvergenceError, QuadratureError
from .kernels import RGData, build_kernels, next_scale_delta
from .linalg import (DEFAULT_COND_LIMIT, FieldVector, Operator, components,
                     gated_solve)
from .solvers import (_critical_base, delta_a_direct, delta_a_formula,
                      delta_phi_plus_series)

__all__ = [
    "gaussian_exact", "gaussian_source_exact", "insertion_constant",
    "prop_d_gaussian_check", "fluctuation_integral", "prop_d_quadrature_check",
]


def _require_positive(space, entries: np.ndarray, what: str) -> float:
    # convergence on the conjugate slice needs Herm(G M) > 0
    h = space.gram @ entries
    h = 0.5 * (h + h.conj().T)
    low = float(np.linalg.eigvalsh(h)[0])
    if low <= 0.0:
        raise BlockspinError(
            f"{what}: hermitian part is not positive definite "
            f"(min eigenvalue {low:.3e}); the Gaussian integral diverges")
    return low


def gaussian_exact(m: Operator, what: str = "quadratic kernel") -> complex:
    """Whole-space integral of exp(-<phi*, M phi>).

    The value is 1/det(M), independent of the bilinear form because the
    measure carries the compensating det(G).  M need not be symmetric or
    hermitian; convergence only needs the hermitian part of G M positive.
    """
    m.domain.require_compatible(m.codomain, "gaussian kernel spaces")
    _require_positive(m.domain, m.entries, what)
    return 1.0 / complex(np.linalg.det(m.entries))


def gaussian_source_exact(m: Operator, j_star, k,
                          cond_limit: float = DEFAULT_COND_LIMIT) -> complex:
    """Integral of exp(-<phi*, M phi> + <j_star, phi> + <phi*, k>).

    Completing the square shifts both contours and leaves
    det(M)^{-1} exp(<j_star, M^{-1} k>).
    """
    base = gaussian_exact(m)
    mk = gated_solve(m.entries, components(k), "gaussian kernel", cond_limit)
    shift = components(j_star) @ m.domain.gram @ mk
    return complex(base * np.exp(shift))


def insertion_constant(data: RGData, shifts: int = 10,
                       rng: np.random.Generator | None = None
                       ) -> tuple[float, float]:
    """Constant produced by inserting the coarse-field delta approximation:

        int dmu_plus exp(-b <theta* - w*, theta - w>) = b**(-dim_plus)

    independent of the shift pair (w*, w).  Returns the constant together
    with the largest relative departure over ``shifts`` random shift pairs,
    which exercises the completed-square cancellation directly.
    """
    sp = data.space_plus
    if rng is None:
        rng = np.random.Generator(np.random.Philox(key=np.array([211, 7], dtype=np.uint64)))
    m = Operator(sp, sp, data.b * np.eye(sp.dim))
    base = gaussian_exact(m).real
    worst = 0.0
    for _ in range(int(shifts)):
        w_star = rng.standard_normal(sp.dim) + 1j * rng.standard_normal(sp.dim)
        w = rng.standard_normal(sp.dim) + 1j * rng.standard_normal(sp.dim)
        val = gaussian_source_exact(m, FieldVector(sp, data.b * w_star),
                                    FieldVector(sp, data.b * w))
        val *= np.exp(-data.b * (w_star @ sp.gram @ w))
        worst = max(worst, abs(val - base) / base)
    return float(base), float(worst)


def prop_d_gaussian_check(data: RGData,
                          cond_limit: float = DEFAULT_COND_LIMIT) -> dict:
    """Determinant form of the one-step Gaussian split:

        det(delta)^{-1} = b**dim_plus * det(delta_check)^{-1} * det(cov)

    Returns lhs, rhs and the relative residual.  The averaging map must
    have full row rank: with a degenerate q the coarse field decouples and
    the change of variables behind the identity has no inverse.
    """
    d_plus = data.space_plus.dim
    rank = int(np.linalg.matrix_rank(data.q.entries))
    if rank < d_plus:
        raise BlockspinError(
            f"averaging map q has row rank {rank} < dim {d_plus}; the "
            "coarse change of variables is degenerate")
    ks = build_kernels(data, cond_limit)
    dcheck = next_scale_delta(data, ks, cond_limit)
    _require_positive(data.space_mid, ks.delta.entries, "fluctuation kernel delta")
    _require_positive(data.space_plus, dcheck.entries, "next-scale delta")
    _require_positive(data.space_mid, ks.cov.entries, "covariance cov")
    lhs = 1.0 / complex(np.linalg.det(ks.delta.entries))
    rhs = (data.b ** d_plus * np.linalg.det(ks.cov.entries)
           / complex(np.linalg.det(dcheck.entries)))
    return {"lhs": lhs, "rhs": complex(rhs),
            "residual": float(abs(lhs - rhs) / abs(lhs))}


# ---------------------------------------------------------------------------
# scalar quadrature machinery (dims (1,1,1), identity forms, real kernels)

def _scalar_setup(spec: ActionSpec) -> tuple[dict, dict]:
    rg = spec.rg
    dims = (rg.space_minus.dim, rg.space_mid.dim, rg.space_plus.dim)
    if dims != (1, 1, 1):
        raise BlockspinError(f"quadrature mode needs dims (1, 1, 1), got {dims}")
    for name, sp in (("space_minus", rg.space_minus), ("space_mid", rg.space_mid),
                     ("space_plus", rg.space_plus)):
        if not np.allclose(sp.gram, np.eye(sp.dim), atol=1e-15):
            raise BlockspinError(f"quadrature mode needs the identity form on {name}")
    names = ("qm", "q", "fq", "d", "qc", "qcm", "s", "cov", "delta")
    raw = {k: complex(spec.mats[k][0, 0]) for k in names}
    for k, v in raw.items():
        if abs(v.imag) > 1e-14:
            raise BlockspinError(
                f"quadrature mode needs real kernels; {k} has imaginary part {v.imag:.3e}")
    sc = {k: float(v.real) for k, v in raw.items()}
    for k in ("fq", "d", "qc"):
        if sc[k] <= 0.0:
            raise BlockspinError(f"quadrature mode needs positive {k}, got {sc[k]:.3e}")
    sc["b"] = rg.b
    pc = {key: complex(np.asarray(t, dtype=complex).reshape(-1)[0])
          for key, t in spec.p.monomials.items()}
    return sc, pc


def _diff_star(c: dict) -> dict:
    return {(a - 1, b): a * v for (a, b), v in c.items() if a}


def _diff_unstar(c: dict) -> dict:
    return {(a, b - 1): b * v for (a, b), v in c.items() if b}


def _poly_val(c: dict, z_star, z):
    total = np.zeros(np.broadcast(z_star, z).shape, dtype=complex)
    for (a, b) in sorted(c):
        total = total + c[(a, b)] * z_star ** a * z ** b
    return total


def _polar_grid(r_inner: float, r_outer: float, n_radial: int,
                n_angular: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and dmu-weights for an annulus in one complex plane.

    Gauss-Legendre radially, uniform angularly (exact for trigonometric
    polynomials); weights carry the rho dRe dIm / pi normalization.
    """
    x, w = np.polynomial.legendre.leggauss(int(n_radial))
    rho = 0.5 * (r_outer - r_inner) * (x + 1.0) + r_inner
    w_rad = 0.5 * (r_outer - r_inner) * w
    ang = 2.0 * np.pi * np.arange(int(n_angular)) / int(n_angular)
    pts = (rho[:, None] * np.exp(1j * ang)[None, :]).reshape(-1)
    wts = ((rho * w_rad)[:, None] * np.full((1, int(n_angular)), 2.0 / int(n_angular))).reshape(-1)
    return pts, wts


def _background_grid(sc: dict, pc: dict, psi_star, psi,
                     tol: float = 1e-12, max_iter: int = 60):
    """Newton on the pair of background equations, vectorized over nodes.

    The system is polynomial in the independent unknowns (phi_star, phi),
    so the complex 2x2 Jacobian is exact and the per-node solve is a
    closed-form Cramer step.
    """
    lin = sc["qm"] ** 2 * sc["fq"] + sc["d"]
    drive = sc["qm"] * sc["fq"]
    g_star = _diff_star(pc)      # d P / d phi*, drives the unstarred equation
    g_un = _diff_unstar(pc)      # d P / d phi, drives the starred equation
    g_ss = _diff_star(g_star)
    g_su = _diff_unstar(g_star)
    g_us = _diff_star(g_un)
    g_uu = _diff_unstar(g_un)
    f_star = drive * psi_star
    f_un = drive * psi
    phi_star = f_star / lin
    phi = f_un / lin
    res = np.inf
    for _ in range(max_iter):
        r_star = lin * phi_star + _poly_val(g_un, phi_star, phi) - f_star
        r_un = lin * phi + _poly_val(g_star, phi_star, phi) - f_un
        res = max(float(np.abs(r_star).max()), float(np.abs(r_un).max()))
        if res <= tol:
            return phi_star, phi
        j11 = lin + _poly_val(g_us, phi_star, phi)
        j12 = _poly_val(g_uu, phi_star, phi)
        j21 = _poly_val(g_ss, phi_star, phi)
        j22 = lin + _poly_val(g_su, phi_star, phi)
        det = j11 * j22 - j12 * j21
        phi_star = phi_star - (j22 * r_star - j12 * r_un) / det
        phi = phi - (j11 * r_un - j21 * r_star) / det
    raise ConvergenceError(
        f"background grid: no convergence after {max_iter} iterations "
        f"(max residual {res:.3e}, tolerance {tol:.3e})")


def _critical_grid(sc: dict, pc: dict, theta_star, theta,
                   tol: float = 1e-12, max_iter: int = 60):
    """Joint Newton for (phi_star, phi, psi_star, psi) on a theta grid:
    the background pair coupled to the critical-field pair, solved batched.
    """
    b = sc["b"]
    lin = sc["qm"] ** 2 * sc["fq"] + sc["d"]
    drive = sc["qm"] * sc["fq"]
    cpl = sc["fq"] * sc["qm"]
    m_crit = b * sc["q"] ** 2 + sc["fq"]
    g_star = _diff_star(pc)
    g_un = _diff_unstar(pc)
    g_ss = _diff_star(g_star)
    g_su = _diff_unstar(g_star)
    g_us = _diff_star(g_un)
    g_uu = _diff_unstar(g_un)
    n = theta.size
    psi_star = b * sc["cov"] * sc["q"] * theta_star
    psi = b * sc["cov"] * sc["q"] * theta
    phi_star = drive * psi_star / lin
    phi = drive * psi / lin
    src_star = b * sc["q"] * theta_star
    src = b * sc["q"] * theta
    jac = np.zeros((n, 4, 4), dtype=complex)
    jac[:, 0, 2] = -drive
    jac[:, 1, 3] = -drive
    jac[:, 2, 0] = -cpl
    jac[:, 2, 2] = m_crit
    jac[:, 3, 1] = -cpl
    jac[:, 3, 3] = m_crit
    res = np.inf
    for _ in range(max_iter):
        r = np.empty((n, 4), dtype=complex)
        r[:, 0] = lin * phi_star + _poly_val(g_un, phi_star, phi) - drive * psi_star
        r[:, 1] = lin * phi + _poly_val(g_star, phi_star, phi) - drive * psi
        r[:, 2] = m_crit * psi_star - src_star - cpl * phi_star
        r[:, 3] = m_crit * psi - src - cpl * phi
        res = float(np.abs(r).max())
        if res <= tol:
            return phi_star, phi, psi_star, psi
        jac[:, 0, 0] = lin + _poly_val(g_us, phi_star, phi)
        jac[:, 0, 1] = _poly_val(g_uu, phi_star, phi)
        jac[:, 1, 0] = _poly_val(g_ss, phi_star, phi)
        jac[:, 1, 1] = lin + _poly_val(g_su, phi_star, phi)
        step = np.linalg.solve(jac, r[:, :, None])[:, :, 0]
        phi_star = phi_star - step[:, 0]
        phi = phi - step[:, 1]
        psi_star = psi_star - step[:, 2]
        psi = psi - step[:, 3]
    raise ConvergenceError(
        f"critical grid: no convergence after {max_iter} iterations "
        f"(max residual {res:.3e}, tolerance {tol:.3e})")


def _coupling_rowsum(b: float, q: float, theta: np.ndarray, u: np.ndarray,
                     w_vals: np.ndarray, chunk: int = 256) -> np.ndarray:
    """sum_u exp(-b |theta_j - q u|^2) w_vals[u], chunked over theta rows."""
    out = np.empty(theta.shape, dtype=complex)
    qu = q * u
    for lo in range(0, theta.size, chunk):
        blk = theta[lo:lo + chunk, None] - qu[None, :]
        out[lo:lo + chunk] = np.exp(-b * np.abs(blk) ** 2) @ w_vals
    return out


def _split_pass(sc: dict, pc: dict, r_mid: float, r_plus: float, n: int,
                sigmas: float, e_cb, tol: float) -> dict:
    b, q, qm, fq, d, qc, qcm = (sc["b"], sc["q"], sc["qm"], sc["fq"],
                                sc["d"], sc["qc"], sc["qcm"])
    u, w_u = _polar_grid(0.0, r_mid, n, n)
    u_star = np.conj(u)
    phs, ph = _background_grid(sc, pc, u_star, u, tol)
    a_mid = ((u_star - qm * phs) * fq * (u - qm * ph)
             + phs * d * ph + _poly_val(pc, phs, ph))
    e_mid = e_cb(u_star, u) if e_cb is not None else 0.0
    w_vals = w_u * np.exp(-a_mid + e_mid)
    lhs = complex(np.sum(w_vals))

    # small field: critical re-centering inside |theta| <= r_plus
    th, w_th = _polar_grid(0.0, r_plus, n, n)
    th_star = np.conj(th)
    cps, cp, pss, ps = _critical_grid(sc, pc, th_star, th, tol)
    p_at_cp = _poly_val(pc, cps, cp)
    a_check = (th_star - qcm * cps) * qc * (th - qcm * cp) + cps * d * cp + p_at_cp
    a_eff = (b * (th_star - q * pss) * (th - q * ps)
             + (pss - qm * cps) * fq * (ps - qm * cp) + cps * d * cp + p_at_cp)
    e_crit = e_cb(pss, ps) if e_cb is not None else np.zeros(th.shape)
    f_vals = np.exp(a_eff - e_crit) * _coupling_rowsum(b, q, th, u, w_vals)
    small = complex(np.sum(w_th * np.exp(-a_check + e_crit) * f_vals))

    # large field: bare coupling over the annulus out to the Gaussian tail
    r_cut = max(abs(q) * r_mid + sigmas / np.sqrt(b), r_plus)
    if r_cut > r_plus * (1.0 + 1e-12):
        ta, w_ta = _polar_grid(r_plus, r_cut, n, n)
        large = complex(np.sum(w_ta * _coupling_rowsum(b, q, ta, u, w_vals)))
    else:
        large = 0.0 + 0.0j
    rhs = b ** 1 * (small + large)
    return {"lhs": lhs, "small_field": small, "large_field": large, "rhs": rhs}


def _rel_diff(a: complex, b: complex) -> float:
    scale = max(abs(a), abs(b), 1e-300)
    return float(abs(a - b) / scale)


def prop_d_quadrature_check(spec: ActionSpec, radii, nodes_per_axis: int = 64,
                            theta_cutoff_sigmas: float = 6.0,
                            tolerance: float = 1e-3, e_callback=None,
                            check_nodes: bool = True,
                            newton_tol: float = 1e-12) -> dict:
    """Both sides of the one-step Gaussian split over finite discs.

    LHS integrates exp(-A + E) at the background over |psi| <= radii[0] on
    the conjugate slice.  RHS is b**dim_plus times the small-field piece
    (next-scale action, with the critically re-centered fluctuation
    integral F spelled out factor by factor) over |theta| <= radii[1],
    plus the large-field remainder over the annulus out to the tail cutoff
    |q| radii[0] + sigmas/sqrt(b).

    The split identity is exact for every radius pair, so all observed
    error is quadrature resolution plus the truncated tail.  A second pass
    at 1.5x the node count guards convergence: disagreement beyond
    tolerance/2 raises QuadratureError.  Returns the finer pass values,
    the relative lhs-rhs difference, and the node-consistency deviations.
    """
    sc, pc = _scalar_setup(spec)
    r_mid, r_plus = float(radii[0]), float(radii[1])
    if r_mid <= 0.0 or r_plus <= 0.0:
        raise BlockspinError(f"radii must be positive, got ({r_mid}, {r_plus})")
    n = int(nodes_per_axis)
    first = _split_pass(sc, pc, r_mid, r_plus, n, theta_cutoff_sigmas,
                        e_callback, newton_tol)
    result = first
    node_dev = None
    if check_nodes:
        n_fine = int(np.ceil(1.5 * n))
        fine = _split_pass(sc, pc, r_mid, r_plus, n_fine, theta_cutoff_sigmas,
                           e_callback, newton_tol)
        node_dev = {"lhs": _rel_diff(first["lhs"], fine["lhs"]),
                    "rhs": _rel_diff(first["rhs"], fine["rhs"])}
        worst = max(node_dev.values())
        if worst > 0.5 * tolerance:
            raise QuadratureError(
                f"grids at {n} and {n_fine} nodes per axis disagree by "
                f"{worst:.3e} (allowed {0.5 * tolerance:.3e}); refine the grid "
                "or loosen the tolerance")
        result = fine
    rel = _rel_diff(result["lhs"], result["rhs"])
    out = dict(result)
    out["relative_difference"] = rel
    out["within_tolerance"] = bool(rel <= tolerance)
    if node_dev is not None:
        out["node_deviation"] = node_dev
    return out


def fluctuation_integral(spec: ActionSpec, theta_star, theta,
                         radius: float | None = None, nodes_per_axis: int = 48,
                         increment: str = "direct", max_degree: int = 6,
                         e_callback=None, newton_tol: float = 1e-13,
                         cond_limit: float = DEFAULT_COND_LIMIT) -> complex:
    """F(theta*, theta) = int exp(-delta_a + delta_e) dmu over the domain of
    fluctuations around the critical point.

    radius None is the exact whole-space mode, available only for P = 0:
    the increment is the pure quadratic <dpsi*, cov^{-1} dpsi> and the
    integral equals det(cov).  With a radius the integral runs on the
    conjugate slice psi = u, psi* = conj(u) of the disc |u| <= radius;
    ``increment`` picks the evaluator, "direct" (re-solve the background
    at every node) or "formula" (line-integral identity on the truncated
    increment series of degree ``max_degree``).
    """
    if radius is None:
        if not spec.p.is_zero:
            raise BlockspinError(
                "whole-space mode is exact only for P = 0; pass a radius to "
                "integrate the interacting increment")
        m = spec.mats
        quad = m["delta"] + spec.rg.b * m["qs"] @ m["q"]
        _require_positive(spec.rg.space_mid, quad, "fluctuation form cov^{-1}")
        return complex(np.linalg.det(spec.kernels.cov.entries))
    if increment not in ("direct", "formula"):
        raise BlockspinError(f"unknown increment evaluator {increment!r}")
    _scalar_setup(spec)
    ts = components(theta_star).astype(complex)
    tu = components(theta).astype(complex)
    if not np.allclose(ts, np.conj(tu), atol=1e-13):
        raise BlockspinError("quadrature runs on the conjugate slice; "
                             "theta_star must be the conjugate of theta")
    base = _critical_base(spec, ts, tu, newton_tol, cond_limit)
    psi_star_cr, psi_cr = base[0], base[1]
    series = None
    if increment == "formula":
        series = delta_phi_plus_series(spec, ts, tu, max_degree,
                                       tol=newton_tol, cond_limit=cond_limit,
                                       _base=base)
    u, w_u = _polar_grid(0.0, float(radius), int(nodes_per_axis), int(nodes_per_axis))
    terms = np.empty(u.size, dtype=complex)
    for i in range(u.size):
        dpsi = np.array([u[i]]) - psi_cr
        dpsi_star = np.array([np.conj(u[i])]) - psi_star_cr
        if increment == "direct":
            da = delta_a_direct(spec, ts, tu, dpsi_star, dpsi, tol=newton_tol,
                                cond_limit=cond_limit, _base=base)
        else:
            da = delta_a_formula(spec, ts, tu, dpsi_star, dpsi, max_degree,
                                 increment_plus=series, tol=newton_tol,
                                 cond_limit=cond_limit, _base=base)
        de = (delta_e(e_callback, psi_star_cr, psi_cr, dpsi_star, dpsi)
              if e_callback is not None else 0.0)
        terms[i] = w_u[i] * np.exp(-da + de)
    return complex(np.sum(terms))
