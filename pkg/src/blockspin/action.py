"""Actions of one coarse-graining step, their gradients, and the
preparation identity.

The base action on the fine space is

    base(phi_star, phi) = <phi_star, d phi> + P(phi_star, phi)

and the three composite actions stack constraint terms on top of it:

    full  = <psi_star - qm phi_star, fq (psi - qm phi)> + base
    eff   = b <theta_star - q psi_star, theta - q psi> + full
    next  = <theta_star - qcm phi_star, qcheck (theta - qcm phi)> + base

Gradients are always taken with respect to the bilinear pairing of the
relevant space, so every gradient is again a field vector there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensorpoly as tp
from .errors import BlockspinError
from .kernels import KernelSet, RGData, build_kernels, starred_kernels
from .linalg import (
    DEFAULT_COND_LIMIT,
    FieldVector,
    Operator,
    adjoint,
    components,
    gated_solve,
    pairing,
)
from .poly import PolynomialP, eval_p_and_grads


@dataclass(frozen=True, eq=False)
class ActionSpec:
    """RG data plus the interaction polynomial plus the derived kernels.

    The precomputed matrix table keeps the hot paths free of repeated
    adjoint computations; everything in it follows from rg and kernels.
    """

    rg: RGData
    p: PolynomialP
    kernels: KernelSet
    mats: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.p.space.require_compatible(self.rg.space_minus, "interaction polynomial")
        if not self.mats:
            object.__setattr__(self, "mats", _matrix_table(self.rg, self.kernels))

    @property
    def spaces(self):
        return self.rg.space_minus, self.rg.space_mid, self.rg.space_plus


def make_action_spec(rg: RGData, p: PolynomialP | None = None,
                     cond_limit: float = DEFAULT_COND_LIMIT) -> ActionSpec:
    if p is None:
        p = PolynomialP.zero(rg.space_minus)
    return ActionSpec(rg, p, build_kernels(rg, cond_limit))


def _matrix_table(rg: RGData, ks: KernelSet) -> dict:
    qm = rg.q_minus.entries
    q = rg.q.entries
    qms = adjoint(rg.q_minus).entries
    qs = adjoint(rg.q).entries
    qcm = q @ qm
    qcms = adjoint(rg.q @ rg.q_minus).entries
    dstar = adjoint(rg.d).entries
    s_star, scheck_star, delta_star, cov_star = starred_kernels(rg)
    qc = ks.qcheck.entries
    return {
        "qm": qm, "q": q, "qms": qms, "qs": qs, "qcm": qcm, "qcms": qcms,
        "fq": rg.fq.entries, "d": rg.d.entries, "dstar": dstar,
        "qc": qc, "qc_star": adjoint(ks.qcheck).entries,
        "s": ks.s.entries, "s_star": s_star.entries,
        "scheck": ks.scheck.entries, "scheck_star": scheck_star.entries,
        "delta": ks.delta.entries, "delta_star": delta_star.entries,
        "cov": ks.cov.entries, "cov_star": cov_star.entries,
        "crit_lhs": rg.b * qs @ q + rg.fq.entries,
        "fq_qm": rg.fq.entries @ qm,
        "qms_fq": qms @ rg.fq.entries,
    }


def base_action(spec: ActionSpec, phi_star, phi) -> complex:
    rg = spec.rg
    val = pairing(FieldVector(rg.space_minus, components(phi_star)),
                  rg.d.apply(phi))
    return val + spec.p.value(phi_star, phi)


def full_action(spec: ActionSpec, psi_star, psi, phi_star, phi) -> complex:
    rg = spec.rg
    r_star = components(psi_star) - spec.mats["qm"] @ components(phi_star)
    r = components(psi) - spec.mats["qm"] @ components(phi)
    fluct = r_star @ rg.space_mid.gram @ (spec.mats["fq"] @ r)
    return complex(fluct) + base_action(spec, phi_star, phi)


def effective_action(spec: ActionSpec, theta_star, theta, psi_star, psi,
                     phi_star, phi) -> complex:
    rg = spec.rg
    t_star = components(theta_star) - spec.mats["q"] @ components(psi_star)
    t = components(theta) - spec.mats["q"] @ components(psi)
    coarse = rg.b * (t_star @ rg.space_plus.gram @ t)
    return complex(coarse) + full_action(spec, psi_star, psi, phi_star, phi)


def next_action(spec: ActionSpec, theta_star, theta, phi_star, phi) -> complex:
    rg = spec.rg
    t_star = components(theta_star) - spec.mats["qcm"] @ components(phi_star)
    t = components(theta) - spec.mats["qcm"] @ components(phi)
    coarse = t_star @ rg.space_plus.gram @ (spec.mats["qc"] @ t)
    return complex(coarse) + base_action(spec, phi_star, phi)


def grad_base_action(spec: ActionSpec, phi_star, phi) -> tuple[FieldVector, FieldVector]:
    """(grad wrt phi_star, grad wrt phi) of the base action."""
    _, d_phi, d_phi_star = eval_p_and_grads(spec.p, phi_star, phi)
    sm = spec.rg.space_minus
    wrt_star = FieldVector(sm, spec.mats["d"] @ components(phi) + d_phi_star.components)
    wrt_unstar = FieldVector(sm, spec.mats["dstar"] @ components(phi_star) + d_phi.components)
    return wrt_star, wrt_unstar


def grad_full_action(spec: ActionSpec, psi_star, psi, phi_star, phi) -> dict:
    """Gradients with respect to all four arguments, keyed by name."""
    m = spec.mats
    sm, smid, _ = spec.spaces
    ps, pu = components(psi_star), components(psi)
    fs, fu = components(phi_star), components(phi)
    r_star = ps - m["qm"] @ fs
    r = pu - m["qm"] @ fu
    g_star, g_unstar = grad_base_action(spec, phi_star, phi)
    return {
        "psi_star": FieldVector(smid, m["fq"] @ r),
        "psi": FieldVector(smid, m["fq"] @ r_star),
        "phi_star": FieldVector(sm, -m["qms_fq"] @ r + g_star.components),
        "phi": FieldVector(sm, -m["qms_fq"] @ r_star + g_unstar.components),
    }


def grad_effective_action(spec: ActionSpec, theta_star, theta, psi_star, psi,
                          phi_star, phi) -> dict:
    m = spec.mats
    b = spec.rg.b
    sm, smid, sp = spec.spaces
    ts, tu = components(theta_star), components(theta)
    ps, pu = components(psi_star), components(psi)
    t_star = ts - m["q"] @ ps
    t = tu - m["q"] @ pu
    inner = grad_full_action(spec, psi_star, psi, phi_star, phi)
    return {
        "theta_star": FieldVector(sp, b * t),
        "theta": FieldVector(sp, b * t_star),
        "psi_star": FieldVector(smid, -b * m["qs"] @ t + inner["psi_star"].components),
        "psi": FieldVector(smid, -b * m["qs"] @ t_star + inner["psi"].components),
        "phi_star": inner["phi_star"],
        "phi": inner["phi"],
    }


def grad_next_action(spec: ActionSpec, theta_star, theta, phi_star, phi) -> dict:
    m = spec.mats
    sm, _, sp = spec.spaces
    ts, tu = components(theta_star), components(theta)
    fs, fu = components(phi_star), components(phi)
    t_star = ts - m["qcm"] @ fs
    t = tu - m["qcm"] @ fu
    g_star, g_unstar = grad_base_action(spec, phi_star, phi)
    return {
        "theta_star": FieldVector(sp, m["qc"] @ t),
        "theta": FieldVector(sp, m["qc_star"] @ t_star),
        "phi_star": FieldVector(sm, -m["qcms"] @ m["qc"] @ t + g_star.components),
        "phi": FieldVector(sm, -m["qcms"] @ m["qc_star"] @ t_star + g_unstar.components),
    }


def psi_tilde(spec: ActionSpec, theta, phi, cond_limit: float = DEFAULT_COND_LIMIT
              ) -> FieldVector:
    """The middle field interpolating a coarse source and a fine background:
    (b q*q + fq)^{-1} (b q* theta + fq qm phi).

    The same formula serves the starred pair; pass starred inputs to get it.
    """
    m = spec.mats
    rhs = spec.rg.b * m["qs"] @ components(theta) + m["fq_qm"] @ components(phi)
    out = gated_solve(m["crit_lhs"], rhs, "b q*q + fq", cond_limit)
    return FieldVector(spec.rg.space_mid, out)


def preparation_check(spec: ActionSpec, theta_star, theta, phi_star, phi,
                      cond_limit: float = DEFAULT_COND_LIMIT) -> tuple[float, float]:
    """Residuals of the two preparation statements at one point.

    First: the next action equals the effective action evaluated on the
    interpolating middle fields.  Second: the fine-space gradients of the
    two sides differ exactly by the middle-field chain-rule term.  Both
    residuals are relative, floored at scale one.
    """
    pt = psi_tilde(spec, theta, phi, cond_limit)
    pt_star = psi_tilde(spec, theta_star, phi_star, cond_limit)

    lhs = next_action(spec, theta_star, theta, phi_star, phi)
    rhs = effective_action(spec, theta_star, theta, pt_star, pt, phi_star, phi)
    value_residual = abs(lhs - rhs) / max(1.0, abs(lhs))

    g_next = grad_next_action(spec, theta_star, theta, phi_star, phi)
    g_full = grad_full_action(spec, pt_star, pt, phi_star, phi)
    g_eff = grad_effective_action(spec, theta_star, theta, pt_star, pt, phi_star, phi)
    m = spec.mats
    chain = m["qms_fq"] @ gated_solve(m["crit_lhs"], np.eye(spec.rg.space_mid.dim),
                                      "b q*q + fq", cond_limit)
    res = 0.0
    scale = 1.0
    for slot, eff_slot in (("phi_star", "psi_star"), ("phi", "psi")):
        lhs_g = g_next[slot].components
        rhs_g = g_full[slot].components + chain @ g_eff[eff_slot].components
        res = max(res, float(np.linalg.norm(lhs_g - rhs_g)))
        scale = max(scale, float(np.linalg.norm(lhs_g)))
    return value_residual, res / scale


def delta_e(e_callback, psi_star_base, psi_base, dpsi_star, dpsi) -> complex:
    """Increment of an opaque extra term between shifted and base fields."""
    if e_callback is None:
        return 0.0 + 0.0j
    shifted = e_callback(components(psi_star_base) + components(dpsi_star),
                         components(psi_base) + components(dpsi))
    base = e_callback(components(psi_star_base), components(psi_base))
    return complex(shifted) - complex(base)
