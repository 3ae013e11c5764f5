"""Polynomial interactions on the fine space.

A PolynomialP is a scalar-valued polynomial in the pair (phi_star, phi)
with no constant or linear part; each monomial block of bidegree
(kstar, k) is a dense complex tensor, symmetric within its slot groups.

The two gradients are taken with respect to the bilinear pairing:
grad_unstar is defined by <h, grad_unstar> = d/dt P(phi_star, phi + t h),
and grad_star by <h, grad_star> = d/dt P(phi_star + t h, phi).  With the
star-swap convention used by the field equations, grad_unstar plays the
role of the starred drive and grad_star the unstarred one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import tensorpoly as tp
from .linalg import FieldVector, SpaceSpec, components


@dataclass(frozen=True, eq=False)
class PolynomialP:
    space: SpaceSpec
    monomials: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for key in sorted(self.monomials):
            kstar, k = int(key[0]), int(key[1])
            if kstar < 0 or k < 0 or kstar + k < 2:
                raise ValueError(
                    f"monomial bidegree {key} invalid: total degree must be >= 2")
            t = np.asarray(self.monomials[key], dtype=complex)
            want = (self.space.dim,) * (kstar + k)
            if t.shape != want:
                raise ValueError(
                    f"monomial {key} has shape {t.shape}, expected {want}")
            defect = tp.symmetry_defect(t, kstar, k, leading_axes=0)
            if defect > 1e-13:
                raise ValueError(
                    f"monomial {key} is not symmetric within slot groups "
                    f"(deviation {defect:.3e}); symmetrize it first")
            if np.any(t != 0):
                clean[(kstar, k)] = t
        object.__setattr__(self, "monomials", clean)
        gram_inv = np.linalg.inv(self.space.gram)
        object.__setattr__(self, "_grad_star", _gradient_map(clean, gram_inv, starred=True))
        object.__setattr__(self, "_grad_unstar", _gradient_map(clean, gram_inv, starred=False))

    @classmethod
    def zero(cls, space: SpaceSpec) -> "PolynomialP":
        return cls(space, {})

    @property
    def is_zero(self) -> bool:
        return not self.monomials

    @property
    def min_degree(self) -> int:
        if not self.monomials:
            return 0
        return min(a + b for a, b in self.monomials)

    @property
    def max_degree(self) -> int:
        if not self.monomials:
            return 0
        return max(a + b for a, b in self.monomials)

    def value(self, phi_star, phi) -> complex:
        return complex(tp.eval_map(self.monomials, components(phi_star),
                                   components(phi), self.space.dim, leading_axes=0))

    def grad_star_coeffs(self) -> dict:
        """Coefficient map of the gradient in the starred argument."""
        return self._grad_star

    def grad_unstar_coeffs(self) -> dict:
        """Coefficient map of the gradient in the unstarred argument."""
        return self._grad_unstar


def _gradient_map(monomials: dict, gram_inv: np.ndarray, starred: bool) -> dict:
    out: dict = {}
    for (a, b) in sorted(monomials):
        t = monomials[(a, b)]
        if starred:
            if a == 0:
                continue
            # free one starred slot (the last of its group), axis a-1
            moved = np.moveaxis(t, a - 1, 0)
            tensor = a * np.tensordot(gram_inv, moved, axes=([1], [0]))
            key = (a - 1, b)
        else:
            if b == 0:
                continue
            moved = np.moveaxis(t, a + b - 1, 0)
            tensor = b * np.tensordot(gram_inv, moved, axes=([1], [0]))
            key = (a, b - 1)
        tp.add_into(out, key, tensor)
    return {k: v for k, v in sorted(out.items())}


def eval_p_and_grads(p: PolynomialP, phi_star, phi) -> tuple[complex, FieldVector, FieldVector]:
    """(P, grad wrt phi, grad wrt phi_star) at a point.

    The middle entry is the starred drive P'_* and the last the unstarred
    drive P' of the field equations.
    """
    us, u = components(phi_star), components(phi)
    value = complex(tp.eval_map(p.monomials, us, u, p.space.dim, leading_axes=0))
    d_phi = tp.eval_map(p.grad_unstar_coeffs(), us, u, p.space.dim)
    d_phi_star = tp.eval_map(p.grad_star_coeffs(), us, u, p.space.dim)
    return value, FieldVector(p.space, d_phi), FieldVector(p.space, d_phi_star)


def load_polynomial(path_or_records, space: SpaceSpec) -> PolynomialP:
    """Read the record format: a list of monomial blocks with sparse entries.

    Each record holds kstar, k and entries [{multi_index_star, multi_index,
    re, im}].  Entries accumulate, and the assembled tensor is symmetrized,
    so listing a coefficient on one index ordering is enough.
    """
    if isinstance(path_or_records, (str, bytes)) or hasattr(path_or_records, "read"):
        if hasattr(path_or_records, "read"):
            records = json.load(path_or_records)
        else:
            with open(path_or_records) as fh:
                records = json.load(fh)
    else:
        records = path_or_records
    if not isinstance(records, list):
        raise ValueError("polynomial file must hold a list of monomial records")
    monomials: dict = {}
    for rec in records:
        kstar, k = int(rec["kstar"]), int(rec["k"])
        t = np.zeros((space.dim,) * (kstar + k), dtype=complex)
        for ent in rec.get("entries", []):
            idx_star = tuple(int(i) for i in ent.get("multi_index_star", []))
            idx = tuple(int(i) for i in ent.get("multi_index", []))
            if len(idx_star) != kstar or len(idx) != k:
                raise ValueError(
                    f"entry index lengths {len(idx_star)},{len(idx)} do not match "
                    f"bidegree ({kstar},{k})")
            t[idx_star + idx] += float(ent.get("re", 0.0)) + 1j * float(ent.get("im", 0.0))
        t = tp.symmetrize(t, kstar, k, leading_axes=0)
        tp.add_into(monomials, (kstar, k), t)
    return PolynomialP(space, monomials)


def dump_polynomial(p: PolynomialP) -> list:
    """Inverse of load_polynomial, listing every nonzero tensor entry."""
    records = []
    for (kstar, k) in sorted(p.monomials):
        t = p.monomials[(kstar, k)]
        entries = []
        for idx in np.ndindex(t.shape):
            v = t[idx]
            if v != 0:
                entries.append({
                    "multi_index_star": list(idx[:kstar]),
                    "multi_index": list(idx[kstar:]),
                    "re": float(v.real),
                    "im": float(v.imag),
                })
        records.append({"kstar": kstar, "k": k, "entries": entries})
    return records
