"""Finite-dimensional spaces, bilinear pairings, operators and adjoints.

A space is a real vector space with a symmetric positive definite bilinear
form.  Vectors are allowed complex coordinates (the complexification); the
form extends bilinearly, without any conjugation.  Starred and unstarred
fields are therefore independent inputs everywhere in this package.

Everything is dense and small (dimensions stay below ~64), so exact
factorizations are cheap and no sparse or lazy machinery is warranted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NearSingularError, SpaceMismatchError

DEFAULT_COND_LIMIT = 1e8


@dataclass(frozen=True, eq=False)
class SpaceSpec:
    """Dimension plus the gram matrix of the bilinear form."""

    dim: int
    gram: np.ndarray | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"space dimension must be positive, got {self.dim}")
        if self.gram is None:
            g = np.eye(self.dim)
        else:
            g = np.array(self.gram, dtype=float)
        if g.shape != (self.dim, self.dim):
            raise ValueError(f"gram matrix shape {g.shape} does not match dim {self.dim}")
        scale = np.linalg.norm(g, 2)
        if np.linalg.norm(g - g.T, 2) > 1e-14 * scale:
            raise ValueError("gram matrix must be symmetric")
        if np.linalg.eigvalsh(g).min() <= 0.0:
            raise ValueError("gram matrix must be positive definite")
        g.setflags(write=False)
        object.__setattr__(self, "gram", g)

    def compatible(self, other: "SpaceSpec") -> bool:
        return self.dim == other.dim and np.array_equal(self.gram, other.gram)

    def require_compatible(self, other: "SpaceSpec", what: str = "value") -> None:
        if not self.compatible(other):
            raise SpaceMismatchError(f"{what}: spaces differ (dims {self.dim} vs {other.dim})")


@dataclass(frozen=True, eq=False)
class FieldVector:
    """A (complexified) vector tagged with the space it lives in."""

    space: SpaceSpec
    components: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.components, dtype=complex).reshape(-1)
        if c.shape != (self.space.dim,):
            raise SpaceMismatchError(
                f"component count {c.shape[0]} does not match space dim {self.space.dim}"
            )
        object.__setattr__(self, "components", c)

    @classmethod
    def zeros(cls, space: SpaceSpec) -> "FieldVector":
        return cls(space, np.zeros(space.dim, dtype=complex))

    def __add__(self, other: "FieldVector") -> "FieldVector":
        self.space.require_compatible(other.space, "vector sum")
        return FieldVector(self.space, self.components + other.components)

    def __sub__(self, other: "FieldVector") -> "FieldVector":
        self.space.require_compatible(other.space, "vector difference")
        return FieldVector(self.space, self.components - other.components)

    def __rmul__(self, scalar) -> "FieldVector":
        return FieldVector(self.space, complex(scalar) * self.components)

    def __neg__(self) -> "FieldVector":
        return FieldVector(self.space, -self.components)


def components(x) -> np.ndarray:
    """Accept a FieldVector or anything array-like, return a complex 1-d array."""
    if isinstance(x, FieldVector):
        return x.components
    return np.asarray(x, dtype=complex).reshape(-1)


@dataclass(frozen=True, eq=False)
class Operator:
    """A linear map between two spaces, stored as a dense matrix.

    ``entries`` has shape (codomain.dim, domain.dim) and acts on coordinate
    columns.  Operators are immutable; algebra returns new instances.
    """

    domain: SpaceSpec
    codomain: SpaceSpec
    entries: np.ndarray

    def __post_init__(self):
        e = np.array(self.entries, dtype=complex)
        if e.shape != (self.codomain.dim, self.domain.dim):
            raise SpaceMismatchError(
                f"entry shape {e.shape} does not match "
                f"({self.codomain.dim}, {self.domain.dim})"
            )
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @classmethod
    def identity(cls, space: SpaceSpec) -> "Operator":
        return cls(space, space, np.eye(space.dim))

    @classmethod
    def zero(cls, domain: SpaceSpec, codomain: SpaceSpec) -> "Operator":
        return cls(domain, codomain, np.zeros((codomain.dim, domain.dim)))

    def apply(self, v) -> FieldVector:
        if isinstance(v, FieldVector):
            self.domain.require_compatible(v.space, "operator application")
        return FieldVector(self.codomain, self.entries @ components(v))

    def __matmul__(self, other: "Operator") -> "Operator":
        self.domain.require_compatible(other.codomain, "operator composition")
        return Operator(other.domain, self.codomain, self.entries @ other.entries)

    def __add__(self, other: "Operator") -> "Operator":
        self.domain.require_compatible(other.domain, "operator sum")
        self.codomain.require_compatible(other.codomain, "operator sum")
        return Operator(self.domain, self.codomain, self.entries + other.entries)

    def __sub__(self, other: "Operator") -> "Operator":
        self.domain.require_compatible(other.domain, "operator difference")
        self.codomain.require_compatible(other.codomain, "operator difference")
        return Operator(self.domain, self.codomain, self.entries - other.entries)

    def __rmul__(self, scalar) -> "Operator":
        return Operator(self.domain, self.codomain, complex(scalar) * self.entries)

    def __neg__(self) -> "Operator":
        return Operator(self.domain, self.codomain, -self.entries)

    def norm(self) -> float:
        return float(np.linalg.norm(self.entries, 2))


def pairing(u, v) -> complex:
    """Bilinear pairing <u, v> of two vectors in the same space.

    No conjugation is applied; complex inputs are paired as they stand.
    """
    if isinstance(u, FieldVector) and isinstance(v, FieldVector):
        u.space.require_compatible(v.space, "pairing")
        g = u.space.gram
    elif isinstance(u, FieldVector):
        g = u.space.gram
    elif isinstance(v, FieldVector):
        g = v.space.gram
    else:
        raise TypeError("pairing needs at least one FieldVector to supply the form")
    return complex(components(u) @ g @ components(v))


def adjoint(a: Operator) -> Operator:
    """The pairing adjoint: <A u, w>_cod = <u, A* w>_dom for all u, w."""
    g_dom = a.domain.gram
    g_cod = a.codomain.gram
    entries = np.linalg.solve(g_dom, a.entries.T @ g_cod)
    return Operator(a.codomain, a.domain, entries)


def cond(a) -> float:
    """Spectral condition number of a matrix or Operator."""
    m = a.entries if isinstance(a, Operator) else np.asarray(a)
    s = np.linalg.svd(m, compute_uv=False)
    if s[-1] == 0.0:
        return np.inf
    return float(s[0] / s[-1])


def gated_solve(mat: np.ndarray, rhs: np.ndarray, assumption: str = "operator",
                cond_limit: float = DEFAULT_COND_LIMIT) -> np.ndarray:
    """np.linalg.solve behind a condition-number gate.

    Raises NearSingularError naming the failed invertibility assumption
    instead of returning an answer dominated by roundoff.
    """
    mat = np.asarray(mat)
    c = cond(mat)
    if not np.isfinite(c) or c > cond_limit:
        raise NearSingularError(assumption, c, cond_limit)
    return np.linalg.solve(mat, rhs)


def gated_inverse(mat: np.ndarray, assumption: str = "operator",
                  cond_limit: float = DEFAULT_COND_LIMIT) -> np.ndarray:
    return gated_solve(mat, np.eye(mat.shape[0]), assumption, cond_limit)


def solve(a: Operator, rhs, assumption: str | None = None,
          cond_limit: float = DEFAULT_COND_LIMIT) -> FieldVector:
    """Solve A x = rhs for a square operator, gated on cond(A)."""
    a.domain.require_compatible(a.codomain, "solve")
    if isinstance(rhs, FieldVector):
        a.codomain.require_compatible(rhs.space, "solve right-hand side")
    x = gated_solve(a.entries, components(rhs), assumption or "operator", cond_limit)
    return FieldVector(a.domain, x)


def inverse(a: Operator, assumption: str | None = None,
            cond_limit: float = DEFAULT_COND_LIMIT) -> Operator:
    a.domain.require_compatible(a.codomain, "inverse")
    entries = gated_inverse(a.entries, assumption or "operator", cond_limit)
    return Operator(a.codomain, a.domain, entries)


def rel_opnorm(diff, ref) -> float:
    """Spectral norm of ``diff`` relative to that of ``ref`` (floored at 1).

    The floor keeps residuals of near-zero reference quantities meaningful.
    """
    d = diff.entries if isinstance(diff, Operator) else np.asarray(diff)
    r = ref.entries if isinstance(ref, Operator) else np.asarray(ref)
    denom = max(1.0, float(np.linalg.norm(r, 2)))
    return float(np.linalg.norm(d, 2)) / denom


def form_asymmetry(a: Operator) -> float:
    """Relative deviation of A from its own pairing adjoint."""
    a.domain.require_compatible(a.codomain, "symmetry check")
    return rel_opnorm(a - adjoint(a), a)


def woodbury_left(f: Operator, g: Operator, q: Operator, q_star: Operator,
                  cond_limit: float = DEFAULT_COND_LIMIT) -> Operator:
    """Inverse of (1_W + g q f^{-1} q_star) without forming f^{-1}.

    f acts on V, g on W, q: V -> W, q_star: W -> V (q_star need not be the
    adjoint of q).  Returns 1_W - g q (f + q_star g q)^{-1} q_star.
    """
    _check_woodbury_shapes(f, g, q, q_star)
    # gate f itself: the left-hand side of the identity must exist
    c = cond(f)
    if not np.isfinite(c) or c > cond_limit:
        raise NearSingularError("f (outer factor of the inversion identity)", c, cond_limit)
    m = f.entries + q_star.entries @ g.entries @ q.entries
    y = gated_solve(m, q_star.entries, "f + q_star g q (inner Schur factor)", cond_limit)
    w = g.codomain
    return Operator(w, w, np.eye(w.dim) - g.entries @ q.entries @ y)


def woodbury_right(f: Operator, g: Operator, q: Operator, q_star: Operator,
                   cond_limit: float = DEFAULT_COND_LIMIT) -> Operator:
    """Inverse of (1_W + q f^{-1} q_star g): 1_W - q (f + q_star g q)^{-1} q_star g."""
    _check_woodbury_shapes(f, g, q, q_star)
    c = cond(f)
    if not np.isfinite(c) or c > cond_limit:
        raise NearSingularError("f (outer factor of the inversion identity)", c, cond_limit)
    m = f.entries + q_star.entries @ g.entries @ q.entries
    y = gated_solve(m, q_star.entries @ g.entries, "f + q_star g q (inner Schur factor)",
                    cond_limit)
    w = g.codomain
    return Operator(w, w, np.eye(w.dim) - q.entries @ y)


def _check_woodbury_shapes(f, g, q, q_star):
    f.domain.require_compatible(f.codomain, "woodbury f")
    g.domain.require_compatible(g.codomain, "woodbury g")
    q.domain.require_compatible(f.domain, "woodbury q domain")
    q.codomain.require_compatible(g.domain, "woodbury q codomain")
    q_star.domain.require_compatible(g.domain, "woodbury q_star domain")
    q_star.codomain.require_compatible(f.domain, "woodbury q_star codomain")
