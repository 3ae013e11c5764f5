"""Scenario-driven verification harness.

A scenario file (json) fixes the seed, the spaces, how the step data is
generated, tolerances, and which suites run.  Each suite draws its own
pinned ensemble from a stream labeled by the suite name, so suites are
self-contained and insensitive to each other or to listing order; the
scenario's dims/forms/operators/polynomial define the data used by the
solve and kernel commands, and by the gaussian-quadrature suite whenever
the scenario is a one-dimensional identity-form setup (otherwise that
suite falls back to its pinned reference family).

Reports are deterministic: suites are assembled in name order, residuals
are serialized as decimal strings with 17 significant digits, and timings
are excluded unless explicitly requested.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .action import make_action_spec, preparation_check
from .ensembles import (random_field, random_polynomial, random_rg_data,
                        random_spd, random_spec, stream, unit_field)
from .errors import BlockspinError, ConfigError, NearSingularError
from .gaussian import prop_d_gaussian_check, prop_d_quadrature_check
from .kernels import RGData, build_kernels, identity_suite, qcheck_recursion
from .lattice import BlockScheme, TorusLattice, build_tower, compose_averaging
from .linalg import (FieldVector, Operator, SpaceSpec, adjoint, cond,
                     pairing, rel_opnorm, woodbury_left, woodbury_right)
from .poly import load_polynomial
from .reference import scalar_reference_data, scalar_reference_spec
from .solvers import (compose_cp, delta_a_direct, delta_a_formula,
                      fps_background, fps_critical, newton_background,
                      newton_critical, verify_composition,
                      verify_crit_representation)

__all__ = ["ScenarioConfig", "Check", "SuiteResult", "Report",
           "SUITE_NAMES", "run_scenario", "emit_report",
           "scenario_data", "scenario_spec"]

SUITE_NAMES = ("crit-representation", "deltaA", "edA", "fps-composition",
               "gaussian-detd", "gaussian-quadrature", "lattice",
               "newton-vs-fps", "preparation", "qcheck", "woodbury")

# defaults; a scenario's "tolerances" table overrides by key
TOLERANCES = {
    "woodbury": 1e-11,
    "qcheck": 1e-11,
    "edA": 1e-11,
    "preparation": 1e-11,
    "preparation-gradient": 1e-9,
    "fps-composition": 1e-10,
    "crit-representation": 1e-10,
    "reference-coefficients": 1e-12,
    "newton-vs-fps": 1e-7,
    "deltaA": 1e-8,
    "deltaA-free": 1e-13,
    "gaussian-detd": 1e-10,
    "gaussian-reference": 1e-12,
    "gaussian-quadrature": 1e-3,
    "lattice": 1e-12,
}


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    suites: tuple[str, ...]
    dims: tuple[int, int, int] | None = None
    lattice: dict | None = None
    grams: str = "identity"
    b: float = 1.0
    operators: dict | None = None
    polynomial: str | None = None
    interaction: dict | None = None
    max_order: int = 4
    tolerances: dict = field(default_factory=dict)
    radii: tuple[float, float] = (1.0, 1.0)
    quadrature: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path)

    @classmethod
    def from_dict(cls, raw: dict, base_dir: str | Path = ".") -> "ScenarioConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a json object")
        known = {"seed", "suites", "dims", "lattice", "grams", "b", "operators",
                 "polynomial", "interaction", "max_order", "tolerances",
                 "radii", "quadrature"}
        for key in raw:
            if key not in known:
                raise ConfigError(f"unknown config field '{key}'")

        seed = raw.get("seed")
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
            raise ConfigError("config field 'seed': need an integer in [0, 2^64)")

        suites = raw.get("suites", list(SUITE_NAMES))
        if not isinstance(suites, list) or not all(isinstance(s, str) for s in suites):
            raise ConfigError("config field 'suites': need a list of suite names")
        for s in suites:
            if s not in SUITE_NAMES:
                raise ConfigError(
                    f"config field 'suites': unknown suite '{s}' "
                    f"(known: {', '.join(SUITE_NAMES)})")

        dims = raw.get("dims")
        if dims is not None:
            if (not isinstance(dims, list) or len(dims) != 3
                    or not all(isinstance(d, int) and d > 0 for d in dims)):
                raise ConfigError("config field 'dims': need three positive integers")
            dims = tuple(dims)

        lattice = raw.get("lattice")
        if lattice is not None:
            if dims is not None:
                raise ConfigError("config field 'lattice': give dims or lattice, not both")
            if not isinstance(lattice, dict) or "extents" not in lattice or "block" not in lattice:
                raise ConfigError("config field 'lattice': need an object with "
                                  "'extents' and 'block' (optional 'profile')")
            for part in ("extents", "block"):
                v = lattice[part]
                if (not isinstance(v, list) or not v
                        or not all(isinstance(x, int) and x > 0 for x in v)):
                    raise ConfigError(f"config field 'lattice.{part}': need positive integers")

        grams = raw.get("grams", "identity")
        if grams not in ("identity", "random"):
            raise ConfigError("config field 'grams': need 'identity' or 'random'")

        b = raw.get("b", 1.0)
        if isinstance(b, bool) or not isinstance(b, (int, float)) or not b > 0:
            raise ConfigError("config field 'b': need a positive number")

        operators = raw.get("operators")
        if operators is not None:
            if lattice is not None:
                raise ConfigError("config field 'operators': not allowed with a lattice scenario")
            need = {"q_minus", "q", "fq", "d"}
            if not isinstance(operators, dict) or set(operators) != need:
                raise ConfigError("config field 'operators': need exactly the "
                                  "matrices q_minus, q, fq, d")
            if grams != "identity":
                raise ConfigError("config field 'grams': explicit operators "
                                  "require identity forms")

        polynomial = raw.get("polynomial")
        if polynomial is not None and not isinstance(polynomial, str):
            raise ConfigError("config field 'polynomial': need a file path string")
        interaction = raw.get("interaction")
        if interaction is not None:
            if polynomial is not None:
                raise ConfigError("config field 'interaction': give a polynomial "
                                  "file or an interaction ensemble, not both")
            if (not isinstance(interaction, dict)
                    or not isinstance(interaction.get("bidegrees"), list)):
                raise ConfigError("config field 'interaction': need an object "
                                  "with 'bidegrees' (and optional 'scale')")
            for pair in interaction["bidegrees"]:
                if (not isinstance(pair, list) or len(pair) != 2
                        or not all(isinstance(x, int) and x >= 0 for x in pair)):
                    raise ConfigError("config field 'interaction.bidegrees': "
                                      "need pairs of nonnegative integers")
            scale = interaction.get("scale", 0.3)
            if isinstance(scale, bool) or not isinstance(scale, (int, float)) or scale <= 0:
                raise ConfigError("config field 'interaction.scale': need a positive number")
        if polynomial is not None:
            resolved = Path(base_dir) / polynomial
            if not resolved.is_file():
                raise ConfigError(
                    f"config field 'polynomial': file '{resolved}' does not exist")

        max_order = raw.get("max_order", 4)
        if isinstance(max_order, bool) or not isinstance(max_order, int) \
                or not 1 <= max_order <= 8:
            raise ConfigError("config field 'max_order': need an integer in [1, 8]")

        tolerances = raw.get("tolerances", {})
        if not isinstance(tolerances, dict):
            raise ConfigError("config field 'tolerances': need an object")
        for k, v in tolerances.items():
            if k not in TOLERANCES:
                raise ConfigError(f"config field 'tolerances': unknown entry '{k}' "
                                  f"(known: {', '.join(sorted(TOLERANCES))})")
            if isinstance(v, bool) or not isinstance(v, (int, float)) or v <= 0:
                raise ConfigError(f"config field 'tolerances.{k}': need a positive number")

        radii = raw.get("radii", [1.0, 1.0])
        if (not isinstance(radii, list) or len(radii) != 2
                or not all(isinstance(r, (int, float)) and not isinstance(r, bool)
                           and r > 0 for r in radii)):
            raise ConfigError("config field 'radii': need two positive numbers")

        quadrature = raw.get("quadrature", {})
        if not isinstance(quadrature, dict):
            raise ConfigError("config field 'quadrature': need an object")
        for k in quadrature:
            if k not in ("nodes_per_axis", "theta_cutoff_sigmas"):
                raise ConfigError(f"config field 'quadrature': unknown entry '{k}'")
        nodes = quadrature.get("nodes_per_axis", 64)
        if isinstance(nodes, bool) or not isinstance(nodes, int) or nodes < 4:
            raise ConfigError("config field 'quadrature.nodes_per_axis': "
                              "need an integer >= 4")
        sigmas = quadrature.get("theta_cutoff_sigmas", 6.0)
        if isinstance(sigmas, bool) or not isinstance(sigmas, (int, float)) or sigmas <= 0:
            raise ConfigError("config field 'quadrature.theta_cutoff_sigmas': "
                              "need a positive number")

        return cls(seed=seed, suites=tuple(suites), dims=dims, lattice=lattice,
                   grams=grams, b=float(b), operators=operators,
                   polynomial=polynomial, interaction=interaction,
                   max_order=max_order, tolerances=dict(tolerances),
                   radii=(float(radii[0]), float(radii[1])),
                   quadrature=dict(quadrature), base_dir=Path(base_dir))

    @classmethod
    def from_file(cls, path: str | Path) -> "ScenarioConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config '{path}': {exc}") from exc
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config '{path}' is not valid json: {exc}") from exc
        return cls.from_dict(raw, base_dir=path.parent)

    def with_suites(self, names) -> "ScenarioConfig":
        for s in names:
            if s not in SUITE_NAMES:
                raise ConfigError(f"unknown suite '{s}' "
                                  f"(known: {', '.join(SUITE_NAMES)})")
        return ScenarioConfig(seed=self.seed, suites=tuple(names), dims=self.dims,
                              lattice=self.lattice, grams=self.grams, b=self.b,
                              operators=self.operators, polynomial=self.polynomial,
                              interaction=self.interaction, max_order=self.max_order,
                              tolerances=self.tolerances, radii=self.radii,
                              quadrature=self.quadrature, base_dir=self.base_dir)

    def tolerance(self, key: str) -> float:
        return float(self.tolerances.get(key, TOLERANCES[key]))

    def echo(self) -> dict:
        out = {"seed": self.seed, "suites": list(self.suites),
               "grams": self.grams, "b": self.b, "max_order": self.max_order,
               "radii": list(self.radii)}
        if self.dims is not None:
            out["dims"] = list(self.dims)
        if self.lattice is not None:
            out["lattice"] = self.lattice
        if self.operators is not None:
            out["operators"] = self.operators
        if self.polynomial is not None:
            out["polynomial"] = self.polynomial
        if self.interaction is not None:
            out["interaction"] = self.interaction
        if self.tolerances:
            out["tolerances"] = {k: _fmt(v) for k, v in sorted(self.tolerances.items())}
        if self.quadrature:
            out["quadrature"] = self.quadrature
        return out


# ---------------------------------------------------------------------------
# scenario data assembly (used by the solve/kernel commands and the
# quadrature suite; the other suites draw their own pinned ensembles)

def _entries(raw, name: str) -> np.ndarray:
    try:
        m = np.array(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config field 'operators.{name}': not a real matrix: {exc}")
    if m.ndim != 2:
        raise ConfigError(f"config field 'operators.{name}': need a 2-d matrix")
    return m


def scenario_data(cfg: ScenarioConfig) -> RGData:
    if cfg.lattice is not None:
        lat = TorusLattice(tuple(cfg.lattice["extents"]))
        profile = cfg.lattice.get("profile")
        scheme = BlockScheme(tuple(cfg.lattice["block"]),
                             None if profile is None else np.asarray(profile, dtype=float))
        try:
            tower = build_tower(lat, scheme, 2)
        except ValueError as exc:
            raise ConfigError(f"config field 'lattice': {exc}") from exc
        sm = tower[0].lattice.space()
        smid = tower[1].lattice.space()
        rng = stream(cfg.seed, "lattice-kernels")
        fq = Operator(smid, smid, random_spd(rng, smid.dim) + 0.5 * np.eye(smid.dim))
        d = Operator(sm, sm, random_spd(rng, sm.dim) + 0.5 * np.eye(sm.dim))
        return RGData(space_minus=sm, space_mid=smid,
                      space_plus=tower[2].lattice.space(),
                      q_minus=tower[1].step, q=tower[2].step,
                      b=cfg.b, fq=fq, d=d)
    if cfg.operators is not None:
        qm = _entries(cfg.operators["q_minus"], "q_minus")
        q = _entries(cfg.operators["q"], "q")
        fq = _entries(cfg.operators["fq"], "fq")
        d = _entries(cfg.operators["d"], "d")
        dm, dmid, dp = qm.shape[1], qm.shape[0], q.shape[0]
        if cfg.dims is not None and cfg.dims != (dm, dmid, dp):
            raise ConfigError(f"config field 'dims': {list(cfg.dims)} does not match "
                              f"the operator shapes ({dm}, {dmid}, {dp})")
        sm, smid, sp = SpaceSpec(dm), SpaceSpec(dmid), SpaceSpec(dp)
        try:
            return RGData(space_minus=sm, space_mid=smid, space_plus=sp,
                          q_minus=Operator(sm, smid, qm), q=Operator(smid, sp, q),
                          b=cfg.b, fq=Operator(smid, smid, fq),
                          d=Operator(sm, sm, d))
        except (ValueError, BlockspinError) as exc:
            raise ConfigError(f"config field 'operators': {exc}") from exc
    dims = cfg.dims if cfg.dims is not None else (3, 2, 1)
    return random_rg_data(stream(cfg.seed, "scenario"), dims, b=cfg.b,
                          identity_grams=(cfg.grams == "identity"))


def scenario_spec(cfg: ScenarioConfig):
    data = scenario_data(cfg)
    p = None
    if cfg.polynomial is not None:
        path = cfg.base_dir / cfg.polynomial
        try:
            records = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"config field 'polynomial': cannot read '{path}': {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config field 'polynomial': '{path}' is not valid json: {exc}")
        p = load_polynomial(records, data.space_minus)
    elif cfg.interaction is not None:
        bidegrees = [tuple(pair) for pair in cfg.interaction["bidegrees"]]
        p = random_polynomial(stream(cfg.seed, "interaction"), data.space_minus,
                              bidegrees, float(cfg.interaction.get("scale", 0.3)))
    return make_action_spec(data, p)


# ---------------------------------------------------------------------------
# report structures

@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    residual: float | None = None
    tolerance: float | None = None
    note: str = ""

    def __post_init__(self):
        # numpy comparisons yield np.bool_, which json refuses
        object.__setattr__(self, "passed", bool(self.passed))


@dataclass
class SuiteResult:
    name: str
    checks: list
    condition_numbers: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


@dataclass
class Report:
    config: dict
    suites: list
    timings: bool = False

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.suites)

    def as_dict(self) -> dict:
        suites = []
        for s in self.suites:
            checks = []
            for c in s.checks:
                entry = {"name": c.name, "passed": c.passed,
                         "residual": None if c.residual is None else _fmt(c.residual),
                         "tolerance": None if c.tolerance is None else _fmt(c.tolerance)}
                if c.note:
                    entry["note"] = c.note
                checks.append(entry)
            one = {"name": s.name, "passed": s.passed, "checks": checks}
            if s.condition_numbers:
                one["condition_numbers"] = {k: _fmt(v) for k, v
                                            in sorted(s.condition_numbers.items())}
            if self.timings:
                one["seconds"] = f"{s.seconds:.3f}"
            suites.append(one)
        total = sum(len(s.checks) for s in self.suites)
        failures = sum(1 for s in self.suites for c in s.checks if not c.passed)
        return {"artifact": {"name": "blockspin", "version": __version__},
                "config": self.config,
                "suites": suites,
                "summary": {"suites": len(self.suites), "checks": total,
                            "failures": failures, "passed": self.passed}}


# ---------------------------------------------------------------------------
# suites

def _suite_woodbury(cfg: ScenarioConfig) -> SuiteResult:
    """Both inversion identities on 100 draws with dims up to 12.

    q and q_star are independent, so the composite can come out nearly
    singular; such draws are rejected on conditioning (the exact identity
    still holds there, but no float check at 1e-11 can see it).
    """
    tol = cfg.tolerance("woodbury")
    rng = stream(cfg.seed, "woodbury")
    worst_left = worst_right = 0.0
    accepted = 0
    while accepted < 100:
        nv = 2 + accepted % 11
        nw = 1 + accepted % 6
        v, w = SpaceSpec(nv), SpaceSpec(nw)
        f = Operator(v, v, random_spd(rng, nv) + 0.5 * np.eye(nv))
        g = Operator(w, w, random_spd(rng, nw) + 0.5 * np.eye(nw))
        scale = np.sqrt(max(nv, nw))
        q = Operator(v, w, rng.standard_normal((nw, nv)) / scale)
        q_star = Operator(w, v, rng.standard_normal((nv, nw)) / scale)
        f_inv = np.linalg.solve(f.entries, np.eye(nv))
        eye = np.eye(nw)
        m_left = eye + g.entries @ q.entries @ f_inv @ q_star.entries
        m_right = eye + q.entries @ f_inv @ q_star.entries @ g.entries
        inner = f.entries + q_star.entries @ g.entries @ q.entries
        if max(cond(m_left), cond(m_right), cond(inner)) > 1e4:
            continue
        accepted += 1
        got_left = woodbury_left(f, g, q, q_star).entries
        worst_left = max(worst_left, rel_opnorm(m_left @ got_left - eye, eye))
        got_right = woodbury_right(f, g, q, q_star).entries
        worst_right = max(worst_right, rel_opnorm(m_right @ got_right - eye, eye))
    return SuiteResult("woodbury", [
        Check("inverts-left-form", worst_left <= tol, worst_left, tol),
        Check("inverts-right-form", worst_right <= tol, worst_right, tol)])


def _suite_qcheck(cfg: ScenarioConfig) -> SuiteResult:
    """Constraint-form recursion against its inversion-identity dual."""
    tol = cfg.tolerance("qcheck")
    rng = stream(cfg.seed, "qcheck")
    dims_cycle = ((3, 2, 1), (4, 3, 2), (6, 4, 2), (5, 4, 3))
    worst = 0.0
    for i in range(100):
        data = random_rg_data(rng, dims_cycle[i % 4])
        direct = qcheck_recursion(data).entries
        qs = adjoint(data.q).entries
        m = data.fq.entries + data.b * qs @ data.q.entries
        dual = data.b * (np.eye(data.space_plus.dim)
                         - data.b * data.q.entries @ np.linalg.solve(m, qs))
        worst = max(worst, rel_opnorm(dual - direct, direct))
    return SuiteResult("qcheck", [
        Check("dual-representations-agree", worst <= tol, worst, tol)])


def _suite_eda(cfg: ScenarioConfig) -> SuiteResult:
    """Closed-form kernel identities (a)-(e) on well-conditioned draws."""
    tol = cfg.tolerance("edA")
    rng = stream(cfg.seed, "edA")
    worst: dict[str, float] = {}
    conds: dict[str, float] = {}
    accepted = 0
    while accepted < 25:
        try:
            data = random_rg_data(rng, (4, 3, 2))
            ks = build_kernels(data)
        except NearSingularError:
            continue
        if max(ks.diagnostics.values()) > 1e6:
            continue
        for k, v in identity_suite(data, ks).items():
            worst[k] = max(worst.get(k, 0.0), v)
        for k, v in ks.diagnostics.items():
            conds[k] = max(conds.get(k, 0.0), v)
        accepted += 1
    checks = [Check(f"identity-{k}", v <= tol, v, tol)
              for k, v in sorted(worst.items())]
    return SuiteResult("edA", checks, condition_numbers=conds)


def _suite_preparation(cfg: ScenarioConfig) -> SuiteResult:
    """Value and gradient identities at 20 points, cubic plus quartic P."""
    tol_v = cfg.tolerance("preparation")
    tol_g = cfg.tolerance("preparation-gradient")
    rng = stream(cfg.seed, "preparation")
    spec = random_spec(rng, (3, 2, 1),
                       bidegrees=((1, 2), (0, 3), (2, 2), (1, 3), (0, 4)),
                       scale=0.3, max_cond=1e4)
    sp, sm = spec.rg.space_plus, spec.rg.space_minus
    worst_v = worst_g = 0.0
    for _ in range(20):
        ts = random_field(rng, sp, 0.5)
        tu = random_field(rng, sp, 0.5)
        fs = random_field(rng, sm, 0.5)
        fu = random_field(rng, sm, 0.5)
        v, g = preparation_check(spec, ts, tu, fs, fu)
        worst_v = max(worst_v, v)
        worst_g = max(worst_g, g)
    return SuiteResult("preparation", [
        Check("value-identity", worst_v <= tol_v, worst_v, tol_v),
        Check("gradient-identity", worst_g <= tol_g, worst_g, tol_g)],
        condition_numbers=dict(spec.kernels.diagnostics))


def _suite_fps_composition(cfg: ScenarioConfig) -> SuiteResult:
    """Composition rule coefficientwise, plus frozen reference coefficients."""
    tol = cfg.tolerance("fps-composition")
    tol_ref = cfg.tolerance("reference-coefficients")
    rng = stream(cfg.seed, "fps-composition")
    checks = []
    conds: dict[str, float] = {}
    for dims in ((3, 2, 1), (4, 3, 2)):
        spec = random_spec(rng, dims, scale=0.3, max_cond=1e4)
        out = verify_composition(spec, max_order=cfg.max_order)
        tag = "x".join(str(d) for d in dims)
        checks.append(Check(f"order-{cfg.max_order}-dims-{tag}",
                            out["max_residual"] <= tol, out["max_residual"], tol))
        for k, v in spec.kernels.diagnostics.items():
            conds[k] = max(conds.get(k, 0.0), v)
    g = 0.05
    spec = scalar_reference_spec(g=g)
    bg = fps_background(spec, max_order=2)
    cr = fps_critical(spec, bg, max_order=2)
    comp = compose_cp(bg, cr, max_order=2)
    lin = abs(complex(comp.unstarred.coefficient(0, 1).flat[0]) - 1.0 / 3.0)
    quad = abs(complex(comp.unstarred.coefficient(0, 2).flat[0]) + 2.0 * g / 27.0)
    checks.append(Check("reference-linear-coefficient", lin <= tol_ref, lin, tol_ref,
                        note="composed next-scale background, theta/3"))
    checks.append(Check("reference-quadratic-coefficient", quad <= tol_ref, quad, tol_ref,
                        note="-(2g/27) theta^2 at g = 0.05"))
    return SuiteResult("fps-composition", checks, condition_numbers=conds)


def _suite_crit_representation(cfg: ScenarioConfig) -> SuiteResult:
    """Critical series as covariance response, plus frozen reference values."""
    tol = cfg.tolerance("crit-representation")
    tol_ref = cfg.tolerance("reference-coefficients")
    rng = stream(cfg.seed, "crit-representation")
    checks = []
    conds: dict[str, float] = {}
    for dims in ((3, 2, 1), (4, 3, 2)):
        spec = random_spec(rng, dims, scale=0.3, max_cond=1e4)
        out = verify_crit_representation(spec, max_order=cfg.max_order)
        tag = "x".join(str(d) for d in dims)
        checks.append(Check(f"order-{cfg.max_order}-dims-{tag}",
                            out["max_residual"] <= tol, out["max_residual"], tol))
        lead = out["leading_vs_covariance"]
        checks.append(Check(f"leading-term-dims-{tag}", lead <= tol, lead, tol))
        for k, v in spec.kernels.diagnostics.items():
            conds[k] = max(conds.get(k, 0.0), v)
    g = 0.05
    cr = fps_critical(scalar_reference_spec(g=g), max_order=2)
    lin = abs(complex(cr.unstarred.coefficient(0, 1).flat[0]) - 2.0 / 3.0)
    quad = abs(complex(cr.unstarred.coefficient(0, 2).flat[0]) + g / 27.0)
    checks.append(Check("reference-linear-coefficient", lin <= tol_ref, lin, tol_ref,
                        note="critical field, (2/3) theta"))
    checks.append(Check("reference-quadratic-coefficient", quad <= tol_ref, quad, tol_ref,
                        note="-(g/27) theta^2 at g = 0.05"))
    return SuiteResult("crit-representation", checks, condition_numbers=conds)


def _suite_newton_vs_fps(cfg: ScenarioConfig) -> SuiteResult:
    """Newton solutions against order-4 series under field doubling.

    The ratio is measured between field scales 0.1 and 0.2: one octave
    below, the truncation error of a tame order-4 series can drop under
    the solver tolerance and the ratio would measure noise.
    """
    tol = cfg.tolerance("newton-vs-fps")
    rng = stream(cfg.seed, "newton-vs-fps")
    checks = []
    conds: dict[str, float] = {}
    for dims in ((3, 2, 1), (4, 3, 2)):
        spec = random_spec(rng, dims, bidegrees=((1, 2), (0, 3)), scale=0.2,
                           max_cond=1e4)
        tag = "x".join(str(d) for d in dims)
        for k, v in spec.kernels.diagnostics.items():
            conds[k] = max(conds.get(k, 0.0), v)
        bg = fps_background(spec, max_order=4)
        cr = fps_critical(spec, bg, max_order=4)
        cases = (("background", spec.rg.space_mid, bg, newton_background),
                 ("critical", spec.rg.space_plus, cr, newton_critical))
        for kind, space, series, solver in cases:
            dir_star = unit_field(rng, space)
            dir_u = unit_field(rng, space)

            def discrepancy(h):
                src_star = h * dir_star.components
                src_u = h * dir_u.components
                got_star, got_u = solver(spec, src_star, src_u, tol=1e-13)
                want_star, want_u = series.evaluate(src_star, src_u)
                return max(float(np.abs(got_star.components - want_star.components).max()),
                           float(np.abs(got_u.components - want_u.components).max()))

            lo = discrepancy(0.1)
            hi = discrepancy(0.2)
            ratio = hi / lo if lo > 0 else float("inf")
            checks.append(Check(f"{kind}-agreement-dims-{tag}", lo <= tol, lo, tol,
                                note="series vs Newton at field scale 0.1"))
            checks.append(Check(f"{kind}-doubling-dims-{tag}",
                                2.0 ** 4 <= ratio <= 2.0 ** 6, ratio, None,
                                note="scale 0.1 -> 0.2, expected in [2^4, 2^6]"))
    return SuiteResult("newton-vs-fps", checks, condition_numbers=conds)


def _suite_delta_a(cfg: ScenarioConfig) -> SuiteResult:
    """Increment identity at 20 points; exact quadratic reduction for P = 0."""
    tol = cfg.tolerance("deltaA")
    tol_free = cfg.tolerance("deltaA-free")
    rng = stream(cfg.seed, "deltaA")
    spec = random_spec(rng, (3, 2, 1), scale=0.3, max_cond=1e4)
    sp, smid = spec.rg.space_plus, spec.rg.space_mid
    worst = 0.0
    for _ in range(20):
        ts = unit_field(rng, sp, 0.2)
        tu = unit_field(rng, sp, 0.2)
        ds = unit_field(rng, smid, 0.04)
        du = unit_field(rng, smid, 0.04)
        direct = delta_a_direct(spec, ts, tu, ds, du)
        formula = delta_a_formula(spec, ts, tu, ds, du, max_degree=4)
        worst = max(worst, abs(direct - formula))
    free = make_action_spec(random_rg_data(rng, (3, 2, 1)))
    quad_form = free.mats["delta"] + free.rg.b * free.mats["qs"] @ free.mats["q"]
    worst_free = 0.0
    for _ in range(10):
        ts = unit_field(rng, free.rg.space_plus, 0.2)
        tu = unit_field(rng, free.rg.space_plus, 0.2)
        ds = unit_field(rng, free.rg.space_mid, 0.1)
        du = unit_field(rng, free.rg.space_mid, 0.1)
        direct = delta_a_direct(free, ts, tu, ds, du)
        want = pairing(ds, FieldVector(free.rg.space_mid, quad_form @ du.components))
        worst_free = max(worst_free, abs(direct - want))
    return SuiteResult("deltaA", [
        Check("formula-vs-direct", worst <= tol, worst, tol,
              note="absolute difference at 20 points"),
        Check("free-quadratic-reduction", worst_free <= tol_free, worst_free, tol_free)],
        condition_numbers=dict(spec.kernels.diagnostics))


def _suite_gaussian_detd(cfg: ScenarioConfig) -> SuiteResult:
    """Determinant form of the Gaussian split on random draws plus the
    reference instance 2 = 1 * 3 * (2/3)."""
    tol = cfg.tolerance("gaussian-detd")
    tol_ref = cfg.tolerance("gaussian-reference")
    rng = stream(cfg.seed, "gaussian-detd")
    dims_cycle = ((3, 2, 1), (4, 3, 2), (6, 4, 2))
    worst = 0.0
    accepted = 0
    while accepted < 25:
        try:
            out = prop_d_gaussian_check(random_rg_data(rng, dims_cycle[accepted % 3]))
        except (NearSingularError, BlockspinError):
            continue
        worst = max(worst, out["residual"])
        accepted += 1
    ref = prop_d_gaussian_check(scalar_reference_data())
    ref_err = max(abs(ref["lhs"] - 2.0), abs(ref["rhs"] - 2.0)) / 2.0
    return SuiteResult("gaussian-detd", [
        Check("random-draws", worst <= tol, worst, tol),
        Check("reference-instance", ref_err <= tol_ref, ref_err, tol_ref,
              note="det delta^{-1} = 2 = 1 * 3 * (2/3)")])


def _suite_gaussian_quadrature(cfg: ScenarioConfig) -> SuiteResult:
    """Disc-quadrature form of the split; scenario data when it is a
    one-dimensional identity-form setup, the reference family otherwise."""
    tol = cfg.tolerance("gaussian-quadrature")
    note = "reference family, g = 0.05"
    spec = None
    if cfg.lattice is None and cfg.dims == (1, 1, 1) and cfg.grams == "identity":
        spec = scenario_spec(cfg)
        note = "scenario data"
    if spec is None:
        spec = scalar_reference_spec(g=0.05)
    quad = cfg.quadrature
    try:
        out = prop_d_quadrature_check(
            spec, cfg.radii,
            nodes_per_axis=int(quad.get("nodes_per_axis", 64)),
            theta_cutoff_sigmas=float(quad.get("theta_cutoff_sigmas", 6.0)),
            tolerance=tol)
    except BlockspinError as exc:
        return SuiteResult("gaussian-quadrature", [
            Check("two-sided-agreement", False, None, tol,
                  note=f"{note}; {exc}")])
    rel = out["relative_difference"]
    dev = max(out["node_deviation"].values())
    return SuiteResult("gaussian-quadrature", [
        Check("two-sided-agreement", rel <= tol, rel, tol, note=note),
        Check("node-consistency", dev <= 0.5 * tol, dev, 0.5 * tol,
              note="nodes-per-axis refined by 1.5x")])


def _suite_lattice(cfg: ScenarioConfig) -> SuiteResult:
    """Averaging-operator invariants: normalization, tower composition,
    adjoint pairing, and block-disjoint row orthogonality."""
    tol = cfg.tolerance("lattice")
    rng = stream(cfg.seed, "lattice")
    if cfg.lattice is not None:
        profile = cfg.lattice.get("profile")
        cases = [("config", tuple(cfg.lattice["extents"]), tuple(cfg.lattice["block"]),
                  None if profile is None else np.asarray(profile, dtype=float))]
    else:
        cases = [("1d", (8,), (2,), None), ("2d", (4, 4), (2, 2), None)]
    checks = []
    for tag, extents, block, profile in cases:
        lat = TorusLattice(extents)
        scheme = BlockScheme(block, profile)
        try:
            tower = build_tower(lat, scheme, 2)
        except ValueError as exc:
            checks.append(Check(f"{tag}-tower", False, None, tol, note=str(exc)))
            continue
        q1 = tower[1].step
        q2 = tower[2].step
        ones = np.ones(lat.size)
        norm_res = float(np.abs(q1.entries @ ones - 1.0).max())
        checks.append(Check(f"{tag}-constants-preserved", norm_res <= tol,
                            norm_res, tol))
        composed = compose_averaging(q2, q1)
        comp_res = rel_opnorm(tower[2].cumulative.entries - composed.entries,
                              composed.entries)
        checks.append(Check(f"{tag}-tower-composition", comp_res <= tol,
                            comp_res, tol))
        pair_res = 0.0
        q1_star = adjoint(q1)
        fine, coarse = q1.domain, q1.codomain
        for _ in range(5):
            phi = random_field(rng, fine)
            theta = random_field(rng, coarse)
            lhs = pairing(FieldVector(coarse, q1.entries @ phi.components), theta)
            rhs = pairing(phi, FieldVector(fine, q1_star.entries @ theta.components))
            pair_res = max(pair_res, abs(lhs - rhs))
        checks.append(Check(f"{tag}-adjoint-pairing", pair_res <= tol,
                            pair_res, tol))
        c = float(scheme.profile @ scheme.profile)
        eye = c * np.eye(coarse.dim)
        orth_res = rel_opnorm(q1.entries @ q1_star.entries - eye, eye)
        checks.append(Check(f"{tag}-disjoint-rows", orth_res <= tol,
                            orth_res, tol,
                            note="Q Q* = |profile|^2 identity on disjoint blocks"))
    return SuiteResult("lattice", checks)


_SUITES = {
    "crit-representation": _suite_crit_representation,
    "deltaA": _suite_delta_a,
    "edA": _suite_eda,
    "fps-composition": _suite_fps_composition,
    "gaussian-detd": _suite_gaussian_detd,
    "gaussian-quadrature": _suite_gaussian_quadrature,
    "lattice": _suite_lattice,
    "newton-vs-fps": _suite_newton_vs_fps,
    "preparation": _suite_preparation,
    "qcheck": _suite_qcheck,
    "woodbury": _suite_woodbury,
}


def run_scenario(cfg: ScenarioConfig, timings: bool = False) -> Report:
    """Execute the configured suites and assemble the report in name order.

    A suite that raises is recorded as a failed check, not propagated, so
    one broken scenario cannot hide the results of the others.
    """
    results = []
    for name in sorted(set(cfg.suites)):
        start = time.perf_counter()
        try:
            result = _SUITES[name](cfg)
        except Exception as exc:  # noqa: BLE001 - recorded, not silenced
            result = SuiteResult(name, [
                Check("suite-execution", False,
                      note=f"{type(exc).__name__}: {exc}")])
        result.seconds = time.perf_counter() - start
        results.append(result)
    return Report(config=cfg.echo(), suites=results, timings=timings)


def emit_report(report: Report, format: str = "json") -> bytes:
    """Serialize a report; json is stable-key-ordered, text is a table."""
    if format == "json":
        return (json.dumps(report.as_dict(), sort_keys=True, indent=2) + "\n").encode()
    if format == "text":
        return _text_report(report).encode()
    raise ConfigError(f"unknown report format '{format}' (known: json, text)")


def _text_report(report: Report) -> str:
    d = report.as_dict()
    s = d["summary"]
    lines = [f"blockspin {d['artifact']['version']} verification report",
             f"summary: {s['suites']} suites, {s['checks']} checks, "
             f"{s['failures']} failures -> {'PASS' if s['passed'] else 'FAIL'}",
             ""]
    header = f"{'suite':<22}{'check':<38}{'status':<8}{'residual':<13}tolerance"
    lines.append(header)
    lines.append("-" * len(header))
    for suite in d["suites"]:
        for c in suite["checks"]:
            resid = "-" if c["residual"] is None else f"{float(c['residual']):.3e}"
            tolr = "-" if c["tolerance"] is None else f"{float(c['tolerance']):.3e}"
            status = "pass" if c["passed"] else "FAIL"
            lines.append(f"{suite['name']:<22}{c['name']:<38}{status:<8}{resid:<13}{tolr}")
            if c.get("note"):
                lines.append(f"{'':<22}  note: {c['note']}")
        if report.timings and "seconds" in suite:
            lines.append(f"{'':<22}  elapsed: {suite['seconds']} s")
    lines.append("")
    return "\n".join(lines)
