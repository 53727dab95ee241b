"""Property-test harness: randomized models checked against the oracle.

Each ``check_*`` function instantiates or accepts a structural model,
computes both sides of one of the library's catalogued identities (see
README), and reports the worst violation.  Exact identities are held to
an absolute tolerance; Monte-Carlo identities are held to four
estimated standard errors of the gap.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import mannwhitney
from .oracle import combo_se, covariance_rhs, effect_components, effect_set
from .scm import (
    DiscreteScm,
    FormScm,
    NullInner,
    ParametricScm,
    SpecError,
    enumerate_population,
    prop5_scm,
    sample_population,
)
from .forms import FormExpr, Term, random_form

MC_SE_TOLERANCE = 4.0  # < 1e-4 false-failure rate per gaussian check
EXACT_TOLERANCE = 1e-10


@dataclass
class IdentityReport:
    """Outcome of checking one identity over one or more model specs."""

    proposition: str
    tolerance: float
    tolerance_kind: str  # "absolute" | "se-units"
    per_spec: list[dict] = field(default_factory=list)

    @property
    def n_specs(self) -> int:
        return len({entry.get("spec_id", i) for i, entry in enumerate(self.per_spec)})

    @property
    def max_abs_violation(self) -> float:
        if not self.per_spec:
            return 0.0
        return max(entry["violation"] for entry in self.per_spec)

    @property
    def passed(self) -> bool:
        return self.max_abs_violation <= self.tolerance

    def add(self, spec_id, violation: float, **extra):
        entry = {"spec_id": spec_id, "violation": float(violation),
                 "passed": bool(violation <= self.tolerance)}
        entry.update(extra)
        self.per_spec.append(entry)

    def merge(self, other: "IdentityReport") -> "IdentityReport":
        if (other.proposition, other.tolerance_kind) != (self.proposition, self.tolerance_kind):
            raise ValueError("cannot merge reports for different checks")
        self.per_spec.extend(other.per_spec)
        return self

    def to_jsonable(self) -> dict:
        return {
            "proposition": self.proposition,
            "n_specs": self.n_specs,
            "tolerance": self.tolerance,
            "tolerance_kind": self.tolerance_kind,
            "max_abs_violation": self.max_abs_violation,
            "passed": self.passed,
            "per_spec": self.per_spec,
        }


# ---------------------------------------------------------------------------
# randomized model generators
# ---------------------------------------------------------------------------

COEF_RANGE = (-2.0, 2.0)  # keeps logistic indices numerically benign
VAR_RANGE = (0.25, 2.0)


def random_discrete_scm(
    rng: np.random.Generator,
    n_c: int | None = None,
    n_m: int | None = None,
    binary_m: bool = False,
    single_stratum: bool = False,
) -> DiscreteScm:
    """Arbitrary finite response-type distribution (cross-world law free)."""
    if single_stratum:
        n_c = 1
    if n_c is None:
        n_c = int(rng.integers(1, 4))
    if binary_m:
        n_m = 2
    if n_m is None:
        n_m = int(rng.integers(2, 5))
    m_support = tuple(float(j) for j in range(n_m))
    n_types = int(rng.integers(2, 7))
    types = []
    for _ in range(n_types):
        types.append({
            "l": (float(rng.integers(0, 2)), float(rng.integers(0, 2))),
            "m": tuple(float(v) for v in rng.choice(m_support, size=2)),
            "y": rng.normal(0.0, 1.0, size=(2, n_m)).tolist(),
        })
    type_probs = []
    for _ in range(n_c):
        p = rng.dirichlet(np.ones(n_types))
        type_probs.append(tuple(float(x) for x in p))
    c_probs = rng.dirichlet(np.ones(n_c))
    return DiscreteScm(
        c_support=tuple((float(i), float(p)) for i, p in enumerate(c_probs)),
        m_support=m_support,
        response_types=tuple(types),
        type_probs=tuple(type_probs),
        propensity=tuple(float(rng.uniform(0.2, 0.8)) for _ in range(n_c)),
    )


def random_linear_scm(rng: np.random.Generator, beta3: float | None = None,
                      gamma7: float | None = None) -> ParametricScm:
    """Random linear-mediator parametric model, optionally pinning the
    mediator interaction or the three-way outcome interaction."""
    beta = list(rng.uniform(*COEF_RANGE, size=4))
    gamma = list(rng.uniform(*COEF_RANGE, size=8))
    if beta3 is not None:
        beta[3] = beta3
    if gamma7 is not None:
        gamma[7] = gamma7
    var_l, var_m, var_y = rng.uniform(*VAR_RANGE, size=3)
    rho = rng.uniform(-0.9, 0.9)
    return ParametricScm(
        alpha=tuple(rng.uniform(*COEF_RANGE, size=2)),
        beta=tuple(beta),
        gamma=tuple(gamma),
        m_link="linear",
        var_eps_l=float(var_l),
        var_eps_m=float(var_m),
        cov_eps_l_eps_m=float(rho * np.sqrt(var_l * var_m)),
        var_eps_y=float(var_y),
    )


def random_null_scm(rng: np.random.Generator, kind: str) -> FormScm:
    """Random constrained outcome equation of the requested null kind."""
    if kind == "nie-null":
        g1 = random_form(rng, ("l", "m", "e1"), n_terms=3, max_power=2)
        g2 = random_form(rng, ("l", "e2"), n_terms=3, max_power=2)
    elif kind == "nde-null":
        g1 = random_form(rng, ("a", "l", "e1"), n_terms=3, max_power=2)
        g2 = random_form(rng, ("m", "e2"), n_terms=3, max_power=2)
    else:
        raise SpecError(f"kind must be 'nie-null' or 'nde-null', got {kind!r}")
    l_expr = FormExpr((
        Term(float(rng.uniform(-1, 1)), (("a", 1),)),
        Term(1.0, (("el", 1),)),
    ))
    m_expr = FormExpr((
        Term(float(rng.uniform(-1, 1)), (("a", 1),)),
        Term(float(rng.uniform(-1, 1)), (("l", 1),)),
        Term(1.0, (("em", 1),)),
    ))
    return prop5_scm(kind, NullInner(g1=g1, g2=g2, l_expr=l_expr, m_expr=m_expr))


def random_crossworld_scm(rng: np.random.Generator) -> DiscreteScm:
    """Product law: mediator and outcome response components drawn
    independently given the baseline value, confounder slot degenerate."""
    n_c = int(rng.integers(1, 4))
    n_m = int(rng.integers(2, 5))
    m_support = tuple(float(j) for j in range(n_m))
    n_mcomp = int(rng.integers(2, 4))
    n_ycomp = int(rng.integers(2, 4))
    m_comps = [tuple(float(v) for v in rng.choice(m_support, size=2)) for _ in range(n_mcomp)]
    y_comps = [rng.normal(0.0, 1.0, size=(2, n_m)).tolist() for _ in range(n_ycomp)]
    types = []
    for m_pair in m_comps:
        for y_tab in y_comps:
            types.append({"l": (0.0, 0.0), "m": m_pair, "y": y_tab})
    type_probs = []
    for _ in range(n_c):
        pm = rng.dirichlet(np.ones(n_mcomp))
        py = rng.dirichlet(np.ones(n_ycomp))
        type_probs.append(tuple(float(a * b) for a in pm for b in py))
    c_probs = rng.dirichlet(np.ones(n_c))
    return DiscreteScm(
        c_support=tuple((float(i), float(p)) for i, p in enumerate(c_probs)),
        m_support=m_support,
        response_types=tuple(types),
        type_probs=tuple(type_probs),
        propensity=tuple(float(rng.uniform(0.2, 0.8)) for _ in range(n_c)),
        crossworld_independent=True,
        estimand_identified=True,
    )


# ---------------------------------------------------------------------------
# exact covariance identities (catalogue entries 1-3)
# ---------------------------------------------------------------------------


def _check_covariance_identity(prop: str, spec: DiscreteScm, spec_id) -> IdentityReport:
    report = IdentityReport(prop, EXACT_TOLERANCE, "absolute")
    pop = enumerate_population(spec)
    es = effect_set(pop, mode="exact")
    if prop in ("1", "2"):
        rhs = covariance_rhs(pop, "prop1" if prop == "1" else "prop2")
        for name, gap in (("te", es.te - es.te_r), ("nie", es.nie - es.nie_r),
                          ("nde", es.nde - es.nde_r)):
            report.add(spec_id, abs(gap - rhs[f"{name}_gap"]), check=name)
    else:  # organic representation
        rhs = covariance_rhs(pop, "prop3")
        report.add(spec_id, abs((es.nie - es.nie_organic) - rhs["nie_organic_gap"]),
                   check="nie_organic")
        report.add(spec_id, abs((es.nde - es.nde_organic) - rhs["nde_organic_gap"]),
                   check="nde_organic")
    if not es.triangle_bound_holds():
        report.add(spec_id, float("inf"), check="triangle_bound")
    return report


def check_prop1(n_specs: int = 200, seed: int = 0) -> IdentityReport:
    """Binary mediator, no strata: gaps equal unconditional covariances."""
    rng = np.random.default_rng(seed)
    report = IdentityReport("1", EXACT_TOLERANCE, "absolute")
    for k in range(n_specs):
        spec = random_discrete_scm(rng, binary_m=True, single_stratum=True)
        report.merge(_check_covariance_identity("1", spec, k))
    return report


def check_prop2(n_specs: int = 200, seed: int = 0) -> IdentityReport:
    """General discrete case: gaps equal stratified covariance sums."""
    rng = np.random.default_rng(seed)
    report = IdentityReport("2", EXACT_TOLERANCE, "absolute")
    for k in range(n_specs):
        spec = random_discrete_scm(rng)
        report.merge(_check_covariance_identity("2", spec, k))
    return report


def check_prop3(n_specs: int = 200, seed: int = 0) -> IdentityReport:
    """Organic decomposition: gaps equal the signed covariance sum."""
    rng = np.random.default_rng(seed)
    report = IdentityReport("3", EXACT_TOLERANCE, "absolute")
    for k in range(n_specs):
        spec = random_discrete_scm(rng)
        report.merge(_check_covariance_identity("3", spec, k))
    return report


# ---------------------------------------------------------------------------
# linear closed forms (catalogue entry 4)
# ---------------------------------------------------------------------------

_NIE_GAP_COMBO = (("n11", 1.0), ("n10", -1.0), ("r11", -1.0), ("r10", 1.0))
_NDE_GAP_COMBO = (("n10", 1.0), ("n00", -1.0), ("r10", -1.0), ("r00", 1.0))


def mc_gaps(pop) -> dict:
    """Monte-Carlo nie/nde gaps with delta-method standard errors."""
    comp = effect_components(pop, mode="mc", seed=0)
    val = {k: v for k, (v, _) in comp.items()}
    return {
        "nie_gap": (val["n11"] - val["n10"]) - (val["r11"] - val["r10"]),
        "nie_se": combo_se(comp, _NIE_GAP_COMBO),
        "nde_gap": (val["n10"] - val["n00"]) - (val["r10"] - val["r00"]),
        "nde_se": combo_se(comp, _NDE_GAP_COMBO),
    }


def check_prop4(spec: ParametricScm, n_mc: int, seed: int) -> IdentityReport:
    """Closed-form gaps of the linear family versus the Monte-Carlo oracle.

    nie gap: (gamma6 + gamma7) * beta3 * Var(eps_L);
    nde gap: gamma7 * beta2 * Var(eps_L) + gamma7 * Cov(eps_L, eps_M).
    """
    if not isinstance(spec, ParametricScm) or spec.m_link != "linear":
        raise SpecError("closed forms require the linear mediator link")
    pop = sample_population(spec, n_mc, seed)
    gaps = mc_gaps(pop)
    closed_nie = (spec.gamma[6] + spec.gamma[7]) * spec.beta[3] * spec.var_eps_l
    closed_nde = (spec.gamma[7] * spec.beta[2] * spec.var_eps_l
                  + spec.gamma[7] * spec.cov_eps_l_eps_m)
    report = IdentityReport("4", MC_SE_TOLERANCE, "se-units")
    for name, closed in (("nie", closed_nie), ("nde", closed_nde)):
        gap, se = gaps[f"{name}_gap"], gaps[f"{name}_se"]
        z = abs(gap - closed) / se if se > 0 else (0.0 if gap == closed else float("inf"))
        report.add(seed, z, check=name, mc_gap=gap, closed_form=closed, se=se)
    return report


# ---------------------------------------------------------------------------
# constrained outcome equations (catalogue entry 5)
# ---------------------------------------------------------------------------


def _probe_values(pop) -> np.ndarray:
    pool = np.concatenate([pop.m0, pop.m1])
    qs = np.quantile(pool, [0.0, 0.25, 0.5, 0.75, 1.0])
    return np.unique(qs)


def _split_l_terms(expr: FormExpr) -> tuple[FormExpr, FormExpr]:
    with_l = tuple(t for t in expr.terms if "l" in t.variables())
    without_l = tuple(t for t in expr.terms if "l" not in t.variables())
    return FormExpr(without_l), FormExpr(with_l)


def unit_constancy_spread(scm: FormScm, pop, kind: str) -> float:
    """Largest per-unit variation over probe mediator values of the
    quantity the constrained equation promises is mediator-free.

    For the additive-separable kind the arm difference is assembled
    term-by-term: terms free of the confounder bind identically in both
    arms and cancel exactly; confounder-bearing terms keep their own
    arm's potential confounder value.
    """
    probes = _probe_values(pop)
    n = pop.n
    if kind == "nie-null":
        parts = [(scm.y_arm(1).simplify(), pop.l1)]
    else:
        free1, bound1 = _split_l_terms(scm.y_arm(1))
        free0, bound0 = _split_l_terms(scm.y_arm(0).scaled(-1.0))
        parts = [
            (free1.plus(free0).simplify(), None),
            (bound1, pop.l1),
            (bound0, pop.l0),
        ]
    base = {"e1": pop.y.e1, "e2": pop.y.e2}
    baseline = None
    spread = 0.0
    for m_val in probes:
        out = np.zeros(n)
        for expr, l_arr in parts:
            values = dict(base, m=np.full(n, m_val))
            if l_arr is not None:
                values["l"] = l_arr
            out = out + np.broadcast_to(expr.evaluate(values), (n,))
        if baseline is None:
            baseline = out.copy()
        spread = max(spread, float(np.max(np.abs(out - baseline))))
    return spread


def check_prop5(scm: FormScm, n_mc: int, seed: int) -> IdentityReport:
    """A constrained equation's own gap vanishes, and the per-unit
    mediator-constancy condition behind it holds exactly on samples."""
    if not isinstance(scm, FormScm) or scm.null_kind is None:
        raise SpecError("check requires a constrained model built by prop5_scm")
    kind = scm.null_kind
    pop = sample_population(scm, n_mc, seed)
    gaps = mc_gaps(pop)
    which = "nie" if kind == "nie-null" else "nde"
    gap, se = gaps[f"{which}_gap"], gaps[f"{which}_se"]
    z = abs(gap) / se if se > 0 else (0.0 if gap == 0 else float("inf"))
    report = IdentityReport("5", MC_SE_TOLERANCE, "se-units")
    report.add(seed, z, check=f"{which}_gap", gap=gap, se=se, kind=kind)
    spread = unit_constancy_spread(scm, pop, kind)
    report.add(seed, 0.0 if spread == 0.0 else float("inf"),
               check="unit_constancy", max_spread=spread, kind=kind)
    return report


# ---------------------------------------------------------------------------
# cross-world collapse (assumption 5 by construction)
# ---------------------------------------------------------------------------


def check_crossworld_collapse(spec: DiscreteScm, seed: int | None = None) -> IdentityReport:
    """Independent mediator/outcome components force naturals == RIAs.

    Computed by exact enumeration; when a seed is given, a sampled
    population is also checked to lie within four draws-based standard
    errors of zero.
    """
    if not isinstance(spec, DiscreteScm) or not spec.crossworld_independent:
        raise SpecError("spec is not flagged cross-world independent")
    report = IdentityReport("collapse", EXACT_TOLERANCE, "absolute")
    es = effect_set(enumerate_population(spec), mode="exact")
    report.add(0, abs(es.te - es.te_r), check="te")
    report.add(0, abs(es.nie - es.nie_r), check="nie")
    report.add(0, abs(es.nde - es.nde_r), check="nde")
    report.add(0, abs(es.nie - es.nie_organic), check="nie_organic")
    if seed is not None:
        pop = sample_population(spec, 20_000, seed)
        comp = effect_components(pop, mode="mc", seed=seed)
        val = {k: v for k, (v, _) in comp.items()}
        gap = (val["n11"] - val["n00"]) - (val["r11"] - val["r00"])
        se = combo_se(comp, (("n11", 1.0), ("n00", -1.0), ("r11", -1.0), ("r00", 1.0)))
        z = abs(gap) / se if se > 0 else (0.0 if gap == 0 else float("inf"))
        report.per_spec.append({"spec_id": 0, "violation": 0.0 if z <= MC_SE_TOLERANCE else z,
                                "passed": z <= MC_SE_TOLERANCE, "check": "sampled_te_gap",
                                "z": z, "gap": gap, "se": se})
    return report


# ---------------------------------------------------------------------------
# batch driver (CLI)
# ---------------------------------------------------------------------------


def _batch_one(prop: str, seed: int, n_mc: int) -> IdentityReport:
    rng = np.random.default_rng(seed)
    if prop == "1":
        return _check_covariance_identity("1", random_discrete_scm(rng, binary_m=True, single_stratum=True), seed)
    if prop == "2":
        return _check_covariance_identity("2", random_discrete_scm(rng), seed)
    if prop == "3":
        return _check_covariance_identity("3", random_discrete_scm(rng), seed)
    if prop == "4":
        return check_prop4(random_linear_scm(rng), n_mc, seed)
    if prop == "5":
        kind = "nie-null" if seed % 2 == 0 else "nde-null"
        return check_prop5(random_null_scm(rng, kind), n_mc, seed)
    if prop == "collapse":
        return check_crossworld_collapse(random_crossworld_scm(rng), seed=seed)
    raise SpecError(f"unknown identity {prop!r}")


def run_identity_batch(prop: str, n_seeds: int, seed: int, n_mc: int = 200_000) -> IdentityReport:
    """Check one identity over ``n_seeds`` randomized models.

    Seeds are derived as base seed + index; checks are independent jobs
    and run in parallel when RIA_GAP_THREADS > 1, with results merged in
    seed order so the report is schedule-independent.
    """
    seeds = [seed + i for i in range(n_seeds)]
    workers = int(os.environ.get("RIA_GAP_THREADS", "1") or "1")
    if workers > 1 and n_seeds > 1:
        try:
            with ProcessPoolExecutor(max_workers=min(workers, n_seeds)) as pool:
                reports = list(pool.map(_batch_one, [prop] * n_seeds, seeds, [n_mc] * n_seeds))
        except OSError:
            reports = [_batch_one(prop, s, n_mc) for s in seeds]
    else:
        reports = [_batch_one(prop, s, n_mc) for s in seeds]
    merged = reports[0]
    for r in reports[1:]:
        merged.merge(r)
    return merged


def check_prop7(n_specs: int = 200, seed: int = 0) -> IdentityReport:
    """Rank-probability covariance identity over random joint outcome laws."""
    rng = np.random.default_rng(seed)
    report = IdentityReport("7", EXACT_TOLERANCE, "absolute")
    for k in range(n_specs):
        law = mannwhitney.random_joint_law(rng)
        res = mannwhitney.mw_oracle(law)
        report.add(k, abs(res.gap - res.covariance_sum), check="gap_vs_covariance")
        if res.binary_cov is not None:
            report.add(k, abs(res.gap - res.binary_cov), check="binary_collapse")
    return report
