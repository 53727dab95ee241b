"""Ground-truth mediation estimands computed directly from potentials.

Natural effects average within-unit cross-world contrasts.  Their
randomized analogues replace each unit's own mediator value with a draw
from the mediator distribution of the unit's baseline stratum, which by
construction is an expectation over the product of the stratum's
outcome and mediator margins.

Two modes:

* ``exact`` -- the population (usually an enumerated distribution, or
  any finite discrete population treated as complete) is integrated
  exactly; standard errors are zero and every covariance identity holds
  to rounding.  Requires a discrete mediator and discrete strata.
* ``mc`` -- the population is an i.i.d. sample.  For a discrete
  mediator the randomized draw is realized (one draw per unit from the
  empirical stratum distribution); for a continuous mediator the
  product-measure expectation factorizes term by term through the known
  outcome structure, so no draw noise is added.  Per-field standard
  errors come from delta-method influence contributions.

Population covariances divide by the total mass, not n-1: the oracle
treats the population it is handed as the full population.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scm import FormY, LinearY, Population

EFFECT_FIELDS = ("te", "nie", "nde", "te_r", "nie_r", "nde_r", "nie_organic", "nde_organic")


class OracleError(ValueError):
    pass


def _wmean(x: np.ndarray, w: np.ndarray) -> float:
    return float(np.sum(w * x))


def _wcov(x: np.ndarray, y: np.ndarray, w: np.ndarray) -> float:
    """Population covariance under normalized weights."""
    mx = np.sum(w * x)
    my = np.sum(w * y)
    return float(np.sum(w * (x - mx) * (y - my)))


@dataclass(frozen=True)
class EffectSet:
    """All eight mediation estimands with provenance.

    Sums are assembled definitionally (te = nie + nde, te_r = nie_r +
    nde_r, nde_organic = te - nie_organic) so the decompositions hold
    bitwise, not merely to rounding.
    """

    te: float
    nie: float
    nde: float
    te_r: float
    nie_r: float
    nde_r: float
    nie_organic: float
    nde_organic: float
    mode: str
    n_units: int
    mc_se: dict = field(default_factory=dict)

    def gap(self, which: str) -> float:
        if which == "te":
            return self.te - self.te_r
        if which == "nie":
            return self.nie - self.nie_r
        if which == "nde":
            return self.nde - self.nde_r
        if which == "nie_organic":
            return self.nie - self.nie_organic
        if which == "nde_organic":
            return self.nde - self.nde_organic
        raise ValueError(f"unknown gap {which!r}")

    def triangle_bound_holds(self) -> bool:
        return abs(self.te - self.te_r) <= abs(self.nie - self.nie_r) + abs(self.nde - self.nde_r)

    def to_jsonable(self) -> dict:
        out = {f: getattr(self, f) for f in EFFECT_FIELDS}
        out["mode"] = self.mode
        out["n_units"] = self.n_units
        out["mc_se"] = {k: self.mc_se[k] for k in sorted(self.mc_se)}
        return out


# ---------------------------------------------------------------------------
# components: E(Y_{a, M_{a'}}) and E(Y_{a, G_{a'}}) with influence vectors
# ---------------------------------------------------------------------------


def _natural_component(pop: Population, a: int, a_prime: int):
    m = pop.m1 if a_prime == 1 else pop.m0
    contrib = pop.y.evaluate(a, m)
    w = pop.unit_weights()
    value = _wmean(contrib, w)
    return value, contrib - value


def _cross_exact(pop: Population, a: int, a_prime: int) -> float:
    if pop.m_support is None:
        raise OracleError("MC mode required: continuous mediator cannot be enumerated")
    if pop.c is not None and np.asarray(pop.c).dtype.kind not in "ifb":
        raise OracleError("baseline strata must be discrete")
    w = pop.unit_weights()
    m_src = pop.m1 if a_prime == 1 else pop.m0
    total = 0.0
    for _, idx in pop.strata():
        ws = w[idx]
        mass = float(ws.sum())
        if mass <= 0.0:
            raise OracleError("stratum with zero mass")
        cond = ws / mass
        inner = 0.0
        for m_val in pop.m_support:
            ey = float(np.sum(cond * pop.y.evaluate(a, m_val)[idx]))
            fm = float(np.sum(cond * (m_src[idx] == m_val)))
            inner += ey * fm
        total += mass * inner
    return total


def _cross_mc_draw(pop: Population, a: int, a_prime: int, g_idx: np.ndarray):
    m_src = pop.m1 if a_prime == 1 else pop.m0
    contrib = pop.y.evaluate(a, m_src[g_idx])
    value = float(contrib.mean())
    return value, contrib - value


def _g_indices(pop: Population, rng: np.random.Generator) -> np.ndarray:
    """One uniform draw per unit from its own stratum's unit indices."""
    g = np.empty(pop.n, dtype=int)
    for _, idx in pop.strata():
        g[idx] = idx[rng.integers(0, len(idx), size=len(idx))]
    return g


def _cross_factorized(pop: Population, a: int, a_prime: int):
    """Product-measure expectation through the known outcome structure.

    Works because each outcome term is a product of unit-level factors
    and mediator-level factors; within a stratum the expectation over
    the product measure is the product of the two factor means.
    """
    m_src = pop.m1 if a_prime == 1 else pop.m0
    if isinstance(pop.y, LinearY):
        base, slope = pop.y.base_slope(a)
        parts = [(base, np.ones(pop.n)), (slope, m_src)]
    elif isinstance(pop.y, FormY):
        parts = _form_parts(pop.y, a, m_src)
    else:
        raise OracleError("factorized mode needs a structured outcome representation")
    w = pop.unit_weights()
    value = 0.0
    infl = np.zeros(pop.n)
    g_strat = np.zeros(pop.n)
    for _, idx in pop.strata():
        ws = w[idx]
        mass = float(ws.sum())
        cond = ws / mass
        g_s = 0.0
        for u, v in parts:
            u_bar = float(np.sum(cond * u[idx]))
            v_bar = float(np.sum(cond * v[idx]))
            g_s += u_bar * v_bar
            infl[idx] += v_bar * (u[idx] - u_bar) + u_bar * (v[idx] - v_bar)
        g_strat[idx] = g_s
        value += mass * g_s
    infl += g_strat - value  # stratum-share estimation contribution
    return value, infl


def _form_parts(y: FormY, a: int, m_src: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    expr = y.arm_exprs[a]
    unit_values = {"l": y.l1 if a == 1 else y.l0, "e1": y.e1, "e2": y.e2}
    n = len(m_src)
    parts = []
    for t in expr.terms:
        u = np.full(n, t.coef)
        v = np.ones(n)
        for var, p in t.powers:
            if var == "m":
                v = v * m_src ** p
            else:
                u = u * unit_values[var] ** p
        for var, tau in t.gates:
            if var == "m":
                v = v * (m_src >= tau)
            else:
                u = u * (unit_values[var] >= tau)
        parts.append((u, v))
    return parts


def effect_components(pop: Population, mode: str = "exact", seed: int | None = None) -> dict:
    """Means of Y_{a,M_{a'}} and Y_{a,G_{a'}} plus influence vectors.

    Returns ``{name: (value, influence)}`` for names n11, n10, n00,
    r11, r10, r00; influence vectors are centered per-unit contributions
    (None in exact mode).
    """
    if mode not in ("exact", "mc"):
        raise OracleError(f"mode must be 'exact' or 'mc', got {mode!r}")
    if pop.n == 0:
        raise OracleError("empty population")
    out: dict[str, tuple[float, np.ndarray | None]] = {}
    for name, (a, ap) in (("n11", (1, 1)), ("n10", (1, 0)), ("n00", (0, 0))):
        value, infl = _natural_component(pop, a, ap)
        out[name] = (value, infl if mode == "mc" else None)
    if mode == "exact":
        for name, (a, ap) in (("r11", (1, 1)), ("r10", (1, 0)), ("r00", (0, 0))):
            out[name] = (_cross_exact(pop, a, ap), None)
        return out
    # mc mode
    if pop.weights is not None:
        raise OracleError("mc mode expects an equally weighted sampled population")
    if pop.m_support is not None:
        if seed is None:
            raise OracleError("mc mode with a discrete mediator needs a seed for the draws")
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 3]))
        g1 = _g_indices(pop, rng)
        g0 = _g_indices(pop, rng)
        out["r11"] = _cross_mc_draw(pop, 1, 1, g1)
        out["r10"] = _cross_mc_draw(pop, 1, 0, g0)
        out["r00"] = _cross_mc_draw(pop, 0, 0, g0)
    else:
        out["r11"] = _cross_factorized(pop, 1, 1)
        out["r10"] = _cross_factorized(pop, 1, 0)
        out["r00"] = _cross_factorized(pop, 0, 0)
    return out


_EFFECT_COMBOS = {
    "te": (("n11", 1.0), ("n00", -1.0)),
    "nie": (("n11", 1.0), ("n10", -1.0)),
    "nde": (("n10", 1.0), ("n00", -1.0)),
    "te_r": (("r11", 1.0), ("r00", -1.0)),
    "nie_r": (("r11", 1.0), ("r10", -1.0)),
    "nde_r": (("r10", 1.0), ("r00", -1.0)),
    "nie_organic": (("n11", 1.0), ("r10", -1.0)),
    "nde_organic": (("r10", 1.0), ("n00", -1.0)),
}


def combo_se(components: dict, combo: tuple[tuple[str, float], ...]) -> float:
    """Delta-method standard error of a linear combination of components."""
    infl = None
    for name, w in combo:
        vec = components[name][1]
        if vec is None:
            return 0.0
        infl = w * vec if infl is None else infl + w * vec
    n = len(infl)
    return float(np.sqrt(np.mean(infl**2) / n))


def effect_set(pop: Population, mode: str = "exact", seed: int | None = None) -> EffectSet:
    comp = effect_components(pop, mode=mode, seed=seed)
    val = {k: v for k, (v, _) in comp.items()}
    nie = val["n11"] - val["n10"]
    nde = val["n10"] - val["n00"]
    te = nie + nde
    nie_r = val["r11"] - val["r10"]
    nde_r = val["r10"] - val["r00"]
    te_r = nie_r + nde_r
    nie_organic = val["n11"] - val["r10"]
    nde_organic = te - nie_organic
    mc_se = {}
    if mode == "mc":
        for name, combo in _EFFECT_COMBOS.items():
            mc_se[name] = combo_se(comp, combo)
    return EffectSet(
        te=te, nie=nie, nde=nde, te_r=te_r, nie_r=nie_r, nde_r=nde_r,
        nie_organic=nie_organic, nde_organic=nde_organic,
        mode=mode, n_units=pop.n, mc_se=mc_se,
    )


def natural_effects(pop: Population) -> tuple[float, float, float]:
    """(te, nie, nde) as population means of within-unit contrasts."""
    if pop.n == 0:
        raise OracleError("empty population")
    n11, _ = _natural_component(pop, 1, 1)
    n10, _ = _natural_component(pop, 1, 0)
    n00, _ = _natural_component(pop, 0, 0)
    nie = n11 - n10
    nde = n10 - n00
    return nie + nde, nie, nde


def ria_effects(pop: Population, mode: str = "exact", seed: int | None = None):
    """(te_r, nie_r, nde_r) under the chosen mode."""
    es = effect_set(pop, mode=mode, seed=seed)
    return es.te_r, es.nie_r, es.nde_r


def organic_effects(pop: Population, mode: str = "exact", seed: int | None = None):
    """(nie_organic, nde_organic) under the chosen mode."""
    es = effect_set(pop, mode=mode, seed=seed)
    return es.nie_organic, es.nde_organic


# ---------------------------------------------------------------------------
# covariance right-hand sides
# ---------------------------------------------------------------------------


def covariance_rhs(pop: Population, which: str) -> dict[str, float]:
    """Covariance representations of the natural-vs-randomized gaps.

    ``prop1`` needs a binary mediator and a single stratum; ``prop2``
    and ``prop3`` need a discrete mediator (strata may be trivial).
    """
    if which == "prop1":
        return _rhs_binary(pop)
    if which == "prop2":
        return _rhs_general(pop)
    if which == "prop3":
        return _rhs_organic(pop)
    raise OracleError(f"which must be 'prop1', 'prop2' or 'prop3', got {which!r}")


def _require_discrete_m(pop: Population):
    if pop.m_support is None:
        raise OracleError("covariance representation requires a discrete mediator")


def _rhs_binary(pop: Population) -> dict[str, float]:
    _require_discrete_m(pop)
    if set(np.asarray(pop.m_support).tolist()) != {0.0, 1.0}:
        raise OracleError("binary-mediator representation requires support {0, 1}")
    if pop.c is not None and len(np.unique(pop.c)) > 1:
        raise OracleError("binary-mediator representation requires no baseline strata")
    w = pop.unit_weights()
    y11 = pop.y.evaluate(1, 1.0)
    y10 = pop.y.evaluate(1, 0.0)
    y01 = pop.y.evaluate(0, 1.0)
    y00 = pop.y.evaluate(0, 0.0)
    return {
        "te_gap": _wcov(pop.m1, y11 - y10, w) - _wcov(pop.m0, y01 - y00, w),
        "nie_gap": _wcov(pop.m1 - pop.m0, y11 - y10, w),
        "nde_gap": _wcov(pop.m0, y11 - y10 - y01 + y00, w),
    }


def _rhs_general(pop: Population) -> dict[str, float]:
    _require_discrete_m(pop)
    w = pop.unit_weights()
    te_gap = nie_gap = nde_gap = 0.0
    for _, idx in pop.strata():
        ws = w[idx]
        mass = float(ws.sum())
        cond = ws / mass
        for m_val in pop.m_support:
            ind1 = (pop.m1[idx] == m_val).astype(float)
            ind0 = (pop.m0[idx] == m_val).astype(float)
            y1m = pop.y.evaluate(1, m_val)[idx]
            y0m = pop.y.evaluate(0, m_val)[idx]
            te_gap += mass * (_wcov(ind1, y1m, cond) - _wcov(ind0, y0m, cond))
            nie_gap += mass * _wcov(ind1 - ind0, y1m, cond)
            nde_gap += mass * _wcov(ind0, y1m - y0m, cond)
    return {"te_gap": te_gap, "nie_gap": nie_gap, "nde_gap": nde_gap}


def _rhs_organic(pop: Population) -> dict[str, float]:
    _require_discrete_m(pop)
    w = pop.unit_weights()
    s = 0.0
    for _, idx in pop.strata():
        ws = w[idx]
        mass = float(ws.sum())
        cond = ws / mass
        for m_val in pop.m_support:
            ind0 = (pop.m0[idx] == m_val).astype(float)
            y1m = pop.y.evaluate(1, m_val)[idx]
            s += mass * _wcov(ind0, y1m, cond)
    return {"nie_organic_gap": -s, "nde_organic_gap": s}
