"""Structural-model families and cross-world potential-outcome populations.

Three families are supported:

* :class:`ParametricScm` -- scalar L and M with linear equations and an
  eight-coefficient outcome equation (constant, A, L, M, AL, AM, LM, ALM).
  The mediator is either linear-Gaussian or a Bernoulli draw through a
  logistic link.
* :class:`DiscreteScm` -- finite baseline-covariate support and a finite
  list of unit response types, each a complete map from interventions to
  potential values.  This representation carries the cross-world joint
  law exactly and enumerates.
* :class:`FormScm` -- structural equations written in the
  :mod:`ria_gap.forms` grammar; used for the constrained outcome
  equations whose gaps are provably zero.

Sampling is vectorized: all noise for a population is drawn in a fixed,
documented variable-major order from a single generator keyed by the
seed, so a (spec, n, seed) triple reproduces bitwise on any machine.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy.special import expit

from .forms import FormExpr, Term

GAMMA_TERMS = ("const", "a", "l", "m", "al", "am", "lm", "alm")  # gamma coefficient order
Y_COEF_TERMS = ("const", "c", "a", "l", "m", "am", "lm", "al", "alm")


class SpecError(ValueError):
    """A structural-model spec violates one of its invariants."""


def _require(cond: bool, message: str):
    if not cond:
        raise SpecError(message)


# ---------------------------------------------------------------------------
# spec families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParametricScm:
    """Linear structural equations with constant coefficients.

    L = alpha0 + alpha1*A + eps_L
    M = beta0 + beta1*A + beta2*L + beta3*A*L  [+ eps_M | logistic draw]
    Y = gamma0 + gamma1*A + gamma2*L + gamma3*M + gamma4*A*L
        + gamma5*A*M + gamma6*L*M + gamma7*A*L*M + eps_Y

    The treatment is randomized (no baseline covariate in this family).
    eps_Y is always drawn independently of (eps_L, eps_M), so the
    population-level estimand is identified from observables.
    """

    alpha: tuple[float, float]
    beta: tuple[float, float, float, float]
    gamma: tuple[float, ...]
    m_link: str = "linear"  # "linear" | "logistic-bernoulli"
    var_eps_l: float = 1.0
    var_eps_m: float = 0.0
    cov_eps_l_eps_m: float = 0.0
    var_eps_y: float = 1.0
    propensity: float = 0.5

    def __post_init__(self):
        _require(len(self.alpha) == 2, "alpha must have 2 coefficients")
        _require(len(self.beta) == 4, "beta must have 4 coefficients")
        _require(len(self.gamma) == 8, "gamma must have 8 coefficients")
        _require(self.m_link in ("linear", "logistic-bernoulli"),
                 f"m_link must be 'linear' or 'logistic-bernoulli', got {self.m_link!r}")
        _require(self.var_eps_l >= 0, "var_eps_l must be nonnegative")
        _require(self.var_eps_m >= 0, "var_eps_m must be nonnegative")
        _require(self.var_eps_y >= 0, "var_eps_y must be nonnegative")
        bound = float(np.sqrt(self.var_eps_l * self.var_eps_m))
        _require(abs(self.cov_eps_l_eps_m) <= bound + 1e-12,
                 "cov_eps_l_eps_m exceeds sqrt(var_eps_l * var_eps_m)")
        if self.m_link == "logistic-bernoulli":
            _require(self.cov_eps_l_eps_m == 0.0,
                     "cov_eps_l_eps_m only applies when m_link is 'linear'")
        _require(0.0 < self.propensity < 1.0, "propensity must lie strictly inside (0, 1)")

    @property
    def estimand_identified(self) -> bool:
        return True  # eps_Y is independent of (eps_L, eps_M) by construction

    def propensity_of(self, c) -> float:
        return self.propensity


@dataclass(frozen=True)
class DiscreteScm:
    """Finite-support model given by a response-type distribution.

    ``response_types[k]`` is a dict with keys ``l`` (pair (l0, l1)),
    ``m`` (pair (m0, m1), values from ``m_support``) and ``y`` (a
    2 x len(m_support) nested list, ``y[a][j]`` = outcome under arm a
    and mediator value ``m_support[j]``).  ``type_probs[i][k]`` is the
    probability of type k given the i-th baseline value.
    """

    c_support: tuple[tuple[float, float], ...]  # (value, prob) pairs
    m_support: tuple[float, ...]
    response_types: tuple[dict, ...]
    type_probs: tuple[tuple[float, ...], ...]  # [c_index][type_index]
    propensity: tuple[float, ...]  # P(A=1 | c) per c_support entry
    y_noise_sd: float = 0.0
    crossworld_independent: bool = False
    estimand_identified: bool = False

    def __post_init__(self):
        _require(len(self.c_support) >= 1, "c_support must be nonempty")
        probs = [p for _, p in self.c_support]
        _require(all(p > 0 for p in probs), "c_support probabilities must be positive")
        _require(abs(sum(probs) - 1.0) < 1e-9, "c_support probabilities must sum to 1")
        _require(len(set(v for v, _ in self.c_support)) == len(self.c_support),
                 "c_support values must be distinct")
        _require(len(self.m_support) >= 1, "m_support must be nonempty")
        _require(len(set(self.m_support)) == len(self.m_support), "m_support values must be distinct")
        _require(len(self.type_probs) == len(self.c_support),
                 "type_probs needs one row per c_support entry")
        _require(len(self.propensity) == len(self.c_support),
                 "propensity needs one entry per c_support entry")
        for p in self.propensity:
            _require(0.0 < p < 1.0, "propensity must lie strictly inside (0, 1)")
        msup = set(self.m_support)
        for k, rt in enumerate(self.response_types):
            _require(set(rt) >= {"l", "m", "y"}, f"response_types[{k}] missing l/m/y")
            _require(len(rt["l"]) == 2 and len(rt["m"]) == 2,
                     f"response_types[{k}] l/m must be (value under a=0, value under a=1)")
            _require(all(m in msup for m in rt["m"]),
                     f"response_types[{k}] m values must lie in m_support")
            _require(len(rt["y"]) == 2 and all(len(row) == len(self.m_support) for row in rt["y"]),
                     f"response_types[{k}] y table must cover both arms and the full m_support")
        for i, row in enumerate(self.type_probs):
            _require(len(row) == len(self.response_types),
                     f"type_probs[{i}] needs one entry per response type")
            _require(all(p >= 0 for p in row), f"type_probs[{i}] must be nonnegative")
            _require(abs(sum(row) - 1.0) < 1e-9, f"type_probs[{i}] must sum to 1")
        _require(self.y_noise_sd >= 0.0, "y_noise_sd must be nonnegative")

    def propensity_of(self, c) -> float:
        for (value, _), p in zip(self.c_support, self.propensity):
            if value == c:
                return p
        raise SpecError(f"unknown baseline value {c!r}")


@dataclass(frozen=True)
class FormScm:
    """Structural equations in the form grammar (randomized treatment).

    L = l_expr(a, el);  M = m_expr(a, l, em);  Y = y_expr(a, l, m, e1, e2)
    with el, em, e1, e2 independent standard normals scaled by
    ``noise_sd``.  ``null_kind`` is set only by :func:`prop5_scm` and
    certifies which gap the outcome equation provably annihilates.
    """

    y_expr: FormExpr
    l_expr: FormExpr
    m_expr: FormExpr
    noise_sd: dict = field(default_factory=lambda: {"el": 1.0, "em": 1.0, "e1": 1.0, "e2": 1.0})
    propensity: float = 0.5
    null_kind: str | None = None  # "nie-null" | "nde-null" | None

    def __post_init__(self):
        _require(self.y_expr.variables() <= {"a", "l", "m", "e1", "e2"},
                 "y_expr may use only a, l, m, e1, e2")
        _require(self.l_expr.variables() <= {"a", "el"}, "l_expr may use only a, el")
        _require(self.m_expr.variables() <= {"a", "l", "em"}, "m_expr may use only a, l, em")
        _require(0.0 < self.propensity < 1.0, "propensity must lie strictly inside (0, 1)")
        for k in ("el", "em", "e1", "e2"):
            _require(self.noise_sd.get(k, 0.0) >= 0.0, f"noise_sd[{k!r}] must be nonnegative")

    @property
    def estimand_identified(self) -> bool:
        return True  # outcome noises are independent of (el, em) by construction

    def propensity_of(self, c) -> float:
        return self.propensity

    def y_arm(self, a: int) -> FormExpr:
        return self.y_expr.substitute("a", a)


Scm = ParametricScm | DiscreteScm | FormScm


# ---------------------------------------------------------------------------
# cross-world outcome representations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TableY:
    """Per-unit outcome grid over (arm, mediator-support index)."""

    values: np.ndarray  # shape (2, n_m, n)
    m_support: np.ndarray  # sorted

    def m_index(self, m: np.ndarray) -> np.ndarray:
        j = np.searchsorted(self.m_support, m)
        j = np.clip(j, 0, len(self.m_support) - 1)
        if not np.all(self.m_support[j] == m):
            raise ValueError("mediator value outside the declared support")
        return j

    def evaluate(self, a: int, m) -> np.ndarray:
        n = self.values.shape[2]
        m_arr = np.broadcast_to(np.asarray(m, dtype=float), (n,))
        return self.values[a, self.m_index(m_arr), np.arange(n)]

    def evaluate_unit(self, i: int, a: int, m: float) -> float:
        j = int(self.m_index(np.asarray([m]))[0])
        return float(self.values[a, j, i])


@dataclass(frozen=True)
class LinearY:
    """Outcome of the eight-coefficient linear family, affine in m."""

    gamma: tuple[float, ...]
    l0: np.ndarray
    l1: np.ndarray
    eps_y: np.ndarray

    def base_slope(self, a: int) -> tuple[np.ndarray, np.ndarray]:
        g = self.gamma
        l = self.l1 if a == 1 else self.l0
        base = g[0] + g[1] * a + (g[2] + g[4] * a) * l + self.eps_y
        slope = (g[3] + g[5] * a) + (g[6] + g[7] * a) * l
        return base, slope

    def evaluate(self, a: int, m) -> np.ndarray:
        base, slope = self.base_slope(a)
        return base + slope * np.asarray(m, dtype=float)

    def evaluate_unit(self, i: int, a: int, m: float) -> float:
        base, slope = self.base_slope(a)
        return float(base[i] + slope[i] * m)


@dataclass(frozen=True)
class FormY:
    """Outcome evaluated from a form expression with bound unit noise."""

    arm_exprs: tuple[FormExpr, FormExpr]  # substituted at a=0, a=1
    l0: np.ndarray
    l1: np.ndarray
    e1: np.ndarray
    e2: np.ndarray

    def _values(self, a: int, m) -> dict:
        return {
            "l": self.l1 if a == 1 else self.l0,
            "m": np.asarray(m, dtype=float),
            "e1": self.e1,
            "e2": self.e2,
        }

    def evaluate(self, a: int, m) -> np.ndarray:
        n = len(self.l0)
        out = self.arm_exprs[a].evaluate(self._values(a, m))
        return np.broadcast_to(np.asarray(out, dtype=float), (n,)).copy()

    def evaluate_unit(self, i: int, a: int, m: float) -> float:
        values = {
            "l": (self.l1 if a == 1 else self.l0)[i],
            "m": float(m),
            "e1": self.e1[i],
            "e2": self.e2[i],
        }
        return float(self.arm_exprs[a].evaluate(values))


YPotentials = TableY | LinearY | FormY


# ---------------------------------------------------------------------------
# populations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UnitPotentials:
    """One unit's full cross-world potential table."""

    c: float | None
    l0: float
    l1: float
    m0: float
    m1: float
    y: Callable[[int, float], float]


@dataclass(frozen=True)
class Population(Sequence):
    """Columnar collection of unit potential tables.

    ``weights`` is None for an i.i.d. sample (every unit counts 1/n) and
    a probability vector for an enumerated distribution.  Iterating
    yields :class:`UnitPotentials` views.
    """

    c: np.ndarray | None
    l0: np.ndarray
    l1: np.ndarray
    m0: np.ndarray
    m1: np.ndarray
    y: YPotentials
    m_support: np.ndarray | None = None  # None -> continuous mediator
    weights: np.ndarray | None = None

    def __post_init__(self):
        if len(self.l0) == 0:
            raise ValueError("population must contain at least one unit")

    @property
    def n(self) -> int:
        return len(self.l0)

    def __len__(self) -> int:
        return self.n

    def unit(self, i: int) -> UnitPotentials:
        y = self.y
        return UnitPotentials(
            c=None if self.c is None else float(self.c[i]),
            l0=float(self.l0[i]),
            l1=float(self.l1[i]),
            m0=float(self.m0[i]),
            m1=float(self.m1[i]),
            y=lambda a, m, _i=i: y.evaluate_unit(_i, a, m),
        )

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self.unit(j) for j in range(*i.indices(self.n))]
        return self.unit(int(i))

    def __iter__(self) -> Iterator[UnitPotentials]:
        for i in range(self.n):
            yield self.unit(i)

    def unit_weights(self) -> np.ndarray:
        if self.weights is None:
            return np.full(self.n, 1.0 / self.n)
        return self.weights

    def strata(self) -> list[tuple[float | None, np.ndarray]]:
        """(c value, index array) pairs; a single stratum when c is None."""
        if self.c is None:
            return [(None, np.arange(self.n))]
        values = np.unique(self.c)
        return [(float(v), np.flatnonzero(self.c == v)) for v in values]


@dataclass(frozen=True)
class ObservedRow:
    c: float | None
    a: int
    l: float
    m: float
    y: float


@dataclass(frozen=True)
class ObservedData(Sequence):
    """Factual realizations: one row per unit, consistent by construction."""

    c: np.ndarray | None
    a: np.ndarray
    l: np.ndarray
    m: np.ndarray
    y: np.ndarray

    @property
    def n(self) -> int:
        return len(self.a)

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i) -> ObservedRow:
        i = int(i)
        return ObservedRow(
            c=None if self.c is None else float(self.c[i]),
            a=int(self.a[i]),
            l=float(self.l[i]),
            m=float(self.m[i]),
            y=float(self.y[i]),
        )


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def _rng(seed: int, tag: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag]))


def sample_population(spec: Scm, n: int, seed: int) -> Population:
    """Draw n i.i.d. units with their full cross-world potential tables.

    Deterministic given (spec, n, seed): all noise is drawn in a fixed
    variable-major order from one seed-keyed stream, so repeated runs
    are bitwise identical regardless of how callers schedule work.
    """
    if n < 1:
        raise SpecError("n must be >= 1")
    rng = _rng(seed, tag=1)
    if isinstance(spec, ParametricScm):
        return _sample_parametric(spec, n, rng)
    if isinstance(spec, DiscreteScm):
        return _sample_discrete(spec, n, rng)
    if isinstance(spec, FormScm):
        return _sample_form(spec, n, rng)
    raise SpecError(f"unknown spec family {type(spec).__name__}")


def _sample_parametric(spec: ParametricScm, n: int, rng: np.random.Generator) -> Population:
    a0, a1 = spec.alpha
    b0, b1, b2, b3 = spec.beta
    z1 = rng.standard_normal(n)
    z2 = rng.standard_normal(n)
    eps_y = rng.standard_normal(n) * np.sqrt(spec.var_eps_y)
    sd_l = np.sqrt(spec.var_eps_l)
    eps_l = sd_l * z1
    l0 = a0 + eps_l
    l1 = a0 + a1 + eps_l
    idx0 = b0 + b2 * l0
    idx1 = b0 + b1 + (b2 + b3) * l1
    if spec.m_link == "linear":
        if spec.var_eps_l > 0:
            rho = spec.cov_eps_l_eps_m / spec.var_eps_l
        else:
            rho = 0.0
        resid_var = max(spec.var_eps_m - rho * spec.cov_eps_l_eps_m, 0.0)
        eps_m = rho * eps_l + np.sqrt(resid_var) * z2
        m0 = idx0 + eps_m
        m1 = idx1 + eps_m
        m_support = None
    else:
        u_m = rng.random(n)
        m0 = (u_m < expit(idx0)).astype(float)
        m1 = (u_m < expit(idx1)).astype(float)
        m_support = np.array([0.0, 1.0])
    y = LinearY(tuple(spec.gamma), l0, l1, eps_y)
    return Population(None, l0, l1, m0, m1, y, m_support=m_support)


def _sample_discrete(spec: DiscreteScm, n: int, rng: np.random.Generator) -> Population:
    c_values = np.array([v for v, _ in spec.c_support])
    c_probs = np.array([p for _, p in spec.c_support])
    c_idx = rng.choice(len(c_values), size=n, p=c_probs)
    type_idx = np.zeros(n, dtype=int)
    for i in range(len(c_values)):
        mask = c_idx == i
        k = int(mask.sum())
        if k:
            type_idx[mask] = rng.choice(
                len(spec.response_types), size=k, p=np.asarray(spec.type_probs[i])
            )
    noise = rng.standard_normal(n) * spec.y_noise_sd if spec.y_noise_sd > 0 else np.zeros(n)
    return _assemble_discrete(spec, c_values[c_idx], type_idx, noise)


def _assemble_discrete(
    spec: DiscreteScm, c: np.ndarray, type_idx: np.ndarray, noise: np.ndarray,
    weights: np.ndarray | None = None,
) -> Population:
    order = np.argsort(np.asarray(spec.m_support))
    m_sorted = np.asarray(spec.m_support, dtype=float)[order]
    l_tab = np.array([rt["l"] for rt in spec.response_types], dtype=float)
    m_tab = np.array([rt["m"] for rt in spec.response_types], dtype=float)
    y_tab = np.array([rt["y"] for rt in spec.response_types], dtype=float)  # (k, 2, n_m)
    y_tab = y_tab[:, :, order]
    values = y_tab[type_idx].transpose(1, 2, 0) + noise  # (2, n_m, n)
    return Population(
        c=c.astype(float),
        l0=l_tab[type_idx, 0],
        l1=l_tab[type_idx, 1],
        m0=m_tab[type_idx, 0],
        m1=m_tab[type_idx, 1],
        y=TableY(values, m_sorted),
        m_support=m_sorted,
        weights=weights,
    )


def _sample_form(spec: FormScm, n: int, rng: np.random.Generator) -> Population:
    el = rng.standard_normal(n) * spec.noise_sd.get("el", 1.0)
    em = rng.standard_normal(n) * spec.noise_sd.get("em", 1.0)
    e1 = rng.standard_normal(n) * spec.noise_sd.get("e1", 1.0)
    e2 = rng.standard_normal(n) * spec.noise_sd.get("e2", 1.0)
    zero = np.zeros(n)
    one = np.ones(n)
    l0 = np.broadcast_to(spec.l_expr.evaluate({"a": zero, "el": el}), (n,)).astype(float)
    l1 = np.broadcast_to(spec.l_expr.evaluate({"a": one, "el": el}), (n,)).astype(float)
    m0 = np.broadcast_to(spec.m_expr.evaluate({"a": zero, "l": l0, "em": em}), (n,)).astype(float)
    m1 = np.broadcast_to(spec.m_expr.evaluate({"a": one, "l": l1, "em": em}), (n,)).astype(float)
    y = FormY((spec.y_arm(0), spec.y_arm(1)), l0, l1, e1, e2)
    return Population(None, l0, l1, m0, m1, y, m_support=None)


def enumerate_population(spec: DiscreteScm) -> Population:
    """Exact weighted population: one unit per (c value, response type).

    Outcome noise is omitted; a per-unit location shift cancels from
    every effect, gap and covariance the oracle computes, so the
    enumeration is the exact ground truth for the spec.
    """
    cs, types, weights = [], [], []
    for i, (cv, pc) in enumerate(spec.c_support):
        for k in range(len(spec.response_types)):
            w = pc * spec.type_probs[i][k]
            if w > 0.0:
                cs.append(cv)
                types.append(k)
                weights.append(w)
    return _assemble_discrete(
        spec,
        np.asarray(cs, dtype=float),
        np.asarray(types, dtype=int),
        np.zeros(len(cs)),
        weights=np.asarray(weights),
    )


def observe(population: Population, spec: Scm, seed: int) -> ObservedData:
    """Assign treatment by the spec's propensity and read off factuals."""
    rng = _rng(seed, tag=2)
    n = population.n
    if population.c is None:
        p = np.full(n, spec.propensity_of(None))
    else:
        p = np.array([spec.propensity_of(c) for c in population.c])
    a = (rng.random(n) < p).astype(int)
    l = np.where(a == 1, population.l1, population.l0)
    m = np.where(a == 1, population.m1, population.m0)
    y1 = population.y.evaluate(1, population.m1)
    y0 = population.y.evaluate(0, population.m0)
    y = np.where(a == 1, y1, y0)
    return ObservedData(c=population.c, a=a, l=l, m=m, y=y)


# ---------------------------------------------------------------------------
# named builders
# ---------------------------------------------------------------------------


def fig1_dgp(b: float) -> ParametricScm:
    """L ~ N(A,1); M ~ Bernoulli(expit(A + L + b*A*L)); Y ~ N(A+L+M+LM, 1).

    Treatment is a fair coin.  ``b`` scales the treatment-by-confounder
    interaction in the mediator equation.
    """
    return ParametricScm(
        alpha=(0.0, 1.0),
        beta=(0.0, 1.0, 1.0, float(b)),
        gamma=(0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0),
        m_link="logistic-bernoulli",
        var_eps_l=1.0,
        var_eps_m=0.0,
        var_eps_y=1.0,
        propensity=0.5,
    )


@dataclass(frozen=True)
class NullInner:
    """Pair of outcome component functions for :func:`prop5_scm`."""

    g1: FormExpr
    g2: FormExpr
    l_expr: FormExpr = field(default_factory=lambda: FormExpr((
        Term(1.0, (("a", 1),)), Term(1.0, (("el", 1),)))))
    m_expr: FormExpr = field(default_factory=lambda: FormExpr((
        Term(1.0, (("a", 1),)), Term(0.8, (("l", 1),)), Term(1.0, (("em", 1),)))))
    noise_sd: dict = field(default_factory=lambda: {"el": 1.0, "em": 1.0, "e1": 1.0, "e2": 1.0})
    propensity: float = 0.5


_PROP5_SCOPES = {
    # kind -> (allowed vars in g1, allowed vars in g2)
    "nie-null": ({"l", "m", "e1"}, {"l", "e2"}),
    "nde-null": ({"a", "l", "e1"}, {"m", "e2"}),
}


def prop5_scm(kind: str, inner: NullInner) -> FormScm:
    """Build an outcome equation whose named gap is identically zero.

    ``nie-null``:  Y = (1-A) * g1(L, M, e1) + A * g2(L, e2)  -- no
    mediator effect under treatment.  ``nde-null``:  Y = g1(A, L, e1)
    + g2(M, e2) -- the mediator enters additively separably.  Component
    functions touching a variable outside their slot are rejected.
    """
    if kind not in _PROP5_SCOPES:
        raise SpecError(f"kind must be 'nie-null' or 'nde-null', got {kind!r}")
    allowed1, allowed2 = _PROP5_SCOPES[kind]
    extra1 = inner.g1.variables() - allowed1
    extra2 = inner.g2.variables() - allowed2
    _require(not extra1, f"g1 may only use {sorted(allowed1)}; found {sorted(extra1)}")
    _require(not extra2, f"g2 may only use {sorted(allowed2)}; found {sorted(extra2)}")
    if kind == "nie-null":
        # (1-a)*g1 + a*g2
        y = inner.g1.plus(inner.g1.scaled(-1.0).times_var("a")).plus(inner.g2.times_var("a"))
    else:
        y = inner.g1.plus(inner.g2)
    return FormScm(
        y_expr=y,
        l_expr=inner.l_expr,
        m_expr=inner.m_expr,
        noise_sd=dict(inner.noise_sd),
        propensity=inner.propensity,
        null_kind=kind,
    )


def miles_scm() -> DiscreteScm:
    """Two-type population: half the units move the mediator but have no
    mediator effect on the outcome, half have a mediator effect but an
    unmoved mediator.  The natural indirect effect is exactly zero while
    its randomized analogue is 1/4."""
    return DiscreteScm(
        c_support=((0.0, 1.0),),
        m_support=(0.0, 1.0),
        response_types=(
            {"l": (0.0, 0.0), "m": (0.0, 1.0), "y": [[0.0, 0.0], [0.0, 0.0]]},
            {"l": (0.0, 0.0), "m": (0.0, 0.0), "y": [[0.0, 0.0], [0.0, 1.0]]},
        ),
        type_probs=((0.5, 0.5),),
        propensity=(0.5,),
    )


def _coupling_probs(p_lo: float, p_hi: float) -> dict[tuple[int, int], float]:
    """Joint law of two Bernoulli potentials driven by one shared uniform."""
    return {
        (1, 1): min(p_lo, p_hi),
        (1, 0): max(p_lo - p_hi, 0.0),
        (0, 1): max(p_hi - p_lo, 0.0),
        (0, 0): 1.0 - max(p_lo, p_hi),
    }


def binary_logit_dgp(
    pc: float,
    a_index: tuple[float, float],
    l_index: tuple[float, float, float],
    m_index: tuple[float, float, float, float],
    y_coef: dict[str, float],
    y_noise_sd: float = 1.0,
) -> DiscreteScm:
    """All-binary model with logistic mechanisms, enumerated exactly.

    C ~ Bernoulli(pc); P(A=1|c) = expit(a0 + a1 c);
    P(L=1|c,a)  = expit(l0 + l1 c + l2 a);
    P(M=1|c,a,l) = expit(m0 + m1 c + m2 a + m3 l);
    Y = linear combination of {const, c, a, l, m, am, lm, al, alm} plus
    independent Gaussian noise.  Within a unit each mechanism's two
    potential values share one uniform, which fixes the cross-world
    joint law; all noises are mutually independent, so the observable
    functional equals the causal quantity.
    """
    _require(0.0 < pc < 1.0, "pc must lie strictly inside (0, 1)")
    unknown = set(y_coef) - set(Y_COEF_TERMS)
    _require(not unknown, f"unknown y_coef terms {sorted(unknown)}")

    def y_formula(c, a, l, m):
        return (
            y_coef.get("const", 0.0)
            + y_coef.get("c", 0.0) * c
            + y_coef.get("a", 0.0) * a
            + y_coef.get("l", 0.0) * l
            + y_coef.get("m", 0.0) * m
            + y_coef.get("am", 0.0) * a * m
            + y_coef.get("lm", 0.0) * l * m
            + y_coef.get("al", 0.0) * a * l
            + y_coef.get("alm", 0.0) * a * l * m
        )

    response_types: list[dict] = []
    type_probs: list[list[float]] = []
    # the three mechanism uniforms are independent, so once the mediator
    # stops reading L the potential mediators are independent of every
    # potential outcome given C
    crossworld = m_index[3] == 0.0
    for c in (0.0, 1.0):
        probs_for_c: dict[int, float] = {}
        pl = {a: expit(l_index[0] + l_index[1] * c + l_index[2] * a) for a in (0, 1)}
        l_joint = _coupling_probs(pl[0], pl[1])
        for (l0, l1), w_l in l_joint.items():
            if w_l <= 0.0:
                continue
            pm0 = expit(m_index[0] + m_index[1] * c + m_index[3] * l0)
            pm1 = expit(m_index[0] + m_index[1] * c + m_index[2] + m_index[3] * l1)
            for (m0, m1), w_m in _coupling_probs(pm0, pm1).items():
                if w_m <= 0.0:
                    continue
                rt = {
                    "l": (float(l0), float(l1)),
                    "m": (float(m0), float(m1)),
                    "y": [
                        [y_formula(c, 0, l0, 0.0), y_formula(c, 0, l0, 1.0)],
                        [y_formula(c, 1, l1, 0.0), y_formula(c, 1, l1, 1.0)],
                    ],
                }
                key = _rt_key(rt)
                idx = _intern_type(response_types, rt, key)
                probs_for_c[idx] = probs_for_c.get(idx, 0.0) + w_l * w_m
        type_probs.append(probs_for_c)
    rows = []
    for probs_for_c in type_probs:
        row = [probs_for_c.get(k, 0.0) for k in range(len(response_types))]
        rows.append(tuple(row))
    return DiscreteScm(
        c_support=((0.0, 1.0 - pc), (1.0, pc)),
        m_support=(0.0, 1.0),
        response_types=tuple(response_types),
        type_probs=tuple(rows),
        propensity=tuple(float(expit(a_index[0] + a_index[1] * c)) for c in (0.0, 1.0)),
        y_noise_sd=y_noise_sd,
        crossworld_independent=crossworld,
        estimand_identified=True,
    )


def _rt_key(rt: dict) -> tuple:
    return (rt["l"], rt["m"], tuple(tuple(row) for row in rt["y"]))


def _intern_type(types: list[dict], rt: dict, key: tuple) -> int:
    for i, existing in enumerate(types):
        if _rt_key(existing) == key:
            return i
    types.append(rt)
    return len(types) - 1


def collapse_dgp() -> DiscreteScm:
    """Cross-world-collapse benchmark: the confounder slot is degenerate,
    so the gap between the total effect and its randomized analogue is
    exactly zero and a correctly sized test should reject at its nominal
    level."""
    return binary_logit_dgp(
        pc=0.5,
        a_index=(0.0, 0.3),
        l_index=(-40.0, 0.0, 0.0),  # L identically zero
        m_index=(-0.4, 0.5, 0.9, 0.0),
        y_coef={"const": 0.3, "c": 0.5, "a": 1.0, "m": 0.8, "am": 0.4},
        y_noise_sd=1.0,
    )


def divergent_dgp() -> DiscreteScm:
    """Benchmark with a strong treatment-induced confounder: L responds
    to treatment, drives the mediator, and interacts with the mediator
    in the outcome, so the gap is far from zero."""
    return binary_logit_dgp(
        pc=0.5,
        a_index=(0.0, 0.4),
        l_index=(-0.8, 0.4, 1.6),
        m_index=(-1.0, 0.3, 0.9, 1.8),
        y_coef={"const": 0.2, "c": 0.5, "a": 0.8, "l": 0.7, "m": 0.9,
                "am": 0.3, "lm": 2.0, "al": 0.3},
        y_noise_sd=1.0,
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def spec_to_jsonable(spec: Scm) -> dict:
    if isinstance(spec, ParametricScm):
        return {
            "family": "parametric",
            "alpha": list(spec.alpha),
            "beta": list(spec.beta),
            "gamma": list(spec.gamma),
            "m_link": spec.m_link,
            "noise": {
                "var_eps_l": spec.var_eps_l,
                "var_eps_m": spec.var_eps_m,
                "cov_eps_l_eps_m": spec.cov_eps_l_eps_m,
                "var_eps_y": spec.var_eps_y,
            },
            "propensity": spec.propensity,
        }
    if isinstance(spec, DiscreteScm):
        return {
            "family": "discrete",
            "c_support": [{"value": v, "prob": p} for v, p in spec.c_support],
            "m_support": list(spec.m_support),
            "response_types": [
                {"l": list(rt["l"]), "m": list(rt["m"]),
                 "y": [list(row) for row in rt["y"]]}
                for rt in spec.response_types
            ],
            "type_probs": [list(row) for row in spec.type_probs],
            "propensity": list(spec.propensity),
            "y_noise_sd": spec.y_noise_sd,
            "crossworld_independent": spec.crossworld_independent,
            "estimand_identified": spec.estimand_identified,
        }
    if isinstance(spec, FormScm):
        return {
            "family": "form",
            "y_expr": spec.y_expr.to_jsonable(),
            "l_expr": spec.l_expr.to_jsonable(),
            "m_expr": spec.m_expr.to_jsonable(),
            "noise_sd": dict(spec.noise_sd),
            "propensity": spec.propensity,
            "null_kind": spec.null_kind,
        }
    raise SpecError(f"unknown spec family {type(spec).__name__}")


def spec_from_jsonable(data: dict) -> Scm:
    family = data.get("family")
    if family == "parametric":
        noise = data.get("noise", {})
        return ParametricScm(
            alpha=tuple(data["alpha"]),
            beta=tuple(data["beta"]),
            gamma=tuple(data["gamma"]),
            m_link=data.get("m_link", "linear"),
            var_eps_l=float(noise.get("var_eps_l", 1.0)),
            var_eps_m=float(noise.get("var_eps_m", 0.0)),
            cov_eps_l_eps_m=float(noise.get("cov_eps_l_eps_m", 0.0)),
            var_eps_y=float(noise.get("var_eps_y", 1.0)),
            propensity=float(data.get("propensity", 0.5)),
        )
    if family == "discrete":
        return DiscreteScm(
            c_support=tuple((float(e["value"]), float(e["prob"])) for e in data["c_support"]),
            m_support=tuple(float(m) for m in data["m_support"]),
            response_types=tuple(
                {"l": tuple(rt["l"]), "m": tuple(rt["m"]),
                 "y": [list(map(float, row)) for row in rt["y"]]}
                for rt in data["response_types"]
            ),
            type_probs=tuple(tuple(float(p) for p in row) for row in data["type_probs"]),
            propensity=tuple(float(p) for p in data["propensity"]),
            y_noise_sd=float(data.get("y_noise_sd", 0.0)),
            crossworld_independent=bool(data.get("crossworld_independent", False)),
            estimand_identified=bool(data.get("estimand_identified", False)),
        )
    if family == "form":
        return FormScm(
            y_expr=FormExpr.from_jsonable(data["y_expr"]),
            l_expr=FormExpr.from_jsonable(data["l_expr"]),
            m_expr=FormExpr.from_jsonable(data["m_expr"]),
            noise_sd=dict(data.get("noise_sd", {})),
            propensity=float(data.get("propensity", 0.5)),
            null_kind=data.get("null_kind"),
        )
    raise SpecError(f"unknown spec family tag {family!r}")


def dumps_canonical(data) -> str:
    """Canonical JSON: sorted keys, two-space indent, trailing newline."""
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def save_spec(spec: Scm, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_canonical(spec_to_jsonable(spec)))


def load_spec(path) -> Scm:
    with open(path, encoding="utf-8") as fh:
        return spec_from_jsonable(json.load(fh))
