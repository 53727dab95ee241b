"""Small expression grammar for structural equations.

A ``FormExpr`` is a sum of terms; each term is a coefficient times a
product of integer powers of named variables and optional threshold
indicators ``1{var >= tau}``.  The grammar is deliberately tiny: it is
just rich enough to express polynomials, products and thresholds, while
keeping the set of variables a term touches statically known.  That
static knowledge is what lets the constrained-model builders reject
equations that smuggle in a forbidden variable, and what lets the
oracle factor expectations over product measures exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np


@dataclass(frozen=True)
class Term:
    """coef * prod(var**power) * prod(1{var >= tau})."""

    coef: float
    powers: tuple[tuple[str, int], ...] = ()
    gates: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "powers", tuple(sorted((v, int(p)) for v, p in self.powers)))
        object.__setattr__(self, "gates", tuple(sorted((v, float(t)) for v, t in self.gates)))
        for v, p in self.powers:
            if p < 1:
                raise ValueError(f"power of {v!r} must be >= 1, got {p}")

    def variables(self) -> frozenset[str]:
        return frozenset(v for v, _ in self.powers) | frozenset(v for v, _ in self.gates)

    def evaluate(self, values: Mapping[str, np.ndarray]) -> np.ndarray:
        out = np.asarray(self.coef, dtype=float)
        for v, p in self.powers:
            out = out * np.asarray(values[v], dtype=float) ** p
        for v, t in self.gates:
            out = out * (np.asarray(values[v], dtype=float) >= t)
        return out

    def key(self) -> tuple:
        return (self.powers, self.gates)


@dataclass(frozen=True)
class FormExpr:
    """Sum of :class:`Term`."""

    terms: tuple[Term, ...]

    @staticmethod
    def constant(value: float) -> "FormExpr":
        return FormExpr((Term(float(value)),))

    @staticmethod
    def from_terms(terms: Iterable[Term]) -> "FormExpr":
        return FormExpr(tuple(terms))

    def variables(self) -> frozenset[str]:
        out: frozenset[str] = frozenset()
        for t in self.terms:
            out |= t.variables()
        return out

    def evaluate(self, values: Mapping[str, np.ndarray]) -> np.ndarray:
        shape = ()
        for v in self.variables():
            shape = np.broadcast_shapes(shape, np.shape(values[v]))
        out = np.zeros(shape, dtype=float)
        for t in self.terms:
            out = out + t.evaluate(values)
        return out

    def substitute(self, var: str, value: float) -> "FormExpr":
        """Fix one variable to a numeric value and combine like terms.

        Terms whose coefficients cancel exactly are dropped, so e.g. the
        two copies of g1 in ``(1-a)*g1 + a*g2`` vanish identically at
        ``a=1`` and the result provably never touches g1's variables.
        """
        merged: dict[tuple, float] = {}
        order: list[tuple] = []
        for t in self.terms:
            coef = t.coef
            powers = []
            for v, p in t.powers:
                if v == var:
                    coef *= float(value) ** p
                else:
                    powers.append((v, p))
            gates = []
            for v, tau in t.gates:
                if v == var:
                    coef *= 1.0 if float(value) >= tau else 0.0
                else:
                    gates.append((v, tau))
            if coef == 0.0:
                continue
            key = (tuple(sorted(powers)), tuple(sorted(gates)))
            if key not in merged:
                merged[key] = 0.0
                order.append(key)
            merged[key] += coef
        terms = tuple(
            Term(merged[k], k[0], k[1]) for k in order if merged[k] != 0.0
        )
        return FormExpr(terms)

    def simplify(self) -> "FormExpr":
        """Combine like terms, dropping ones whose coefficients cancel."""
        merged: dict[tuple, float] = {}
        order: list[tuple] = []
        for t in self.terms:
            key = t.key()
            if key not in merged:
                merged[key] = 0.0
                order.append(key)
            merged[key] += t.coef
        return FormExpr(tuple(
            Term(merged[k], k[0], k[1]) for k in order if merged[k] != 0.0
        ))

    def scaled(self, factor: float) -> "FormExpr":
        return FormExpr(tuple(Term(t.coef * factor, t.powers, t.gates) for t in self.terms))

    def times_var(self, var: str) -> "FormExpr":
        """Multiply every term by ``var`` (used to fold treatment arms)."""
        out = []
        for t in self.terms:
            powers = dict(t.powers)
            powers[var] = powers.get(var, 0) + 1
            out.append(Term(t.coef, tuple(powers.items()), t.gates))
        return FormExpr(tuple(out))

    def plus(self, other: "FormExpr") -> "FormExpr":
        return FormExpr(self.terms + other.terms)

    # ---- serialization -------------------------------------------------

    def to_jsonable(self) -> list:
        return [
            {
                "coef": t.coef,
                "powers": {v: p for v, p in t.powers},
                "gates": [[v, tau] for v, tau in t.gates],
            }
            for t in self.terms
        ]

    @staticmethod
    def from_jsonable(data: list) -> "FormExpr":
        terms = []
        for d in data:
            terms.append(
                Term(
                    float(d["coef"]),
                    tuple((v, int(p)) for v, p in d.get("powers", {}).items()),
                    tuple((v, float(tau)) for v, tau in d.get("gates", [])),
                )
            )
        return FormExpr(tuple(terms))


def random_form(
    rng: np.random.Generator,
    variables: tuple[str, ...],
    n_terms: int = 3,
    max_power: int = 3,
    allow_gates: bool = True,
    coef_range: tuple[float, float] = (-2.0, 2.0),
) -> FormExpr:
    """Draw a random nonlinear form over the given variables."""
    terms = []
    for _ in range(n_terms):
        coef = float(rng.uniform(*coef_range))
        k = int(rng.integers(0, min(2, len(variables)) + 1))
        chosen = list(rng.choice(len(variables), size=k, replace=False)) if k else []
        powers = tuple((variables[j], int(rng.integers(1, max_power + 1))) for j in chosen)
        gates: tuple[tuple[str, float], ...] = ()
        if allow_gates and len(variables) and rng.random() < 0.3:
            j = int(rng.integers(0, len(variables)))
            gates = ((variables[j], float(rng.uniform(-1.0, 1.0))),)
        terms.append(Term(coef, powers, gates))
    return FormExpr(tuple(terms))
