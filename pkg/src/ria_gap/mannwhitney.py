"""Rank-probability estimands on the joint law of the two potential outcomes.

The natural quantity is the probability that a unit's outcome under
treatment weakly exceeds its own outcome under control.  Its randomized
analogue compares two independent draws, one from each marginal.  The
two differ exactly by a double covariance sum over the outcome
supports, and for binary outcomes that sum collapses to Cov(Y1, Y0).
Ties count as wins (the ``>=`` convention), with no half-tie credit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scm import Population


class MwError(ValueError):
    pass


@dataclass(frozen=True)
class JointOutcomes:
    """Per-unit joint realization of both potential outcomes."""

    y1: np.ndarray
    y0: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        if len(self.y1) != len(self.y0) or len(self.y1) == 0:
            raise MwError("y1 and y0 must be equal-length and nonempty")

    @property
    def n(self) -> int:
        return len(self.y1)

    def unit_weights(self) -> np.ndarray:
        if self.weights is None:
            return np.full(self.n, 1.0 / self.n)
        return self.weights


def from_mediation_population(pop: Population) -> JointOutcomes:
    """Factual potential outcomes Y_a = Y_{a, M_a} of a mediation population."""
    return JointOutcomes(
        y1=pop.y.evaluate(1, pop.m1),
        y0=pop.y.evaluate(0, pop.m0),
        weights=pop.weights,
    )


@dataclass(frozen=True)
class MwEffectSet:
    natural: float      # P(Y1 >= Y0), within-unit
    ria: float          # P(H1 >= H0), independent draws from the margins
    gap: float          # natural - ria
    covariance_sum: float  # double covariance sum over both supports
    binary_cov: float | None  # Cov(Y1, Y0) when both supports are within {0,1}

    def to_jsonable(self) -> dict:
        return {
            "natural": self.natural,
            "ria": self.ria,
            "gap": self.gap,
            "covariance_sum": self.covariance_sum,
            "binary_cov": self.binary_cov,
        }


def mw_oracle(joint: JointOutcomes | Population) -> MwEffectSet:
    """Exact rank-probability estimands for a finite joint outcome law.

    The analogue is the full cross-pairing over the population product
    measure (no draw noise), and the gap is cross-checked against the
    covariance-sum representation computed from the tabulated joint law.
    """
    if isinstance(joint, Population):
        joint = from_mediation_population(joint)
    w = joint.unit_weights()
    natural = float(np.sum(w * (joint.y1 >= joint.y0)))

    t_support, t_inv = np.unique(joint.y1, return_inverse=True)
    s_support, s_inv = np.unique(joint.y0, return_inverse=True)
    if len(t_support) == 0 or len(s_support) == 0:
        raise MwError("empty outcome support")
    p_joint = np.zeros((len(t_support), len(s_support)))
    np.add.at(p_joint, (t_inv, s_inv), w)
    p1 = p_joint.sum(axis=1)
    p0 = p_joint.sum(axis=0)

    ge = t_support[:, None] >= s_support[None, :]
    ria = float(np.sum(ge * np.outer(p1, p0)))
    covariance_sum = float(np.sum(ge * (p_joint - np.outer(p1, p0))))

    binary_cov = None
    if set(t_support.tolist()) <= {0.0, 1.0} and set(s_support.tolist()) <= {0.0, 1.0}:
        binary_cov = float(np.sum(w * joint.y1 * joint.y0)
                           - np.sum(w * joint.y1) * np.sum(w * joint.y0))

    return MwEffectSet(
        natural=natural,
        ria=ria,
        gap=natural - ria,
        covariance_sum=covariance_sum,
        binary_cov=binary_cov,
    )


def random_joint_law(rng: np.random.Generator, max_support: int = 5,
                     binary: bool = False) -> JointOutcomes:
    """Random discrete joint law, enumerated with probability weights."""
    if binary:
        t_support = s_support = np.array([0.0, 1.0])
    else:
        t_support = np.sort(rng.normal(0.0, 1.0, size=int(rng.integers(2, max_support + 1))))
        s_support = np.sort(rng.normal(0.0, 1.0, size=int(rng.integers(2, max_support + 1))))
    probs = rng.dirichlet(np.ones(len(t_support) * len(s_support)))
    tt, ss = np.meshgrid(t_support, s_support, indexing="ij")
    return JointOutcomes(y1=tt.ravel(), y0=ss.ravel(), weights=probs)


def independent_joint_law(rng: np.random.Generator, max_support: int = 5) -> JointOutcomes:
    """Product law: the two margins are independent, so the gap is zero."""
    t_support = np.sort(rng.normal(0.0, 1.0, size=int(rng.integers(2, max_support + 1))))
    s_support = np.sort(rng.normal(0.0, 1.0, size=int(rng.integers(2, max_support + 1))))
    p1 = rng.dirichlet(np.ones(len(t_support)))
    p0 = rng.dirichlet(np.ones(len(s_support)))
    tt, ss = np.meshgrid(t_support, s_support, indexing="ij")
    return JointOutcomes(y1=tt.ravel(), y0=ss.ravel(), weights=np.outer(p1, p0).ravel())


def find_sign_reversal(n_specs: int = 500, seed: int = 0, margin: float = 0.01) -> dict | None:
    """Search random joint laws for a witness where the natural estimand
    and its analogue sit on opposite sides of one half."""
    rng = np.random.default_rng(seed)
    for k in range(n_specs):
        law = random_joint_law(rng)
        res = mw_oracle(law)
        if (res.natural - 0.5) * (res.ria - 0.5) < 0 \
                and abs(res.natural - 0.5) > margin and abs(res.ria - 0.5) > margin:
            return {"spec_index": k, "natural": res.natural, "ria": res.ria,
                    "y1": law.y1.tolist(), "y0": law.y0.tolist(),
                    "weights": law.unit_weights().tolist()}
    return None


def mw_spec_from_jsonable(data: dict) -> JointOutcomes:
    if data.get("family") != "mw-joint":
        raise MwError("expected a document with family 'mw-joint'")
    t_support = np.asarray(data["y1_support"], dtype=float)
    s_support = np.asarray(data["y0_support"], dtype=float)
    probs = np.asarray(data["probs"], dtype=float)
    if probs.shape != (len(t_support), len(s_support)):
        raise MwError("probs must be a len(y1_support) x len(y0_support) matrix")
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
        raise MwError("probs must be nonnegative and sum to 1")
    tt, ss = np.meshgrid(t_support, s_support, indexing="ij")
    return JointOutcomes(y1=tt.ravel(), y0=ss.ravel(), weights=probs.ravel())


def mw_spec_to_jsonable(joint: JointOutcomes) -> dict:
    t_support, t_inv = np.unique(joint.y1, return_inverse=True)
    s_support, s_inv = np.unique(joint.y0, return_inverse=True)
    probs = np.zeros((len(t_support), len(s_support)))
    np.add.at(probs, (t_inv, s_inv), joint.unit_weights())
    return {
        "family": "mw-joint",
        "y1_support": t_support.tolist(),
        "y0_support": s_support.tolist(),
        "probs": probs.tolist(),
    }
