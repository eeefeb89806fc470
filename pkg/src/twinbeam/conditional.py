"""States of one beam prepared by counting the other.

Registering exactly t counts on the trigger beam collapses the signal beam
onto a photon-number-diagonal state whose total-photon distribution is

    P(gamma | t) = C(gamma+mu-1, gamma) * w_t(gamma),   gamma >= t,

where the per-configuration weight

    w_t(gamma) = C(gamma, t) * eta**t * rr**gamma
                 / [ p2(t) * (1 + M/(eta*mu))**mu * (1-eta)**t ],
    rr = M*(1-eta) / (M + mu*eta),

is shared by all C(gamma+mu-1, gamma) mode configurations with the same
total gamma.  rr is the manifestly positive form of the ratio
(M_t - t*eta)/(M_t + mu*eta): writing M_t - t*eta = M*(1-eta)*(t+mu)/(M+mu)
avoids the cancellation of the naive difference.  The conditional mean
count is affine in the trigger value,

    M_t = [t*(M + eta*mu) + mu*M*(1-eta)] / (M + mu),

and passes through (M, M).  Selection rules aggregate trigger outcomes:
keeping all t above (or below) a threshold yields the marginal-weighted
mixture of the exact-t states, renormalised by the acceptance probability.

Two independent routes give the count distribution of a conditional state:
Bayes (a column of the joint table divided by the marginal) and the
measurement route (binomial thinning of the photon weights).  They must
agree; the cross-check is available at run time behind ``verify=True``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import stats

from .core import (
    PhotoCountDistribution,
    _log_binom_arr,
    _mass_sum,
    _nb_quantile,
    _probs_and_tail,
    _series_constants,
    _validate_count,
    _validate_tol,
    log_marginal,
)
from .errors import (
    ConditioningError,
    ConvergenceError,
    ParameterError,
    VerificationError,
)
from .params import ExperimentParams

__all__ = [
    "SelectionRule",
    "ConditionalState",
    "ConditionalMixture",
    "weight",
    "conditional_mean",
    "build_conditional",
    "cond_count_dist",
    "povm_count_dist",
]

_LOG_UNDERFLOW = math.log(1e-300)


@dataclass(frozen=True)
class SelectionRule:
    """Accepted trigger outcomes: exact(t), above(t*), below(t*), or an
    explicit set.  Threshold comparisons are strict; inclusive selections are
    expressed by shifting the threshold."""

    kind: str
    threshold: int | None = None
    values: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("exact", "above", "below", "set"):
            raise ParameterError(f"unknown selection kind {self.kind!r}")
        if self.kind == "set":
            if not self.values:
                raise ParameterError("set rule needs a non-empty value list")
            vals = tuple(_validate_count(v, "set value") for v in self.values)
            if sorted(set(vals)) != list(vals):
                raise ParameterError("set values must be sorted and duplicate-free")
            object.__setattr__(self, "values", vals)
        else:
            if self.threshold is None:
                raise ParameterError(f"{self.kind} rule needs a threshold value")
            if isinstance(self.threshold, bool) or not isinstance(
                self.threshold, (int, np.integer)
            ):
                raise ParameterError(f"threshold must be an integer, got {self.threshold!r}")
            thr = int(self.threshold)
            # above(-1) accepts every outcome (the inclusive >= 0 selection);
            # anything lower is malformed.
            floor = -1 if self.kind == "above" else 1 if self.kind == "below" else 0
            if thr < floor:
                raise ParameterError(f"{self.kind} threshold must be >= {floor}, got {thr}")
            object.__setattr__(self, "threshold", thr)

    @classmethod
    def exact(cls, t: int) -> "SelectionRule":
        return cls(kind="exact", threshold=t)

    @classmethod
    def above(cls, t_star: int) -> "SelectionRule":
        """Accept t > t_star."""
        return cls(kind="above", threshold=t_star)

    @classmethod
    def below(cls, t_star: int) -> "SelectionRule":
        """Accept t < t_star."""
        return cls(kind="below", threshold=t_star)

    @classmethod
    def from_set(cls, values) -> "SelectionRule":
        return cls(kind="set", values=tuple(values))

    def contains(self, t: int) -> bool:
        if self.kind == "exact":
            return t == self.threshold
        if self.kind == "above":
            return t > self.threshold
        if self.kind == "below":
            return t < self.threshold
        return t in self.values  # type: ignore[operator]

    def describe(self) -> str:
        if self.kind == "set":
            return f"t in {list(self.values)}"  # type: ignore[arg-type]
        symbol = {"exact": "=", "above": ">", "below": "<"}[self.kind]
        return f"t {symbol} {self.threshold}"


@dataclass(frozen=True)
class ConditionalState:
    """Spectral data of the state prepared by an exact trigger count t.

    ``weights[i]`` is the eigenvalue shared by every mode configuration with
    total photon number ``gamma_min + i``; ``log_degeneracies`` caches the
    log multiplicities C(gamma+mu-1, gamma).  M_t is the closed-form mean
    count of the state.
    """

    t: int
    params: ExperimentParams
    weights: np.ndarray
    log_weights: np.ndarray
    log_degeneracies: np.ndarray
    tail_bound: float
    M_t: float

    def __post_init__(self) -> None:
        for name in ("weights", "log_weights", "log_degeneracies"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.weights.size == 0:
            raise ParameterError("conditional state needs at least one weight")
        if np.any(self.weights < 0.0):
            raise ParameterError("weights must be >= 0")

    @property
    def gamma_min(self) -> int:
        return self.t

    @property
    def gammas(self) -> np.ndarray:
        return self.t + np.arange(self.weights.size)

    def level_probs(self) -> np.ndarray:
        """Degeneracy-weighted eigenvalues: the total-photon distribution."""
        with np.errstate(under="ignore"):
            return np.exp(self.log_degeneracies + self.log_weights)

    def norm(self) -> float:
        return _mass_sum(self.level_probs())

    def mean_photons(self) -> float:
        """First moment of the total-photon distribution (equals M_t/eta)."""
        return float(self.gammas @ self.level_probs())


@dataclass(frozen=True)
class ConditionalMixture:
    """Marginal-weighted mixture of exact-t states under a selection rule.

    ``members`` pairs each accepted trigger value with its renormalised
    weight p2(t)/P(accept); ``success_prob`` is the preparation rate P(accept).
    """

    params: ExperimentParams
    rule: SelectionRule
    trigger_values: tuple[int, ...]
    member_weights: np.ndarray
    states: tuple[ConditionalState, ...]
    success_prob: float

    def __post_init__(self) -> None:
        w = np.ascontiguousarray(self.member_weights, dtype=float)
        w.flags.writeable = False
        object.__setattr__(self, "member_weights", w)

    def mean_counts(self) -> float:
        return float(self.member_weights @ [s.M_t for s in self.states])


# ---------------------------------------------------------------------------
# weights and closed-form moments
# ---------------------------------------------------------------------------


def _weight_constants(params: ExperimentParams, t: int) -> tuple[float, float]:
    """(log rr, additive constant) so that log w(gamma) =
    logC(gamma, t) + gamma*log_rr + const."""
    mu, eta, m = params.mu, params.eta, params.mean_counts
    log_p2 = log_marginal(params, t)
    if log_p2 < _LOG_UNDERFLOW:
        raise ConditioningError(
            f"trigger outcome t={t} has vanishing probability (log p2 = {log_p2:.1f})"
        )
    log_rr = math.log(m) + math.log1p(-eta) - math.log(m + mu * eta)
    const = (
        t * (math.log(eta) - math.log1p(-eta))
        - mu * math.log1p(m / (eta * mu))
        - log_p2
    )
    return log_rr, const


def weight(params: ExperimentParams, t: int, gamma: int) -> float:
    """Eigenvalue of the exact-t conditional state at total photon number
    gamma.  Zero for gamma < t (the trigger cannot over-count photons)."""
    params.require_lossy()
    t = _validate_count(t, "t")
    gamma = _validate_count(gamma, "gamma")
    if gamma < t:
        return 0.0
    if params.mean_counts == 0.0:
        if t != 0:
            raise ConditioningError("t > 0 is impossible in vacuum")
        return 1.0 if gamma == 0 else 0.0
    log_rr, const = _weight_constants(params, t)
    log_w = (
        float(_log_binom_arr(float(gamma), float(t))) + gamma * log_rr + const
    )
    return math.exp(log_w)


def conditional_mean(params: ExperimentParams, t: float) -> float:
    """Closed-form mean count of the exact-t conditional state; affine in t
    with slope (M + eta*mu)/(M + mu), fixed point at t = M."""
    mu, eta, m = params.mu, params.eta, params.mean_counts
    if not (isinstance(t, (int, float)) and math.isfinite(float(t)) and t >= 0):
        raise ParameterError(f"t must be a non-negative real, got {t!r}")
    return (t * (m + eta * mu) + mu * m * (1.0 - eta)) / (m + mu)


def _gamma_ratio(params: ExperimentParams, t: int, gamma: float) -> float:
    mu = params.mu
    rr = params.mean_counts * (1.0 - params.eta) / (
        params.mean_counts + mu * params.eta
    )
    return rr * (gamma + mu) / (gamma + 1.0 - t)


def _gamma_support(params: ExperimentParams, t: int, tol: float) -> int:
    """Largest total photon number kept: degeneracy-weighted omitted weight
    <= tol.  Uses the monotone level-probability ratio for the tail bound."""
    mu = params.mu
    log_rr, const = _weight_constants(params, t)
    rr = math.exp(log_rr)
    if rr >= 1.0:
        raise ConvergenceError("level ratio bound >= 1; parameters out of domain")

    def log_level(gamma: float) -> float:
        return (
            float(_log_binom_arr(gamma + mu - 1.0, gamma))
            + float(_log_binom_arr(gamma, float(t)))
            + gamma * log_rr
            + const
        )

    # Beyond gamma*, the ratio drops below 1 and the tail is geometric; scan
    # outward with geometrically growing steps so slow tails (ratio near 1)
    # still close in logarithmically many probes.
    gamma_star = max(float(t), (rr * mu + t - 1.0) / (1.0 - rr))
    gamma = math.ceil(gamma_star) + 1
    for _ in range(10_000):
        ratio = _gamma_ratio(params, t, gamma)
        if ratio < 1.0:
            tail = math.exp(log_level(float(gamma))) * ratio / (1.0 - ratio)
            if tail <= tol:
                return gamma
        gamma += max(64, gamma // 16)
    raise ConvergenceError("conditional support did not close")


def build_conditional(
    params: ExperimentParams,
    rule: SelectionRule,
    tol: float = 1e-12,
) -> Union[ConditionalState, "ConditionalMixture"]:
    """Construct the state selected by ``rule``.

    exact(t) yields a single ConditionalState with support gamma = t ..
    gamma_max, gamma_max chosen so the degeneracy-weighted omitted weight is
    <= tol.  Set-like rules yield the renormalised mixture over accepted
    trigger values together with the preparation success probability.
    """
    params.require_lossy()
    tol = _validate_tol(tol)
    if rule.kind == "exact":
        return _build_exact(params, rule.threshold, tol)  # type: ignore[arg-type]
    values = _accepted_values(params, rule, tol)
    log_p2 = np.array([log_marginal(params, t) for t in values])
    p2 = np.exp(log_p2)
    success = _acceptance_prob(params, rule, values, p2)
    states = tuple(_build_exact(params, t, tol) for t in values)
    return ConditionalMixture(
        params=params,
        rule=rule,
        trigger_values=tuple(values),
        member_weights=p2 / success,
        states=states,
        success_prob=success,
    )


def _build_exact(params: ExperimentParams, t: int, tol: float) -> ConditionalState:
    t = _validate_count(t, "t")
    if params.mean_counts == 0.0:
        if t != 0:
            raise ConditioningError("t > 0 is impossible in vacuum")
        one = np.array([1.0])
        zero = np.array([0.0])
        return ConditionalState(
            t=0, params=params, weights=one, log_weights=zero,
            log_degeneracies=zero, tail_bound=0.0, M_t=0.0,
        )
    log_rr, const = _weight_constants(params, t)
    gamma_max = _gamma_support(params, t, tol)
    gammas = np.arange(t, gamma_max + 1, dtype=float)
    log_w = _log_binom_arr(gammas, float(t)) + gammas * log_rr + const
    log_deg = _log_binom_arr(gammas + params.mu - 1.0, gammas)
    with np.errstate(under="ignore"):
        weights = np.exp(log_w)
        norm = _mass_sum(np.exp(log_deg + log_w))
    return ConditionalState(
        t=t,
        params=params,
        weights=weights,
        log_weights=log_w,
        log_degeneracies=log_deg,
        tail_bound=max(0.0, 1.0 - norm),
        M_t=conditional_mean(params, t),
    )


def _accepted_values(
    params: ExperimentParams, rule: SelectionRule, tol: float
) -> list[int]:
    """Finite list of accepted trigger values covering all but a tol-scale
    fraction of the acceptance probability."""
    if rule.kind == "set":
        return list(rule.values)  # type: ignore[arg-type]
    thr = rule.threshold
    if rule.kind == "below":
        return list(range(0, thr))  # type: ignore[arg-type]
    # above: open-ended; cut where the marginal tail is negligible relative
    # to the acceptance probability.
    success = _acceptance_prob(params, rule, None, None)
    q = max(tol * success * 0.1, 1e-300)
    hi = _nb_quantile(params, q)
    lo = thr + 1  # type: ignore[operator]
    if hi < lo:
        hi = lo
    return list(range(lo, hi + 1))


def _acceptance_prob(params, rule, values, p2) -> float:
    if rule.kind == "above":
        # complement of a finite sum: exact up to rounding
        below = [
            math.exp(log_marginal(params, t)) for t in range(0, rule.threshold + 1)
        ]
        success = 1.0 - math.fsum(below)
    else:
        if p2 is None:
            values = _accepted_values(params, rule, 1e-12)
            p2 = [math.exp(log_marginal(params, t)) for t in values]
        success = float(math.fsum(np.asarray(p2).tolist()))
    if success < 1e-300:
        raise ConditioningError(f"selection {rule.describe()} has vanishing probability")
    return success


# ---------------------------------------------------------------------------
# count distributions: Bayes route and measurement route
# ---------------------------------------------------------------------------


def _column_block(
    params: ExperimentParams, t: int, s_max: int, tol_mass: float
) -> np.ndarray:
    """Joint-table column p(s, t) for s = 0..s_max at fixed t, truncation
    mass <= tol_mass.  Same series as the full table, restricted to one t."""
    mu = params.mu
    if params.mean_counts == 0.0:
        col = np.zeros(s_max + 1)
        if t == 0:
            col[0] = 1.0
        return col
    log_a, log_b, log_x = _series_constants(params)
    log_rr = log_x - math.log1p(-params.eta)
    rr = math.exp(log_rr)
    base = mu * log_a + t * log_b
    col = np.zeros(s_max + 1)
    l = t
    hard_cap = t + 10_000 + int(200.0 * (s_max + t + mu + 10.0) / max(1e-3, -log_rr))
    with np.errstate(under="ignore"):
        while True:
            lo_t = float(_log_binom_arr(float(l), float(t)))
            log_c = base + l * log_x + float(_log_binom_arr(l + mu - 1.0, float(l))) + lo_t
            ks = np.arange(0, min(l, s_max) + 1, dtype=float)
            log_u = ks * log_b + _log_binom_arr(float(l), ks)
            col[: ks.size] += np.exp(log_c + log_u)
            # mass of the slice over all s (0..l): multiply by (1+B)^l
            log_mass = base + lo_t + float(_log_binom_arr(l + mu - 1.0, float(l))) + l * log_rr
            ratio = _gamma_ratio(params, t, float(l))
            if l >= max(s_max, t) and ratio < 1.0:
                if math.exp(log_mass) * ratio / (1.0 - ratio) <= tol_mass:
                    break
            l += 1
            if l > hard_cap:
                raise ConvergenceError("column series did not converge")
    return col


def _count_support(params: ExperimentParams, t: int, tol: float) -> int:
    """Upper count bound for the exact-t conditional distribution: thin the
    photon support with a binomial tail."""
    gamma_max = _gamma_support(params, t, tol)
    s_max = int(stats.binom.isf(tol / 4.0, gamma_max, params.eta))
    return max(s_max, 4)


def povm_count_dist(
    state: ConditionalState, s_max: int | None = None, tol: float = 1e-12
) -> PhotoCountDistribution:
    """Count distribution via the measurement route: binomial thinning of the
    degeneracy-weighted photon levels."""
    params = state.params
    eta = params.eta
    tol = _validate_tol(tol)
    level = state.level_probs()
    gammas = state.gammas.astype(float)
    if s_max is None:
        s_max = int(stats.binom.isf(tol / 4.0, int(gammas[-1]), eta))
        s_max = max(s_max, 4)
    log_eta = math.log(eta)
    log_om = math.log1p(-eta) if eta < 1.0 else -math.inf
    probs = np.zeros(s_max + 1)
    s_all = np.arange(s_max + 1, dtype=float)
    with np.errstate(under="ignore", invalid="ignore"):
        for start in range(0, gammas.size, 4096):
            g = gammas[start : start + 4096]
            mask = s_all[:, None] <= g[None, :]
            log_thin = np.where(
                mask,
                _log_binom_arr(g[None, :], s_all[:, None])
                + s_all[:, None] * log_eta
                + (g[None, :] - s_all[:, None]) * log_om,
                -np.inf,
            )
            probs += np.exp(log_thin) @ level[start : start + 4096]
    probs, tail = _probs_and_tail(probs)
    return PhotoCountDistribution(probs=probs, tail_bound=tail, tol=tol)


def cond_count_dist(
    params: ExperimentParams,
    rule: SelectionRule,
    tol: float = 1e-12,
    verify: bool = False,
) -> PhotoCountDistribution:
    """Count distribution of the selected signal state.

    Exact rules use the Bayes route (joint column over marginal); set-like
    rules average the exact-t distributions with the renormalised marginal
    weights.  ``verify=True`` additionally evaluates the measurement route
    and raises VerificationError if the two disagree beyond 10*tol.
    """
    params.require_lossy()
    tol = _validate_tol(tol)
    if rule.kind == "exact":
        return _exact_count_dist(params, rule.threshold, tol, verify)  # type: ignore[arg-type]
    values = _accepted_values(params, rule, tol)
    log_p2 = np.array([log_marginal(params, t) for t in values])
    p2 = np.exp(log_p2)
    success = _acceptance_prob(params, rule, values, p2)
    members = [_exact_count_dist(params, t, tol, verify) for t in values]
    s_max = max(len(m) for m in members)
    probs = np.zeros(s_max)
    for frac, member in zip(p2 / success, members):
        probs[: len(member)] += frac * member.probs
    probs, tail = _probs_and_tail(probs)
    return PhotoCountDistribution(probs=probs, tail_bound=tail, tol=tol)


def _exact_count_dist(
    params: ExperimentParams, t: int, tol: float, verify: bool
) -> PhotoCountDistribution:
    t = _validate_count(t, "t")
    if params.mean_counts == 0.0:
        if t != 0:
            raise ConditioningError("t > 0 is impossible in vacuum")
        return PhotoCountDistribution(probs=np.array([1.0]), tail_bound=0.0, tol=tol)
    log_p2 = log_marginal(params, t)
    if log_p2 < _LOG_UNDERFLOW:
        raise ConditioningError(f"trigger outcome t={t} has vanishing probability")
    s_max = _count_support(params, t, tol)
    p2 = math.exp(log_p2)
    col = _column_block(params, t, s_max, tol_mass=0.25 * tol * p2)
    probs, tail = _probs_and_tail(col / p2)
    bayes = PhotoCountDistribution(probs=probs, tail_bound=tail, tol=tol)
    if verify:
        state = _build_exact(params, t, tol)
        other = povm_count_dist(state, s_max=s_max, tol=tol)
        gap = float(np.abs(other.probs - bayes.probs).max())
        if gap > 10.0 * tol:
            raise VerificationError(
                f"Bayes and measurement routes disagree by {gap:.3e} at t={t}"
            )
    return bayes
