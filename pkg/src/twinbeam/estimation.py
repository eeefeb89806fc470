"""Recovering (mu, eta, mean counts) from shot records, plus fidelity.

The estimators mirror how the experiment is analysed:

* the noise reduction R = var(s - t) / mean(s + t) determines the
  efficiency through eta = 1 - R (no noise subtraction);
* the beam mean is the grand mean of both arms;
* the mode count comes from the multithermal variance M*(1 + M/mu):
  mu = M**2 / (var - M), with an optional maximum-likelihood refinement of
  (mu, M) against the closed-form marginal for the small-mu regime.

Fits are sequential (eta from R first, then mu and M from the marginal).
All standard errors are nonparametric bootstrap over whole shots, which
preserves the arm-arm correlation; resampling is deterministic given the
bootstrap seed.  Agreement between a model table and an empirical histogram
is the Bhattacharyya coefficient sum_{cells} sqrt(p*q) on the zero-padded
union of their supports, with each table normalised by its total mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .core import JointDistribution, PhotoCountDistribution, _log_nb_arr, joint_table
from .errors import DegenerateRecordError, ParameterError
from .params import ExperimentParams
from .sampling import ShotRecord, histogram

__all__ = ["EstimationReport", "noise_reduction", "estimate_params", "fidelity"]

_BOOTSTRAP_DEFAULT = 200


@dataclass(frozen=True)
class EstimationReport:
    """Point estimates, bootstrap errors, and model-data fidelity.

    R_hat = 1 - eta_hat by construction.  mu_hat is +inf with a diagnostic
    when the sample variance does not exceed the mean (no overdispersion to
    attribute to mode structure).  fidelity is None when no valid model
    table can be built from the estimates.
    """

    M_hat: float
    eta_hat: float
    mu_hat: float
    R_hat: float
    fidelity: float | None
    standard_errors: dict = field(default_factory=dict)
    diagnostics: tuple[str, ...] = ()
    n_shots: int = 0

    def params(self) -> ExperimentParams:
        """Estimates as an ExperimentParams; raises if out of domain."""
        if not math.isfinite(self.mu_hat):
            raise ParameterError("mu estimate is unbounded; no valid parameter set")
        return ExperimentParams(max(self.mu_hat, 1.0), self.eta_hat, self.M_hat)


def noise_reduction(record: ShotRecord) -> float:
    """Sample variance of the count difference over the mean count sum.

    Equals 1 - eta for ideal twin beams; values below 1 certify nonclassical
    correlation.  No noise subtraction is applied.
    """
    if len(record) < 2:
        raise DegenerateRecordError("noise reduction needs at least 2 shots")
    s = record.s.astype(float)
    t = record.t.astype(float)
    mean_sum = float(np.mean(s + t))
    if mean_sum <= 0.0:
        raise DegenerateRecordError("mean(s + t) is zero; record carries no light")
    return float(np.var(s - t, ddof=1)) / mean_sum


def _moment_estimates(s: np.ndarray, t: np.ndarray) -> tuple[float, float, float, float]:
    """(M, R, eta, mu) from sample moments of the two arms."""
    diff_var = float(np.var(s - t, ddof=1))
    mean_sum = float(np.mean(s + t))
    m_hat = 0.5 * mean_sum
    r_hat = diff_var / mean_sum
    eta_hat = 1.0 - r_hat
    var_hat = 0.5 * (float(np.var(s, ddof=1)) + float(np.var(t, ddof=1)))
    excess = var_hat - m_hat
    mu_hat = m_hat**2 / excess if excess > 0.0 else math.inf
    return m_hat, r_hat, eta_hat, mu_hat


def _ml_refine(counts: np.ndarray, mu0: float, m0: float) -> tuple[float, float]:
    """Maximum-likelihood (mu, M) against the closed-form marginal, started
    from the moment estimates."""
    values, weights = np.unique(counts, return_counts=True)
    w = weights.astype(float)

    def nll(x: np.ndarray) -> float:
        mu, m = x
        if mu < 1.0 or m <= 0.0:
            return math.inf
        return -float(w @ _log_nb_arr(mu, m, values))

    x0 = np.array([min(max(mu0, 1.0), 1e6), max(m0, 1e-9)])
    res = optimize.minimize(
        nll, x0, method="Nelder-Mead",
        bounds=[(1.0, None), (1e-12, None)],
        options={"xatol": 1e-6, "fatol": 1e-9, "maxiter": 2000},
    )
    mu_ml, m_ml = res.x
    return float(mu_ml), float(m_ml)


def estimate_params(
    record: ShotRecord,
    refine: bool = False,
    n_bootstrap: int = _BOOTSTRAP_DEFAULT,
    bootstrap_seed: int = 0,
    compute_fidelity: bool = True,
    table_tol: float = 1e-8,
) -> EstimationReport:
    """Full parameter recovery from a shot record.

    ``refine=True`` replaces the moment (mu, M) with their joint maximum
    likelihood against the closed-form marginal (pooled over both arms).
    Bootstrap standard errors resample whole shots; mu resamples that hit
    the unbounded regime are excluded from its spread and counted in the
    diagnostics.  ``compute_fidelity`` also scores the empirical histogram
    against the model table at the recovered parameters.
    """
    if len(record) < 100:
        raise DegenerateRecordError("parameter estimation needs at least 100 shots")
    if n_bootstrap < 0:
        raise ParameterError("n_bootstrap must be >= 0")
    s = record.s.astype(float)
    t = record.t.astype(float)
    if float(np.mean(s + t)) <= 0.0:
        raise DegenerateRecordError("mean(s + t) is zero; record carries no light")

    m_hat, r_hat, eta_hat, mu_hat = _moment_estimates(s, t)
    diagnostics: list[str] = []
    if not math.isfinite(mu_hat):
        diagnostics.append(
            "mu unbounded: sample variance does not exceed the mean "
            "(sub-multithermal dispersion)"
        )
    if refine and math.isfinite(mu_hat):
        mu_hat, m_hat = _ml_refine(np.concatenate([record.s, record.t]), mu_hat, m_hat)
        diagnostics.append("mu/M refined by maximum likelihood")

    errors = _bootstrap_errors(s, t, n_bootstrap, bootstrap_seed, diagnostics)

    fid = None
    if compute_fidelity:
        fid = _model_fidelity(record, m_hat, eta_hat, mu_hat, table_tol, diagnostics)

    return EstimationReport(
        M_hat=m_hat,
        eta_hat=eta_hat,
        mu_hat=mu_hat,
        R_hat=r_hat,
        fidelity=fid,
        standard_errors=errors,
        diagnostics=tuple(diagnostics),
        n_shots=len(record),
    )


def _bootstrap_errors(
    s: np.ndarray,
    t: np.ndarray,
    n_bootstrap: int,
    seed: int,
    diagnostics: list[str],
) -> dict:
    if n_bootstrap == 0:
        return {}
    n = s.size
    rng = np.random.default_rng(seed)
    stats = {"M": [], "R": [], "eta": [], "mu": []}
    chunk = max(1, min(n_bootstrap, 50_000_000 // max(n, 1)))
    done = 0
    while done < n_bootstrap:
        batch = min(chunk, n_bootstrap - done)
        idx = rng.integers(0, n, size=(batch, n))
        bs = s[idx]
        bt = t[idx]
        mean_sum = np.mean(bs + bt, axis=1)
        diff_var = np.var(bs - bt, axis=1, ddof=1)
        m = 0.5 * mean_sum
        r = diff_var / mean_sum
        var = 0.5 * (np.var(bs, axis=1, ddof=1) + np.var(bt, axis=1, ddof=1))
        excess = var - m
        with np.errstate(divide="ignore", invalid="ignore"):
            mu = np.where(excess > 0.0, m**2 / excess, np.inf)
        stats["M"].append(m)
        stats["R"].append(r)
        stats["eta"].append(1.0 - r)
        stats["mu"].append(mu)
        done += batch
    out = {}
    for key, parts in stats.items():
        values = np.concatenate(parts)
        finite = values[np.isfinite(values)]
        if key == "mu" and finite.size < values.size:
            diagnostics.append(
                f"{values.size - finite.size} of {values.size} bootstrap resamples "
                "hit the unbounded-mu regime"
            )
        out[key] = float(np.std(finite, ddof=1)) if finite.size > 1 else math.inf
    return out


def _model_fidelity(
    record: ShotRecord,
    m_hat: float,
    eta_hat: float,
    mu_hat: float,
    tol: float,
    diagnostics: list[str],
) -> float | None:
    if not (math.isfinite(mu_hat) and mu_hat >= 1.0 and 0.0 < eta_hat < 1.0 and m_hat > 0.0):
        diagnostics.append("fidelity skipped: estimates leave the model domain")
        return None
    model = joint_table(ExperimentParams(mu_hat, eta_hat, m_hat), tol=tol)
    return fidelity(histogram(record), model)


def _as_table(dist) -> np.ndarray:
    if isinstance(dist, JointDistribution):
        return dist.probs
    if isinstance(dist, PhotoCountDistribution):
        return dist.probs
    arr = np.asarray(dist, dtype=float)
    if arr.ndim not in (1, 2) or arr.size == 0:
        raise ParameterError("fidelity expects 1-D or 2-D probability tables")
    if np.any(arr < 0.0):
        raise ParameterError("probability tables must be >= 0")
    return arr


def fidelity(p, q) -> float:
    """Bhattacharyya overlap of two probability tables.

    Tables are zero-padded to their union support and normalised by their
    total masses, so trailing truncation does not depress the score: the
    result is symmetric, exactly 1 when the tables coincide cellwise on the
    union, and 0 on disjoint (or empty) support.
    """
    a = _as_table(p)
    b = _as_table(q)
    if a.ndim != b.ndim:
        raise ParameterError("fidelity arguments must have matching dimensionality")
    shape = tuple(max(x, y) for x, y in zip(a.shape, b.shape))
    pa = np.zeros(shape)
    pb = np.zeros(shape)
    pa[tuple(slice(0, n) for n in a.shape)] = a
    pb[tuple(slice(0, n) for n in b.shape)] = b
    mass = float(pa.sum()) * float(pb.sum())
    if mass == 0.0:
        return 0.0
    return min(1.0, float(np.sum(np.sqrt(pa * pb))) / math.sqrt(mass))
