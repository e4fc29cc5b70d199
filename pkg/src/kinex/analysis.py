"""Distributional statistics: histograms, entropy, fits, Lorenz curves.

Everything accepts weighted samples; weights default to uniform. Goodness of
fit is always the sup-CDF (Kolmogorov) distance between the weighted
empirical CDF and the fitted model's CDF, conditional on the fit range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import digamma, gammainc, polygamma
from scipy.stats import gamma as gamma_dist

from .errors import (
    InsufficientDataError,
    InvalidDataError,
    InvalidParameterError,
    UndefinedGiniError,
)

# ---------------------------------------------------------------------------
# data carriers

@dataclass
class EmpiricalDistribution:
    """Samples with optional non-negative weights."""

    values: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise InvalidDataError("values must be one-dimensional")
        if not np.all(np.isfinite(self.values)):
            raise InvalidDataError("values must be finite")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=np.float64)
            if self.weights.shape != self.values.shape:
                raise InvalidDataError("weights must match values in shape")
            if not np.all(np.isfinite(self.weights)) or np.any(self.weights < 0):
                raise InvalidDataError("weights must be finite and non-negative")
            if not np.sum(self.weights) > 0:
                raise InvalidDataError("total weight must be positive")

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    def weight_array(self) -> np.ndarray:
        if self.weights is None:
            return np.ones_like(self.values)
        return self.weights

    def is_weighted(self) -> bool:
        return self.weights is not None


@dataclass
class Histogram:
    """Half-open equal- or custom-bin histogram with out-of-range bookkeeping.

    Bin k covers [edges[k], edges[k+1]); a sample exactly on an interior edge
    lands in the right bin; samples below edges[0] or at/above edges[-1] are
    tallied as underflow/overflow, not in counts.
    """

    edges: np.ndarray
    counts: np.ndarray
    total: float
    underflow: float = 0.0
    overflow: float = 0.0

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def density(self) -> np.ndarray:
        """counts normalized to integrate to 1 over the covered range."""
        if not self.total > 0:
            raise InsufficientDataError("empty histogram has no density")
        return self.counts / (self.total * self.widths)


@dataclass
class FitReport:
    """One fitted model: parameters, standard errors, goodness, provenance."""

    model: str
    params: dict
    stderr: dict
    goodness: float
    fit_range: tuple[float, float]
    n: int
    method: str = "mle"

    def to_dict(self) -> dict:
        lo, hi = self.fit_range
        return {
            "model": self.model,
            "params": dict(self.params),
            "stderr": dict(self.stderr),
            "goodness": self.goodness,
            "range": [lo, None if math.isinf(hi) else hi],
            "n": self.n,
            "method": self.method,
        }


@dataclass
class LorenzCurve:
    """Cumulative population share x vs cumulative value share y, plus Gini."""

    x: np.ndarray
    y: np.ndarray
    gini: float


@dataclass
class TwoClassReport:
    """Exponential bulk plus power-law tail decomposition.

    tail_present is False when no scanned threshold produced an acceptable
    tail fit; the power-law fields are then None and the report describes a
    pure-exponential population. income_fraction is the excess-income share
    f = (mean - T) / mean, an identity in (sample mean, fitted temperature).
    """

    temperature: float
    income_fraction: float
    goodness: float
    n: int
    tail_present: bool
    alpha: float | None = None
    threshold: float | None = None
    crossover: float | None = None
    upper_share: float | None = None
    stderr: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "model": "two-class",
            "params": {
                "T": self.temperature,
                "f": self.income_fraction,
                "alpha": self.alpha,
                "threshold": self.threshold,
                "crossover": self.crossover,
                "upper_share": self.upper_share,
                "tail_present": self.tail_present,
            },
            "stderr": dict(self.stderr),
            "goodness": self.goodness,
            "range": [0.0, None],
            "n": self.n,
            "method": "mle",
        }


# ---------------------------------------------------------------------------
# shared helpers

def _sorted_vw(dist: EmpiricalDistribution) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(dist.values, kind="stable")
    return dist.values[order], dist.weight_array()[order]


def _weighted_mean(values: np.ndarray, weights: np.ndarray) -> float:
    return float(np.dot(weights, values) / np.sum(weights))


def _effective_n(weights: np.ndarray) -> float:
    s = float(np.sum(weights))
    return s * s / float(np.dot(weights, weights))


def sup_cdf_distance(values: np.ndarray, weights: np.ndarray, model_cdf) -> float:
    """Kolmogorov distance between the weighted ECDF and a model CDF.

    values need not be sorted; model_cdf is vectorized over values.
    """
    order = np.argsort(values, kind="stable")
    vs = values[order]
    ws = weights[order]
    cum = np.cumsum(ws)
    total = cum[-1]
    if not total > 0:
        raise InsufficientDataError("no weight in sample")
    f_hi = cum / total
    f_lo = (cum - ws) / total
    fm = np.asarray(model_cdf(vs), dtype=np.float64)
    return float(max(np.max(np.abs(f_hi - fm)), np.max(np.abs(fm - f_lo))))


def weighted_quantile(values: np.ndarray, weights: np.ndarray, q: float) -> float:
    """Smallest sample value whose cumulative weight share reaches q."""
    order = np.argsort(values, kind="stable")
    vs = values[order]
    cum = np.cumsum(weights[order])
    target = q * cum[-1]
    idx = int(np.searchsorted(cum, target, side="left"))
    idx = min(idx, vs.shape[0] - 1)
    return float(vs[idx])


# ---------------------------------------------------------------------------
# histogram and entropy

def histogram(dist: EmpiricalDistribution, edges: np.ndarray | None = None,
              bins: int = 100, hist_range: tuple[float, float] | None = None) -> Histogram:
    """Weighted histogram with half-open bins.

    Without explicit edges, bins equal-width bins span hist_range (default:
    the sample min/max; a degenerate range is widened by half a unit each
    way so all mass lands in one interior bin).
    """
    v = dist.values
    w = dist.weight_array()
    if edges is None:
        if bins < 1:
            raise InvalidParameterError("bins must be at least 1")
        if hist_range is None:
            if v.size == 0:
                raise InsufficientDataError("no samples to bin")
            lo, hi = float(np.min(v)), float(np.max(v))
        else:
            lo, hi = float(hist_range[0]), float(hist_range[1])
        if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
            raise InvalidParameterError("invalid histogram range")
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        edges = np.linspace(lo, hi, bins + 1)
    else:
        edges = np.asarray(edges, dtype=np.float64)
        if edges.ndim != 1 or edges.shape[0] < 2 or np.any(np.diff(edges) <= 0):
            raise InvalidParameterError("edges must be strictly increasing, length >= 2")
    idx = np.searchsorted(edges, v, side="right") - 1
    in_range = (idx >= 0) & (v < edges[-1])
    counts = np.bincount(idx[in_range], weights=w[in_range], minlength=edges.shape[0] - 1)
    underflow = float(np.sum(w[v < edges[0]]))
    overflow = float(np.sum(w[v >= edges[-1]]))
    return Histogram(edges=edges, counts=counts, total=float(np.sum(counts)),
                     underflow=underflow, overflow=overflow)


def entropy(hist: Histogram) -> float:
    """Shannon entropy -sum p_k ln p_k of the bin occupation probabilities.

    Empty bins contribute zero (the p ln p -> 0 limit).
    """
    if not hist.total > 0:
        raise InsufficientDataError("entropy of an empty histogram is undefined")
    p = hist.counts[hist.counts > 0] / hist.total
    return float(-np.sum(p * np.log(p)))


def balance_entropy(balances: np.ndarray, bins: int = 100) -> float:
    """Entropy of a balance vector under the default run binning.

    bins equal-width bins over the snapshot's [min, max]; a uniform vector
    (degenerate range) has entropy exactly zero.
    """
    v = np.asarray(balances, dtype=np.float64)
    if float(np.min(v)) == float(np.max(v)):
        return 0.0
    return entropy(histogram(EmpiricalDistribution(v), bins=bins))


# ---------------------------------------------------------------------------
# exponential fit

def fit_exponential(dist: EmpiricalDistribution,
                    fit_range: tuple[float, float] = (0.0, math.inf),
                    method: str = "mle") -> FitReport:
    """Fit Exp(T) on [lo, hi): density ~ exp(-(x-lo)/T).

    mle: T-hat is the weighted mean of in-range samples minus lo (the MLE
    for a left-anchored exponential). ccdf-lsq: least squares on the log of
    the weighted empirical CCDF, the way distributions are usually fitted on
    a semi-log plot; labeled in the report. Goodness is the sup-CDF distance
    conditional on the fit range.
    """
    lo, hi = float(fit_range[0]), float(fit_range[1])
    if not (hi > lo):
        raise InvalidParameterError("fit range must have hi > lo")
    if method not in ("mle", "ccdf-lsq"):
        raise InvalidParameterError(f"unknown method {method!r}")
    v = dist.values
    w = dist.weight_array()
    sel = (v >= lo) & (v < hi)
    if int(np.sum(sel)) < 100:
        raise InsufficientDataError("need at least 100 samples in the fit range")
    v = v[sel]
    w = w[sel]
    shifted = v - lo
    if method == "mle":
        T = _weighted_mean(shifted, w)
        if not T > 0:
            raise InvalidDataError("all in-range samples sit at the range minimum")
    else:
        order = np.argsort(shifted, kind="stable")
        vs = shifted[order]
        cum = np.cumsum(w[order])
        ccdf = 1.0 - (cum - 0.5 * w[order]) / cum[-1]
        keep = ccdf > 0
        slope = np.polyfit(vs[keep], np.log(ccdf[keep]), 1, w=w[order][keep])[0]
        if not slope < 0:
            raise InvalidDataError("CCDF slope is not negative; not exponential-like")
        T = -1.0 / slope
    n_eff = _effective_n(w)

    if math.isinf(hi):
        def cdf(x):
            return 1.0 - np.exp(-(x - lo) / T)
    else:
        denom = 1.0 - math.exp(-(hi - lo) / T)

        def cdf(x):
            return (1.0 - np.exp(-(x - lo) / T)) / denom

    g = sup_cdf_distance(v, w, cdf)
    return FitReport(
        model="exponential",
        params={"T": T},
        stderr={"T": T / math.sqrt(n_eff)},
        goodness=g,
        fit_range=(lo, hi),
        n=int(v.shape[0]),
        method=method,
    )


def _truncated_exp_mle(values: np.ndarray, weights: np.ndarray, upper: float) -> float:
    """MLE temperature for an exponential right-truncated at upper.

    Solves weighted_mean = T - upper/(exp(upper/T) - 1); the right side is
    increasing in T with range (0, upper/2), so a mean at or above upper/2
    (uniform-like data) has no finite solution and a large sentinel
    temperature is returned.
    """
    mean = _weighted_mean(values, weights)
    if not mean > 0:
        raise InvalidDataError("non-positive mean in truncated exponential fit")
    if mean >= 0.4999 * upper:
        return 1e6 * upper

    def g(T):
        x = upper / T
        if x > 700:
            return T - upper * math.exp(-x)
        return T - upper / math.expm1(x)

    lo = mean
    hi = mean * 2.0
    while g(hi) < mean:
        hi *= 2.0
        if hi > 1e9 * upper:
            return hi
    return float(brentq(lambda t: g(t) - mean, lo, hi, xtol=1e-12 * upper, rtol=1e-14))


# ---------------------------------------------------------------------------
# gamma fit

def fit_gamma(dist: EmpiricalDistribution) -> FitReport:
    """Weighted MLE of Gamma(shape=1+beta, scale=T): density ~ x**beta * exp(-x/T).

    Newton iteration on the shape equation ln k - digamma(k) = s with the
    standard closed-form start; standard errors from the inverse Fisher
    information at the optimum.
    """
    v = dist.values
    w = dist.weight_array()
    if v.shape[0] < 1000:
        raise InsufficientDataError("need at least 1000 samples for a gamma fit")
    if np.any(v <= 0):
        raise InvalidDataError("gamma fit requires strictly positive samples")
    mean = _weighted_mean(v, w)
    mean_log = _weighted_mean(np.log(v), w)
    s = math.log(mean) - mean_log
    if not s > 0:
        raise InvalidDataError("degenerate sample (zero log-dispersion)")
    k = (3.0 - s + math.sqrt((s - 3.0) ** 2 + 24.0 * s)) / (12.0 * s)
    for _ in range(100):
        delta = (math.log(k) - digamma(k) - s) / (1.0 / k - polygamma(1, k))
        k -= delta
        if abs(delta) < 1e-12 * k:
            break
    T = mean / k
    n_eff = _effective_n(w)
    fisher_det = k * polygamma(1, k) - 1.0
    se_k = math.sqrt(k / (n_eff * fisher_det))
    se_T = math.sqrt(polygamma(1, k) / (n_eff * fisher_det)) * T
    g = sup_cdf_distance(v, w, gamma_dist(a=k, scale=T).cdf)
    return FitReport(
        model="gamma",
        params={"beta": k - 1.0, "T": T, "shape": k},
        stderr={"beta": se_k, "T": se_T},
        goodness=g,
        fit_range=(0.0, math.inf),
        n=int(v.shape[0]),
    )


# ---------------------------------------------------------------------------
# power-law tail fit

def fit_pareto_tail(dist: EmpiricalDistribution, threshold: float) -> FitReport:
    """Hill estimator for the CCDF exponent above a threshold.

    alpha-hat is the reciprocal of the weighted mean of ln(x/threshold) over
    exceedances (x >= threshold); its standard error is alpha/sqrt(k). A
    degenerate exceedance set (all at the threshold) would divide by zero
    and raises insufficient-data.
    """
    if not (threshold > 0 and np.isfinite(threshold)):
        raise InvalidParameterError("threshold must be positive and finite")
    v = dist.values
    w = dist.weight_array()
    sel = v >= threshold
    k_count = int(np.sum(sel))
    if k_count < 100:
        raise InsufficientDataError("need at least 100 exceedances")
    v = v[sel]
    w = w[sel]
    mean_log = _weighted_mean(np.log(v / threshold), w)
    if not mean_log > 0:
        raise InsufficientDataError("degenerate exceedances (all at the threshold)")
    alpha = 1.0 / mean_log
    n_eff = _effective_n(w)

    def cdf(x):
        return 1.0 - (x / threshold) ** -alpha

    g = sup_cdf_distance(v, w, cdf)
    return FitReport(
        model="pareto",
        params={"alpha": alpha, "threshold": threshold},
        stderr={"alpha": alpha / math.sqrt(n_eff)},
        goodness=g,
        fit_range=(threshold, math.inf),
        n=k_count,
    )


# ---------------------------------------------------------------------------
# two-class decomposition

_SCAN_LO = 80.0
_SCAN_HI = 99.5
_SCAN_STEP = 0.5
_TIE_MARGIN = 0.005
_MIN_PART = 100
_DEGENERATE_CUTOFF = 0.03


def two_class_fit(dist: EmpiricalDistribution) -> TwoClassReport:
    """Split a positive sample into an exponential bulk and a power-law tail.

    Candidate boundaries are the weighted 80th..99.5th percentiles in 0.5%
    steps. For each candidate u the bulk (x < u) gets a right-truncated
    exponential MLE and the tail (x >= u) a Hill fit; the candidate
    minimizing the combined goodness max(bulk, tail sup-CDF distance) wins,
    with ties within 0.005 broken toward the lowest threshold (largest
    tail sample). If even the best combined distance exceeds the calibrated
    cutoff the population is reported as pure-exponential with the tail
    absent. The crossover is where the two fitted CCDFs intersect; the
    upper-class share is the weight fraction at/above the chosen threshold.
    """
    v = dist.values
    w = dist.weight_array()
    if v.shape[0] < 1000:
        raise InsufficientDataError("need at least 1000 samples for a two-class fit")
    if np.any(v < 0):
        raise InvalidDataError("two-class fit requires non-negative samples")
    total_w = float(np.sum(w))
    mean = _weighted_mean(v, w)

    levels = np.arange(_SCAN_LO, _SCAN_HI + _SCAN_STEP / 2, _SCAN_STEP)
    candidates = []
    seen = set()
    for q in levels:
        u = weighted_quantile(v, w, q / 100.0)
        if u > 0 and u not in seen:
            seen.add(u)
            candidates.append(u)

    results = []
    for u in candidates:
        bulk = v < u
        tail = ~bulk
        if int(np.sum(bulk)) < _MIN_PART or int(np.sum(tail)) < _MIN_PART:
            continue
        vb, wb = v[bulk], w[bulk]
        T_u = _truncated_exp_mle(vb, wb, u)
        denom = 1.0 - math.exp(-u / T_u)

        def bulk_cdf(x, T=T_u, d=denom):
            return (1.0 - np.exp(-x / T)) / d

        g_bulk = sup_cdf_distance(vb, wb, bulk_cdf)
        vt, wt = v[tail], w[tail]
        mean_log = _weighted_mean(np.log(vt / u), wt)
        if not mean_log > 0:
            continue
        alpha_u = 1.0 / mean_log

        def tail_cdf(x, a=alpha_u, uu=u):
            return 1.0 - (x / uu) ** -a

        g_tail = sup_cdf_distance(vt, wt, tail_cdf)
        tail_share = float(np.sum(wt)) / total_w
        results.append((u, T_u, alpha_u, max(g_bulk, g_tail), tail_share,
                        _effective_n(wt)))

    if not results:
        raise InsufficientDataError("no scannable threshold with enough samples each side")

    best = min(r[3] for r in results)
    if best > _DEGENERATE_CUTOFF:
        rep = fit_exponential(dist)
        T = rep.params["T"]
        return TwoClassReport(
            temperature=T,
            income_fraction=(mean - T) / mean,
            goodness=rep.goodness,
            n=dist.n,
            tail_present=False,
            stderr={"T": rep.stderr["T"]},
        )

    u, T, alpha, combined, tail_share, tail_neff = next(
        r for r in results if r[3] <= best + _TIE_MARGIN
    )

    # crossover: exp(-r/T) meets tail_share * (r/u)^-alpha
    def log_gap(r):
        return -r / T - math.log(tail_share) + alpha * math.log(r / u)

    r_star = u
    if log_gap(u) > 0:
        hi = 2.0 * u
        while log_gap(hi) > 0 and hi < 1e6 * u:
            hi *= 2.0
        if log_gap(hi) <= 0:
            r_star = float(brentq(log_gap, u, hi, xtol=1e-9 * u))
    return TwoClassReport(
        temperature=T,
        income_fraction=(mean - T) / mean,
        goodness=combined,
        n=dist.n,
        tail_present=True,
        alpha=alpha,
        threshold=u,
        crossover=r_star,
        upper_share=tail_share,
        stderr={"alpha": alpha / math.sqrt(tail_neff)},
    )


# ---------------------------------------------------------------------------
# Lorenz curves and Gini

def lorenz_curve(dist: EmpiricalDistribution) -> LorenzCurve:
    """Weighted Lorenz curve from (0,0) to (1,1) and its Gini coefficient.

    x is the cumulative population share in increasing-value order, y the
    cumulative value share; Gini = 1 - 2 * trapezoid area under y(x).
    """
    vs, ws = _sorted_vw(dist)
    wtot = float(np.sum(ws))
    vtot = float(np.dot(vs, ws))
    if vtot == 0.0:
        raise UndefinedGiniError("total value is zero; Lorenz curve undefined")
    x = np.concatenate(([0.0], np.cumsum(ws) / wtot))
    y = np.concatenate(([0.0], np.cumsum(vs * ws) / vtot))
    gini = 1.0 - 2.0 * float(np.trapezoid(y, x))
    return LorenzCurve(x=x, y=y, gini=gini)


def gini(dist: EmpiricalDistribution) -> float:
    return lorenz_curve(dist).gini


def lorenz_exponential(x):
    """Lorenz curve of the exponential law: y = x + (1-x) ln(1-x)."""
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if np.any((x < 0) | (x > 1)):
        raise InvalidParameterError("x must lie in [0, 1]")
    out = np.empty_like(x)
    interior = x < 1.0
    xi = x[interior]
    out[interior] = xi + (1.0 - xi) * np.log1p(-xi)
    out[~interior] = 1.0
    return float(out[0]) if scalar else out


def lorenz_two_class(x, f: float):
    """Two-class Lorenz curve: exponential bulk of weight 1-f plus a point
    mass of income share f concentrated at the top (a jump at x = 1)."""
    if not (0.0 <= f < 1.0):
        raise InvalidParameterError("f must be in [0, 1)")
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    base = lorenz_exponential(x)
    out = (1.0 - f) * base + f * (x >= 1.0)
    return float(out[0]) if scalar else out


def gini_two_class(f: float) -> float:
    """Gini of the two-class curve, in closed form.

    Integrating: int_0^1 [x + (1-x)ln(1-x)] dx = 1/2 - 1/4 = 1/4, so the
    area under the curve is (1-f)/4 and G = 1 - 2*(1-f)/4 = (1+f)/2.
    """
    if not (0.0 <= f < 1.0):
        raise InvalidParameterError("f must be in [0, 1)")
    return (1.0 + f) / 2.0


# ---------------------------------------------------------------------------
# joint-income helpers

def family_income_pdf(r, T: float):
    """Density of the sum of two independent Exp(T) incomes: r e^{-r/T}/T**2."""
    if not (T > 0 and np.isfinite(T)):
        raise InvalidParameterError("T must be positive and finite")
    scalar = np.ndim(r) == 0
    r = np.atleast_1d(np.asarray(r, dtype=np.float64))
    out = np.zeros_like(r)
    pos = r >= 0
    out[pos] = r[pos] * np.exp(-r[pos] / T) / (T * T)
    return float(out[0]) if scalar else out


def family_income_cdf(r, T: float):
    """CDF of the two-earner income: regularized lower incomplete gamma P(2, r/T)."""
    if not (T > 0 and np.isfinite(T)):
        raise InvalidParameterError("T must be positive and finite")
    scalar = np.ndim(r) == 0
    r = np.atleast_1d(np.asarray(r, dtype=np.float64))
    out = np.zeros_like(r)
    pos = r > 0
    out[pos] = gammainc(2.0, r[pos] / T)
    return float(out[0]) if scalar else out


def pair_sum_samples(dist: EmpiricalDistribution, rng) -> EmpiricalDistribution:
    """Sum random disjoint pairs of samples (one shuffle, consecutive pairs).

    Models two-earner incomes from an individual-income sample. Requires
    unweighted input (pairing weighted samples is not defined here); an odd
    leftover sample is dropped.
    """
    if dist.is_weighted():
        raise InvalidDataError("pair sums require unweighted samples")
    v = dist.values
    if v.shape[0] < 2:
        raise InsufficientDataError("need at least two samples to pair")
    perm = rng.generator.permutation(v.shape[0])
    m = (v.shape[0] // 2) * 2
    shuffled = v[perm[:m]]
    return EmpiricalDistribution(shuffled[0::2] + shuffled[1::2])


def paired_correlation(a, b) -> float:
    """Pearson correlation between paired columns (e.g. spouses' incomes)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise InvalidDataError("need two equal-length one-dimensional columns")
    if a.shape[0] < 2:
        raise InsufficientDataError("need at least two pairs")
    return float(np.corrcoef(a, b)[0, 1])
