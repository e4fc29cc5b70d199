"""Wealth dynamics beyond conserved pairwise exchange.

Three model families: proportional exchange with multiplicative growth, a
mean-field stochastic-growth model with redistribution, and a closed
money-plus-stock market with a clearing price. Plus the hierarchical income
constructor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc, gammaln

from . import _pykernels as _k
from .analysis import EmpiricalDistribution
from .errors import InvalidParameterError, InvalidPopulationError, NoClearingError
from .population import Population
from .rng import RngStream


# ---------------------------------------------------------------------------
# proportional exchange with growth

@dataclass(frozen=True)
class GrowthExchange:
    """Proportional exchange, then both post-balances grow by factor 1+zeta.

    Total wealth is not conserved; analysis is on relative wealth. With
    zeta = 0 this is bit-identical to the Proportional rule.
    """

    gamma: float
    zeta: float
    kind = "pairwise"
    kernel_id = _k.RULE_GROWTH
    grows = True

    def __post_init__(self):
        if not (0.0 < self.gamma < 1.0):
            raise InvalidParameterError("gamma must be in (0, 1)")
        if not (self.zeta >= 0.0 and np.isfinite(self.zeta)):
            raise InvalidParameterError("zeta must be non-negative and finite")

    def kernel_params(self) -> tuple[float, float]:
        return float(self.gamma), float(self.zeta)


def growth_exchange_step(population: Population, model: GrowthExchange,
                         rng: RngStream, credit=None, pairing=None):
    """One growth-exchange transaction: proportional transfer, then the pair
    grows by 1+zeta. Thin wrapper over the generic pairwise step."""
    from .kinetic import NoDebt, UniformSymmetric, pairwise_step

    credit = NoDebt() if credit is None else credit
    pairing = UniformSymmetric() if pairing is None else pairing
    return pairwise_step(population, model, credit, pairing, rng)


# ---------------------------------------------------------------------------
# mean-field growth with redistribution

@dataclass(frozen=True)
class MeanFieldGrowth:
    """Relative wealth under multiplicative noise and mean-reverting flows.

    Parameters are rates: coupling J spreads wealth toward the mean,
    mean_eta is the average individual growth rate (it cancels from the
    relative-wealth dynamics and only sets the growth of absolute mean
    wealth, at rate mean_eta + sigma2), sigma2 is the noise half-variance,
    dt the integration step. Stability needs J*dt < 1 and sigma2*dt well
    below 1; the constructor enforces sigma2*dt < 0.5.

    Each agent's relative wealth w follows
        dw = J*(1 - w)*dt + w*sqrt(2*sigma2)*dW
    in the Ito convention. The governing forward equation for this process
    is exactly the model's: expanding its diffusion term shows the drift is
    J*(1 - w) with diffusion coefficient sigma2*w**2 doubled inside the
    second derivative, i.e. noise variance 2*sigma2 per unit time. The
    growth-rate correction term (-sigma2*w) that appears in the Langevin
    form cancels against the Stratonovich-to-Ito conversion, so no explicit
    drift correction is applied here.
    """

    J: float
    mean_eta: float = 0.0
    sigma2: float = 1.0
    dt: float = 0.01
    kind = "sde"

    def __post_init__(self):
        if not (self.J >= 0 and np.isfinite(self.J)):
            raise InvalidParameterError("J must be non-negative and finite")
        if not np.isfinite(self.mean_eta):
            raise InvalidParameterError("mean_eta must be finite")
        if not (self.sigma2 >= 0 and np.isfinite(self.sigma2)):
            raise InvalidParameterError("sigma2 must be non-negative and finite")
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise InvalidParameterError("dt must be positive")
        if not (self.J * self.dt < 1.0 and self.sigma2 * self.dt < 0.5):
            raise InvalidParameterError("need J*dt < 1 and sigma2*dt < 0.5 for stability")

    @property
    def mu(self) -> float:
        """Redistribution-to-noise ratio J/sigma2, the tail parameter."""
        if self.sigma2 <= 0:
            raise InvalidParameterError("mu undefined for sigma2 = 0")
        return self.J / self.sigma2


_WEALTH_FLOOR = 1e-12


def meanfield_wealth_step(w: np.ndarray, model: MeanFieldGrowth,
                          rng: RngStream) -> np.ndarray:
    """One explicit Euler-Maruyama step on the relative-wealth vector.

    Updates in place and returns the vector. Draws one standard normal per
    agent; balances are clamped at a tiny positive floor (1e-12, where the
    stationary density is vanishingly small) so multiplicative noise cannot
    cross zero in one step.
    """
    if not np.all(np.isfinite(w)):
        raise InvalidPopulationError("non-finite wealth entering step")
    z = rng.generator.standard_normal(w.shape[0])
    scale = np.sqrt(2.0 * model.sigma2 * model.dt)
    w += model.J * (1.0 - w) * model.dt + w * scale * z
    np.maximum(w, _WEALTH_FLOOR, out=w)
    return w


def meanfield_stationary_pdf(w, mu: float):
    """Stationary density of the mean-field growth model.

    Zero-flux integration of the stationary forward equation gives
        P(w) = c * exp(-mu/w) / w**(2+mu),  mu = J/sigma2,
    and substituting u = mu/w turns the normalization integral into a gamma
    integral: c = mu**(1+mu) / Gamma(1+mu). The same substitution shows the
    mean is exactly 1 for every mu.
    """
    if not (mu > 0 and np.isfinite(mu)):
        raise InvalidParameterError("mu must be positive and finite")
    scalar = np.ndim(w) == 0
    w = np.atleast_1d(np.asarray(w, dtype=np.float64))
    out = np.zeros_like(w)
    pos = w > 0
    logc = (1.0 + mu) * np.log(mu) - gammaln(1.0 + mu)
    wp = w[pos]
    out[pos] = np.exp(logc - mu / wp - (2.0 + mu) * np.log(wp))
    return float(out[0]) if scalar else out


def meanfield_stationary_cdf(w, mu: float):
    """Stationary CDF: regularized upper incomplete gamma Q(1+mu, mu/w)."""
    if not (mu > 0 and np.isfinite(mu)):
        raise InvalidParameterError("mu must be positive and finite")
    scalar = np.ndim(w) == 0
    w = np.atleast_1d(np.asarray(w, dtype=np.float64))
    out = np.zeros_like(w)
    pos = w > 0
    out[pos] = gammaincc(1.0 + mu, mu / w[pos])
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# money-plus-stock market

@dataclass(frozen=True)
class Market:
    """Closed market: money plus a fixed stock, traded at a clearing price.

    Each agent holds money and shares and targets a preferred wealth
    fraction in stock; preferences are redrawn with probability
    redraw_prob per agent per step (default 1/n: one expected redraw per
    step). Money and share totals are both conserved.
    """

    initial_shares: float
    redraw_prob: float | None = None
    kind = "market"

    def __post_init__(self):
        if not (self.initial_shares > 0 and np.isfinite(self.initial_shares)):
            raise InvalidParameterError("initial_shares must be positive and finite")
        if self.redraw_prob is not None and not (0.0 < self.redraw_prob <= 1.0):
            raise InvalidParameterError("redraw_prob must be in (0, 1]")


def clearing_price(prefs: np.ndarray, money: np.ndarray, shares: np.ndarray,
                   total_shares: float | None = None) -> float:
    """Price at which desired stock holdings sum to the outstanding stock.

    Agent i wants stock worth prefs[i] * (money[i] + p*shares[i]); summing
    desired shares and equating to the total gives
        p = sum(prefs*money) / (total_shares - sum(prefs*shares)).
    Raises NoClearingError when no positive price exists (denominator or
    numerator not positive).
    """
    s_total = float(np.sum(shares)) if total_shares is None else float(total_shares)
    num = float(np.dot(prefs, money))
    den = s_total - float(np.dot(prefs, shares))
    if den <= 0.0 or num <= 0.0:
        raise NoClearingError(f"no positive clearing price (num={num}, den={den})")
    return num / den


def rebalance_at_clearing(pop: Population) -> float:
    """Clear the market at current preferences and rebalance every agent.

    Each agent ends holding stock worth prefs*wealth at the new price; its
    wealth is unchanged by its own trade. Returns the price. Used both for
    the initial alignment of holdings with preferences and inside
    market_step after redraws.
    """
    p = clearing_price(pop.prefs, pop.balances, pop.shares)
    w = pop.balances + p * pop.shares
    new_shares = pop.prefs * w / p
    pop.balances = w - p * new_shares
    pop.shares = new_shares
    pop.price = p
    return p


def market_step(pop: Population, model: Market, rng: RngStream) -> float:
    """One market round, in place: redraw some preferences, clear, rebalance.

    Each agent independently redraws its preference with probability
    redraw_prob. When nothing was redrawn and a price is already in force
    the state is exactly unchanged (holdings already match preferences).
    Otherwise the price clears the stock and every agent rebalances so its
    stock is worth prefs*wealth at the new price. A step with no positive
    clearing price leaves balances and shares unchanged. Returns the price
    in force after the step.
    """
    n = pop.balances.shape[0]
    q = model.redraw_prob if model.redraw_prob is not None else 1.0 / n
    u = rng.generator.random(n)
    idx = np.nonzero(u < q)[0]
    if idx.size:
        pop.prefs[idx] = rng.generator.random(idx.size)
    elif np.isfinite(pop.price) and pop.price > 0:
        return pop.price
    try:
        return rebalance_at_clearing(pop)
    except NoClearingError:
        return pop.price


# ---------------------------------------------------------------------------
# hierarchical incomes

@dataclass(frozen=True)
class Additive:
    """Income increases by a fixed amount d per level."""

    d: float

    def __post_init__(self):
        if not (self.d > 0 and np.isfinite(self.d)):
            raise InvalidParameterError("d must be positive and finite")


@dataclass(frozen=True)
class Multiplicative:
    """Income is multiplied by a fixed factor c per level."""

    c: float

    def __post_init__(self):
        if not (self.c > 1 and np.isfinite(self.c)):
            raise InvalidParameterError("c must exceed 1")


def hierarchy_incomes(levels: int, branching: float, base: float,
                      increment: Additive | Multiplicative) -> EmpiricalDistribution:
    """Incomes on a tree hierarchy: each level up is branching times rarer.

    Rank k counts levels above the bottom (k = 0..levels-1); the population
    share at rank k is proportional to branching**-k, and income there is
    base + k*d (Additive) or base*c**k (Multiplicative), so income rises
    toward the sparse top.

    Returns weighted samples, one per level. Additive increments give an
    exponential income distribution with temperature d/ln(branching);
    multiplicative increments give a power-law tail with CCDF exponent
    ln(branching)/ln(c).
    """
    if levels < 1:
        raise InvalidParameterError("levels must be at least 1")
    if not (branching > 1 and np.isfinite(branching)):
        raise InvalidParameterError("branching must exceed 1")
    if not (base > 0 and np.isfinite(base)):
        raise InvalidParameterError("base must be positive and finite")
    rank = np.arange(levels, dtype=np.float64)
    weights = branching**-rank
    if isinstance(increment, Additive):
        values = base + rank * increment.d
    elif isinstance(increment, Multiplicative):
        values = base * increment.c**rank
    else:
        raise InvalidParameterError("increment must be Additive or Multiplicative")
    return EmpiricalDistribution(values=values, weights=weights)
