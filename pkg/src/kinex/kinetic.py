"""Pairwise exchange rules, credit policies, pairing policies, and the firm.

Rule objects are small frozen dataclasses that validate their parameters and
carry the kernel dispatch codes; the actual inner loop lives in the kernel
backends. `pairwise_step` executes a single attempt through the same
semantics, which makes single-step behaviour unit-testable and pins the
kernels to one reference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _pykernels as _k
from .errors import InvalidParameterError, InvalidPopulationError
from .rng import RngStream

_PAIRING_SALT = 0x9F4C_1A35_7B68_02ED


# ---------------------------------------------------------------------------
# exchange rules

@dataclass(frozen=True)
class FixedAmount:
    """Transfer a constant amount from payer to receiver."""

    amount: float = 1.0
    kind = "pairwise"
    kernel_id = _k.RULE_FIXED

    def __post_init__(self):
        if not (self.amount > 0 and np.isfinite(self.amount)):
            raise InvalidParameterError("amount must be positive and finite")

    def kernel_params(self) -> tuple[float, float]:
        return float(self.amount), 0.0


@dataclass(frozen=True)
class RandomFractionOfMean:
    """Transfer a uniform random fraction of the global mean balance."""

    kind = "pairwise"
    kernel_id = _k.RULE_FRAC_MEAN

    def kernel_params(self) -> tuple[float, float]:
        return 0.0, 0.0


@dataclass(frozen=True)
class RandomFractionOfPairMean:
    """Transfer a uniform random fraction of the trading pair's mean balance."""

    kind = "pairwise"
    kernel_id = _k.RULE_FRAC_PAIR_MEAN

    def kernel_params(self) -> tuple[float, float]:
        return 0.0, 0.0


@dataclass(frozen=True)
class Proportional:
    """Payer transfers a fixed fraction gamma of its own balance."""

    gamma: float
    kind = "pairwise"
    kernel_id = _k.RULE_PROPORTIONAL

    def __post_init__(self):
        if not (0.0 < self.gamma < 1.0):
            raise InvalidParameterError("gamma must be in (0, 1)")

    def kernel_params(self) -> tuple[float, float]:
        return float(self.gamma), 0.0


@dataclass(frozen=True)
class Saving:
    """Both agents keep a fraction lam; the rest is split at a uniform ratio.

    With first agent i and partner j, pool = (1 - lam) * (m_i + m_j):
    m_i' = lam * m_i + xi * pool, m_j' = lam * m_j + (1 - xi) * pool,
    xi uniform on [0, 1).
    """

    lam: float
    kind = "pairwise"
    kernel_id = _k.RULE_SAVING

    def __post_init__(self):
        if not (0.0 <= self.lam < 1.0):
            raise InvalidParameterError("lam must be in [0, 1)")

    def kernel_params(self) -> tuple[float, float]:
        return float(self.lam), 0.0


@dataclass(frozen=True)
class RandomSaving:
    """Quenched per-agent saving propensities, uniform on [0, 1).

    Propensities are drawn once at initialization from the run stream and
    fixed thereafter. Pool = (1 - lam_i) m_i + (1 - lam_j) m_j;
    m_i' = lam_i m_i + xi * pool, m_j' = pair_sum - m_i'.
    """

    kind = "pairwise"
    kernel_id = _k.RULE_RANDOM_SAVING
    needs_propensities = True

    def kernel_params(self) -> tuple[float, float]:
        return 0.0, 0.0


# ---------------------------------------------------------------------------
# credit policies

@dataclass(frozen=True)
class NoDebt:
    """Balances must stay non-negative; offending transfers are blocked."""

    kernel_id = _k.CREDIT_NO_DEBT

    def kernel_param(self, total_money: float) -> float:
        return 0.0


@dataclass(frozen=True)
class Limit:
    """Each balance may go down to -max_debt; further transfers are blocked."""

    max_debt: float
    kernel_id = _k.CREDIT_LIMIT

    def __post_init__(self):
        if not (self.max_debt > 0 and np.isfinite(self.max_debt)):
            raise InvalidParameterError("max_debt must be positive and finite")

    def kernel_param(self, total_money: float) -> float:
        return float(self.max_debt)


@dataclass(frozen=True)
class Bank:
    """Aggregate borrowing against a required reserve ratio.

    An agent short of funds borrows exactly the shortfall at the moment of
    purchase (its balance goes negative) iff the aggregate debt, the sum of
    negative parts, stays within total_money * (1 - R) / R.
    """

    reserve_ratio: float
    kernel_id = _k.CREDIT_BANK

    def __post_init__(self):
        if not (0.0 < self.reserve_ratio <= 1.0):
            raise InvalidParameterError("reserve_ratio must be in (0, 1]")

    def kernel_param(self, total_money: float) -> float:
        return float(total_money) * (1.0 - self.reserve_ratio) / self.reserve_ratio


@dataclass(frozen=True)
class Unlimited:
    """No bound on individual balances; nothing is ever blocked."""

    kernel_id = _k.CREDIT_UNLIMITED

    def kernel_param(self, total_money: float) -> float:
        return 0.0


# ---------------------------------------------------------------------------
# pairing policies

@dataclass(frozen=True)
class UniformSymmetric:
    """Ordered pairs (i, j), i != j, uniform with replacement per step."""

    directed = False


@dataclass(frozen=True)
class FixedDirectedLinks:
    """Every unordered pair carries a quenched orientation; payment flows
    along it.

    The orientation is a pure function of a 64-bit key and the pair, fixed at
    setup and never redrawn. With seed=None the key derives from the run's
    (seed, stream_id), so each replica gets its own quenched network; an
    explicit seed pins the network across replicas.
    """

    seed: int | None = None
    directed = True

    def __post_init__(self):
        if self.seed is not None and self.seed < 0:
            raise InvalidParameterError("pairing seed must be non-negative")


def pairing_key(pairing, rng: RngStream) -> int:
    """64-bit orientation key for a pairing policy under a given stream."""
    if not getattr(pairing, "directed", False):
        return 0
    if pairing.seed is not None:
        from .rng import splitmix64

        return splitmix64(pairing.seed)
    return rng.derived_key(_PAIRING_SALT)


# ---------------------------------------------------------------------------
# single-step execution

@dataclass(frozen=True)
class TransactionOutcome:
    """Result of one exchange attempt.

    amount is the signed net transfer to the receiver role (second index);
    zero when the step was blocked.
    """

    executed: bool
    i: int
    j: int
    amount: float


def pairwise_step(population, rule, credit, pairing, rng: RngStream) -> TransactionOutcome:
    """Execute one exchange attempt on the population, in place.

    Draw discipline matches the batch kernels exactly (pair first, then the
    rule's amount/split draw; draws consumed even when blocked), so a sequence
    of pairwise_step calls is bitwise identical to one kernel call with the
    same stream.
    """
    m = population.balances
    n = m.shape[0]
    if n < 2:
        raise InvalidPopulationError("need at least two agents to trade")
    i, j = _k.select_pair(rng.random(), rng.random(), n)
    if getattr(pairing, "directed", False):
        i, j = _k.orient_pair(i, j, n, pairing_key(pairing, rng))
    u3 = rng.random() if rule.kernel_id in _k.AMOUNT_DRAW_RULES else 0.0
    rp1, rp2 = rule.kernel_params()
    lam = population.saving_propensities
    if getattr(rule, "needs_propensities", False) and lam is None:
        raise InvalidPopulationError("population lacks saving propensities")
    cp = credit.kernel_param(population.total_money)
    mj_before = m[j]
    ok, new_i, new_j, debt = _k.step_outcome(
        m, i, j, u3, rule.kernel_id, rp1, rp2, lam, credit.kernel_id, cp,
        population.outstanding_debt, population.mean_money,
    )
    if ok:
        m[i] = new_i
        m[j] = new_j
        population.outstanding_debt = debt
        return TransactionOutcome(True, i, j, float(new_j - mj_before))
    return TransactionOutcome(False, i, j, 0.0)


# ---------------------------------------------------------------------------
# firm model

@dataclass(frozen=True)
class FirmParams:
    """One firm's technology and market environment.

    Production Q = L**chi * K**(1-chi); inverse demand p = v / Q**eta;
    wage per worker, interest paid per unit capital borrowed.
    """

    v: float
    eta: float
    chi: float
    wage: float
    interest: float

    def __post_init__(self):
        if not (self.v > 0 and np.isfinite(self.v)):
            raise InvalidParameterError("v must be positive and finite")
        if not (0.0 < self.eta < 1.0):
            raise InvalidParameterError("eta must be in (0, 1)")
        if not (0.0 < self.chi < 1.0):
            raise InvalidParameterError("chi must be in (0, 1)")
        if not (self.wage > 0 and np.isfinite(self.wage)):
            raise InvalidParameterError("wage must be positive and finite")
        if not (self.interest > 0 and np.isfinite(self.interest)):
            raise InvalidParameterError("interest must be positive and finite")


@dataclass(frozen=True)
class FirmPlan:
    """Profit-maximizing continuous plan for a firm."""

    capital: float
    labor: float
    output: float
    price: float
    profit: float


def optimize_firm(params: FirmParams) -> FirmPlan:
    """Maximize F(L, K) = v * (L**chi * K**(1-chi))**(1-eta) - wage*L - interest*K.

    Revenue is a concave power (degree 1-eta < 1) of a degree-one production
    function and costs are linear, so the stationary point of the first-order
    conditions is the unique global maximum. Closed form: the FOC ratio gives
    K = c*L with c = (wage/interest)*((1-chi)/chi), then
    L**(rho-1) = wage / (v*rho*chi*c**(rho*(1-chi))), rho = 1-eta.
    """
    v, eta, chi, w, h = params.v, params.eta, params.chi, params.wage, params.interest
    rho = 1.0 - eta
    c = (w / h) * ((1.0 - chi) / chi)
    labor = (w / (v * rho * chi * c ** (rho * (1.0 - chi)))) ** (1.0 / (rho - 1.0))
    capital = c * labor
    output = labor**chi * capital ** (1.0 - chi)
    price = v / output**eta
    profit = price * output - w * labor - h * capital
    return FirmPlan(capital=capital, labor=labor, output=output, price=price, profit=profit)


@dataclass(frozen=True)
class CycleOutcome:
    """Realized bookkeeping of one production cycle."""

    executed: bool
    plan: FirmPlan
    firm: int = -1
    lender: int = -1
    workers: tuple[int, ...] = ()
    buyers: tuple[int, ...] = ()
    wages_paid: int = 0
    items_sold: int = 0
    repaid: bool = False


def _transfer(population, payer: int, recv: int, amount: float, credit) -> bool:
    """Move amount from payer to recv iff the credit policy allows it.

    Uses the same bound semantics as the exchange kernels; the receiver-side
    post-balance is pair_sum - payer_post so the pair sum is preserved to
    one ulp.
    """
    m = population.balances
    mi = m[payer]
    mj = m[recv]
    s = mi + mj
    new_p = mi - amount
    new_r = s - new_p
    cid = credit.kernel_id
    if cid == _k.CREDIT_NO_DEBT:
        if new_p < 0.0 or new_r < 0.0:
            return False
    elif cid == _k.CREDIT_LIMIT:
        cp = credit.kernel_param(population.total_money)
        if new_p < -cp or new_r < -cp:
            return False
    elif cid == _k.CREDIT_BANK:
        cap = credit.kernel_param(population.total_money)
        debt = population.outstanding_debt
        ddelta = (
            (-new_p if new_p < 0.0 else 0.0)
            - (-mi if mi < 0.0 else 0.0)
            + (-new_r if new_r < 0.0 else 0.0)
            - (-mj if mj < 0.0 else 0.0)
        )
        if debt + ddelta > cap:
            return False
        population.outstanding_debt = debt + ddelta
    m[payer] = new_p
    m[recv] = new_r
    return True


@dataclass(frozen=True)
class FirmEconomy:
    """Engine-facing activity that runs one firm production cycle per step."""

    params: FirmParams
    kind = "firm"


def firm_cycle(population, params: FirmParams, credit, rng: RngStream) -> CycleOutcome:
    """Run one borrow/hire/produce/sell/repay cycle on the population.

    Roles (firm, lender, floor(L*) workers, floor(Q*) buyers) are drawn
    uniformly without replacement. Money transfers run in order: lender to
    firm (K*), firm to each worker (wage), each buyer to firm (price), firm
    to lender (K* plus interest). Every transfer is individually subject to
    the credit policy; a blocked transfer is skipped, so total money is
    conserved transfer by transfer. An unprofitable plan (F* <= 0) or a
    blocked initial loan aborts the cycle as a no-op.
    """
    plan = optimize_firm(params)
    if not plan.profit > 0.0:
        return CycleOutcome(False, plan)
    n_workers = int(plan.labor)
    n_buyers = int(plan.output)
    n_roles = 2 + n_workers + n_buyers
    m = population.balances
    if n_roles > m.shape[0]:
        raise InvalidPopulationError(
            f"cycle needs {n_roles} distinct agents, population has {m.shape[0]}"
        )
    roles = rng.generator.choice(m.shape[0], size=n_roles, replace=False)
    firm = int(roles[0])
    lender = int(roles[1])
    workers = tuple(int(r) for r in roles[2 : 2 + n_workers])
    buyers = tuple(int(r) for r in roles[2 + n_workers :])

    if not _transfer(population, lender, firm, plan.capital, credit):
        return CycleOutcome(False, plan, firm, lender, workers, buyers)
    wages_paid = 0
    for w in workers:
        if _transfer(population, firm, w, params.wage, credit):
            wages_paid += 1
    items_sold = 0
    for b in buyers:
        if _transfer(population, b, firm, plan.price, credit):
            items_sold += 1
    repaid = _transfer(
        population, firm, lender, plan.capital + params.interest * plan.capital, credit
    )
    return CycleOutcome(True, plan, firm, lender, workers, buyers, wages_paid, items_sold, repaid)
