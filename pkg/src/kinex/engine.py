"""Deterministic run loop: seeded simulations, snapshots, replicas.

A ModelSpec fully determines a Trajectory (bit for bit). The engine owns
state setup, the chunked stepping loop, snapshot and entropy recording,
invariant checking at snapshots, and worker-count-independent parallel
replica orchestration.
"""

from __future__ import annotations

import dataclasses
import multiprocessing
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .analysis import balance_entropy
from .errors import InternalInvariantError, InvalidParameterError
from .kinetic import (
    Bank,
    FirmEconomy,
    FixedDirectedLinks,
    Limit,
    NoDebt,
    UniformSymmetric,
    Unlimited,
    firm_cycle,
    pairing_key,
)
from .population import Population, init_population
from .rng import RngStream
from .wealth import Market, MeanFieldGrowth, market_step, meanfield_wealth_step, rebalance_at_clearing

# full balance vectors are stored up to this population size; above it,
# snapshots carry quantiles plus a fixed histogram (bounded memory)
_FULL_SNAPSHOT_MAX = 100_000
_SUMMARY_BINS = 1000

# measurement floor for the conservation check: summing 1e5 doubles is
# itself only accurate to a few 1e-15 relative
_CONSERVATION_FLOOR = 1e-13

_KNOWN_KINDS = ("pairwise", "sde", "market", "firm")


@dataclass(frozen=True)
class ModelSpec:
    """Complete, hashable description of one simulation run.

    exchange_rule picks the dynamics (any pairwise rule, the mean-field
    growth model, the market model, or a firm economy); credit_policy and
    pairing_policy apply to pairwise and firm dynamics. step_budget counts
    transaction attempts (blocked attempts included); snapshots are taken
    every snapshot_stride attempts plus at start and end (None means only
    start and end). seed and stream_id select the random stream; replicas
    differ only in stream_id.
    """

    exchange_rule: object
    agent_count: int
    initial_balance: float
    step_budget: int
    snapshot_stride: int | None = None
    credit_policy: object = field(default_factory=NoDebt)
    pairing_policy: object = field(default_factory=UniformSymmetric)
    seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        kind = getattr(self.exchange_rule, "kind", None)
        if kind not in _KNOWN_KINDS:
            raise InvalidParameterError(f"unknown exchange rule {self.exchange_rule!r}")
        if self.agent_count < 2:
            raise InvalidParameterError("agent_count must be at least 2")
        if not (self.initial_balance > 0 and np.isfinite(self.initial_balance)):
            raise InvalidParameterError("initial_balance must be positive and finite")
        if self.step_budget < 0:
            raise InvalidParameterError("step_budget must be non-negative")
        if self.snapshot_stride is not None and self.snapshot_stride < 1:
            raise InvalidParameterError("snapshot_stride must be positive")
        if not (0 <= self.seed < 2**64):
            raise InvalidParameterError("seed must fit in 64 bits")
        if self.stream_id < 0:
            raise InvalidParameterError("stream_id must be non-negative")
        if not isinstance(self.credit_policy, (NoDebt, Limit, Bank, Unlimited)):
            raise InvalidParameterError(f"unknown credit policy {self.credit_policy!r}")
        if not isinstance(self.pairing_policy, (UniformSymmetric, FixedDirectedLinks)):
            raise InvalidParameterError(f"unknown pairing policy {self.pairing_policy!r}")
        if kind in ("sde", "market"):
            if not isinstance(self.credit_policy, NoDebt):
                raise InvalidParameterError("credit policies apply only to exchange and firm dynamics")
            if not isinstance(self.pairing_policy, UniformSymmetric):
                raise InvalidParameterError("pairing policies apply only to pairwise exchange")

    @property
    def stride(self) -> int:
        if self.snapshot_stride is not None:
            return self.snapshot_stride
        return max(1, self.step_budget)


@dataclass(frozen=True)
class Snapshot:
    """Population state at one step count.

    balances (and shares, for the market model) hold full per-agent copies
    for populations up to 100000 agents; larger runs store a summary dict
    with percentiles 0..100 and a 1000-bin histogram instead.
    """

    step: int
    balances: np.ndarray | None = None
    shares: np.ndarray | None = None
    price: float | None = None
    summary: dict | None = None


@dataclass(frozen=True)
class Trajectory:
    """Everything one run produced: snapshots, entropy series, run metadata."""

    spec: ModelSpec
    snapshots: tuple[Snapshot, ...]
    entropy_series: np.ndarray  # shape (k, 2): step, entropy per agent
    metadata: dict

    def final_balances(self) -> np.ndarray:
        last = self.snapshots[-1]
        if last.balances is None:
            raise InvalidParameterError("final snapshot stores a summary, not balances")
        return last.balances


def _summarize(vec: np.ndarray) -> dict:
    qs = np.percentile(vec, np.arange(101))
    counts, edges = np.histogram(vec, bins=_SUMMARY_BINS)
    return {"quantiles": qs, "hist_edges": edges, "hist_counts": counts}


def _check_invariants(spec: ModelSpec, pop: Population, step: int,
                      share_total0: float | None) -> None:
    b = pop.balances
    if not np.all(np.isfinite(b)):
        raise InternalInvariantError("non-finite balance", step=step)
    kind = spec.exchange_rule.kind
    conserving = kind in ("pairwise", "firm", "market") and not getattr(
        spec.exchange_rule, "grows", False)
    if conserving:
        total = float(np.sum(b))
        tol = max(1e-9 * (step / 1e6), _CONSERVATION_FLOOR)
        drift = abs(total - pop.total_money) / pop.total_money
        if drift > tol:
            raise InternalInvariantError(
                "money conservation violated", step=step,
                detail=f"total {total!r} vs initial {pop.total_money!r} (rel {drift:.3e})")
    if kind == "market":
        stotal = float(np.sum(pop.shares))
        sdrift = abs(stotal - share_total0) / share_total0
        if sdrift > max(1e-9 * (step / 1e6), _CONSERVATION_FLOOR):
            raise InternalInvariantError(
                "share conservation violated", step=step,
                detail=f"total {stotal!r} vs initial {share_total0!r}")
    credit = spec.credit_policy
    if kind in ("pairwise", "firm"):
        if isinstance(credit, NoDebt):
            if float(np.min(b)) < 0.0:
                raise InternalInvariantError("negative balance without debt", step=step,
                                             detail=f"min {np.min(b)!r}")
        elif isinstance(credit, Limit):
            if float(np.min(b)) < -credit.max_debt:
                raise InternalInvariantError("debt limit exceeded", step=step,
                                             detail=f"min {np.min(b)!r}")
        elif isinstance(credit, Bank):
            cap = credit.kernel_param(pop.total_money)
            debt = pop.recompute_debt()
            if debt > cap * (1.0 + max(1e-9 * (step / 1e6), 1e-12)):
                raise InternalInvariantError("aggregate debt cap exceeded", step=step,
                                             detail=f"debt {debt!r} vs cap {cap!r}")


def run_simulation(spec: ModelSpec) -> Trajectory:
    """Run one seeded simulation to its step budget and collect the trajectory.

    Exactly step_budget attempts are executed (blocked ones included);
    state invariants are checked at every snapshot; rerunning the same spec
    reproduces the trajectory bit for bit, on either kernel backend.
    """
    t0 = time.perf_counter()
    rng = RngStream(spec.seed, spec.stream_id)
    kind = spec.exchange_rule.kind
    rule = spec.exchange_rule

    market = rule if kind == "market" else None
    pop = init_population(
        spec.agent_count, spec.initial_balance,
        initial_stock=market.initial_shares if market is not None else None)
    executed = 0
    blocked = 0
    prices: list[float] = []

    if kind == "pairwise":
        if getattr(rule, "needs_propensities", False):
            pop.saving_propensities = rng.generator.random(pop.n)
        lam = pop.saving_propensities
        if lam is None:
            lam = np.zeros(pop.n)
        pair_key = pairing_key(spec.pairing_policy, rng)
        directed = bool(getattr(spec.pairing_policy, "directed", False))
        rule_id = rule.kernel_id
        rp1, rp2 = rule.kernel_params()
        credit_id = spec.credit_policy.kernel_id
        cp = spec.credit_policy.kernel_param(pop.total_money)
        grows = bool(getattr(rule, "grows", False))
    elif kind == "sde":
        wtilde = np.ones(pop.n)
        growth_rate = rule.mean_eta + rule.sigma2
    elif kind == "market":
        pop.prefs = rng.generator.random(pop.n)
        rebalance_at_clearing(pop)

    share_total0 = float(np.sum(pop.shares)) if pop.shares is not None else None

    snapshots: list[Snapshot] = []
    entropy: list[tuple[int, float]] = []

    def record(step: int) -> None:
        if kind == "sde":
            vec = wtilde * spec.initial_balance
            pop.balances = vec
        else:
            vec = pop.balances
        pop.step_count = step
        pop.outstanding_debt = pop.recompute_debt()
        _check_invariants(spec, pop, step, share_total0)
        entropy.append((step, balance_entropy(vec)))
        price = float(pop.price) if kind == "market" else None
        if price is not None:
            prices.append(price)
        if pop.n <= _FULL_SNAPSHOT_MAX:
            snapshots.append(Snapshot(
                step=step, balances=vec.copy(),
                shares=pop.shares.copy() if kind == "market" else None,
                price=price))
        else:
            snapshots.append(Snapshot(step=step, price=price, summary=_summarize(vec)))

    record(0)
    done = 0
    stride = spec.stride
    while done < spec.step_budget:
        chunk = min(stride, spec.step_budget - done)
        if kind == "pairwise":
            ok, no, debt = kernels.run_pairwise(
                rng, pop.balances, rule_id, rp1, rp2, lam, credit_id, cp,
                pop.outstanding_debt, directed, pair_key, pop.mean_money, chunk)
            executed += ok
            blocked += no
            pop.outstanding_debt = debt
            if grows:
                total = float(np.sum(pop.balances))
                pop.log_growth += float(np.log(total / pop.total_money))
                pop.balances *= pop.total_money / total
        elif kind == "sde":
            for _ in range(chunk):
                meanfield_wealth_step(wtilde, rule, rng)
            executed += chunk
            pop.log_growth += growth_rate * rule.dt * chunk
        elif kind == "market":
            for _ in range(chunk):
                market_step(pop, rule, rng)
            executed += chunk
        else:
            for _ in range(chunk):
                outcome = firm_cycle(pop, rule.params, spec.credit_policy, rng)
                if outcome.executed:
                    executed += 1
                else:
                    blocked += 1
        done += chunk
        record(done)

    metadata = {
        "rng": {"algorithm": "pcg64", "stream": "jump-ahead",
                "seed": spec.seed, "stream_id": spec.stream_id},
        "backend": kernels.backend_name(),
        "executed": executed,
        "blocked": blocked,
        "final_debt": pop.outstanding_debt,
        "log_growth": pop.log_growth,
        "wall_clock_s": time.perf_counter() - t0,
    }
    if kind == "market":
        metadata["price"] = prices
    return Trajectory(spec=spec, snapshots=tuple(snapshots),
                      entropy_series=np.asarray(entropy, dtype=np.float64),
                      metadata=metadata)


def detect_equilibration(entropy_series, window: int, epsilon: float) -> int | None:
    """First step at which the trailing window of entropy values has settled.

    entropy_series is a sequence of (step, value) pairs. Returns the step of
    the first entry whose trailing window (that entry and the window-1
    before it) spans at most epsilon, or None if the series never settles.
    """
    series = np.asarray(entropy_series, dtype=np.float64)
    if series.ndim != 2 or series.shape[1] != 2 or series.shape[0] == 0:
        raise InvalidParameterError("entropy_series must be a non-empty sequence of pairs")
    if window < 2:
        raise InvalidParameterError("window must be at least 2")
    if not (epsilon > 0):
        raise InvalidParameterError("epsilon must be positive")
    vals = series[:, 1]
    for k in range(window - 1, series.shape[0]):
        tail = vals[k - window + 1 : k + 1]
        if float(np.max(tail) - np.min(tail)) <= epsilon:
            return int(series[k, 0])
    return None


def replica_specs(spec: ModelSpec, n_replicas: int) -> list[ModelSpec]:
    """The spec of each replica: same run, stream_id = replica index."""
    if n_replicas < 1:
        raise InvalidParameterError("n_replicas must be positive")
    return [dataclasses.replace(spec, stream_id=r) for r in range(n_replicas)]


def run_replicas(spec: ModelSpec, n_replicas: int,
                 workers: int | None = None) -> list[Trajectory]:
    """Run independent replicas, optionally in parallel worker processes.

    Replica r uses stream_id r of the same seed, so the streams never
    overlap and the result list is identical whatever the worker count.
    """
    specs = replica_specs(spec, n_replicas)
    if workers is None:
        workers = min(n_replicas, os.cpu_count() or 1)
    if workers <= 1 or n_replicas == 1:
        return [run_simulation(s) for s in specs]
    ctx = multiprocessing.get_context("spawn")
    with ctx.Pool(processes=min(workers, n_replicas)) as pool:
        return pool.map(run_simulation, specs)
