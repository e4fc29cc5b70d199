"""Population state shared by the exchange models."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, InvalidPopulationError


@dataclass
class Population:
    """Mutable agent state for a single run.

    balances is the money vector; total_money is the algebraic total at
    initialization (the conserved quantity for exchange rules; with debt,
    balances may go negative but the algebraic sum stays put).
    saving_propensities, shares, and prefs exist only for the models that
    use them. outstanding_debt caches the sum of negative parts; the engine
    re-anchors it from balances at every snapshot. step_count counts
    transaction attempts applied so far.
    """

    balances: np.ndarray
    total_money: float
    saving_propensities: np.ndarray | None = None
    shares: np.ndarray | None = None
    prefs: np.ndarray | None = None
    price: float = float("nan")
    outstanding_debt: float = 0.0
    log_growth: float = 0.0
    step_count: int = 0

    @property
    def n(self) -> int:
        return int(self.balances.shape[0])

    @property
    def mean_money(self) -> float:
        """Initial mean balance; constant because the total is conserved."""
        return self.total_money / self.balances.shape[0]

    def recompute_debt(self) -> float:
        """Exact aggregate debt (sum of negative parts) from the balances."""
        b = self.balances
        return float(np.sum(np.where(b < 0.0, -b, 0.0)))


def init_population(n_agents: int, initial_money: float,
                    initial_stock: float | None = None) -> Population:
    """Equal-endowment population: every agent starts with initial_money.

    When initial_stock is given every agent also starts with that many
    shares (used by the market model).
    """
    if n_agents < 2:
        raise InvalidPopulationError("n_agents must be at least 2")
    if not np.isfinite(initial_money):
        raise InvalidParameterError("initial_money must be finite")
    if initial_money < 0:
        raise InvalidParameterError("initial_money must be non-negative")
    shares = None
    if initial_stock is not None:
        if not (initial_stock >= 0 and np.isfinite(initial_stock)):
            raise InvalidParameterError("initial_stock must be non-negative and finite")
        shares = np.full(n_agents, float(initial_stock), dtype=np.float64)
    balances = np.full(n_agents, float(initial_money), dtype=np.float64)
    return Population(balances=balances,
                      total_money=float(initial_money) * n_agents,
                      shares=shares)
