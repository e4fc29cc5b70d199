"""kinex: kinetic exchange simulations and income-distribution analysis.

Agent-based money/wealth exchange models (fixed, random-fraction,
proportional, saving-propensity, debt variants, directed pairing, a
money-plus-stock market, a firm economy, mean-field stochastic growth),
their stationary drift-diffusion descriptions, and the statistical toolkit
to analyze the resulting distributions: exponential/gamma/power-law fits,
two-class decomposition, Lorenz curves, entropy.

Hot exchange loops run in a compiled extension when it is available and in
a pure-Python fallback otherwise; both produce bit-identical streams. The
active backend is reported by kinex.backend_name().
"""

from .analysis import (
    EmpiricalDistribution,
    FitReport,
    Histogram,
    LorenzCurve,
    TwoClassReport,
    balance_entropy,
    entropy,
    family_income_cdf,
    family_income_pdf,
    fit_exponential,
    fit_gamma,
    fit_pareto_tail,
    gini,
    gini_two_class,
    histogram,
    lorenz_curve,
    lorenz_exponential,
    lorenz_two_class,
    pair_sum_samples,
    paired_correlation,
    sup_cdf_distance,
    two_class_fit,
    weighted_quantile,
)
from .engine import (
    ModelSpec,
    Snapshot,
    Trajectory,
    detect_equilibration,
    replica_specs,
    run_replicas,
    run_simulation,
)
from .errors import (
    ConfigError,
    InsufficientDataError,
    InternalInvariantError,
    InvalidDataError,
    InvalidParameterError,
    InvalidPopulationError,
    KinexError,
    NoClearingError,
    UndefinedGiniError,
)
from .fokker_planck import (
    DriftDiffusion,
    GridDensity,
    beta_from_gamma,
    beta_from_lambda,
    pdf_gamma,
    pdf_interpolating,
    stationary_solution,
)
from .kernels import backend_name
from .kinetic import (
    Bank,
    CycleOutcome,
    FirmEconomy,
    FirmParams,
    FirmPlan,
    FixedAmount,
    FixedDirectedLinks,
    Limit,
    NoDebt,
    Proportional,
    RandomFractionOfMean,
    RandomFractionOfPairMean,
    RandomSaving,
    Saving,
    TransactionOutcome,
    UniformSymmetric,
    Unlimited,
    firm_cycle,
    optimize_firm,
    pairwise_step,
)
from .population import Population, init_population
from .rng import RngStream, splitmix64
from .wealth import (
    Additive,
    GrowthExchange,
    Market,
    MeanFieldGrowth,
    Multiplicative,
    clearing_price,
    growth_exchange_step,
    hierarchy_incomes,
    market_step,
    meanfield_stationary_cdf,
    meanfield_stationary_pdf,
    meanfield_wealth_step,
    rebalance_at_clearing,
)

__version__ = "0.1.0"

__all__ = [
    "Additive",
    "Bank",
    "ConfigError",
    "CycleOutcome",
    "DriftDiffusion",
    "EmpiricalDistribution",
    "FirmEconomy",
    "FirmParams",
    "FirmPlan",
    "FitReport",
    "FixedAmount",
    "FixedDirectedLinks",
    "GridDensity",
    "GrowthExchange",
    "Histogram",
    "InsufficientDataError",
    "InternalInvariantError",
    "InvalidDataError",
    "InvalidParameterError",
    "InvalidPopulationError",
    "KinexError",
    "Limit",
    "LorenzCurve",
    "Market",
    "MeanFieldGrowth",
    "ModelSpec",
    "Multiplicative",
    "NoClearingError",
    "NoDebt",
    "Population",
    "Proportional",
    "RandomFractionOfMean",
    "RandomFractionOfPairMean",
    "RandomSaving",
    "RngStream",
    "Saving",
    "Snapshot",
    "Trajectory",
    "TransactionOutcome",
    "TwoClassReport",
    "UndefinedGiniError",
    "UniformSymmetric",
    "Unlimited",
    "backend_name",
    "balance_entropy",
    "beta_from_gamma",
    "beta_from_lambda",
    "clearing_price",
    "detect_equilibration",
    "entropy",
    "family_income_cdf",
    "family_income_pdf",
    "firm_cycle",
    "fit_exponential",
    "fit_gamma",
    "fit_pareto_tail",
    "gini",
    "gini_two_class",
    "growth_exchange_step",
    "hierarchy_incomes",
    "histogram",
    "init_population",
    "lorenz_curve",
    "lorenz_exponential",
    "lorenz_two_class",
    "market_step",
    "meanfield_stationary_cdf",
    "meanfield_stationary_pdf",
    "meanfield_wealth_step",
    "optimize_firm",
    "pair_sum_samples",
    "paired_correlation",
    "pairwise_step",
    "pdf_gamma",
    "pdf_interpolating",
    "rebalance_at_clearing",
    "replica_specs",
    "run_replicas",
    "run_simulation",
    "splitmix64",
    "stationary_solution",
    "sup_cdf_distance",
    "two_class_fit",
    "weighted_quantile",
]
