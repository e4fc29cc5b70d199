"""File formats: snapshot/entropy/report/curve files and run configuration.

All data CSVs serialize floats with 17 significant digits so values
round-trip bit for bit. Data files never contain timestamps; wall-clock
and creation time live in the metadata JSON and are omitted in
deterministic mode.
"""

from __future__ import annotations

import csv
import json
import re
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .analysis import EmpiricalDistribution
from .engine import ModelSpec, Trajectory
from .errors import ConfigError, InvalidDataError
from .kinetic import (
    Bank,
    FirmEconomy,
    FirmParams,
    FixedAmount,
    FixedDirectedLinks,
    Limit,
    NoDebt,
    Proportional,
    RandomFractionOfMean,
    RandomFractionOfPairMean,
    RandomSaving,
    Saving,
    UniformSymmetric,
    Unlimited,
)
from .wealth import GrowthExchange, Market, MeanFieldGrowth


def fmt(x: float) -> str:
    """17-significant-digit decimal form: parses back to the same double."""
    return f"{float(x):.17g}"


# ---------------------------------------------------------------------------
# rule/policy registry (names <-> dataclasses)

def _rule_to_dict(rule) -> dict:
    if isinstance(rule, FixedAmount):
        return {"name": "fixed", "amount": rule.amount}
    if isinstance(rule, RandomFractionOfMean):
        return {"name": "frac-mean"}
    if isinstance(rule, RandomFractionOfPairMean):
        return {"name": "frac-pair-mean"}
    if isinstance(rule, Proportional):
        return {"name": "proportional", "gamma": rule.gamma}
    if isinstance(rule, Saving):
        return {"name": "saving", "lam": rule.lam}
    if isinstance(rule, RandomSaving):
        return {"name": "random-saving"}
    if isinstance(rule, GrowthExchange):
        return {"name": "growth", "gamma": rule.gamma, "zeta": rule.zeta}
    if isinstance(rule, MeanFieldGrowth):
        return {"name": "meanfield", "J": rule.J, "mean_eta": rule.mean_eta,
                "sigma2": rule.sigma2, "dt": rule.dt}
    if isinstance(rule, Market):
        out = {"name": "market", "initial_shares": rule.initial_shares}
        if rule.redraw_prob is not None:
            out["redraw_prob"] = rule.redraw_prob
        return out
    if isinstance(rule, FirmEconomy):
        p = rule.params
        return {"name": "firm", "v": p.v, "eta": p.eta, "chi": p.chi,
                "wage": p.wage, "interest": p.interest}
    raise ConfigError(f"unknown exchange rule {rule!r}")


def rule_from_dict(d: dict):
    d = dict(d)
    name = d.pop("name", None)
    try:
        if name == "fixed":
            return FixedAmount(**d)
        if name == "frac-mean":
            if d:
                raise TypeError
            return RandomFractionOfMean()
        if name == "frac-pair-mean":
            if d:
                raise TypeError
            return RandomFractionOfPairMean()
        if name == "proportional":
            return Proportional(**d)
        if name == "saving":
            return Saving(**d)
        if name == "random-saving":
            if d:
                raise TypeError
            return RandomSaving()
        if name == "growth":
            return GrowthExchange(**d)
        if name == "meanfield":
            return MeanFieldGrowth(**d)
        if name == "market":
            return Market(**d)
        if name == "firm":
            return FirmEconomy(FirmParams(**d))
    except TypeError:
        raise ConfigError(f"bad parameters {d} for rule {name!r}") from None
    raise ConfigError(f"unknown rule name {name!r}")


def _credit_to_dict(credit) -> dict:
    if isinstance(credit, NoDebt):
        return {"name": "none"}
    if isinstance(credit, Limit):
        return {"name": "limit", "max_debt": credit.max_debt}
    if isinstance(credit, Bank):
        return {"name": "bank", "reserve_ratio": credit.reserve_ratio}
    if isinstance(credit, Unlimited):
        return {"name": "unlimited"}
    raise ConfigError(f"unknown credit policy {credit!r}")


def credit_from_dict(d: dict):
    d = dict(d)
    name = d.pop("name", None)
    try:
        if name == "none":
            if d:
                raise TypeError
            return NoDebt()
        if name == "limit":
            return Limit(**d)
        if name == "bank":
            return Bank(**d)
        if name == "unlimited":
            if d:
                raise TypeError
            return Unlimited()
    except TypeError:
        raise ConfigError(f"bad parameters {d} for credit policy {name!r}") from None
    raise ConfigError(f"unknown credit policy name {name!r}")


def _pairing_to_dict(pairing) -> dict:
    if isinstance(pairing, UniformSymmetric):
        return {"name": "uniform"}
    if isinstance(pairing, FixedDirectedLinks):
        out = {"name": "directed"}
        if pairing.seed is not None:
            out["seed"] = pairing.seed
        return out
    raise ConfigError(f"unknown pairing policy {pairing!r}")


def pairing_from_dict(d: dict):
    d = dict(d)
    name = d.pop("name", None)
    try:
        if name == "uniform":
            if d:
                raise TypeError
            return UniformSymmetric()
        if name == "directed":
            return FixedDirectedLinks(**d)
    except TypeError:
        raise ConfigError(f"bad parameters {d} for pairing policy {name!r}") from None
    raise ConfigError(f"unknown pairing policy name {name!r}")


def spec_to_dict(spec: ModelSpec) -> dict:
    out = {
        "exchange_rule": _rule_to_dict(spec.exchange_rule),
        "credit_policy": _credit_to_dict(spec.credit_policy),
        "pairing_policy": _pairing_to_dict(spec.pairing_policy),
        "agent_count": spec.agent_count,
        "initial_balance": spec.initial_balance,
        "step_budget": spec.step_budget,
        "seed": spec.seed,
        "stream_id": spec.stream_id,
    }
    if spec.snapshot_stride is not None:
        out["snapshot_stride"] = spec.snapshot_stride
    return out


def spec_from_dict(d: dict) -> ModelSpec:
    kwargs = dict(d)
    try:
        rule = rule_from_dict(kwargs.pop("exchange_rule"))
    except KeyError:
        raise ConfigError("missing exchange_rule") from None
    credit = kwargs.pop("credit_policy", None)
    pairing = kwargs.pop("pairing_policy", None)
    try:
        return ModelSpec(
            exchange_rule=rule,
            credit_policy=credit_from_dict(credit) if credit else NoDebt(),
            pairing_policy=pairing_from_dict(pairing) if pairing else UniformSymmetric(),
            **kwargs,
        )
    except TypeError as exc:
        raise ConfigError(f"bad spec fields: {exc}") from None


# ---------------------------------------------------------------------------
# run configuration (JSON document)

_NUMBER = {"type": "number"}
_COUNT = {"type": "integer", "minimum": 0}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["exchange_rule", "agent_count", "initial_balance", "step_budget"],
    "properties": {
        "exchange_rule": {
            "type": "object",
            "required": ["name"],
            "properties": {
                "name": {"enum": ["fixed", "frac-mean", "frac-pair-mean",
                                  "proportional", "saving", "random-saving",
                                  "growth", "meanfield", "market", "firm"]},
                "amount": _NUMBER, "gamma": _NUMBER, "lam": _NUMBER,
                "zeta": _NUMBER, "J": _NUMBER, "mean_eta": _NUMBER,
                "sigma2": _NUMBER, "dt": _NUMBER,
                "initial_shares": _NUMBER, "redraw_prob": _NUMBER,
                "v": _NUMBER, "eta": _NUMBER, "chi": _NUMBER,
                "wage": _NUMBER, "interest": _NUMBER,
            },
            "additionalProperties": False,
        },
        "credit_policy": {
            "type": "object",
            "required": ["name"],
            "properties": {
                "name": {"enum": ["none", "limit", "bank", "unlimited"]},
                "max_debt": _NUMBER,
                "reserve_ratio": _NUMBER,
            },
            "additionalProperties": False,
        },
        "pairing_policy": {
            "type": "object",
            "required": ["name"],
            "properties": {
                "name": {"enum": ["uniform", "directed"]},
                "seed": {"type": "integer"},
            },
            "additionalProperties": False,
        },
        "agent_count": {"type": "integer", "minimum": 2},
        "initial_balance": _NUMBER,
        "step_budget": _COUNT,
        "snapshot_stride": {"type": "integer", "minimum": 1},
        "seed": _COUNT,
        "stream_id": _COUNT,
        "replicas": {"type": "integer", "minimum": 1},
        "out": {"type": "string"},
        "deterministic": {"type": "boolean"},
        "analysis": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["task"],
                "properties": {
                    "task": {"enum": ["fit", "lorenz", "entropy", "histogram", "ccdf"]},
                    "model": {"enum": ["exponential", "gamma", "pareto", "two-class"]},
                    "threshold": _NUMBER,
                    "method": {"enum": ["mle", "ccdf-lsq"]},
                    "range": {"type": "array", "items": _NUMBER,
                              "minItems": 2, "maxItems": 2},
                    "bins": {"type": "integer", "minimum": 1},
                },
                "additionalProperties": False,
            },
        },
    },
}


def _line_of_path(text: str, path) -> int | None:
    """Best-effort line number of the config element at a validation path."""
    pos = 0
    for part in path:
        if isinstance(part, str):
            m = re.search(r'"%s"\s*:' % re.escape(part), text[pos:])
            if m is None:
                return None
            pos += m.start()
    return text.count("\n", 0, pos) + 1


def load_config(path: str | Path) -> dict:
    """Parse and schema-validate a run configuration file.

    Unknown keys are rejected; errors carry the file name and, where it can
    be located, the line number of the offending element.
    """
    import jsonschema

    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        line = _line_of_path(text, list(err.absolute_path))
        where = f"{path}:{line}" if line else f"{path}"
        raise ConfigError(f"{where}: {err.message}")
    return doc


def config_to_spec(doc: dict) -> ModelSpec:
    """The ModelSpec described by a validated configuration document."""
    fields = {k: v for k, v in doc.items()
              if k in ("exchange_rule", "credit_policy", "pairing_policy",
                       "agent_count", "initial_balance", "step_budget",
                       "snapshot_stride", "seed", "stream_id")}
    return spec_from_dict(fields)


# ---------------------------------------------------------------------------
# trajectory artifacts

def write_snapshots_csv(path: str | Path, traj: Trajectory) -> None:
    """Per-agent balances of every stored snapshot, one row per agent."""
    has_stock = any(s.shares is not None for s in traj.snapshots)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "agent_id", "balance", "stock"] if has_stock
                        else ["step", "agent_id", "balance"])
        for snap in traj.snapshots:
            if snap.balances is None:
                continue
            for agent, bal in enumerate(snap.balances):
                row = [snap.step, agent, fmt(bal)]
                if has_stock:
                    row.append(fmt(snap.shares[agent]))
                writer.writerow(row)


def write_entropy_csv(path: str | Path, traj: Trajectory) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "entropy"])
        for step, s in traj.entropy_series:
            writer.writerow([int(step), fmt(s)])


def write_meta_json(path: str | Path, trajectories: list[Trajectory],
                    deterministic: bool = False) -> None:
    """Run metadata: spec echo, RNG provenance, per-replica accounting.

    Wall-clock and creation time are omitted in deterministic mode so the
    file is byte-identical across reruns.
    """
    base = trajectories[0]
    runs = []
    for traj in trajectories:
        entry = {
            "stream_id": traj.spec.stream_id,
            "executed": traj.metadata["executed"],
            "blocked": traj.metadata["blocked"],
            "final_debt": traj.metadata["final_debt"],
            "log_growth": traj.metadata["log_growth"],
        }
        if "price" in traj.metadata:
            entry["price"] = traj.metadata["price"]
        if not deterministic:
            entry["wall_clock_s"] = traj.metadata["wall_clock_s"]
        runs.append(entry)
    doc = {
        "spec": spec_to_dict(base.spec),
        "replicas": len(trajectories),
        "rng": {"algorithm": base.metadata["rng"]["algorithm"],
                "stream": base.metadata["rng"]["stream"],
                "seed": base.spec.seed,
                "stream_ids": [t.spec.stream_id for t in trajectories]},
        "backend": base.metadata["backend"],
        "runs": runs,
    }
    if not deterministic:
        doc["created"] = datetime.now(timezone.utc).isoformat()
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_snapshots_csv(path: str | Path):
    """Parse a snapshot CSV back into arrays.

    Returns (steps, balances_by_step, shares_by_step) where the dicts map
    step -> vector and shares_by_step is None when the file has no stock
    column. Malformed rows raise with their 1-based row number.
    """
    steps: list[int] = []
    balances: dict[int, list[float]] = {}
    shares: dict[int, list[float]] | None = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidDataError(f"{path}: empty file") from None
        if header[:3] != ["step", "agent_id", "balance"]:
            raise InvalidDataError(f"{path}:1: expected header step,agent_id,balance")
        has_stock = len(header) == 4 and header[3] == "stock"
        if len(header) > 3 and not has_stock:
            raise InvalidDataError(f"{path}:1: unexpected extra columns")
        if has_stock:
            shares = {}
        for rownum, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                step = int(row[0])
                bal = float(row[2])
                stock = float(row[3]) if has_stock else None
            except (ValueError, IndexError):
                raise InvalidDataError(f"{path}:{rownum}: malformed row {row!r}") from None
            if step not in balances:
                steps.append(step)
                balances[step] = []
                if has_stock:
                    shares[step] = []
            balances[step].append(bal)
            if has_stock:
                shares[step].append(stock)
    if not steps:
        raise InvalidDataError(f"{path}: no data rows")
    bal_arr = {s: np.asarray(v, dtype=np.float64) for s, v in balances.items()}
    share_arr = None
    if has_stock:
        share_arr = {s: np.asarray(v, dtype=np.float64) for s, v in shares.items()}
    return steps, bal_arr, share_arr


def read_income_csv(path: str | Path) -> EmpiricalDistribution:
    """Read sample data: a `value` column, optionally `id` before or
    `weight` after. Raises with the 1-based row number on malformed rows."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidDataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if header == ["value"]:
            mode = "value"
        elif header == ["id", "value"]:
            mode = "id-value"
        elif header == ["value", "weight"]:
            mode = "value-weight"
        else:
            raise InvalidDataError(
                f"{path}:1: expected header value | id,value | value,weight, got {header}")
        values: list[float] = []
        weights: list[float] = []
        for rownum, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                if mode == "value":
                    values.append(float(row[0]))
                elif mode == "id-value":
                    values.append(float(row[1]))
                else:
                    values.append(float(row[0]))
                    weights.append(float(row[1]))
            except (ValueError, IndexError):
                raise InvalidDataError(f"{path}:{rownum}: malformed row {row!r}") from None
    if not values:
        raise InvalidDataError(f"{path}: no data rows")
    try:
        return EmpiricalDistribution(
            values=np.asarray(values),
            weights=np.asarray(weights) if mode == "value-weight" else None)
    except InvalidDataError as exc:
        raise InvalidDataError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# analysis artifacts

def write_report_json(path: str | Path, reports: dict) -> None:
    with open(path, "w") as fh:
        json.dump(reports, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_columns_csv(path: str | Path, header: list[str],
                      columns: list[np.ndarray]) -> None:
    """Generic column-aligned CSV with 17-digit floats."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in zip(*columns):
            writer.writerow([fmt(x) for x in row])


def write_histogram_csv(path: str | Path, hist) -> None:
    dens = hist.density()
    write_columns_csv(path, ["bin_lo", "bin_hi", "count", "density"],
                      [hist.edges[:-1], hist.edges[1:],
                       hist.counts.astype(np.float64), dens])


def write_ccdf_csv(path: str | Path, dist: EmpiricalDistribution) -> None:
    """Weighted empirical CCDF: P(X >= value), one row per sorted sample."""
    order = np.argsort(dist.values, kind="stable")
    v = dist.values[order]
    w = dist.weight_array()[order]
    total = float(np.sum(w))
    above = (total - np.cumsum(w) + w) / total
    write_columns_csv(path, ["value", "ccdf"], [v, above])


def write_lorenz_csv(path: str | Path, curve) -> None:
    write_columns_csv(path, ["x", "y"], [curve.x, curve.y])


def write_samples_csv(path: str | Path, dist: EmpiricalDistribution) -> None:
    if dist.is_weighted():
        write_columns_csv(path, ["value", "weight"],
                          [dist.values, dist.weight_array()])
    else:
        write_columns_csv(path, ["value"], [dist.values])
