"""Credit-delinquency scenarios: seeded synthetic generation and JSON ingestion."""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

SECTORS = ("manufacturing", "retail", "technology", "logistics", "hospitality", "construction")
CREDIT_TYPES = ("working capital loan", "commercial mortgage", "equipment financing", "revolving credit line")
COLLATERAL = ("inventory", "commercial property", "machinery", "accounts receivable", "unsecured")
CASH_FLOW_NOTES = (
    "seasonal revenue dip, expects recovery next quarter",
    "lost a major customer, revenue down about 30%",
    "receivables delayed by a large client",
    "margin squeeze from rising input costs",
    "one-off equipment failure drained reserves",
    "steady but thin operating cash flow",
)


@dataclass(frozen=True)
class ScenarioBounds:
    loan_min: float = 20688.0
    loan_max: float = 49775.0
    months_min: int = 1
    months_max: int = 11
    initial_days_min: int = 20
    initial_days_max: int = 45

    def validate(self) -> None:
        for lo, hi, name in (
            (self.loan_min, self.loan_max, "loan"),
            (self.months_min, self.months_max, "months"),
            (self.initial_days_min, self.initial_days_max, "initial_days"),
        ):
            if lo > hi:
                raise ValueError(f"invalid {name} bounds: min {lo} > max {hi}")
        if self.months_min < 1 or self.initial_days_min < 1 or self.loan_min <= 0:
            raise ValueError("scenario bounds must be positive")


@dataclass(frozen=True)
class Scenario:
    id: str
    loan_amount: float
    delinquency_months: int
    sector: str
    credit_type: str
    collateral: str
    cash_flow_note: str
    creditor_initial_days: int
    extra: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if self.delinquency_months < 1:
            raise ValueError(f"{self.id}: delinquency_months must be >= 1")
        if self.creditor_initial_days < 1:
            raise ValueError(f"{self.id}: creditor_initial_days must be >= 1")
        if self.loan_amount <= 0:
            raise ValueError(f"{self.id}: loan_amount must be positive")

    def prompt_slots(self) -> dict[str, object]:
        return {
            "loan_amount": f"${self.loan_amount:,.2f}",
            "delinquency_months": self.delinquency_months,
            "sector": self.sector,
            "credit_type": self.credit_type,
            "collateral": self.collateral,
            "cash_flow_note": self.cash_flow_note,
            "initial_days": self.creditor_initial_days,
        }

    def to_dict(self) -> dict[str, Any]:
        doc = asdict(self)
        if not doc["extra"]:
            doc.pop("extra")
        return doc

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> Scenario:
        known = {f for f in cls.__dataclass_fields__} - {"extra"}
        missing = known - set(doc)
        if missing:
            raise ValueError(f"scenario missing fields: {sorted(missing)}")
        extra = {k: v for k, v in doc.items() if k not in known and k != "extra"}
        extra.update(doc.get("extra") or {})
        return cls(
            id=str(doc["id"]),
            loan_amount=float(doc["loan_amount"]),
            delinquency_months=int(doc["delinquency_months"]),
            sector=str(doc["sector"]),
            credit_type=str(doc["credit_type"]),
            collateral=str(doc["collateral"]),
            cash_flow_note=str(doc["cash_flow_note"]),
            creditor_initial_days=int(doc["creditor_initial_days"]),
            extra=extra,
        )


def generate_scenarios(seed: int, count: int, bounds: ScenarioBounds | None = None) -> list[Scenario]:
    """Uniformly sample ``count`` scenarios; identical for identical seeds."""
    if count < 1:
        raise ValueError("count must be >= 1")
    bounds = bounds or ScenarioBounds()
    bounds.validate()
    rng = random.Random(seed)
    out = []
    for i in range(count):
        out.append(Scenario(
            id=f"syn-{seed}-{i:04d}",
            loan_amount=round(rng.uniform(bounds.loan_min, bounds.loan_max), 2),
            delinquency_months=rng.randint(bounds.months_min, bounds.months_max),
            sector=rng.choice(SECTORS),
            credit_type=rng.choice(CREDIT_TYPES),
            collateral=rng.choice(COLLATERAL),
            cash_flow_note=rng.choice(CASH_FLOW_NOTES),
            creditor_initial_days=rng.randint(bounds.initial_days_min, bounds.initial_days_max),
        ))
    return out


def save_scenarios(path: str | Path, scenarios: list[Scenario]) -> None:
    Path(path).write_text(json.dumps([s.to_dict() for s in scenarios], indent=2) + "\n")


def load_scenarios(path: str | Path) -> list[Scenario]:
    """Read a JSON list of scenarios (or an object with a ``scenarios`` list)."""
    doc = json.loads(Path(path).read_text())
    if isinstance(doc, dict):
        doc = doc.get("scenarios", [])
    if not isinstance(doc, list) or not doc:
        raise ValueError(f"{path}: expected a non-empty list of scenarios")
    return [Scenario.from_dict(d) for d in doc]
