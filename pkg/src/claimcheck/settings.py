from __future__ import annotations

from dataclasses import dataclass, field, fields
from decimal import Decimal
from typing import Any, Mapping

from .datasource import DEFAULT_ROW_CAP
from .models import Sampling, Usage


@dataclass(frozen=True)
class Settings:
    """Model bindings and budgets; the ``agents:`` section of a config overrides these."""

    verifier_model: str = "gpt-5"
    expert_model: str = "gpt-5-mini"
    verifier_max_turns: int = 40
    expert_max_turns: int = 15
    temperature: float | None = 0.0
    max_output_tokens: int = 4096
    row_cap: int = DEFAULT_ROW_CAP
    evidence_row_cap: int = 1000
    schema_toolset: str | None = None
    sql_toolset: str | None = None
    data_summary_max_chars: int = 2000
    # USD per million tokens: model id -> (input, output)
    prices: Mapping[str, tuple[Decimal, Decimal]] = field(default_factory=dict)

    @property
    def sampling(self) -> Sampling:
        return Sampling(self.temperature, self.max_output_tokens)

    @classmethod
    def from_mapping(cls, doc: Mapping[str, Any] | None) -> "Settings":
        if not doc:
            return cls()
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown agent setting: {sorted(unknown)[0]}")
        kwargs = dict(doc)
        if "prices" in kwargs:
            kwargs["prices"] = {m: (Decimal(str(p["input"])), Decimal(str(p["output"])))
                                for m, p in (kwargs["prices"] or {}).items()}
        return cls(**kwargs)

    def cost(self, usage_by_model: Mapping[str, Usage]) -> Decimal:
        total = Decimal(0)
        for model, usage in usage_by_model.items():
            price = self.prices.get(model)
            if price is None:
                continue
            total += (usage.input_tokens * price[0] + usage.output_tokens * price[1]) / Decimal(1_000_000)
        return total.quantize(Decimal("0.000001"))
