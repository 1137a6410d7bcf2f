"""Token estimation, money accounting and the auto-mode status line."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

from .config import ModelRef

log = logging.getLogger(__name__)

# All money amounts are integers in units of 1e-10 USD so that the 10-digit
# status line never suffers float drift.
UNITS_PER_DOLLAR = 10**10


def estimate_tokens(text: str) -> int:
    """Deterministic token estimate: ceil(characters / 4)."""
    return math.ceil(len(text) / 4)


def _fmt_dollars(units: int) -> str:
    return f"${units // UNITS_PER_DOLLAR}.{units % UNITS_PER_DOLLAR:010d}"


@dataclass(frozen=True)
class Price:
    """Per-token prices in 1e-10 USD units."""
    input_per_token: int
    output_per_token: int

    @classmethod
    def from_per_million(cls, input_per_1m: float, output_per_1m: float) -> "Price":
        if input_per_1m < 0 or output_per_1m < 0:
            raise ValueError("prices must be >= 0")
        # dollars per 1M tokens -> 1e-10 dollar units per token
        return cls(round(input_per_1m * 10_000), round(output_per_1m * 10_000))


class PriceTable:
    """Model prices loaded from a tab/whitespace separated table file.

    Columns: provider, model, input_per_1M, output_per_1M. A model of "*"
    is the provider-level fallback.
    """

    def __init__(self):
        self._prices: dict[tuple[str, str], Price] = {}

    def add(self, provider: str, model: str, input_per_1m: float,
            output_per_1m: float) -> None:
        self._prices[(provider, model)] = Price.from_per_million(
            input_per_1m, output_per_1m
        )

    def lookup(self, model: ModelRef) -> Optional[Price]:
        return (
            self._prices.get((model.provider, model.model_name))
            or self._prices.get((model.provider, "*"))
        )

    @classmethod
    def load(cls, path: Optional[str] = None) -> "PriceTable":
        table = cls()
        if path:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        else:
            text = resources.files("r2assist.data").joinpath("pricing.tsv").read_text()
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            provider, model, inp, outp = line.split()
            table.add(provider, model, float(inp), float(outp))
        return table


@dataclass
class Usage:
    input_tokens: int = 0
    output_tokens: int = 0
    estimated: bool = False


@dataclass
class CostLedger:
    """Cumulative and per-run token and money counters."""

    max_runs: int = 100
    total_units: int = 0
    run_units: int = 0
    run_count: int = 0
    input_tokens: int = 0
    output_tokens: int = 0
    run_started: float = field(default_factory=time.time)
    session_started: float = field(default_factory=time.time)
    last_interaction_seconds: float = 0.0
    total_seconds: float = 0.0
    estimated: bool = False
    _warned_models: set = field(default_factory=set)

    @property
    def total_cost(self) -> float:
        return self.total_units / UNITS_PER_DOLLAR

    @property
    def run_cost(self) -> float:
        return self.run_units / UNITS_PER_DOLLAR

    def start_run(self) -> None:
        """New auto query: per-run counters back to zero, totals untouched."""
        self.run_units = 0
        self.run_count = 0
        self.run_started = time.time()
        self.last_interaction_seconds = 0.0

    def record_usage(self, usage: Usage, model: ModelRef, table: PriceTable) -> None:
        price = table.lookup(model)
        if price is None:
            if str(model) not in self._warned_models:
                log.warning("no price for %s; recording tokens with zero cost", model)
                self._warned_models.add(str(model))
            price = Price(0, 0)
            self.estimated = True
        if usage.estimated:
            self.estimated = True
        delta = (usage.input_tokens * price.input_per_token
                 + usage.output_tokens * price.output_per_token)
        self.total_units += delta
        self.run_units += delta
        self.input_tokens += usage.input_tokens
        self.output_tokens += usage.output_tokens

    def record_interaction(self, seconds: float) -> None:
        self.run_count += 1
        self.last_interaction_seconds = seconds
        self.total_seconds += seconds


def render_status(ledger: CostLedger, model: ModelRef) -> str:
    """One-line cost summary printed after each auto-mode interaction."""
    return (
        f"{model.provider}/{model.model_name}"
        f" | total: {_fmt_dollars(ledger.total_units)}"
        f" | run: {_fmt_dollars(ledger.run_units)}"
        f" | {ledger.run_count} / {ledger.max_runs}"
        f" | {round(ledger.last_interaction_seconds)}s / {round(ledger.total_seconds)}s"
    )
