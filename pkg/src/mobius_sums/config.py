"""Shared configuration: computation budgets and the package's exception types."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace


class BudgetExceeded(ValueError):
    """A request is larger than the configured budget for the engine serving it."""


class NotSquarefree(ValueError):
    """An argument that must be squarefree is not."""


@dataclass(frozen=True)
class Budget:
    """Hard limits per engine.

    Requests beyond a limit raise :class:`BudgetExceeded`; nothing is silently
    truncated.
    """

    block_size: int = 2**20
    max_table_entries: int = 10**8
    max_direct_x: int = 10**9
    max_floor_z: int = 10**6
    max_kernel_x: int = 10**7
    max_exact_sz_z: int = 1000
    max_naive_t_y: int = 1000
    max_exact_t_y: int = 60
    max_identity_x: int = 10**4
    max_sz_fast_z: int = 10**8
    max_window_y: int = 10**8

    def with_overrides(self, **kwargs: int) -> "Budget":
        known = {f.name for f in fields(self)}
        unknown = set(kwargs) - known
        if unknown:
            raise KeyError(f"unknown budget fields: {sorted(unknown)}")
        return replace(self, **{k: int(v) for k, v in kwargs.items()})


DEFAULT_BUDGET = Budget()


def check_budget(value: int, limit: int, what: str) -> None:
    if value > limit:
        raise BudgetExceeded(f"{what}={value} exceeds budget {limit}")
