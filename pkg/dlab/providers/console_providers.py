from typing import Iterable, TypeVar
import sys

from rich.console import Console
import tqdm

from .config_providers import BudgetConfiguration, resolve_budget


T = TypeVar("T")

_stderr = Console(stderr=True, highlight=False, soft_wrap=True)


def warn(message: str) -> None:
    _stderr.print(f"[WARNING] {message}", markup=False)


def error(message: str) -> None:
    _stderr.print(f"[ERROR] {message}", markup=False)


def progress(iterable: Iterable[T], desc: str, total: int | None = None,
             budget: BudgetConfiguration | None = None) -> Iterable[T]:
    """Wrap ``iterable`` in a tqdm bar on stderr; silent unless the budget enables progress."""
    budget = resolve_budget(budget)
    return tqdm.tqdm(iterable, desc=desc, total=total, disable=not budget.show_progress,
                     file=sys.stderr, leave=False)
