from dataclasses import dataclass, replace
from .._compat import StrEnum
import os

import dotenv

from .errors_providers import ConfigurationError


TOOL_VERSION = "0.1.0"


class BudgetEnvironment(StrEnum):
    points_cap = "DLAB_BUDGET_POINTS"
    count_cap = "DLAB_BUDGET_COUNT"
    show_progress = "DLAB_PROGRESS"


@dataclass(frozen=True)
class BudgetConfiguration:
    points_cap: int = 10**7
    count_cap: int = 10**9
    fft_cell_cap: int = 1 << 22
    candidate_cap: int = 10**5
    show_progress: bool = False


def _read_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw.strip())
    except ValueError as e:
        raise ConfigurationError(f"Environment variable {name}={raw!r} is not an integer") from e
    if value <= 0:
        raise ConfigurationError(f"Environment variable {name}={value} must be positive")
    return value


def get_budget_configuration(points_cap: int | None = None,
                             count_cap: int | None = None,
                             show_progress: bool | None = None) -> BudgetConfiguration:
    """
    Resolve the budget for one call. Explicit arguments win over the environment,
    which wins over the defaults.

    ### Arguments
    ``points_cap`` -- maximum number of points any intermediate set may hold
    ``count_cap`` -- maximum number of enumerated tuples for brute-force kernels
    ``show_progress`` -- enable tqdm progress bars on stderr

    ### External Effects
    Reads a ``.env`` file if one is present.

    ### Returns
    ``BudgetConfiguration``
    """
    dotenv.load_dotenv()
    defaults = BudgetConfiguration()
    config = replace(
        defaults,
        points_cap=_read_int(BudgetEnvironment.points_cap, defaults.points_cap),
        count_cap=_read_int(BudgetEnvironment.count_cap, defaults.count_cap),
        show_progress=os.environ.get(BudgetEnvironment.show_progress, "0").strip() in ("1", "true", "yes"),
    )
    if points_cap is not None:
        config = replace(config, points_cap=points_cap)
    if count_cap is not None:
        config = replace(config, count_cap=count_cap)
    if show_progress is not None:
        config = replace(config, show_progress=show_progress)
    return config


def resolve_budget(budget: BudgetConfiguration | None) -> BudgetConfiguration:
    return budget if budget is not None else get_budget_configuration()
