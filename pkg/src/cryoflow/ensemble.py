"""Run many independent scenarios on a fixed-size process pool.

Each worker owns its column state and writes its own scenario's files, so
outputs do not depend on the worker count or on completion order.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path

from .engine import run_column
from .errors import SimulationAbort
from .forcing import ClimateForcing
from .output import write_failure, write_outputs
from .scenario import ScenarioConfig

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScenarioOutcome:
    name: str
    ok: bool
    message: str = ""
    files: tuple[str, ...] = ()


def run_one(scenario: ScenarioConfig, forcing: ClimateForcing, out_dir, plots: bool = False) -> ScenarioOutcome:
    """Run and write one scenario; failures are reported, never raised."""
    try:
        result = run_column(scenario, forcing)
        files = write_outputs(result, scenario.mesh.build(), out_dir, plots=plots)
    except SimulationAbort as exc:
        files = write_failure(scenario.name, str(exc), exc.dump, out_dir)
        return ScenarioOutcome(scenario.name, False, str(exc), tuple(str(f) for f in files))
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        message = f"{type(exc).__name__}: {exc}"
        files = write_failure(scenario.name, message, None, out_dir)
        return ScenarioOutcome(scenario.name, False, message, tuple(str(f) for f in files))
    return ScenarioOutcome(scenario.name, True, "", tuple(str(f) for f in files))


def run_ensemble(
    scenarios: list[ScenarioConfig],
    forcing: ClimateForcing,
    out_dir,
    workers: int = 1,
    plots: bool = False,
) -> list[ScenarioOutcome]:
    """Run every scenario; outcomes come back in scenario order."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    names = [s.name for s in scenarios]
    if len(set(names)) != len(names):
        raise ValueError("scenario names must be unique within an ensemble")
    out_dir = Path(out_dir)
    outcomes: dict[str, ScenarioOutcome] = {}
    if workers == 1 or len(scenarios) <= 1:
        for scenario in scenarios:
            outcomes[scenario.name] = run_one(scenario, forcing, out_dir, plots)
            _log_outcome(outcomes[scenario.name])
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(scenarios))) as pool:
            futures = {pool.submit(run_one, s, forcing, out_dir, plots): s.name for s in scenarios}
            for future in as_completed(futures):
                outcome = future.result()
                outcomes[outcome.name] = outcome
                _log_outcome(outcome)
    return [outcomes[n] for n in names]


def _log_outcome(outcome: ScenarioOutcome) -> None:
    if outcome.ok:
        log.info("%s: done", outcome.name)
    else:
        log.error("%s: FAILED: %s", outcome.name, outcome.message)
