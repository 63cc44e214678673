"""Per-scenario result files: series CSV, profile snapshots, summary, plots.

Every float is written with 17 significant digits so identical runs produce
identical bytes.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

from scipy.integrate import trapezoid

from .engine import SERIES_FIELDS, RunResult
from .mesh import ColumnMesh

SERIES_COLUMNS = (
    "time_s",
    "dt_s",
    "alt_m",
    "pet_m_s",
    "aet_m_s",
    "precip_m_s",
    "drainage_m_s",
    "water_balance_err_m",
    "energy_balance_err_j_m2",
    "picard_flow",
    "picard_heat",
)
# extra diagnostics follow the required columns
EXTRA_COLUMNS = tuple(c for c in SERIES_FIELDS if c not in SERIES_COLUMNS)
PROFILE_COLUMNS = ("time_s", "z_m", "h_m", "t_c", "theta_liq", "theta_ice")
INTEGER_COLUMNS = ("picard_flow", "picard_heat")


def fmt(value) -> str:
    return f"{value:.17g}"


def check_writable(out_dir) -> Path:
    """Create ``out_dir`` if needed and prove a file can be written there."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not out.is_dir():
        raise NotADirectoryError(str(out))
    fd, probe = tempfile.mkstemp(prefix=".cryoflow-probe-", dir=out)
    os.close(fd)
    os.unlink(probe)
    return out


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def series_text(result: RunResult) -> str:
    cols = SERIES_COLUMNS + EXTRA_COLUMNS
    data = result.series.columns
    lines = [",".join(cols)]
    for i in range(len(result.series)):
        lines.append(
            ",".join(str(int(data[c][i])) if c in INTEGER_COLUMNS else fmt(data[c][i]) for c in cols)
        )
    return "\n".join(lines) + "\n"


def profiles_text(result: RunResult, mesh: ColumnMesh) -> str:
    lines = [",".join(PROFILE_COLUMNS)]
    z = mesh.z_center
    for t, state in result.snapshots:
        for i in range(z.size):
            row = (t, z[i], state.h[i], state.T[i], state.theta_liq[i], state.theta_ice[i])
            lines.append(",".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def annual_totals(result: RunResult) -> dict[str, float]:
    """Annual totals (m) as trapezoidal integrals of the per-step rate series."""
    s = result.series
    t = s.array("time_s")
    names = {
        "precip_m": "precip_m_s",
        "pet_m": "pet_m_s",
        "aet_m": "aet_m_s",
        "transpiration_m": "transpiration_m_s",
        "evaporation_m": "evaporation_m_s",
        "potential_transpiration_m": "potential_transpiration_m_s",
        "infiltration_m": "infiltration_m_s",
        "runoff_m": "runoff_m_s",
        "drainage_m": "drainage_m_s",
    }
    if t.size < 2:
        return {k: 0.0 for k in names}
    return {k: float(trapezoid(s.array(col), t)) for k, col in names.items()}


def summary_text(result: RunResult) -> str:
    s = result.series
    water = s.water_closure()
    energy = s.energy_closure()
    entries = [
        ("scenario", result.scenario),
        ("status", "ok"),
        ("spinup_years", result.spinup_years),
        ("spinup_converged", str(result.spinup_converged).lower()),
        ("spinup_max_change_K", fmt(result.spinup_change_K)),
        ("final_alt_m", fmt(result.alt)),
        ("no_permafrost_table_found", str(s.no_permafrost).lower()),
        ("accepted_steps", result.accepted_steps),
        ("rejected_attempts", result.rejected_attempts),
    ]
    entries += [(f"annual_{k}", fmt(v)) for k, v in annual_totals(result).items()]
    entries += [
        ("storage_change_m", fmt(water["storage_change"])),
        ("water_balance_residual_m", fmt(water["residual"])),
        ("energy_change_j_m2", fmt(energy["energy_change"])),
        ("energy_balance_residual_j_m2", fmt(energy["residual"])),
        ("gross_boundary_heat_exchange_j_m2", fmt(energy["gross_exchange"])),
    ]
    return "".join(f"{k} = {v}\n" for k, v in entries)


def write_outputs(result: RunResult, mesh: ColumnMesh, out_dir, plots: bool = False) -> list[Path]:
    """Write the files of one completed scenario and return their paths."""
    out = Path(out_dir)
    name = result.scenario
    paths = [out / f"{name}_series.csv", out / f"{name}_profiles.csv", out / f"{name}_summary.txt"]
    _write_atomic(paths[0], series_text(result))
    _write_atomic(paths[1], profiles_text(result, mesh))
    _write_atomic(paths[2], summary_text(result))
    if plots:
        from .plotting import render_scenario, write_plot_script

        paths.append(write_plot_script(name, out))
        paths.append(render_scenario(name, out))
    return paths


def write_failure(name: str, message: str, dump: dict | None, out_dir) -> list[Path]:
    """Summary flagging a failed scenario, plus the state dump when one exists."""
    out = Path(out_dir)
    paths = [out / f"{name}_summary.txt"]
    text = f"scenario = {name}\nstatus = failed\nerror = {' '.join(str(message).split())}\n"
    if dump:
        paths.append(out / f"{name}_abort_state.json")
        _write_atomic(paths[1], json.dumps(dump, indent=1, sort_keys=True) + "\n")
        text += f"state_dump = {paths[1].name}\n"
    _write_atomic(paths[0], text)
    return paths


def read_summary(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        key, _, value = line.partition(" = ")
        out[key] = value
    return out


__all__ = [
    "SERIES_COLUMNS",
    "PROFILE_COLUMNS",
    "check_writable",
    "write_outputs",
    "write_failure",
    "read_summary",
    "annual_totals",
]
