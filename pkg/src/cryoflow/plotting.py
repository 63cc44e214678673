"""Figures from the CSV outputs of one scenario.

Works from the files on disk only, so a generated plot script can re-run it
without the simulation objects.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

FIG_WIDTH = 7.0
PARAMS = {
    "font.size": 8,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "lines.linewidth": 1.0,
    "figure.dpi": 100,
    "savefig.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
}
DAY = 86400.0


def read_csv(path) -> dict[str, np.ndarray]:
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=float, ndmin=1)
    return {name: np.atleast_1d(data[name]) for name in data.dtype.names}


def render_scenario(name: str, directory=".") -> Path:
    """Write ``<name>_overview.png`` from the series and profile CSVs."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    directory = Path(directory)
    series = read_csv(directory / f"{name}_series.csv")
    profiles_path = directory / f"{name}_profiles.csv"
    with profiles_path.open() as fh:
        has_rows = sum(1 for _ in fh) > 1
    profiles = read_csv(profiles_path) if has_rows else None

    with matplotlib.rc_context(PARAMS):
        fig, axes = plt.subplots(2, 2, figsize=(FIG_WIDTH, 0.75 * FIG_WIDTH))
        days = series["time_s"] / DAY

        ax = axes[0, 0]
        ax.plot(days, series["alt_m"], color="tab:red")
        ax.invert_yaxis()
        ax.set_xlabel("day of reporting year")
        ax.set_ylabel("active layer to date (m)")

        ax = axes[0, 1]
        mm_day = 1e3 * DAY
        ax.plot(days, series["pet_m_s"] * mm_day, label="PET", color="0.5")
        ax.plot(days, series["aet_m_s"] * mm_day, label="AET", color="tab:green")
        ax.plot(days, series["precip_m_s"] * mm_day, label="precip", color="tab:blue", alpha=0.6)
        ax.set_xlabel("day of reporting year")
        ax.set_ylabel("mm/day")
        ax.legend(loc="upper left")

        ax = axes[1, 0]
        ax.step(days, series["picard_flow"], where="post", label="flow")
        ax.step(days, series["picard_heat"], where="post", label="heat")
        ax.set_xlabel("day of reporting year")
        ax.set_ylabel("Picard iterations")
        ax.legend(loc="upper right")

        ax = axes[1, 1]
        if profiles is not None:
            times = np.unique(profiles["time_s"])
            colors = plt.cm.coolwarm(np.linspace(0.0, 1.0, times.size))
            for t, color in zip(times, colors):
                sel = profiles["time_s"] == t
                ax.plot(profiles["t_c"][sel], profiles["z_m"][sel], color=color, label=f"day {t / DAY:.0f}")
            ax.axvline(0.0, color="k", lw=0.5)
            ax.invert_yaxis()
            if times.size <= 12:
                ax.legend(loc="lower left", ncol=2)
        ax.set_xlabel("temperature (degC)")
        ax.set_ylabel("depth (m)")

        fig.suptitle(name)
        fig.tight_layout()
        out = directory / f"{name}_overview.png"
        fig.savefig(out, metadata={"Software": None})
        plt.close(fig)
    return out


PLOT_SCRIPT = '''"""Regenerate the overview figure of scenario {name!r} from its CSV files."""
from pathlib import Path

from cryoflow.plotting import render_scenario

SERIES_CSV = "{name}_series.csv"
PROFILES_CSV = "{name}_profiles.csv"

if __name__ == "__main__":
    print(render_scenario({name!r}, Path(__file__).resolve().parent))
'''


def write_plot_script(name: str, directory) -> Path:
    path = Path(directory) / f"{name}_plot.py"
    path.write_text(PLOT_SCRIPT.format(name=name))
    return path
