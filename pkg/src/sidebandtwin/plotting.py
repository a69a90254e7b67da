"""PNG figures rendered from campaign tables (Agg backend, no display)."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 8,
    "savefig.dpi": 120,
}
# no timestamps or version strings, so reruns give identical bytes
PNG_METADATA = {"Software": None}


def read_table(path) -> dict[str, np.ndarray]:
    """CSV columns as arrays; non-numeric columns stay as string arrays."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = {}
    for key in (rows[0] if rows else {}):
        vals = [r[key] for r in rows]
        try:
            out[key] = np.array([float(v) for v in vals])
        except ValueError:
            out[key] = np.array(vals)
    return out


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="png", metadata=PNG_METADATA)
    plt.close(fig)
    return path


def plot_detuning_sweep(table, path):
    fig, ax = plt.subplots()
    for branch, color in (("blue", "tab:blue"), ("red", "tab:red")):
        sel = table["branch"] == branch
        absdet = np.abs(table["detuning_hz"][sel])
        x = (absdet - absdet.mean()) / 1e6
        ax.errorbar(x, table["rate_hz"][sel], table["rate_err_hz"][sel], fmt=".",
                    color=color, label=f"{branch} branch")
        peak = table["rate_hz"][sel].max()
        ax.plot(x, peak * table["model_response"][sel], "-", color=color, alpha=0.5)
    ax.set_xlabel("|detuning| offset from sweep centre (MHz)")
    ax.set_ylabel("count rate (Hz)")
    ax.legend()
    return _save(fig, path)


def plot_power_sweep(table, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 4.0))
    p = table["power_w"] * 1e9
    for key, color in (("blue", "tab:blue"), ("red", "tab:red")):
        ax1.errorbar(p, table[f"{key}_rate_hz"], table[f"{key}_err_hz"], fmt="o",
                     color=color, ms=4, label=key)
    ax1.set_xscale("log")
    ax1.set_yscale("log")
    ax1.set_xlabel("pulse power (nW)")
    ax1.set_ylabel("count rate (Hz)")
    ax1.legend()
    err = np.vstack([table["n_b_est"] - table["ci_low"], table["ci_high"] - table["n_b_est"]])
    ax2.errorbar(p, table["n_b_est"], np.clip(err, 0, None), fmt="o", ms=4, label="estimate")
    ax2.plot(p, table["n_b_model"], "k-", lw=1, label="model")
    ax2.set_xscale("log")
    ax2.set_xlabel("pulse power (nW)")
    ax2.set_ylabel("phonon occupancy")
    ax2.legend()
    return _save(fig, path)


def plot_duty_cycle_sweep(table, path):
    fig, ax = plt.subplots()
    err = np.vstack([table["n_b_est"] - table["ci_low"], table["ci_high"] - table["n_b_est"]])
    ax.errorbar(table["duty_cycle"], table["n_b_est"], np.clip(err, 0, None), fmt="o",
                label="estimate")
    ax.plot(table["duty_cycle"], table["n_b_model"], "k-", lw=1, label="model")
    ax.set_xlabel("duty cycle")
    ax.set_ylabel("phonon occupancy")
    ax.legend()
    return _save(fig, path)


def plot_pump_probe_sweep(table, path):
    fig, ax = plt.subplots()
    ax.errorbar(table["delay_s"] * 1e6, table["probe_rate_hz"], table["probe_err_hz"], fmt="o")
    ax.set_xscale("log")
    ax.set_xlabel("pump-probe delay (us)")
    ax.set_ylabel("probe count rate (Hz)")
    return _save(fig, path)


def _plot_residuals(table, ycol, ylabel, scale, unit, path):
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(6.0, 5.0),
                                   gridspec_kw={"height_ratios": (3, 1)})
    x = (table["frequency_hz"] - table["frequency_hz"].mean()) / scale
    ax1.plot(x, table[ycol], ".", ms=2, label="data")
    ax1.plot(x, table["model"], "-", lw=1, label="fit")
    ax1.set_ylabel(ylabel)
    ax1.legend()
    ax2.plot(x, table["residual"], ".", ms=2)
    ax2.set_xlabel(f"frequency offset ({unit})")
    ax2.set_ylabel("residual")
    return _save(fig, path)


def plot_doublet(table, path):
    return _plot_residuals(table, "reflection", "reflection", 1e9, "GHz", path)


def plot_mechanical(table, path):
    return _plot_residuals(table, "psd", "PSD (arb.)", 1e6, "MHz", path)


def plot_counts(table, path):
    labels = list(dict.fromkeys(table["label"].tolist()))
    rates = []
    for lab in labels:
        sel = table["label"] == lab
        rates.append(table["counts"][sel].sum() / table["exposure_s"][sel].sum())
    fig, ax = plt.subplots()
    ax.bar(labels, rates)
    ax.set_ylabel("count rate (Hz)")
    return _save(fig, path)


RENDERERS = {
    "detuning_sweep.csv": plot_detuning_sweep,
    "power_sweep.csv": plot_power_sweep,
    "duty_cycle_sweep.csv": plot_duty_cycle_sweep,
    "pump_probe_sweep.csv": plot_pump_probe_sweep,
    "doublet_residuals.csv": plot_doublet,
    "mechanical_residuals.csv": plot_mechanical,
    "counts.csv": plot_counts,
}


def render_directory(run_dir) -> list[Path]:
    """Render a PNG next to every known table in `run_dir`."""
    run_dir = Path(run_dir)
    written = []
    with plt.rc_context(STYLE):
        for name, render in RENDERERS.items():
            src = run_dir / name
            if src.is_file():
                written.append(render(read_table(src), src.with_suffix(".png")))
    return written
