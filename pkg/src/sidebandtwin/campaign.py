"""End-to-end campaigns: simulate, analyse, write tables and a manifest."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import platform
from importlib import resources
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import CampaignConfig, load_config, parse_config
from .counting import SimulationPlan, simulate_counts
from .device import (bose_einstein_occupancy, intracavity_photon_number,
                     modal_temperature, thermal_ground_probability)
from .errors import ConfigError, NumericalError, ValidationError
from .filters import sweep_response
from .inference import (DOUBLET, MECHANICAL, estimate_from_record,
                        estimate_occupancy, extract_g0, fit_lorentzian_doublet,
                        fit_mechanical_spectrum, fit_power_law, fit_rate_slope)
from .rng import stream
from .sequence import Gap, Pulse, PulseSequence, average_power, duty_cycle
from .thermal import pulse_occupancies

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"


# --- small output helpers -----------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def table_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def json_text(obj) -> str:
    return json.dumps(_jsonable(obj), indent=1, sort_keys=True) + "\n"


class Params:
    """Typed access to an [analysis.NAME] block."""

    def __init__(self, name: str, raw: dict[str, str] | None, text: str = ""):
        self.name = name
        self.raw = dict(raw or {})
        self.used: set[str] = set()

    def float(self, key, default=None):
        self.used.add(key)
        if key not in self.raw:
            if default is None:
                raise ConfigError(f"missing key {key!r}", field=f"analysis.{self.name}.{key}")
            return default
        try:
            return float(self.raw[key])
        except ValueError:
            raise ConfigError(f"expected a number, got {self.raw[key]!r}",
                              field=f"analysis.{self.name}.{key}") from None

    def floats(self, key, default=None):
        self.used.add(key)
        if key not in self.raw:
            if default is None:
                raise ConfigError(f"missing key {key!r}", field=f"analysis.{self.name}.{key}")
            return list(default)
        try:
            return [float(v) for v in self.raw[key].split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"expected numbers, got {self.raw[key]!r}",
                              field=f"analysis.{self.name}.{key}") from None

    def str(self, key, default):
        self.used.add(key)
        return self.raw.get(key, default).strip()

    def bool(self, key, default=False):
        self.used.add(key)
        if key not in self.raw:
            return default
        return self.raw[key].strip().lower() in ("1", "true", "yes", "on")

    def check_unused(self):
        extra = set(self.raw) - self.used
        if extra:
            raise ConfigError(f"unknown keys {sorted(extra)}", field=f"analysis.{self.name}")


@dataclass
class Context:
    cfg: CampaignConfig
    out: Path
    files: dict[str, str] = field(default_factory=dict)
    record: object = None

    @property
    def plan(self) -> SimulationPlan:
        return self.cfg.plan

    def write(self, name: str, text: str) -> str:
        path = self.out / name
        path.write_text(text)
        self.files[name] = hashlib.sha256(text.encode()).hexdigest()
        return name


# --- sequence rewriting -------------------------------------------------------

def retune(seq: PulseSequence, power=None, gap=None, detuning=None,
           total_duration=None) -> PulseSequence:
    """Copy of `seq` with pulse powers, gap lengths or |detuning| replaced.

    A new |detuning| keeps each pulse's sign; `total_duration` defaults to the
    original one, stretched to cover at least one period.
    """
    elements = []
    for e in seq.period_elements:
        if isinstance(e, Pulse):
            e = dataclasses.replace(
                e,
                power=e.power if power is None else power,
                detuning=e.detuning if detuning is None
                else math.copysign(detuning, e.detuning))
        elif gap is not None:
            e = Gap(gap)
        elements.append(e)
    period = sum(e.duration for e in elements)
    total = seq.total_duration if total_duration is None else total_duration
    n = max(1, int(math.floor(total / period + 1e-9)))
    return PulseSequence(tuple(elements), n * period)


def _with_sequence(plan: SimulationPlan, seq: PulseSequence) -> SimulationPlan:
    return dataclasses.replace(plan, sequence=seq)


def _sideband_rates(record, label, dark):
    counts, exposure = record.totals(label)
    return counts, exposure, counts / exposure - dark, math.sqrt(max(counts, 1)) / exposure


def _model_occupancy(plan: SimulationPlan, label: str) -> float:
    occ = pulse_occupancies(plan.sequence, plan.environment, plan.heating,
                            plan.device.mechanical)
    for p, n in zip(plan.sequence.pulses, occ):
        if p.label == label:
            return n
    return float("nan")


def _safe_modal_temperature(n, freq):
    return modal_temperature(n, freq) if 0 < n < math.inf else float("nan")


# --- analyses -----------------------------------------------------------------

def run_simulate(ctx: Context, prm: Params):
    prm.check_unused()
    ctx.record = simulate_counts(ctx.plan)
    ctx.write("counts.csv", ctx.record.to_csv())
    ctx.write("counts.json", ctx.record.to_json())
    return {"epochs": len(ctx.record.epochs),
            "totals": {lab: ctx.record.totals(lab)[0] for lab in ctx.record.labels()}}


def run_occupancy(ctx: Context, prm: Params):
    conf = prm.float("confidence", 0.95)
    prm.check_unused()
    if ctx.record is None:
        run_simulate(ctx, Params("simulate", {}))
    dark = ctx.plan.detector.dark_rate
    mech = ctx.plan.device.mechanical
    prof = estimate_from_record(ctx.record, dark, conf)
    boot = estimate_from_record(ctx.record, dark, conf, method="bootstrap",
                                seed=ctx.plan.seed)
    truth = _model_occupancy(ctx.plan, "red")
    out = {
        "profile_likelihood": prof.to_dict(),
        "bootstrap": boot.to_dict(),
        "model_occupancy": truth,
        "ground_state_probability": thermal_ground_probability(prof.n_b)
        if math.isfinite(prof.n_b) else 0.0,
        "modal_temperature_k": _safe_modal_temperature(prof.n_b, mech.frequency),
        "blue": dict(zip(("counts", "exposure_s"), ctx.record.totals("blue"))),
        "red": dict(zip(("counts", "exposure_s"), ctx.record.totals("red"))),
        "dark_rate_hz": dark,
    }
    ctx.write("occupancy.json", json_text(out))
    return {"n_b": prof.n_b, "ci": [prof.ci_low, prof.ci_high]}


def run_detuning_sweep(ctx: Context, prm: Params):
    span = prm.float("offset_span_hz", 30e6)
    step = prm.float("step_hz", 1e6)
    dwell = prm.float("dwell_s", 2e-4)
    prm.check_unused()
    plan = ctx.plan
    mech = plan.device.mechanical
    dark = plan.detector.dark_rate
    offsets = np.arange(-span, span + 0.5 * step, step)
    rows = []
    for k, off in enumerate(offsets):
        det = mech.frequency + off
        sub = _with_sequence(plan, retune(plan.sequence, detuning=det, total_duration=dwell))
        rec = simulate_counts(sub, stream=k)
        for label, sign in (("blue", 1.0), ("red", -1.0)):
            counts, exposure, rate, err = _sideband_rates(rec, label, dark)
            resp = sweep_response(plan.chain, mech, sign * det)
            rows.append((sign * det, label, counts, exposure, rate, err, resp))
    rows.sort(key=lambda r: r[0])
    header = ("detuning_hz", "branch", "counts", "exposure_s", "rate_hz", "rate_err_hz",
              "model_response")
    ctx.write("detuning_sweep.csv", table_text(header, rows))

    fits = {"grid_step_hz": step, "mechanical_frequency_hz": mech.frequency}
    for label, sign in (("blue", 1.0), ("red", -1.0)):
        sel = [r for r in rows if r[1] == label]
        sel.sort(key=lambda r: abs(r[0]))
        data = np.array([(abs(r[0]), r[4], r[5]) for r in sel])
        fit = fit_mechanical_spectrum(data)
        best = max(sel, key=lambda r: r[4])
        fits[label] = {
            "peak_detuning_hz": sign * fit["frequency"],
            "peak_detuning_err_hz": fit.error("frequency"),
            "amplitude_hz": fit["amplitude"] + fit["background"],
            "amplitude_err_hz": math.hypot(fit.error("amplitude"), fit.error("background")),
            "fwhm_hz": fit["damping"],
            "max_bin_detuning_hz": best[0],
            "fit": fit.to_dict(),
        }
    diff = fits["blue"]["amplitude_hz"] - fits["red"]["amplitude_hz"]
    sigma = math.hypot(fits["blue"]["amplitude_err_hz"], fits["red"]["amplitude_err_hz"])
    fits["amplitude_difference_hz"] = diff
    fits["amplitude_difference_sigma"] = diff / sigma if sigma > 0 else float("inf")
    ctx.write("detuning_sweep_fit.json", json_text(fits))
    return {"blue_peak_hz": fits["blue"]["peak_detuning_hz"],
            "red_peak_hz": fits["red"]["peak_detuning_hz"],
            "amplitude_difference_sigma": fits["amplitude_difference_sigma"]}


def _power_grid(prm: Params):
    if "powers_w" in prm.raw:
        return prm.floats("powers_w")
    lo = prm.float("power_min_w")
    hi = prm.float("power_max_w")
    n = int(prm.float("n_powers", 10))
    return list(np.geomspace(lo, hi, n))


def _thermometry_row(plan: SimulationPlan, rec, conf):
    dark = plan.detector.dark_rate
    mech = plan.device.mechanical
    bc, bt, brate, berr = _sideband_rates(rec, "blue", dark)
    rc, rt, rrate, rerr = _sideband_rates(rec, "red", dark)
    est = estimate_occupancy((bc, bt), (rc, rt), dark, conf)
    return {
        "blue_counts": bc, "blue_exposure_s": bt, "blue_rate_hz": brate, "blue_err_hz": berr,
        "red_counts": rc, "red_exposure_s": rt, "red_rate_hz": rrate, "red_err_hz": rerr,
        "mean_rate_hz": 0.5 * (brate + rrate), "mean_err_hz": 0.5 * math.hypot(berr, rerr),
        "n_b_model": _model_occupancy(plan, "red"),
        "n_b_est": est.n_b, "ci_low": est.ci_low, "ci_high": est.ci_high,
        "modal_temperature_k": _safe_modal_temperature(est.n_b, mech.frequency),
        "modal_temperature_model_k": _safe_modal_temperature(
            _model_occupancy(plan, "red"), mech.frequency),
    }


def run_power_sweep(ctx: Context, prm: Params):
    powers = _power_grid(prm)
    conf = prm.float("confidence", 0.95)
    fit_rate = prm.str("fit_rate", "mean")
    do_g0 = prm.bool("extract_g0")
    convention = prm.str("convention", "sum")
    prm.check_unused()
    plan = ctx.plan
    dev = plan.device
    rows = []
    for k, p in enumerate(powers):
        sub = _with_sequence(plan, retune(plan.sequence, power=p))
        rec = simulate_counts(sub, stream=k)
        n_a = intracavity_photon_number(p, dev.mechanical.frequency, dev.optical,
                                        dev.optical.resonance_frequency
                                        + dev.mechanical.frequency)
        row = {"power_w": p, "n_a": n_a}
        row.update(_thermometry_row(sub, rec, conf))
        rows.append(row)
    header = list(rows[0])
    ctx.write("power_sweep.csv", table_text(header, [[r[h] for h in header] for r in rows]))

    fits = {}
    for which in ("blue", "red", "mean"):
        ok = [r for r in rows if r[f"{which}_rate_hz"] > 0]
        if len(ok) >= 3:
            fit = fit_power_law([r["power_w"] for r in ok],
                                [r[f"{which}_rate_hz"] for r in ok],
                                [r[f"{which}_err_hz"] for r in ok])
            fits[which] = fit.to_dict()
    summary = {}
    if fit_rate in fits:
        fits["reported"] = fit_rate
        summary["exponent"] = fits[fit_rate]["exponent"]
        summary["exponent_err"] = fits[fit_rate]["exponent_err"]
    ctx.write("power_fit.json", json_text(fits))

    if do_g0:
        n_b = bose_einstein_occupancy(dev.mechanical.frequency,
                                      plan.environment.base_temperature)
        x = [r["n_a"] for r in rows]
        if convention == "sum":
            y = [r["blue_rate_hz"] + r["red_rate_hz"] for r in rows]
            e = [math.hypot(r["blue_err_hz"], r["red_err_hz"]) for r in rows]
        elif convention == "mean":
            y = [r["mean_rate_hz"] for r in rows]
            e = [r["mean_err_hz"] for r in rows]
        else:
            y = [r["blue_rate_hz"] for r in rows]
            e = [r["blue_err_hz"] for r in rows]
        slope, slope_err = fit_rate_slope(x, y, e)
        filt = plan.chain.peak_transmission
        g0, g0_err = extract_g0(slope, dev, plan.detector, n_b, convention, slope_err, filt)
        ctx.write("g0.json", json_text({
            "convention": convention, "slope_hz_per_photon": slope,
            "slope_err": slope_err, "n_b_thermal": n_b, "g0_hz": g0, "g0_err_hz": g0_err,
            "g0_configured_hz": dev.g0, "filter_transmission": filt}))
        summary["g0_hz"] = g0
        summary["g0_err_hz"] = g0_err
    return summary


def run_duty_cycle_sweep(ctx: Context, prm: Params):
    gaps = prm.floats("gaps_s")
    conf = prm.float("confidence", 0.95)
    prm.check_unused()
    plan = ctx.plan
    rows = []
    for k, tau in enumerate(gaps):
        seq = retune(plan.sequence, gap=tau)
        sub = _with_sequence(plan, seq)
        rec = simulate_counts(sub, stream=k)
        row = {"gap_s": tau, "duty_cycle": duty_cycle(seq),
               "average_power_w": average_power(seq)}
        row.update(_thermometry_row(sub, rec, conf))
        rows.append(row)
    rows.sort(key=lambda r: r["duty_cycle"])
    header = list(rows[0])
    ctx.write("duty_cycle_sweep.csv",
              table_text(header, [[r[h] for h in header] for r in rows]))
    model = [r["n_b_model"] for r in rows]
    est = [r["n_b_est"] for r in rows]
    return {"model_strictly_increasing": bool(np.all(np.diff(model) > 0)),
            "estimate_strictly_increasing": bool(np.all(np.diff(est) > 0))}


def run_pump_probe_sweep(ctx: Context, prm: Params):
    delays = prm.floats("delays_s")
    period = prm.float("period_s", 50e-6)
    prm.check_unused()
    plan = ctx.plan
    pulses = {p.label: p for p in plan.sequence.pulses}
    if "pump" not in pulses or "probe" not in pulses:
        raise ConfigError("pump_probe_sweep needs pulses labelled pump and probe")
    pump, probe = pulses["pump"], pulses["probe"]
    dark = plan.detector.dark_rate
    rows = []
    for k, delay in enumerate(delays):
        rest = period - pump.duration - delay - probe.duration
        seq = PulseSequence((pump, Gap(delay), probe, Gap(rest)),
                            plan.sequence.total_duration)
        sub = _with_sequence(plan, seq)
        rec = simulate_counts(sub, stream=k)
        counts, exposure, rate, err = _sideband_rates(rec, "probe", dark)
        rows.append((delay, counts, exposure, rate, err, _model_occupancy(sub, "probe"),
                     average_power(seq)))
    header = ("delay_s", "probe_counts", "probe_exposure_s", "probe_rate_hz",
              "probe_err_hz", "n_b_model", "average_power_w")
    ctx.write("pump_probe_sweep.csv", table_text(header, rows))
    x = np.array([r[0] for r in rows])
    y = np.array([r[3] for r in rows])
    s = np.array([r[4] for r in rows])
    design = np.column_stack([np.ones_like(x), x]) / s[:, None]
    coef, *_ = np.linalg.lstsq(design, y / s, rcond=None)
    cov = np.linalg.inv(design.T @ design)
    slope, slope_err = float(coef[1]), float(math.sqrt(cov[1, 1]))
    out = {"slope_hz_per_s": slope, "slope_err_hz_per_s": slope_err,
           "slope_sigma": slope / slope_err, "intercept_hz": float(coef[0])}
    ctx.write("pump_probe_fit.json", json_text(out))
    return {"slope_sigma": out["slope_sigma"]}


def _noise(ctx: Context, tag: int, size: int, sigma: float):
    if sigma <= 0:
        return np.zeros(size)
    return stream(ctx.plan.seed, 0xF17, tag).normal(0.0, sigma, size)


def run_doublet_fit(ctx: Context, prm: Params):
    opt = ctx.plan.device.optical
    splitting = prm.float("splitting_hz", opt.doublet_splitting)
    span = prm.float("span_hz", splitting + 8.0 * opt.kappa_total)
    points = int(prm.float("points", 801))
    noise = prm.float("noise", 0.0)
    prm.check_unused()
    f = opt.resonance_frequency + np.linspace(-span / 2, span / 2, points)
    truth = np.array([opt.resonance_frequency, splitting, opt.kappa_intrinsic,
                      opt.kappa_external, 1.0])
    y = DOUBLET.func(f, truth) + _noise(ctx, 1, points, noise)
    cols = [f, y] + ([np.full(points, noise)] if noise > 0 else [])
    spectrum = np.column_stack(cols)
    header = ("frequency_hz", "reflection") + (("uncertainty",) if noise > 0 else ())
    ctx.write("doublet_spectrum.csv", table_text(header, spectrum.tolist()))
    fit = fit_lorentzian_doublet(spectrum)
    ctx.write("doublet_fit.json", json_text(fit.to_dict()))
    model = DOUBLET.func(f, fit.values)
    ctx.write("doublet_residuals.csv", table_text(
        ("frequency_hz", "reflection", "model", "residual"),
        np.column_stack([f, y, model, y - model]).tolist()))
    return {"kappa_i_hz": fit["kappa_i"], "kappa_e_hz": fit["kappa_e"],
            "quality_factor": fit["quality_factor"], "flags": fit.flags}


def run_mechanical_fit(ctx: Context, prm: Params):
    mech = ctx.plan.device.mechanical
    span = prm.float("span_hz", 20.0 * mech.damping)
    points = int(prm.float("points", 801))
    snr = prm.float("snr", 0.0)
    background = prm.float("background", 0.1)
    prm.check_unused()
    f = mech.frequency + np.linspace(-span / 2, span / 2, points)
    truth = np.array([mech.frequency, mech.damping, 1.0, background])
    sigma = 1.0 / snr if snr > 0 else 0.0
    y = MECHANICAL.func(f, truth) + _noise(ctx, 2, points, sigma)
    cols = [f, y] + ([np.full(points, sigma)] if sigma > 0 else [])
    spectrum = np.column_stack(cols)
    header = ("frequency_hz", "psd") + (("uncertainty",) if sigma > 0 else ())
    ctx.write("mechanical_spectrum.csv", table_text(header, spectrum.tolist()))
    fit = fit_mechanical_spectrum(spectrum)
    ctx.write("mechanical_fit.json", json_text(fit.to_dict()))
    model = MECHANICAL.func(f, fit.values)
    ctx.write("mechanical_residuals.csv", table_text(
        ("frequency_hz", "psd", "model", "residual"),
        np.column_stack([f, y, model, y - model]).tolist()))
    return {"frequency_hz": fit["frequency"], "damping_hz": fit["damping"],
            "quality_factor": fit["quality_factor"],
            "quality_factor_err": fit.error("quality_factor")}


ANALYSES = {
    "simulate": run_simulate,
    "occupancy": run_occupancy,
    "detuning_sweep": run_detuning_sweep,
    "power_sweep": run_power_sweep,
    "duty_cycle_sweep": run_duty_cycle_sweep,
    "pump_probe_sweep": run_pump_probe_sweep,
    "doublet_fit": run_doublet_fit,
    "mechanical_fit": run_mechanical_fit,
}


def _versions():
    import scipy
    return {"sidebandtwin": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


@dataclass
class CampaignResult:
    out: Path
    manifest: dict
    status: int


def execute(cfg: CampaignConfig, out_dir) -> CampaignResult:
    """Run every analysis of `cfg`; failures are recorded, not raised."""
    unknown = [a for a in cfg.analyses if a not in ANALYSES]
    if unknown:
        raise ConfigError(f"unknown analyses {unknown}; choose from {sorted(ANALYSES)}",
                          field="campaign.analyses")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ctx = Context(cfg, out)
    entries = []
    status = 0
    for name in cfg.analyses:
        prm = Params(name, cfg.analysis_params.get(name), cfg.text)
        before = set(ctx.files)
        try:
            summary = ANALYSES[name](ctx, prm)
            entries.append({"analysis": name, "status": "ok", "summary": summary,
                            "files": sorted(set(ctx.files) - before)})
        except ConfigError:
            raise
        except (NumericalError, ValidationError, ValueError, ArithmeticError,
                np.linalg.LinAlgError) as exc:
            log.warning("analysis %s failed: %s", name, exc)
            status = 1
            entries.append({"analysis": name, "status": "error",
                            "error": f"{type(exc).__name__}: {exc}"})
    manifest = {
        "campaign": cfg.name,
        "description": cfg.description,
        "seed": cfg.plan.seed,
        "config_digest": hashlib.sha256(cfg.text.encode()).hexdigest(),
        "plan_digest": cfg.plan.digest(),
        "versions": _versions(),
        "analyses": entries,
        "files": {k: {"sha256": v} for k, v in sorted(ctx.files.items())},
    }
    (out / MANIFEST).write_text(json_text(manifest))
    return CampaignResult(out, manifest, status)


def run_campaign(config_path, out_dir=None, seed: int | None = None) -> CampaignResult:
    cfg = load_config(config_path, seed)
    out = Path(out_dir) if out_dir is not None else Path("runs") / cfg.name
    return execute(cfg, out)


def run_config_text(text: str, out_dir, seed: int | None = None) -> CampaignResult:
    return execute(parse_config(text, seed), out_dir)


PRESETS = ("fig1d", "fig1e", "fig3a", "fig3b", "fig4a", "fig4b", "fig4c", "fig4d",
           "supp-fig7", "supp-fig8")


def preset_path(name: str):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return resources.files("sidebandtwin") / "presets" / f"{name}.ini"


def list_presets() -> dict[str, str]:
    """Shipped preset names mapped to their one-line descriptions."""
    return {name: load_config(preset_path(name)).description for name in PRESETS}


def run_preset(name: str, out_dir=None, seed: int | None = None) -> CampaignResult:
    return run_campaign(preset_path(name), out_dir or Path("runs") / name, seed)
