"""Sectioned key/value configuration files.

Sections: device, detector, filters, sequence (+ pulse.* / gap.*),
environment, heating, campaign and optional analysis.* blocks. Physical
quantities carry explicit unit suffixes (_hz, _w, _s, _k).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .counting import SimulationPlan
from .device import DetectorModel, DeviceModel, MechanicalMode, OpticalMode
from .errors import ConfigError, DomainError, ValidationError
from .filters import DriftLaw, FabryPerotStage, FilterChain
from .sequence import (check_keys, find_line, parse_float, read_config_text,
                       sequence_from_parser)
from .thermal import CryostatEnvironment, HeatingModel

DEVICE_KEYS = {"optical_frequency_hz", "kappa_intrinsic_hz", "kappa_external_hz",
               "doublet_splitting_hz", "mechanical_frequency_hz",
               "mechanical_damping_hz", "g0_hz"}
DETECTOR_KEYS = {"efficiency", "dark_rate_hz", "pump_leak_rate_hz", "dead_time_s"}
FILTER_KEYS = {"fwhm_hz", "fsr_hz", "peak_transmission", "stable_window_s",
               "drift_factor", "extinction_floor"}
ENVIRONMENT_KEYS = {"base_temperature_k"}
HEATING_KEYS = {"preset", "fast_amplitude", "fast_exponent", "fast_timescale_s",
                "slow_amplitude", "slow_exponent", "slow_timescale_s"}
CAMPAIGN_KEYS = {"name", "seed", "repetitions", "analyses", "description"}
TOP_SECTIONS = {"device", "detector", "filters", "sequence", "environment",
                "heating", "campaign"}

# reference device values; any [device] key may override them
DEVICE_DEFAULTS = {
    "optical_frequency_hz": 196.78e12,
    "kappa_intrinsic_hz": 1585e6,
    "kappa_external_hz": 480e6,
    "doublet_splitting_hz": 0.0,
    "mechanical_frequency_hz": 1.085e9,
    "mechanical_damping_hz": 6e6,
    "g0_hz": 220e3,
}


@dataclass
class CampaignConfig:
    name: str
    plan: SimulationPlan
    analyses: list[str]
    analysis_params: dict[str, dict[str, str]] = field(default_factory=dict)
    description: str = ""
    text: str = ""


def _floats(text, cp, section, key, default=None):
    if key not in cp[section]:
        return default
    return parse_float(text, cp[section][key], section, key)


def _float_list(text, cp, section, key):
    raw = cp[section][key]
    return [parse_float(text, v, section, key) for v in raw.split(",") if v.strip()]


def _wrap(section, build):
    try:
        return build()
    except (DomainError, ValidationError) as exc:
        raise ValidationError(f"[{section}] {exc}") from None


def device_from_parser(cp, text) -> DeviceModel:
    vals = dict(DEVICE_DEFAULTS)
    if "device" in cp:
        check_keys(text, cp, "device", DEVICE_KEYS)
        for key in cp["device"]:
            vals[key] = _floats(text, cp, "device", key)
    return _wrap("device", lambda: DeviceModel(
        OpticalMode(vals["optical_frequency_hz"], vals["kappa_intrinsic_hz"],
                    vals["kappa_external_hz"], vals["doublet_splitting_hz"]),
        MechanicalMode(vals["mechanical_frequency_hz"], vals["mechanical_damping_hz"]),
        vals["g0_hz"]))


def detector_from_parser(cp, text) -> tuple[DetectorModel, float]:
    if "detector" not in cp:
        raise ConfigError("missing [detector] section")
    check_keys(text, cp, "detector", DETECTOR_KEYS, {"efficiency"})
    det = _wrap("detector", lambda: DetectorModel(
        _floats(text, cp, "detector", "efficiency"),
        _floats(text, cp, "detector", "dark_rate_hz", 0.0),
        _floats(text, cp, "detector", "pump_leak_rate_hz", 0.0)))
    return det, _floats(text, cp, "detector", "dead_time_s", 0.0)


def filters_from_parser(cp, text) -> FilterChain:
    if "filters" not in cp:
        raise ConfigError("missing [filters] section")
    check_keys(text, cp, "filters", FILTER_KEYS, {"fwhm_hz", "fsr_hz"})
    fwhm = _float_list(text, cp, "filters", "fwhm_hz")
    fsr = _float_list(text, cp, "filters", "fsr_hz")
    peak = (_float_list(text, cp, "filters", "peak_transmission")
            if "peak_transmission" in cp["filters"] else [1.0] * len(fwhm))
    if not (len(fwhm) == len(fsr) == len(peak)):
        raise ConfigError("fwhm_hz, fsr_hz and peak_transmission need one value per stage",
                          line=find_line(text, "filters", "fsr_hz"), field="filters")
    return _wrap("filters", lambda: FilterChain(
        tuple(FabryPerotStage(w, f, p) for w, f, p in zip(fwhm, fsr, peak)),
        DriftLaw(_floats(text, cp, "filters", "stable_window_s", 2.5),
                 _floats(text, cp, "filters", "drift_factor", 0.85)),
        _floats(text, cp, "filters", "extinction_floor")))


def load_heating_preset(name: str) -> HeatingModel:
    fname = f"heating_{name.replace('-', '_')}.ini"
    res = resources.files("sidebandtwin") / "presets" / fname
    if not res.is_file():
        raise ConfigError(f"unknown heating preset {name!r}", field="heating.preset")
    text = res.read_text()
    cp = read_config_text(text)
    return heating_from_parser(cp, text)


def heating_from_parser(cp, text) -> HeatingModel:
    if "heating" not in cp:
        return HeatingModel()
    check_keys(text, cp, "heating", HEATING_KEYS)
    sec = cp["heating"]
    base = load_heating_preset(sec["preset"].strip()) if "preset" in sec else HeatingModel()
    vals = {
        "fast_amplitude": base.fast_amplitude, "fast_exponent": base.fast_exponent,
        "fast_timescale": base.fast_timescale, "slow_amplitude": base.slow_amplitude,
        "slow_exponent": base.slow_exponent, "slow_timescale": base.slow_timescale,
    }
    for key in sec:
        if key == "preset":
            continue
        vals[key.removesuffix("_s")] = _floats(text, cp, "heating", key)
    return _wrap("heating", lambda: HeatingModel(**vals))


def environment_from_parser(cp, text) -> CryostatEnvironment:
    if "environment" not in cp:
        raise ConfigError("missing [environment] section")
    check_keys(text, cp, "environment", ENVIRONMENT_KEYS, ENVIRONMENT_KEYS)
    return _wrap("environment", lambda: CryostatEnvironment(
        _floats(text, cp, "environment", "base_temperature_k")))


def parse_config(text: str, seed: int | None = None) -> CampaignConfig:
    """Parse and validate a full campaign configuration."""
    cp = read_config_text(text)
    for section in cp.sections():
        if section in TOP_SECTIONS or section.startswith(("pulse.", "gap.", "analysis.")):
            continue
        raise ConfigError(f"unknown section [{section}]", line=find_line(text, section))
    device = device_from_parser(cp, text)
    detector, dead_time = detector_from_parser(cp, text)
    chain = filters_from_parser(cp, text)
    sequence = _wrap("sequence", lambda: sequence_from_parser(
        cp, text, device.mechanical.frequency))
    env = environment_from_parser(cp, text)
    heating = heating_from_parser(cp, text)

    camp = cp["campaign"] if "campaign" in cp else {}
    if "campaign" in cp:
        check_keys(text, cp, "campaign", CAMPAIGN_KEYS)
    if seed is None:
        raw = camp.get("seed", "0")
        try:
            seed = int(raw)
        except ValueError:
            raise ConfigError(f"seed must be an integer, got {raw!r}",
                              line=find_line(text, "campaign", "seed"),
                              field="campaign.seed") from None
    raw_reps = camp.get("repetitions", "1")
    try:
        reps = int(raw_reps)
    except ValueError:
        raise ConfigError(f"repetitions must be an integer, got {raw_reps!r}",
                          line=find_line(text, "campaign", "repetitions"),
                          field="campaign.repetitions") from None
    plan = _wrap("campaign", lambda: SimulationPlan(
        device, detector, chain, sequence, env, heating, reps, seed, dead_time))
    analyses = [a.strip() for a in camp.get("analyses", "simulate").split(",") if a.strip()]
    params = {s.split(".", 1)[1]: dict(cp[s]) for s in cp.sections()
              if s.startswith("analysis.")}
    return CampaignConfig(camp.get("name", "campaign"), plan, analyses, params,
                          camp.get("description", ""), text)


def load_config(path, seed: int | None = None) -> CampaignConfig:
    return parse_config(Path(path).read_text(), seed)
