"""Periodic optical pulse sequences and their expansion into timelines."""

from __future__ import annotations

import configparser
import math
import re
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, ValidationError

LABELS = ("red", "blue", "pump", "probe")
# filter cascade stays aligned for about this long
FILTER_STABLE_WINDOW_S = 2.5


@dataclass(frozen=True)
class Pulse:
    detuning: float
    power: float
    duration: float
    label: str

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValidationError(f"pulse label must be one of {LABELS}, got {self.label!r}")
        if not (self.duration > 0 and math.isfinite(self.duration)):
            raise ValidationError(f"pulse duration must be > 0, got {self.duration!r}")
        if not (self.power >= 0 and math.isfinite(self.power)):
            raise ValidationError(f"pulse power must be >= 0, got {self.power!r}")
        if not math.isfinite(self.detuning):
            raise ValidationError("pulse detuning must be finite")


@dataclass(frozen=True)
class Gap:
    duration: float

    def __post_init__(self):
        if not (self.duration >= 0 and math.isfinite(self.duration)):
            raise ValidationError(
                f"gap must be >= 0 (overlapping elements are not allowed), got {self.duration!r}")


@dataclass(frozen=True)
class PulseSequence:
    period_elements: tuple
    total_duration: float

    def __post_init__(self):
        object.__setattr__(self, "period_elements", tuple(self.period_elements))
        if not any(isinstance(e, Pulse) for e in self.period_elements):
            raise ValidationError("a period needs at least one pulse")
        for e in self.period_elements:
            if not isinstance(e, (Pulse, Gap)):
                raise ValidationError(f"unexpected period element {e!r}")
        if self.period <= 0:
            raise DomainError("zero-length period")
        if self.total_duration < self.period * (1 - 1e-12):
            raise ValidationError("total_duration must cover at least one period")
        if self.total_duration > FILTER_STABLE_WINDOW_S * (1 + 1e-12):
            warnings.warn(
                f"total_duration {self.total_duration} s exceeds the "
                f"{FILTER_STABLE_WINDOW_S} s filter stability window",
                stacklevel=2)

    @property
    def pulses(self) -> list[Pulse]:
        return [e for e in self.period_elements if isinstance(e, Pulse)]

    @property
    def period(self) -> float:
        return sum(e.duration for e in self.period_elements)

    @property
    def n_periods(self) -> int:
        return int(math.floor(self.total_duration / self.period + 1e-9))

    def on_time(self, label: str | None = None) -> float:
        """Pulse-on time per period, optionally for one label."""
        return sum(p.duration for p in self.pulses if label in (None, p.label))


def duty_cycle(seq: PulseSequence) -> float:
    if seq.period <= 0:
        raise DomainError("zero-length period")
    return seq.on_time() / seq.period


def average_power(seq: PulseSequence) -> float:
    if seq.period <= 0:
        raise DomainError("zero-length period")
    return sum(p.power * p.duration for p in seq.pulses) / seq.period


def period_layout(seq: PulseSequence) -> list[tuple[float, float, Pulse]]:
    """(start, end, pulse) within one period, starting at t = 0."""
    out = []
    t = 0.0
    for e in seq.period_elements:
        if isinstance(e, Pulse):
            out.append((t, t + e.duration, e))
        t += e.duration
    return out


def timeline_arrays(seq: PulseSequence):
    """Vectorised timeline: (starts, ends, pulse_index) over all periods.

    `pulse_index` indexes `seq.pulses`. Intervals are sorted and disjoint.
    """
    layout = period_layout(seq)
    offsets = np.arange(seq.n_periods) * seq.period
    s0 = np.array([s for s, _, _ in layout])
    e0 = np.array([e for _, e, _ in layout])
    starts = (offsets[:, None] + s0[None, :]).ravel()
    ends = (offsets[:, None] + e0[None, :]).ravel()
    index = np.tile(np.arange(len(layout)), seq.n_periods)
    return starts, ends, index


def expand_timeline(seq: PulseSequence) -> list[tuple[float, float, Pulse]]:
    pulses = seq.pulses
    starts, ends, index = timeline_arrays(seq)
    return [(float(s), float(e), pulses[i]) for s, e, i in zip(starts, ends, index)]


# --- configuration text -------------------------------------------------------

_PULSE_KEYS = {"label", "detuning", "power_w", "duration_s"}
_GAP_KEYS = {"gap_s"}
_SEQUENCE_KEYS = {"period", "total_duration_s"}


def find_line(text: str, section: str, key: str | None = None) -> int | None:
    """1-based line number of a section header, or of a key inside it."""
    in_section = False
    header = re.compile(r"^\s*\[(.+?)\]\s*$")
    for n, line in enumerate(text.splitlines(), start=1):
        m = header.match(line)
        if m:
            in_section = m.group(1).strip() == section
            if in_section and key is None:
                return n
            continue
        if in_section and key is not None:
            k = re.split(r"[=:]", line, maxsplit=1)[0].strip()
            if k == key:
                return n
    return None


def read_config_text(text: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"),
                                   interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0],
                          line=getattr(exc, "lineno", None)) from exc
    return cp


def parse_float(text: str, raw: str, section: str, key: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"expected a number, got {raw!r}",
                          line=find_line(text, section, key),
                          field=f"{section}.{key}") from None
    if not math.isfinite(value):
        raise ConfigError(f"expected a finite number, got {raw!r}",
                          line=find_line(text, section, key),
                          field=f"{section}.{key}")
    return value


def check_keys(text: str, cp, section: str, allowed: set, required: set = frozenset()):
    for key in cp[section]:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r}",
                              line=find_line(text, section, key),
                              field=f"{section}.{key}")
    for key in required:
        if key not in cp[section]:
            raise ConfigError(f"missing required key {key!r}",
                              line=find_line(text, section),
                              field=f"{section}.{key}")


def resolve_detuning(raw: str, mechanical_frequency: float | None,
                     text: str = "", section: str = "") -> float:
    """Numeric detuning in Hz, or the symbolic forms +mech / -mech."""
    token = raw.strip().lower()
    if token in ("+mech", "mech", "-mech"):
        if mechanical_frequency is None:
            raise ConfigError("symbolic detuning needs a mechanical frequency",
                              line=find_line(text, section, "detuning"),
                              field=f"{section}.detuning")
        return -mechanical_frequency if token == "-mech" else mechanical_frequency
    return parse_float(text, raw, section, "detuning")


def sequence_from_parser(cp, text: str,
                         mechanical_frequency: float | None = None) -> PulseSequence:
    if "sequence" not in cp:
        raise ConfigError("missing [sequence] section")
    check_keys(text, cp, "sequence", _SEQUENCE_KEYS, _SEQUENCE_KEYS)
    sec = cp["sequence"]
    names = [n.strip() for n in sec["period"].split(",") if n.strip()]
    if not names:
        raise ConfigError("empty period", line=find_line(text, "sequence", "period"),
                          field="sequence.period")
    total = parse_float(text, sec["total_duration_s"], "sequence", "total_duration_s")

    elements = []
    for name in names:
        psec, gsec = f"pulse.{name}", f"gap.{name}"
        if psec in cp and gsec in cp:
            raise ConfigError(f"element {name!r} defined both as pulse and gap",
                              line=find_line(text, gsec))
        if psec in cp:
            check_keys(text, cp, psec, _PULSE_KEYS, _PULSE_KEYS)
            p = cp[psec]
            try:
                elements.append(Pulse(
                    label=p["label"].strip(),
                    detuning=resolve_detuning(p["detuning"], mechanical_frequency, text, psec),
                    power=parse_float(text, p["power_w"], psec, "power_w"),
                    duration=parse_float(text, p["duration_s"], psec, "duration_s"),
                ))
            except ValidationError as exc:
                raise ValidationError(f"[{psec}] {exc}") from None
        elif gsec in cp:
            check_keys(text, cp, gsec, _GAP_KEYS, _GAP_KEYS)
            try:
                elements.append(Gap(parse_float(text, cp[gsec]["gap_s"], gsec, "gap_s")))
            except ValidationError as exc:
                raise ValidationError(f"[{gsec}] {exc}") from None
        else:
            raise ConfigError(f"period element {name!r} has no [pulse.{name}] "
                              f"or [gap.{name}] section",
                              line=find_line(text, "sequence", "period"),
                              field="sequence.period")
    return PulseSequence(tuple(elements), total)


def parse_sequence_config(text: str,
                          mechanical_frequency: float | None = None) -> PulseSequence:
    """Build a validated PulseSequence from sectioned key/value text.

    Schema::

        [sequence]
        period = red, delay, blue, delay
        total_duration_s = 2.5

        [pulse.red]
        label = red
        detuning = -mech        # Hz, or +mech / -mech
        power_w = 8.5e-9
        duration_s = 4e-6

        [gap.delay]
        gap_s = 1e-6

    Only ``sequence``, ``pulse.*`` and ``gap.*`` sections are read; other
    sections (device, detector, ...) are ignored here.
    """
    cp = read_config_text(text)
    for section in cp.sections():
        if section.startswith(("pulse.", "gap.")):
            name = section.split(".", 1)[1]
            period = cp.get("sequence", "period", fallback="")
            if name not in [n.strip() for n in period.split(",")]:
                raise ConfigError(f"section [{section}] is not used in the period",
                                  line=find_line(text, section))
    return sequence_from_parser(cp, text, mechanical_frequency)
