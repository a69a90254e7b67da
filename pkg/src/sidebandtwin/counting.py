"""Monte Carlo photon-count records for pulsed sideband thermometry."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng
from .device import (DetectorModel, DeviceModel, intracavity_photon_number,
                     sideband_rates)
from .errors import ConfigError, ValidationError
from .filters import FilterChain, chain_transmission, sweep_response
from .sequence import Gap, PulseSequence, timeline_arrays
from .thermal import CryostatEnvironment, HeatingModel, pulse_occupancies

DARK_LABEL = "dark-only"
CSV_COLUMNS = ("epoch_index", "label", "start_s", "exposure_s", "counts")
RECORD_FORMAT = "sidebandtwin.count-record"


@dataclass(frozen=True)
class SimulationPlan:
    device: DeviceModel
    detector: DetectorModel
    chain: FilterChain
    sequence: PulseSequence
    environment: CryostatEnvironment
    heating: HeatingModel = field(default_factory=HeatingModel)
    repetitions: int = 1
    seed: int = 0
    dead_time: float = 0.0

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValidationError("repetitions must be >= 1")
        if self.dead_time < 0:
            raise ValidationError("dead time must be >= 0")

    def digest(self) -> str:
        payload = dataclasses.asdict(self)
        payload["sequence"]["period_elements"] = [
            {"kind": type(e).__name__.lower(), **dataclasses.asdict(e)}
            for e in self.sequence.period_elements]
        text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


@dataclass(frozen=True)
class Epoch:
    epoch_index: int
    label: str
    start: float
    exposure: float
    counts: int


@dataclass
class CountRecord:
    epochs: list[Epoch]
    seed: int
    stream: int = 0
    plan_digest: str = ""

    def labels(self) -> list[str]:
        return sorted({e.label for e in self.epochs})

    def totals(self, label: str) -> tuple[int, float]:
        """(summed counts, summed exposure in s) for one label."""
        counts = sum(e.counts for e in self.epochs if e.label == label)
        exposure = sum(e.exposure for e in self.epochs if e.label == label)
        return counts, exposure

    def rate(self, label: str) -> float:
        c, t = self.totals(label)
        return c / t

    # -- serialization -------------------------------------------------------
    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for e in self.epochs:
            w.writerow([e.epoch_index, e.label, repr(e.start), repr(e.exposure), e.counts])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "format": RECORD_FORMAT,
            "version": 1,
            "seed": self.seed,
            "stream": self.stream,
            "plan_digest": self.plan_digest,
            "columns": list(CSV_COLUMNS),
            "epochs": [[e.epoch_index, e.label, e.start, e.exposure, e.counts]
                       for e in self.epochs],
        }
        return json.dumps(doc, indent=1) + "\n"

    @classmethod
    def from_csv(cls, text: str, seed: int = 0, plan_digest: str = "") -> "CountRecord":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_COLUMNS:
            raise ConfigError(f"count CSV header must be {','.join(CSV_COLUMNS)}", line=1)
        epochs = []
        for n, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                epochs.append(Epoch(int(row[0]), row[1].strip(), float(row[2]),
                                    float(row[3]), int(row[4])))
            except (ValueError, IndexError) as exc:
                raise ConfigError(f"bad count row: {exc}", line=n) from None
        _check_epochs(epochs)
        return cls(epochs, seed=seed, plan_digest=plan_digest)

    @classmethod
    def from_json(cls, text: str) -> "CountRecord":
        doc = json.loads(text)
        if doc.get("format") != RECORD_FORMAT:
            raise ConfigError(f"not a {RECORD_FORMAT} document")
        epochs = [Epoch(int(i), str(lab), float(s), float(t), int(c))
                  for i, lab, s, t, c in doc["epochs"]]
        _check_epochs(epochs)
        return cls(epochs, seed=doc["seed"], stream=doc.get("stream", 0),
                   plan_digest=doc.get("plan_digest", ""))

    @classmethod
    def load(cls, path) -> "CountRecord":
        path = Path(path)
        text = path.read_text()
        if path.suffix == ".json":
            return cls.from_json(text)
        return cls.from_csv(text)


def _check_epochs(epochs):
    for e in epochs:
        if e.counts < 0 or not e.exposure > 0:
            raise ValidationError(f"epoch {e.epoch_index}: need counts >= 0 and exposure > 0")


def pulse_rates(plan: SimulationPlan) -> list[tuple[float, float]]:
    """(optomechanical rate before drift, background rate) for each pulse of a period.

    The optomechanical part uses the detector efficiency times the on-resonance
    chain transmission; the filter drift factor is applied per interval.
    """
    dev = plan.device
    occupancies = pulse_occupancies(plan.sequence, plan.environment, plan.heating,
                                    dev.mechanical)
    filt = chain_transmission(plan.chain, 0.0)
    out = []
    for pulse, n_b in zip(plan.sequence.pulses, occupancies):
        laser = dev.optical.resonance_frequency + pulse.detuning
        n_a = intracavity_photon_number(pulse.power, pulse.detuning, dev.optical, laser)
        stokes, anti_stokes = sideband_rates(dev, n_a, n_b, plan.detector, filt)
        if pulse.detuning >= 0:
            sideband = stokes * sweep_response(plan.chain, dev.mechanical,
                                               pulse.detuning, "blue")
        else:
            sideband = anti_stokes * sweep_response(plan.chain, dev.mechanical,
                                                    pulse.detuning, "red")
        out.append((sideband, plan.detector.dark_rate + plan.detector.pump_leak_rate))
    return out


def _interval_means(plan: SimulationPlan):
    starts, ends, index = timeline_arrays(plan.sequence)
    rates = np.array(pulse_rates(plan))
    drift = plan.chain.drift.factor(starts)
    mean_rate = rates[index, 0] * drift + rates[index, 1]
    return starts, ends, index, mean_rate * (ends - starts), drift


def expected_counts(plan: SimulationPlan) -> dict[str, float]:
    """Analytic mean counts per label for one repetition."""
    starts, ends, index, means, drift = _interval_means(plan)
    labels = [p.label for p in plan.sequence.pulses]
    out: dict[str, float] = {}
    for i, lab in enumerate(labels):
        out[lab] = out.get(lab, 0.0) + float(means[index == i].sum())
    gap = plan.sequence.total_duration - float((ends - starts).sum())
    if gap > 0:
        out[DARK_LABEL] = plan.detector.dark_rate * gap
    return out


def _dead_time_thin(counts: int, exposure: float, dead_time: float) -> int:
    if dead_time <= 0 or counts == 0:
        return counts
    return int(math.floor(counts / (1.0 + counts / exposure * dead_time)))


def _first_gap_start(seq: PulseSequence) -> float:
    t = 0.0
    for e in seq.period_elements:
        if isinstance(e, Gap) and e.duration > 0:
            return t
        t += e.duration
    return seq.n_periods * seq.period


def simulate_counts(plan: SimulationPlan, stream: int = 0) -> CountRecord:
    """Draw one count record; identical (plan, stream) gives identical output.

    Counts are Poisson per timeline interval and aggregated per repetition
    into one epoch per (label, filter-drift segment), plus the dark-only gaps.
    """
    seq = plan.sequence
    starts, ends, index, means, drift = _interval_means(plan)
    labels = np.array([p.label for p in seq.pulses])
    interval_labels = labels[index]
    segment = (drift != 1.0).astype(int)
    gap_total = seq.total_duration - float((ends - starts).sum())
    gap_start = _first_gap_start(seq)

    epochs: list[Epoch] = []
    for rep in range(plan.repetitions):
        gen = rng.stream(plan.seed, stream, rep)
        counts = gen.poisson(means)
        offset = rep * seq.total_duration
        rows = []
        for lab in dict.fromkeys(labels.tolist()):
            for seg in (0, 1):
                mask = (interval_labels == lab) & (segment == seg)
                if not mask.any():
                    continue
                rows.append((float(starts[mask][0]) + offset, lab,
                             float((ends[mask] - starts[mask]).sum()),
                             int(counts[mask].sum())))
        if gap_total > 0:
            dark = int(gen.poisson(plan.detector.dark_rate * gap_total))
            rows.append((gap_start + offset, DARK_LABEL, gap_total, dark))
        rows.sort(key=lambda r: (r[0], r[1]))
        for start, lab, exposure, c in rows:
            epochs.append(Epoch(len(epochs), lab, start, exposure,
                                _dead_time_thin(c, exposure, plan.dead_time)))
    return CountRecord(epochs, seed=plan.seed, stream=stream, plan_digest=plan.digest())


def ensemble_counts(plan: SimulationPlan, n_ensembles: int) -> list[CountRecord]:
    """Independent records; record i equals simulate_counts(plan, stream=i)."""
    if n_ensembles < 1:
        raise ValidationError("n_ensembles must be >= 1")
    return [simulate_counts(plan, stream=i) for i in range(n_ensembles)]


def pump_leak_rate(chain: FilterChain, probe_flux_at_detector: float,
                   sideband_offset: float, rejection: float = 1.0) -> float:
    """Laser photons leaking through the filters, in counts/s.

    `rejection` is an extra multiplier (<= 1) for e.g. backward detection.
    """
    if probe_flux_at_detector < 0:
        raise ValidationError("flux must be >= 0")
    if not 0 < rejection <= 1:
        raise ValidationError("rejection factor must lie in (0, 1]")
    return probe_flux_at_detector * chain_transmission(chain, sideband_offset) * rejection
