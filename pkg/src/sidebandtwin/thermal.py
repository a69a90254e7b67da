"""Two-channel laser-heating phenomenology.

Occupancy during a pulse is the bath occupancy plus a fast (intracavity)
term driven by the instantaneous pulse power and a slow (extracavity) term
driven by the sequence-averaged power. Both timescales act as step
thresholds: a fast contribution either survives a gap or has relaxed.
"""

from __future__ import annotations

from dataclasses import dataclass

from .device import MechanicalMode, bose_einstein_occupancy
from .errors import DomainError, ValidationError
from .sequence import Gap, Pulse, PulseSequence, average_power


@dataclass(frozen=True)
class CryostatEnvironment:
    base_temperature: float

    def __post_init__(self):
        if not self.base_temperature > 0:
            raise ValidationError("base temperature must be > 0")


@dataclass(frozen=True)
class HeatingModel:
    fast_amplitude: float = 0.0
    fast_exponent: float = 1.0
    fast_timescale: float = 100e-9
    slow_amplitude: float = 0.0
    slow_exponent: float = 1.0
    slow_timescale: float = 20e-6

    def __post_init__(self):
        if self.fast_amplitude < 0 or self.slow_amplitude < 0:
            raise ValidationError("heating amplitudes must be >= 0")
        if self.fast_exponent <= 0 or self.slow_exponent <= 0:
            raise ValidationError("heating exponents must be > 0")
        if not 0 < self.fast_timescale < self.slow_timescale:
            raise ValidationError("need 0 < fast_timescale < slow_timescale")

    def fast_term(self, power: float) -> float:
        return self.fast_amplitude * power ** self.fast_exponent

    def slow_term(self, mean_power: float) -> float:
        return self.slow_amplitude * mean_power ** self.slow_exponent


def _fast_carryover(seq: PulseSequence, index: int, model: HeatingModel) -> float:
    """Fast heating left over from earlier pulses not separated by a relaxing gap."""
    elements = seq.period_elements
    positions = [i for i, e in enumerate(elements) if isinstance(e, Pulse)]
    here = positions[index]
    n = len(elements)
    carried = 0.0
    elapsed = 0.0
    j = (here - 1) % n
    while j != here:
        e = elements[j]
        if isinstance(e, Gap):
            elapsed += e.duration
            if elapsed >= model.fast_timescale:
                break
        else:
            carried += model.fast_term(e.power)
        j = (j - 1) % n
    return carried


def pulse_occupancies(seq: PulseSequence, env: CryostatEnvironment,
                      model: HeatingModel, mech: MechanicalMode) -> list[float]:
    """Effective phonon occupancy during each pulse of one period."""
    bath = bose_einstein_occupancy(mech.frequency, env.base_temperature)
    slow = model.slow_term(average_power(seq))
    return [bath + model.fast_term(p.power) + _fast_carryover(seq, i, model) + slow
            for i, p in enumerate(seq.pulses)]


def effective_occupancy(seq: PulseSequence, env: CryostatEnvironment,
                        model: HeatingModel, mech: MechanicalMode,
                        label: str | None = None) -> float:
    """Occupancy during the measurement pulse.

    The measurement pulse is the first pulse carrying `label`; by default the
    first red, blue or probe pulse of the period.
    """
    wanted = (label,) if label else ("red", "blue", "probe")
    occ = pulse_occupancies(seq, env, model, mech)
    for p, n in zip(seq.pulses, occ):
        if p.label in wanted:
            return n
    raise DomainError(f"sequence has no pulse labelled {wanted}")


def pump_probe_occupancy(pump: Pulse, probe: Pulse, delay: float,
                         env: CryostatEnvironment, model: HeatingModel,
                         mech: MechanicalMode, period: float | None = None) -> float:
    """Occupancy during the probe of a pump / delay / probe / rest sequence.

    `period` defaults to 50 us; the average power, and therefore the slow
    term, depends only on it and not on `delay`.
    """
    if delay <= 0:
        raise DomainError("delay must be > 0")
    period = 50e-6 if period is None else period
    rest = period - pump.duration - delay - probe.duration
    if rest < 0:
        raise DomainError("pump, delay and probe do not fit in the period")
    seq = PulseSequence((pump, Gap(delay), probe, Gap(rest)), period)
    return pulse_occupancies(seq, env, model, mech)[1]
