"""Analog measurement pipelines: physical truth -> ADC counts and back.

The strain channel is a Galinstan channel in a divider with two
current-limiting resistors, amplified and quantized. The pressure channel is
a 0-15 PSI sensor producing 0-100 mV, amplified and quantized. Inversion
reproduces what the microcontroller does with the counts, including removal
of the common-mode atmospheric offset via the main board's differential
reference sensor.

Noise is additive white Gaussian, input-referred at the amplifier (the
amplified noise, amp_gain * noise_sigma, is what appears at the ADC), and is
drawn from an explicit seeded stream - no global RNG state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

from .errors import DomainError
from .rand import DeterministicRng
from .units import PSI_TO_PA

if TYPE_CHECKING:  # pragma: no cover
    from .calibration import CalibrationRecord


@dataclass(frozen=True)
class StrainGaugeParams:
    """Galinstan strain channel and its divider/amplifier.

    r0           ohm, unstrained channel resistance
    r_lead       ohm, total copper lead resistance in series
    r_limit      ohm, each of the two current-limiting resistors
    v_excitation V, divider supply
    amp_gain     instrument amplifier gain
    noise_sigma  V, input-referred Gaussian noise
    """

    r0: float = 2.0
    r_lead: float = 0.2
    r_limit: float = 100.0
    v_excitation: float = 3.3
    amp_gain: float = 25.0
    noise_sigma: float = 1e-4

    def __post_init__(self):
        if not (self.r0 > 0.0):
            raise DomainError(f"r0 must be > 0, got {self.r0}")
        if self.r_lead < 0.0:
            raise DomainError(f"r_lead must be >= 0, got {self.r_lead}")
        if not (self.r_limit > 0.0):
            raise DomainError(f"r_limit must be > 0, got {self.r_limit}")
        if not (self.v_excitation > 0.0 and self.amp_gain > 0.0):
            raise DomainError("v_excitation and amp_gain must be > 0")
        if self.noise_sigma < 0.0:
            raise DomainError(f"noise_sigma must be >= 0, got {self.noise_sigma}")


@dataclass(frozen=True)
class PressureSensorParams:
    """Analog chamber-pressure sensor: full scale maps to full_scale_voltage."""

    full_scale_pressure: float = 15.0 * PSI_TO_PA
    full_scale_voltage: float = 0.100
    amp_gain: float = 20.0
    offset_drift: float = 0.0  # Pa, slow atmospheric drift removed by the reference
    noise_sigma: float = 1e-4

    def __post_init__(self):
        if not (self.full_scale_pressure > 0.0 and self.full_scale_voltage > 0.0):
            raise DomainError("full-scale pressure and voltage must be > 0")
        if not (self.amp_gain > 0.0):
            raise DomainError(f"amp_gain must be > 0, got {self.amp_gain}")
        if self.noise_sigma < 0.0:
            raise DomainError(f"noise_sigma must be >= 0, got {self.noise_sigma}")


@dataclass(frozen=True)
class AdcParams:
    bits: int = 12
    v_ref: float = 2.5

    def __post_init__(self):
        if not (8 <= self.bits <= 16):
            raise DomainError(f"bits must be in [8, 16], got {self.bits}")
        if not (self.v_ref > 0.0):
            raise DomainError(f"v_ref must be > 0, got {self.v_ref}")

    @property
    def full_scale_counts(self) -> int:
        return (1 << self.bits) - 1


@dataclass(frozen=True)
class SensorFrame:
    """Digitized readings of one finger at time t.

    reference_pressure is the main board's differential-sensor reading
    co-recorded with the frame: during normal telemetry it is the measured
    common-mode atmospheric offset (0 with no drift); during a reference
    calibration session, where the differential sensor shares the manifold,
    it is the drift-free chamber gauge pressure.
    """

    t: float
    strain_counts: int
    pressure_counts: int
    reference_pressure: float = 0.0


@dataclass(frozen=True)
class SensorChain:
    """Everything one finger's signals pass through, plus sensor geometry."""

    gauge: StrainGaugeParams = StrainGaugeParams()
    pressure: PressureSensorParams = PressureSensorParams()
    adc: AdcParams = AdcParams()
    d_neutral: float = 0.010


@dataclass(frozen=True)
class PhysicalReading:
    """Counts inverted back to physical units. Saturated values are flagged, not errors."""

    pressure: float
    curvature: float
    strain: float
    strain_saturated: bool = False
    pressure_saturated: bool = False

    @property
    def saturated(self) -> bool:
        return self.strain_saturated or self.pressure_saturated


def curvature_to_strain(kappa: float, d_neutral: float) -> float:
    """Dorsal-surface elongation of a thin beam: eps = d_neutral * kappa."""
    if math.isnan(kappa) or kappa < 0.0:
        raise DomainError(f"curvature must be >= 0, got {kappa}")
    return d_neutral * kappa


def strain_to_resistance(eps: float, gauge: StrainGaugeParams) -> float:
    """Constant-volume liquid conductor: R = r0*(1+eps)^2 + r_lead."""
    if math.isnan(eps) or eps <= -1.0:
        raise DomainError(f"strain must be > -1, got {eps}")
    return gauge.r0 * (1.0 + eps) ** 2 + gauge.r_lead


def resistance_to_strain(r: float, gauge: StrainGaugeParams) -> float:
    """Invert the quadratic law; readings below the lead resistance clamp to -1."""
    ratio = (r - gauge.r_lead) / gauge.r0
    return math.sqrt(ratio) - 1.0 if ratio > 0.0 else -1.0


def _quantize(v_sensor: float, amp_gain: float, noise_sigma: float,
              adc: AdcParams, rng: DeterministicRng | None) -> int:
    v_adc = amp_gain * v_sensor
    if noise_sigma > 0.0:
        if rng is None:
            raise DomainError("noise_sigma > 0 requires a seeded rng")
        v_adc += amp_gain * rng.normal(noise_sigma)
    v_adc = min(max(v_adc, 0.0), adc.v_ref)
    return int(round(v_adc / adc.v_ref * adc.full_scale_counts))


def resistance_to_counts(r: float, gauge: StrainGaugeParams, adc: AdcParams,
                         rng: DeterministicRng | None = None) -> int:
    """Divider voltage v_exc*R/(R + 2*r_limit), amplified, clamped, quantized."""
    if math.isnan(r) or r <= 0.0:
        raise DomainError(f"resistance must be > 0, got {r}")
    v_sensor = gauge.v_excitation * r / (r + 2.0 * gauge.r_limit)
    return _quantize(v_sensor, gauge.amp_gain, gauge.noise_sigma, adc, rng)


def pressure_to_counts(p: float, sensor: PressureSensorParams, adc: AdcParams,
                       rng: DeterministicRng | None = None) -> int:
    """Linear 0..full_scale mapping to 0..full_scale_voltage, then amplify/quantize."""
    if math.isnan(p) or p < 0.0:
        raise DomainError(f"pressure must be >= 0, got {p}")
    v_sensor = min(p, sensor.full_scale_pressure) * (
        sensor.full_scale_voltage / sensor.full_scale_pressure)
    return _quantize(v_sensor, sensor.amp_gain, sensor.noise_sigma, adc, rng)


def counts_to_adc_voltage(counts: int, adc: AdcParams) -> float:
    return counts / adc.full_scale_counts * adc.v_ref


def strain_counts_to_resistance(counts: int, gauge: StrainGaugeParams, adc: AdcParams) -> float:
    """Invert amplifier and divider back to channel resistance (ohm)."""
    v_sensor = counts_to_adc_voltage(counts, adc) / gauge.amp_gain
    if v_sensor >= gauge.v_excitation:
        raise DomainError("divider voltage at or above excitation; check gains")
    return 2.0 * gauge.r_limit * v_sensor / (gauge.v_excitation - v_sensor)


def pressure_counts_to_pa(counts: int, sensor: PressureSensorParams, adc: AdcParams) -> float:
    """Invert amplifier and sensor scaling back to the raw (drift-bearing) pressure."""
    v_sensor = counts_to_adc_voltage(counts, adc) / sensor.amp_gain
    return v_sensor * (sensor.full_scale_pressure / sensor.full_scale_voltage)


def measure(pressure: float, curvature: float, chain: SensorChain, t: float,
            rng: DeterministicRng | None = None, ambient_offset: float = 0.0) -> SensorFrame:
    """Sample both channels of one finger.

    The analog pressure channel sees the chamber pressure plus the total
    common-mode offset (sensor drift + ambient disturbance); the differential
    reference measures that same offset, so inversion can remove it.
    """
    eps = curvature_to_strain(curvature, chain.d_neutral)
    r = strain_to_resistance(eps, chain.gauge)
    strain_counts = resistance_to_counts(r, chain.gauge, chain.adc, rng)
    offset = chain.pressure.offset_drift + ambient_offset
    p_channel = max(pressure + offset, 0.0)
    pressure_counts = pressure_to_counts(p_channel, chain.pressure, chain.adc, rng)
    return SensorFrame(t=t, strain_counts=strain_counts,
                       pressure_counts=pressure_counts, reference_pressure=offset)


def counts_to_physical(frame: SensorFrame, chain: SensorChain,
                       cal: "CalibrationRecord | None" = None) -> PhysicalReading:
    """Invert both pipelines as the microcontroller does.

    Uses the fitted channel constants from ``cal`` when given (gauge
    resistances, pressure-channel gain/offset, d_neutral), falling back to
    the chain's nominal values. The atmospheric offset is removed by
    subtracting reference_pressure from the inverted pressure. Counts pinned
    at 0 or full scale are flagged saturated but still inverted.
    """
    fsc = chain.adc.full_scale_counts
    strain_saturated = frame.strain_counts <= 0 or frame.strain_counts >= fsc
    pressure_saturated = frame.pressure_counts <= 0 or frame.pressure_counts >= fsc

    if cal is not None and cal.pressure_channel is not None:
        p_raw = (cal.pressure_channel.gain_pa_per_count * frame.pressure_counts
                 + cal.pressure_channel.offset_pa)
    else:
        p_raw = pressure_counts_to_pa(frame.pressure_counts, chain.pressure, chain.adc)
    pressure = p_raw - frame.reference_pressure

    gauge = chain.gauge
    if cal is not None:
        gauge = StrainGaugeParams(
            r0=cal.r0_hat_ohm, r_lead=cal.r_lead_hat_ohm, r_limit=chain.gauge.r_limit,
            v_excitation=chain.gauge.v_excitation, amp_gain=chain.gauge.amp_gain,
            noise_sigma=chain.gauge.noise_sigma)
    r = strain_counts_to_resistance(frame.strain_counts, gauge, chain.adc)
    strain = resistance_to_strain(r, gauge)
    d_neutral = cal.d_neutral_m if cal is not None else chain.d_neutral
    curvature = max(strain, 0.0) / d_neutral
    return PhysicalReading(pressure=pressure, curvature=curvature, strain=strain,
                           strain_saturated=strain_saturated,
                           pressure_saturated=pressure_saturated)
