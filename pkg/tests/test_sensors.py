import numpy as np
import pytest

from softhand import sensors
from softhand.errors import DomainError
from softhand.rand import DeterministicRng
from softhand.sensors import (AdcParams, PressureSensorParams, SensorChain, SensorFrame,
                              StrainGaugeParams, counts_to_physical, curvature_to_strain,
                              measure, pressure_to_counts, resistance_to_counts,
                              strain_to_resistance)
from softhand.units import psi

NOISELESS = SensorChain(
    gauge=StrainGaugeParams(noise_sigma=0.0),
    pressure=PressureSensorParams(noise_sigma=0.0))

# One ADC count, expressed in gauge pascals at the default pressure chain.
PRESSURE_LSB = (NOISELESS.adc.v_ref / NOISELESS.adc.full_scale_counts
                / NOISELESS.pressure.amp_gain
                * NOISELESS.pressure.full_scale_pressure / NOISELESS.pressure.full_scale_voltage)


def strain_from_counts(counts, chain=NOISELESS):
    r = sensors.strain_counts_to_resistance(counts, chain.gauge, chain.adc)
    return sensors.resistance_to_strain(r, chain.gauge)


class TestForwardPipelines:
    def test_zero_curvature_zero_strain(self):
        assert curvature_to_strain(0.0, 0.010) == 0.0

    def test_strain_examples_by_hand(self):
        assert curvature_to_strain(13.51, 0.010) == pytest.approx(0.1351, abs=1e-12)
        assert curvature_to_strain(1.0, 0.010) == pytest.approx(0.010, abs=1e-12)

    def test_negative_curvature_rejected(self):
        with pytest.raises(DomainError):
            curvature_to_strain(-0.1, 0.010)

    def test_resistance_at_rest_is_r0_plus_lead(self):
        g = StrainGaugeParams(r0=2.0, r_lead=0.2)
        assert strain_to_resistance(0.0, g) == pytest.approx(2.2, abs=1e-15)

    def test_resistance_example_by_hand(self):
        # 2.0 * 1.1351^2 + 0.2 = 2.7769040200
        g = StrainGaugeParams(r0=2.0, r_lead=0.2)
        assert strain_to_resistance(0.1351, g) == pytest.approx(2.77690402, abs=1e-9)

    def test_zero_lead_matches_pure_law(self):
        g = StrainGaugeParams(r0=2.0, r_lead=0.0)
        for eps in (0.0, 0.05, 0.3):
            assert strain_to_resistance(eps, g) == pytest.approx(2.0 * (1 + eps) ** 2, rel=1e-12)

    def test_overcompressed_strain_rejected(self):
        with pytest.raises(DomainError):
            strain_to_resistance(-1.0, StrainGaugeParams())

    def test_divider_gain_quantize_example_by_hand(self):
        # R=2.2 in a divider with 2x100 ohm at 3.3 V: V = 35.905 mV;
        # x50 = 1.79525 V; /2.5 * 4095 rounds to 2941.
        g = StrainGaugeParams(r0=2.0, r_lead=0.2, r_limit=100.0, v_excitation=3.3,
                              amp_gain=50.0, noise_sigma=0.0)
        assert resistance_to_counts(2.2, g, AdcParams()) == 2941

    def test_zero_resistance_limit_gives_zero_counts(self):
        g = StrainGaugeParams(noise_sigma=0.0)
        assert resistance_to_counts(1e-12, g, AdcParams()) == 0

    def test_counts_monotone_in_resistance(self):
        g = StrainGaugeParams(noise_sigma=0.0, amp_gain=50.0)
        adc = AdcParams()
        assert resistance_to_counts(2.8, g, adc) > resistance_to_counts(2.2, g, adc)
        grid = np.linspace(0.5, 6.0, 200)
        counts = [resistance_to_counts(r, g, adc) for r in grid]
        assert all(b >= a for a, b in zip(counts, counts[1:]))

    def test_pressure_full_scale_example_by_hand(self):
        # 15 PSI -> 100 mV -> x20 = 2.0 V -> 2.0/2.5 * 4095 = 3276.
        s = PressureSensorParams(noise_sigma=0.0)
        assert pressure_to_counts(psi(15), s, AdcParams()) == 3276

    def test_pressure_zero_and_half_scale(self):
        s = PressureSensorParams(noise_sigma=0.0)
        assert pressure_to_counts(0.0, s, AdcParams()) == 0
        assert abs(pressure_to_counts(psi(7.5), s, AdcParams()) - 1638) <= 1

    def test_pressure_monotone(self):
        s = PressureSensorParams(noise_sigma=0.0)
        adc = AdcParams()
        grid = np.linspace(0.0, psi(15), 300)
        counts = [pressure_to_counts(p, s, adc) for p in grid]
        assert all(b >= a for a, b in zip(counts, counts[1:]))

    def test_negative_pressure_rejected(self):
        with pytest.raises(DomainError):
            pressure_to_counts(-1.0, PressureSensorParams(noise_sigma=0.0), AdcParams())

    def test_noise_requires_rng(self):
        with pytest.raises(DomainError):
            pressure_to_counts(1e4, PressureSensorParams(noise_sigma=1e-4), AdcParams())


class TestInversion:
    def test_pressure_round_trip_within_one_lsb(self):
        rng = np.random.default_rng(11)
        for p in rng.uniform(500.0, psi(12), 1000):
            frame = measure(p, 0.0, NOISELESS, t=0.0)
            reading = counts_to_physical(frame, NOISELESS)
            assert abs(reading.pressure - p) <= PRESSURE_LSB

    def test_strain_round_trip_within_one_lsb(self):
        rng = np.random.default_rng(12)
        fsc = NOISELESS.adc.full_scale_counts
        for kappa in rng.uniform(0.1, 70.0, 1000):
            eps = curvature_to_strain(kappa, NOISELESS.d_neutral)
            frame = measure(0.0, kappa, NOISELESS, t=0.0)
            c = frame.strain_counts
            assert 0 < c < fsc, "operating range must not saturate"
            lsb = max(strain_from_counts(c + 1) - strain_from_counts(c),
                      strain_from_counts(c) - strain_from_counts(c - 1))
            reading = counts_to_physical(frame, NOISELESS)
            assert abs(reading.strain - eps) <= lsb

    def test_zero_state_inverts_to_zero(self):
        frame = measure(0.0, 0.0, NOISELESS, t=0.0)
        reading = counts_to_physical(frame, NOISELESS)
        assert reading.pressure == 0.0
        lsb_strain = strain_from_counts(frame.strain_counts + 1) \
            - strain_from_counts(frame.strain_counts)
        assert abs(reading.strain) <= lsb_strain
        # Zero pressure sits on the ADC's bottom rail, so it is flagged; the
        # strain channel rests mid-range and is not.
        assert reading.pressure_saturated
        assert not reading.strain_saturated

    def test_common_mode_drift_cancelled(self):
        chain = SensorChain(
            gauge=StrainGaugeParams(noise_sigma=0.0),
            pressure=PressureSensorParams(noise_sigma=0.0, offset_drift=500.0))
        p = psi(5)
        drifted = counts_to_physical(measure(p, 0.0, chain, t=0.0), chain)
        plain = counts_to_physical(measure(p, 0.0, NOISELESS, t=0.0), NOISELESS)
        assert abs(drifted.pressure - plain.pressure) <= PRESSURE_LSB
        assert abs(drifted.pressure - p) <= PRESSURE_LSB

    def test_ambient_offset_cancelled_for_any_drift(self):
        p = psi(4)
        for ambient in (-800.0, 0.0, 1500.0, 4000.0):
            frame = measure(p, 0.0, NOISELESS, t=0.0, ambient_offset=ambient)
            assert frame.reference_pressure == ambient
            reading = counts_to_physical(frame, NOISELESS)
            assert abs(reading.pressure - p) <= PRESSURE_LSB

    def test_saturation_flagged_not_fatal(self):
        fsc = NOISELESS.adc.full_scale_counts
        high = SensorFrame(t=0.0, strain_counts=fsc, pressure_counts=fsc)
        low = SensorFrame(t=0.0, strain_counts=0, pressure_counts=0)
        for frame in (high, low):
            reading = counts_to_physical(frame, NOISELESS)
            assert reading.saturated
            assert np.isfinite(reading.pressure)

    def test_calibration_record_overrides_nominal(self, ideal_cal):
        frame = measure(psi(5), 20.0, NOISELESS, t=0.0)
        with_cal = counts_to_physical(frame, NOISELESS, ideal_cal)
        without = counts_to_physical(frame, NOISELESS)
        assert with_cal.pressure == pytest.approx(without.pressure, abs=1e-9)
        assert with_cal.strain == pytest.approx(without.strain, rel=1e-12)


class TestNoise:
    def test_count_noise_matches_amplified_sigma(self):
        # Output-referred noise is amp_gain * noise_sigma; in counts that is
        # amp_gain * sigma / v_ref * (2^bits - 1). Quantization adds ~1/12
        # LSB^2, well inside the 10% tolerance.
        sigma = 1e-4
        s = PressureSensorParams(noise_sigma=sigma)
        adc = AdcParams()
        rng = DeterministicRng(99)
        counts = [pressure_to_counts(psi(6), s, adc, rng) for _ in range(10_000)]
        expected = s.amp_gain * sigma / adc.v_ref * adc.full_scale_counts
        assert np.std(counts) == pytest.approx(expected, rel=0.10)

    def test_strain_count_noise_matches_amplified_sigma(self):
        sigma = 1e-4
        g = StrainGaugeParams(noise_sigma=sigma)
        adc = AdcParams()
        rng = DeterministicRng(100)
        counts = [resistance_to_counts(3.0, g, adc, rng) for _ in range(10_000)]
        expected = g.amp_gain * sigma / adc.v_ref * adc.full_scale_counts
        assert np.std(counts) == pytest.approx(expected, rel=0.10)

    def test_seeded_noise_is_reproducible(self):
        s = PressureSensorParams(noise_sigma=1e-4)
        adc = AdcParams()
        a = [pressure_to_counts(psi(6), s, adc, DeterministicRng(5)) for _ in range(3)]
        b = [pressure_to_counts(psi(6), s, adc, DeterministicRng(5)) for _ in range(3)]
        assert a == b


class TestValidation:
    def test_gauge_invariants(self):
        with pytest.raises(DomainError):
            StrainGaugeParams(r0=0.0)
        with pytest.raises(DomainError):
            StrainGaugeParams(r_lead=-0.1)
        with pytest.raises(DomainError):
            StrainGaugeParams(amp_gain=0.0)

    def test_adc_invariants(self):
        with pytest.raises(DomainError):
            AdcParams(bits=7)
        with pytest.raises(DomainError):
            AdcParams(bits=17)
        with pytest.raises(DomainError):
            AdcParams(v_ref=0.0)

    def test_pressure_sensor_invariants(self):
        with pytest.raises(DomainError):
            PressureSensorParams(full_scale_pressure=0.0)
        with pytest.raises(DomainError):
            PressureSensorParams(full_scale_voltage=-1.0)
