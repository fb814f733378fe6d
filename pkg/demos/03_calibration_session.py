"""Simulated bench calibration: stepped pressure holds, fits, recovery check.

Servos one finger through a ladder of pressure levels (after the mandatory
warm-up inflations), samples the noisy/quantized measurements at each
settled hold, fits the threshold-plus-line model, and compares the fitted
constants with the simulator's ground truth. Also fits the quadratic
strain-resistance law from synthetic gauge data.

Run: python demos/03_calibration_session.py
"""

import numpy as np

from softhand import calibration, physics, sensors


def main():
    params = physics.ActuatorParams()
    chain = sensors.SensorChain()
    levels = tuple(30e3 + 5e3 * k for k in range(1, 6))

    print("Stepped-hold calibration run (10 warm-up inflations assumed done):")
    print(f"  levels: {[f'{p / 1e3:.0f} kPa' for p in levels]}")
    data = calibration.simulate_calibration_run(params, chain, levels, seed=2024,
                                                settle_s=2.5, dt=2.5e-3)
    record = calibration.build_record(data, chain)

    def line(label, fitted, truth, unit):
        err = (fitted - truth) / truth
        print(f"  {label:22s} fitted {fitted:10.4g} {unit:8s} "
              f"truth {truth:10.4g}  ({err:+.2%})")

    print(f"  {data.pressures.size} samples recorded")
    line("threshold pressure", record.p_threshold_hat_pa, params.p_threshold, "Pa")
    line("curvature slope", record.slope_hat_per_m_pa, params.slope_m, "1/(m*Pa)")
    rms = record.fit_residuals["pressure_curvature_rms_per_m"]
    print(f"  fit residual RMS {rms:.3f} 1/m\n")

    print("Strain-gauge law from synthetic bench data (R = r0*(1+eps)^2 + r_lead):")
    rng = np.random.default_rng(7)
    eps = rng.uniform(0.0, 0.5, 40)
    r = chain.gauge.r0 * (1 + eps) ** 2 + chain.gauge.r_lead + rng.normal(0, 0.005, 40)
    fit = calibration.fit_strain_resistance(eps, r)
    line("channel resistance r0", fit.r0, chain.gauge.r0, "ohm")
    line("lead resistance", fit.r_lead, chain.gauge.r_lead, "ohm")

    print("\nCold data is rejected (Mullins-effect warm-up gate):")
    cold = calibration.CalibrationData(pressures=data.pressures,
                                       curvatures=data.curvatures, warmup_cycles=3)
    try:
        calibration.build_record(cold, chain)
    except calibration.WarmupError as exc:
        print(f"  WarmupError: {exc}")


if __name__ == "__main__":
    main()
