"""Wiggle experiment: detect conformation changes and the settle time.

Runs the wiggle fixture (a held object is jolted at t = 23 s), then scans
each finger's telemetry for abrupt pressure/strain jumps and for the moment
the strain has been quiet for a full window, i.e. the grasp is complete.

Run: python demos/05_wiggle_conformation_events.py
"""

import numpy as np

from softhand import grasp, runner, scenario


def main():
    print("Running the wiggle fixture (object jolted at t = 23 s)...")
    res = runner.run_scenario(scenario.load_shipped_scenario("wiggle"))
    cols = runner.rows_to_columns(res.rows)

    for finger in range(3):
        orbit = runner.orbit_from_telemetry(cols, finger)
        # Analyze the hold phase only; inflation and venting are not wiggles.
        mask = (orbit.t >= 6.0) & (orbit.t <= 26.5)
        hold = grasp.PhaseOrbit.from_arrays(orbit.t[mask], orbit.pressure[mask],
                                            orbit.strain[mask])
        events = grasp.detect_conformation_changes(hold)
        sigma = float(np.std(hold.strain[(hold.t > 10.0) & (hold.t < 20.0)]))
        # Settle verdict on the wiggle window: quiet again after the jolt?
        tail_mask = (orbit.t >= 22.0) & (orbit.t <= 26.5)
        tail = grasp.PhaseOrbit.from_arrays(orbit.t[tail_mask], orbit.pressure[tail_mask],
                                            orbit.strain[tail_mask])
        settle = grasp.detect_settled(tail, window_s=1.0, sigma_max=4 * sigma)
        print(f"\nfinger {finger}:")
        if not events:
            print("  no conformation changes (finger undisturbed)")
        for event in events:
            print(f"  {event.kind.value:13s} at t = {event.t:6.3f} s "
                  f"(jump statistic {event.magnitude:.1f})")
        if settle is not None:
            print(f"  grasp complete: strain quiet for a full window at t = {settle:.3f} s")

    checks = [e for e in res.events if e["kind"] == "force_check"]
    for check in checks:
        print(f"\nforce check: {check['achieved_n']:.1f} N grip vs "
              f"{check['required_n']:.1f} N required for {check['mass_kg'] * 1000:.0f} g "
              f"-> {'OK' if check['ok'] else 'INSUFFICIENT'}")


if __name__ == "__main__":
    main()
