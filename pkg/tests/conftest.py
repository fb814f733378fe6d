import pytest

from softhand import calibration, physics, runner, scenario, sensors

GRASP_FIXTURES = ("empty_grasp", "cylinder_r2cm", "cylinder_r4cm", "cylinder_r74mm")


@pytest.fixture(scope="session")
def default_params():
    return physics.ActuatorParams()


@pytest.fixture(scope="session")
def default_chain():
    return sensors.SensorChain()


@pytest.fixture(scope="session")
def ideal_cal(default_params, default_chain):
    return calibration.ideal_record(default_params, default_chain)


@pytest.fixture(scope="session")
def scenario_runs():
    """The grasp fixture corpus, run once and shared across test modules."""
    return {name: runner.run_scenario(scenario.load_shipped_scenario(name))
            for name in GRASP_FIXTURES}


@pytest.fixture(scope="session")
def telemetry(scenario_runs):
    return {name: runner.rows_to_columns(res.rows) for name, res in scenario_runs.items()}
