import numpy as np
import pytest

from fsp_plunge.errors import SpecInvalid
from fsp_plunge.ode import RolloutGrid, rollout
from fsp_plunge.profiles import CubicProfile
from fsp_plunge.synth import (HELDOUT_PLATEAU_C, TRAINING_PLATEAUS_C, SyntheticPlant, SyntheticPlantSpec,
                              default_dataset, default_profiles, generate_runs, hold_power)


def test_spec_validation():
    with pytest.raises(SpecInvalid):
        SyntheticPlantSpec(C_truth=0.0)
    with pytest.raises(SpecInvalid):
        SyntheticPlantSpec(eta=1.0)
    with pytest.raises(SpecInvalid):
        SyntheticPlantSpec(noise_std=-1.0)
    with pytest.raises(SpecInvalid):
        SyntheticPlantSpec(eta=(1.0, 2.0))


def test_constant_eta_steady_state():
    spec = SyntheticPlantSpec(eta=0.55, C_truth=9000.0, h_truth=12.0)
    plant = SyntheticPlant(spec)
    assert 25 + 0.55 * 5000 / 12 == pytest.approx(254.1667, abs=1e-4)
    assert plant.rhs(25 + 0.55 * 5000 / 12, 5000.0) == pytest.approx(0.0, abs=1e-12)


def test_noise_free_runs_equal_truth_rollouts():
    spec = SyntheticPlantSpec(noise_std=0.0)
    profiles, ids = default_profiles(spec)
    grid = RolloutGrid(0, 240, 0.5)
    runs = generate_runs(spec, profiles[:2], 25.0, grid, ids[:2])
    for run, prof in zip(runs, profiles):
        tr = rollout(SyntheticPlant(spec), prof, 25.0, grid)
        assert np.array_equal(run.measured_temps, tr.temperatures)
        assert np.array_equal(run.measured_powers, tr.powers)


def test_same_seed_same_data():
    a = default_dataset(SyntheticPlantSpec(seed=3))
    b = default_dataset(SyntheticPlantSpec(seed=3))
    c = default_dataset(SyntheticPlantSpec(seed=4))
    assert all(np.array_equal(x.measured_temps, y.measured_temps) for x, y in zip(a, b))
    assert not np.array_equal(a[0].measured_temps, c[0].measured_temps)


def test_default_family_plateaus():
    spec = SyntheticPlantSpec(noise_std=0.0)
    runs = default_dataset(spec)
    assert [r.id for r in runs] == [f"train{i}" for i in range(7)] + ["heldout"]
    for run, target in zip(runs, TRAINING_PLATEAUS_C + (HELDOUT_PLATEAU_C,)):
        assert abs(run.measured_temps[-1] - target) < 0.01 * target
    assert min(TRAINING_PLATEAUS_C) == 700.0 and max(TRAINING_PLATEAUS_C) == 800.0
    # neither control setpoint appears in the training data
    assert all(abs(T - s) > 10 for T in TRAINING_PLATEAUS_C for s in (750.0, 775.0))


def test_hold_power_is_steady_state():
    plant = SyntheticPlant(SyntheticPlantSpec())
    p = hold_power(plant, 775.0)
    assert abs(plant.rhs(775.0, p)) < 1e-9


def test_logistic_surface_is_not_constant():
    plant = SyntheticPlant(SyntheticPlantSpec())
    e = plant.efficiency(np.array([100.0, 800.0]), np.array([1000.0, 3000.0]))
    assert e[0] != e[1] and np.all((e > 0) & (e < 1))


def test_divergent_truth_reported():
    spec = SyntheticPlantSpec(C_truth=1e-9, h_truth=1e-9)
    with pytest.raises(SpecInvalid):
        generate_runs(spec, [CubicProfile(1e6)], 25.0, RolloutGrid(0, 10, 0.5))


def test_spec_dict_round_trip():
    for spec in (SyntheticPlantSpec(), SyntheticPlantSpec(eta=0.55, C_truth=9000.0, h_truth=12.0)):
        assert SyntheticPlantSpec.from_dict(spec.to_dict()) == spec
