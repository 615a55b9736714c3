import numpy as np
import pytest

from alfdehaze.basis import AirlightField
from alfdehaze.energy import ENERGY_CSV_HEADER, Hyperparameters
from alfdehaze.solver import NonFiniteEnergyError, SolverConfig, energy_trace_csv, run
from alfdehaze.synthetic import clear_scene, linear_airlight, make_scene


@pytest.fixture(scope="module")
def scene():
    return make_scene(32, 40, airlight=linear_airlight(32, 40), seed=2)


def test_defaults():
    cfg = SolverConfig()
    assert (cfg.step_size, cfg.max_iters, cfg.basis_order, cfg.mode) == (0.1, 200, 2, "alf")
    assert len(cfg.basis) == 5
    assert len(cfg.replace(mode="cbr").basis) == 1


@pytest.mark.parametrize("kwargs", [dict(mode="dcp"), dict(step_size=0.0), dict(max_iters=-1),
                                    dict(basis_order=-1), dict(convergence_tol=-1.0)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SolverConfig(**kwargs)


def test_trace_length_and_bounds(scene):
    res = run(scene.hazy, SolverConfig(max_iters=15, convergence_tol=0))
    assert res.iterations_run == 15 and not res.converged
    assert len(res.energy_trace) == res.iterations_run + 1
    assert res.transmission.min() >= 0 and res.transmission.max() <= 1
    assert res.dehazed.min() >= 0 and res.dehazed.max() <= 1


def test_zero_iterations_returns_initial_state(scene):
    res = run(scene.hazy, SolverConfig(max_iters=0))
    assert res.iterations_run == 0 and len(res.energy_trace) == 1
    assert np.array_equal(res.dehazed, scene.hazy)
    assert np.array_equal(res.transmission, np.zeros(scene.hazy.shape[:2]))


def test_convergence_stops_early(scene):
    cfg = SolverConfig(max_iters=200, convergence_tol=0.5)
    res = run(scene.hazy, cfg)
    assert res.converged and res.iterations_run < 200
    totals = [e.total for e in res.energy_trace[-4:]]
    assert all(abs(b - a) / abs(a) < cfg.convergence_tol for a, b in zip(totals, totals[1:]))


def test_alf_order_zero_matches_cbr(scene):
    cbr = run(scene.hazy, SolverConfig(mode="cbr", max_iters=30))
    alf = run(scene.hazy, SolverConfig(mode="alf", basis_order=0, max_iters=30))
    assert np.array_equal(cbr.transmission, alf.transmission)
    assert np.array_equal(cbr.dehazed, alf.dehazed)
    assert np.array_equal(cbr.airlight.values(), alf.airlight.values())
    assert [e.total for e in cbr.energy_trace] == [e.total for e in alf.energy_trace]


@pytest.mark.parametrize("workers", [2, 3, 7])
def test_worker_count_does_not_change_results(scene, workers):
    base = run(scene.hazy, SolverConfig(max_iters=10))
    par = run(scene.hazy, SolverConfig(max_iters=10), workers=workers)
    assert np.array_equal(base.transmission, par.transmission)
    assert np.array_equal(base.dehazed, par.dehazed)
    assert np.array_equal(base.airlight.weights, par.airlight.weights)


def test_haze_free_input():
    # saturated colours have a zero channel everywhere, as haze-free scenes do
    clear = clear_scene(32, 32, seed=4)
    res = run(clear, SolverConfig())
    assert res.energy_trace[-1].data <= res.energy_trace[0].data
    assert np.mean(np.abs(res.dehazed - clear)) < 0.02


def test_final_energy_below_initial(scene):
    for mode in ("alf", "cbr"):
        res = run(scene.hazy, SolverConfig(mode=mode, max_iters=50))
        assert res.energy_trace[-1].total < res.energy_trace[0].total


def test_coordinate_weight_update_runs(scene):
    res = run(scene.hazy, SolverConfig(weight_update="coordinate", max_iters=5))
    assert np.all(np.isfinite(res.airlight.weights))


def test_cbr_with_t_one_warns_and_keeps_airlight():
    # a white image drives t to one in the first step, making the airlight unobservable
    I = np.ones((6, 6, 3))
    with pytest.warns(RuntimeWarning):
        res = run(I, SolverConfig(mode="cbr", max_iters=2, hp=Hyperparameters(lambda3=0.0), step_size=10.0))
    assert np.all(np.isfinite(res.airlight.weights))


def test_non_finite_energy_aborts(scene):
    cfg = SolverConfig(max_iters=3, step_size=1e308, clamp_iterates=False)
    with pytest.raises(NonFiniteEnergyError) as info, np.errstate(all="ignore"):
        run(scene.hazy, cfg)
    assert info.value.iteration >= 1 and info.value.pixel is not None


def test_energy_csv(tmp_path, scene):
    res0 = run(scene.hazy, SolverConfig(max_iters=0))
    energy_trace_csv(res0, tmp_path / "e0.csv")
    lines = (tmp_path / "e0.csv").read_text().splitlines()
    assert lines[0] == ENERGY_CSV_HEADER and len(lines) == 2 and lines[1].startswith("0,")

    small = make_scene(12, 12, seed=1)
    for name in ("a", "b"):
        energy_trace_csv(run(small.hazy, SolverConfig(convergence_tol=0)), tmp_path / f"{name}.csv")
    a = (tmp_path / "a.csv").read_bytes()
    assert a == (tmp_path / "b.csv").read_bytes()
    assert len(a.decode().splitlines()) == 1 + 201


def test_rejects_invalid_image():
    with pytest.raises(ValueError):
        run(np.full((4, 4, 3), 2.0))


def test_transmission_tracks_haze_density():
    scene = make_scene(64, 64, airlight=linear_airlight(64, 64), transmission=None, seed=12)
    t_true = scene.transmission
    # stretch the map so both masks are populated
    t_true = 0.1 + 0.85 * (t_true - t_true.min()) / np.ptp(t_true)
    scene = make_scene(64, 64, airlight=linear_airlight(64, 64), transmission=t_true, seed=12)
    res = run(scene.hazy, SolverConfig())
    heavy, light = t_true < 0.3, t_true > 0.7
    assert heavy.any() and light.any()
    assert res.transmission[heavy].mean() < res.transmission[light].mean()
