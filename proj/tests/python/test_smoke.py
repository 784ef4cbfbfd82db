import hashlib
import json
import math
import pathlib

import numpy as np
import pytest

import bohmlab as bl


def gaussian(grid, c=0.0, w=1.0, k=0.0):
    return bl.make_gaussian(grid, [c], [w], [k])


def test_gaussian_is_normalized_and_exposes_numpy_amplitudes():
    g = bl.GridSpec.line(-10, 10, 256)
    wf = gaussian(g, 1.0, 0.8, 0.5)
    assert abs(bl.norm(wf) - 1.0) < 1e-12
    a = wf.amplitudes
    assert a.shape == (256,) and a.dtype == np.complex128
    x = g.coordinates(0)
    rho = np.abs(a) ** 2
    assert abs((x * rho).sum() / rho.sum() - 1.0) < 1e-10


def test_round_trip_through_numpy():
    g = bl.GridSpec.product(bl.GridSpec.line(-4, 4, 16), bl.GridSpec.line(-3, 3, 8))
    rng = np.random.default_rng(1)
    a = rng.normal(size=(16, 8)) + 1j * rng.normal(size=(16, 8))
    wf = bl.WaveFunction(g, a)
    np.testing.assert_allclose(wf.amplitudes, a)
    assert bl.densities(wf).shape == (16, 8)
    with pytest.raises(bl.ValidationError):
        bl.WaveFunction(g, a[:4])


def test_free_spreading_matches_closed_form():
    g = bl.GridSpec.line(-20, 20, 512)
    out = bl.split_step(gaussian(g), bl.HamiltonianSpec.free(), 0.002, 1000)
    x = g.coordinates(0)
    rho = np.abs(out.amplitudes) ** 2
    sd = math.sqrt((x * x * rho).sum() / rho.sum())
    assert abs(sd - math.sqrt(1 + 1.0)) < 1e-9


def test_plane_wave_velocity_and_scale_invariance():
    L, n = 10.0, 64
    g = bl.GridSpec.line(0, L, n, 2.0)
    k = 2 * math.pi * 3 / L
    x = g.coordinates(0)
    wf = bl.WaveFunction(g, np.exp(1j * k * x))
    v = bl.velocity(wf, [3.3])[0]
    assert abs(v - k / 2.0) < 1e-12
    assert bl.velocity(wf * (2 - 5j), [3.3]) == bl.velocity(wf, [3.3])


def test_ground_state_energy():
    g = bl.GridSpec.line(-10, 10, 128)
    gs = bl.ground_state(bl.HamiltonianSpec.harmonic([1.0]), g, 1e-12)
    assert abs(gs.energy - 0.5) < 1e-6


def test_python_potential_callable():
    g = bl.GridSpec.line(-10, 10, 128)
    h = bl.HamiltonianSpec(lambda q: 0.5 * q[0] ** 2)
    assert abs(bl.energy(gaussian(g, 0.0, math.sqrt(0.5)), h) - 0.5) < 1e-8


def test_sampling_and_ks():
    g = bl.GridSpec.line(-8, 8, 128)
    wf = gaussian(g, 0.5, 1.0)
    s = bl.sample(wf, 2000, 3)
    assert s.shape == (2000, 1)
    assert bl.ks_marginal(s, wf, 0).passed
    assert not bl.ks_marginal(s + 0.4, wf, 0).passed


def test_trajectory_of_free_gaussian():
    g = bl.GridSpec.line(-25, 25, 1024)
    wf = gaussian(g, 0.0, 1.0, 1.0)
    times, pos, status = bl.integrate_trajectory(wf, bl.HamiltonianSpec.free(), [1.0], 2.0, 0.05, 0.0025)
    assert status == "completed"
    expect = 2.0 + 1.0 * math.sqrt(2.0)
    # Linear interpolation of psi: the path is accurate to O(dx^2).
    assert abs(pos[-1, 0] - expect) < 2e-3
    assert len(times) == pos.shape[0] == 41


def test_conditional_slice_and_ray_distance():
    gx = bl.GridSpec.line(-6, 6, 48)
    gy = bl.GridSpec.line(-6, 6, 32)
    phi = gaussian(gx, 0.5, 0.9, 1.0)
    psi = bl.tensor_product(phi, gaussian(gy, -1.0, 1.0, 0.0))
    split = bl.SubsystemSplit([0], [1])
    s = bl.conditional_wf(psi, split, [0.2])
    assert s.normalizable
    assert bl.ray_distance(s.normalized, phi) < 1e-13
    assert abs(bl.fidelity(s.normalized, phi) - 1.0) < 1e-14
    _, _, dev = bl.subsystem_velocity_consistency(psi, split, [0.3, 0.2])
    assert dev < 1e-12


def test_errors_map_to_python_exceptions():
    g = bl.GridSpec.line(-6, 6, 64)
    x = g.coordinates(0)
    wf = bl.WaveFunction(g, x * np.exp(-x * x / 2))
    with pytest.raises(bl.NodeError):
        bl.velocity(wf, [0.0])
    with pytest.raises(bl.DomainError):
        bl.velocity(wf, [9.0])
    with pytest.raises(ValueError):
        bl.GridSpec.line(1, -1, 8)


def test_scenario_run_writes_a_verifiable_manifest(tmp_path):
    names = [n for n, _, _ in bl.list_scenarios()]
    assert names == sorted(names) and "timeless-rotor" in names
    r = bl.run_scenario("velocity-check-product", out=str(tmp_path / "run"))
    assert r["exit_code"] == 0 and r["status"] == "passed"
    run = pathlib.Path(r["out_dir"])
    manifest = json.loads((run / "manifest.json").read_text())
    for entry in manifest["artifacts"]:
        data = (run / entry["path"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == entry["sha256"]
        assert len(data) == entry["bytes"]
    assert json.loads((run / "report.json").read_text())["pass"] is True


def test_invalid_scenario_exit_code(tmp_path):
    r = bl.run_scenario("no-such-scenario", out=str(tmp_path / "x"))
    assert r["exit_code"] == 2
