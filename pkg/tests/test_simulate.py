import json
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from padic_morphogen.errors import SimulationBlowup, SimulationError
from padic_morphogen.padic import GridGeometry, WaveletIndex, wavelet_samples
from padic_morphogen.simulate import (
    SimulationConfig,
    SimulationState,
    Stepper,
    cluster_analysis,
    cluster_dot,
    distinct_patterns,
    dominant_scale,
    initial_condition,
    linear_forecast,
    measure_growth_rate,
    pattern_distance,
    project_modes,
    reaction_eval,
    run,
    step,
    synthesize,
    write_cluster_dot,
    write_clusters_json,
    write_modes_csv,
    write_snapshots_csv,
)
from padic_morphogen.turing import KineticsModel, schnakenberg
from padic_morphogen.vladimirov import apply_function, assemble, expm_apply


def _zero_model(d=1.0):
    return KineticsModel("zero", {}, lambda u, v, q: 0.0 * u, lambda u, v, q: 0.0 * v,
                         lambda u, v, q: [[0.0, 0.0], [0.0, 0.0]], gamma=1.0, d=d,
                         steady_fn=lambda q: (1.0, 1.0))


@pytest.fixture
def cfg(fixture_geometry, unstable_model):
    return SimulationConfig(fixture_geometry, 1.0, unstable_model, t_end=1.0, dt=1e-2)


# -- initial condition and reaction ------------------------------------------


def test_initial_condition_zero_epsilon(cfg):
    s = initial_condition(cfg.with_(epsilon=0.0))
    assert (s.u == 1.5).all()
    assert np.allclose(s.v, 1.3 / 2.25, rtol=0, atol=1e-15)
    assert s.t == 0 and s.step == 0


def test_initial_condition_properties(cfg):
    s = initial_condition(cfg.with_(epsilon=0.05, seed=7))
    assert abs(s.u.mean() - 1.5) <= 1e-14
    assert abs(s.u - 1.5).max() <= 2 * 0.05 * 1.5
    again = initial_condition(cfg.with_(epsilon=0.05, seed=7))
    np.testing.assert_array_equal(s.u, again.u)
    other = initial_condition(cfg.with_(epsilon=0.05, seed=8))
    assert not np.array_equal(s.u, other.u)


def test_config_validation(cfg):
    with pytest.raises(SimulationError):
        cfg.with_(epsilon=1.0)
    with pytest.raises(SimulationError):
        cfg.with_(dt=0.0)
    with pytest.raises(SimulationError):
        cfg.with_(scheme="euler")
    with pytest.raises(SimulationError):
        cfg.with_(t_end=0.015)
    assert cfg.with_(t_end=0.0).n_steps == 0


def test_reaction_eval():
    model = schnakenberg()
    f, g = reaction_eval(model, SimulationState(0.0, np.ones(4), np.ones(4)))
    np.testing.assert_allclose(f, 0.2)
    np.testing.assert_allclose(g, 0.3)


# -- time stepping -----------------------------------------------------------


def test_imex_single_wavelet_step():
    g = GridGeometry(3, 1, 1)
    op = assemble(g, 1.0)
    w = WaveletIndex(0, F(0), 1)
    psi = wavelet_samples(w, g, "cos")
    kappa = 3.0
    cfg = SimulationConfig(g, 1.0, _zero_model(d=2.0), t_end=0.1, dt=0.1, reference=(0.0, 0.0))
    out = step(cfg, op, SimulationState(0.0, psi, 2 * psi))
    np.testing.assert_allclose(out.u, psi / (1 + 0.1 * kappa), rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(out.v, 2 * psi / (1 + 0.1 * 2 * kappa), rtol=1e-13, atol=1e-15)
    assert out.t == pytest.approx(0.1) and out.step == 1


def test_rk4_matches_semigroup():
    g = GridGeometry(2, 0, 4)
    op = assemble(g, 1.0)
    rng = np.random.default_rng(3)
    u0 = rng.standard_normal(g.N)
    cfg = SimulationConfig(g, 1.0, _zero_model(), t_end=0.1, dt=1e-3, scheme="rk4", reference=(0.0, 0.0))
    res = run(cfg, op, SimulationState(0.0, u0, u0.copy()))
    # RK4 on a linear system multiplies each eigencomponent by its stability polynomial
    R = lambda z: 1 - z + z**2 / 2 - z**3 / 6 + z**4 / 24  # noqa: E731
    discrete = apply_function(op, lambda lam: R(1e-3 * lam) ** 100, u0)
    assert np.linalg.norm(res.final.u - discrete) <= 1e-12 * np.linalg.norm(discrete)
    exact = expm_apply(op, 0.1, u0)
    assert np.linalg.norm(res.final.u - exact) <= 1e-8 * np.linalg.norm(exact)


@pytest.mark.parametrize("scheme", ["imex_euler", "rk4"])
def test_steady_state_is_fixed_point(cfg, scheme):
    res = run(cfg.with_(epsilon=0.0, scheme=scheme, dt=1e-3, t_end=0.2))
    assert np.abs(res.final.u - 1.5).max() <= 1e-12
    assert np.abs(res.final.v - 1.3 / 2.25).max() <= 1e-12


def test_rk4_guard(cfg):
    with pytest.raises(SimulationError, match="rk4"):
        Stepper(cfg.with_(scheme="rk4", dt=0.1), assemble(cfg.geometry, 1.0))


def test_zero_duration_run(cfg):
    res = run(cfg.with_(t_end=0.0))
    assert len(res.trajectory) == 1
    np.testing.assert_array_equal(res.final.u, res.trajectory[0].u)


def test_imex_converges_to_rk4(cfg):
    base = cfg.with_(t_end=0.2, dt=1e-4, epsilon=0.05, seed=1)
    a = run(base).final
    b = run(base.with_(scheme="rk4")).final
    da, db = a.u - 1.5, b.u - 1.5
    assert np.linalg.norm(da - db) <= 1e-2 * np.linalg.norm(db)
    assert np.linalg.norm(a.u - b.u) <= 1e-4 * np.linalg.norm(b.u)


def test_snapshot_stride(cfg):
    res = run(cfg.with_(t_end=0.1, snapshot_stride=3))
    assert [s.step for s in res.trajectory] == [0, 3, 6, 9, 10]


def test_blowup_raises():
    g = GridGeometry(2, 0, 2)
    explode = KineticsModel("explode", {}, lambda u, v, q: u**3, lambda u, v, q: 0.0 * v,
                            lambda u, v, q: [[3 * u**2, 0.0], [0.0, 0.0]], gamma=1.0, d=2.0,
                            steady_fn=lambda q: (1.0, 1.0))
    cfg = SimulationConfig(g, 1.0, explode, t_end=100.0, dt=0.5, reference=(1.0, 1.0), epsilon=0.0)
    with pytest.raises(SimulationBlowup) as info:
        run(cfg)
    err = info.value
    assert err.step >= 1
    assert np.isfinite(err.last_state.u).all()


# -- modes ---------------------------------------------------------------------


def test_project_single_wavelet_p2():
    g = GridGeometry(2, 0, 3)
    w = WaveletIndex(-1, F(1, 2), 1)
    modes = project_modes(wavelet_samples(w, g, "cos"), g)
    k = [i for i, e in enumerate(modes.entries) if e[0] == w][0]
    assert modes.amp_cos[k] == pytest.approx(1.0, abs=1e-14)
    others = np.delete(modes.power, k)
    assert np.abs(others).max() <= 1e-28
    assert modes.constant_component == pytest.approx(0.0, abs=1e-15)


def test_project_cos_wavelet_p3():
    g = GridGeometry(3, 1, 1)
    w = WaveletIndex(0, F(1, 3), 1)
    modes = project_modes(wavelet_samples(w, g, "cos"), g)
    amp = {(e[0].r, e[0].n, e[0].j): e[1] for e in modes.entries}
    assert amp[(0, F(1, 3), 1)] == pytest.approx(0.5, abs=1e-14)
    assert amp[(0, F(1, 3), 2)] == pytest.approx(0.5, abs=1e-14)
    assert sum(abs(v) for k, v in amp.items() if k[1] != F(1, 3)) <= 1e-13


def test_project_constant():
    g = GridGeometry(3, 2, 1)
    modes = project_modes(np.full(g.N, 2.0), g)
    assert modes.constant_component == pytest.approx(2.0 * 3.0, rel=1e-14)
    assert modes.power.max() <= 1e-28


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([(2, 0, 4), (3, 1, 2), (5, -1, 3), (2, 2, 1)]), st.integers(0, 2**32 - 1))
def test_parseval_and_inverse(gparams, seed):
    g = GridGeometry(*gparams)
    f = np.random.default_rng(seed).standard_normal(g.N)
    modes = project_modes(f, g)
    assert modes.power.sum() + modes.constant_component**2 == pytest.approx(g.norm(f) ** 2, rel=1e-12)
    np.testing.assert_allclose(synthesize(modes), f, rtol=0, atol=1e-12 * np.abs(f).max())


def test_modes_csv(tmp_path):
    g = GridGeometry(3, 1, 1)
    write_modes_csv(project_modes(np.arange(g.N, dtype=float), g), tmp_path / "m.csv")
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "r,n,j,amp_cos,amp_sin,power"
    assert len(lines) == g.N
    assert lines[1].startswith("1,0/1,1,")


# -- linear forecast and growth ------------------------------------------------


def test_linear_forecast_identity_at_zero(cfg):
    w = np.random.default_rng(0).standard_normal((2, cfg.geometry.N))
    u, v = linear_forecast(cfg, None, w, 0.0)
    np.testing.assert_allclose(u, w[0], atol=1e-14)
    np.testing.assert_allclose(v, w[1], atol=1e-14)


def test_linear_forecast_tracks_small_perturbation(cfg):
    g = cfg.geometry
    psi = wavelet_samples(WaveletIndex(0, F(0), 1), g, "cos")
    w0 = (1e-7 * psi, np.zeros(g.N))
    u, v = linear_forecast(cfg, None, w0, 0.5)
    init = SimulationState(0.0, 1.5 + w0[0], 1.3 / 2.25 + w0[1])
    res = run(cfg.with_(t_end=0.5, dt=1e-4, scheme="rk4"), initial=init)
    du = res.final.u - 1.5
    assert np.linalg.norm(du - u) <= 1e-2 * np.linalg.norm(u)


def test_linear_forecast_stable_decays(cfg):
    sub = cfg.with_(model=cfg.model.with_params(d=3.0))
    w = np.random.default_rng(1).standard_normal((2, sub.geometry.N))
    norms = [np.linalg.norm(np.concatenate(linear_forecast(sub, None, w, t))) for t in (0, 1, 5, 20)]
    assert all(b < a for a, b in zip(norms, norms[1:]))


def test_dominant_scale(cfg):
    r, lam = dominant_scale(cfg)
    assert r == 0
    assert lam == pytest.approx(0.642597007591802, rel=1e-12)


def test_growth_rate_fit(cfg):
    fit = measure_growth_rate(cfg.with_(dt=1e-3, epsilon=0.01, seed=0))
    assert fit.r == 0
    assert fit.relative_error < 0.05
    assert fit.to_dict()["predicted_lambda_plus"] == fit.predicted


def test_growth_rate_requires_instability(cfg):
    with pytest.raises(SimulationError):
        measure_growth_rate(cfg.with_(model=cfg.model.with_params(d=3.0)))


def test_decay_regime_powers(cfg):
    sub = cfg.with_(model=cfg.model.with_params(d=3.0), t_end=5.0, dt=1e-2, snapshot_stride=50)
    res = run(sub)
    powers = [project_modes(s.u - 1.5, sub.geometry).power.sum() for s in res.trajectory]
    assert all(b <= a for a, b in zip(powers[1:], powers[2:]))
    assert powers[-1] < powers[0]


# -- patterns and clusters -----------------------------------------------------


def test_pattern_distance():
    a = np.array([1.0, -1.0, 2.0])
    assert pattern_distance(a, -a) == 0.0
    assert pattern_distance(a, a) == 0.0
    assert pattern_distance(np.zeros(3), np.zeros(3)) == 0.0
    assert pattern_distance(a, np.zeros(3)) == pytest.approx(1.0)
    assert distinct_patterns([a, -a, a + 1, 1.001 * a]) == [0, 2]


def test_clusters_uniform(fixture_geometry):
    rep = cluster_analysis(np.full(8, 1.5), fixture_geometry, 1.5)
    assert len(rep.clusters) == 1
    assert rep.clusters[0].label == "neutral" and rep.clusters[0].size == 8


def test_clusters_top_wavelet(fixture_geometry):
    g = fixture_geometry
    psi = wavelet_samples(WaveletIndex(0, F(0), 1), g, "cos")
    rep = cluster_analysis(1.0 + 0.1 * psi, g, 1.0)
    assert len(rep.clusters) == 2
    assert rep.counts == {"rich": 1, "poor": 1, "neutral": 0}
    assert sorted(c.members for c in rep.clusters) == [(0, 2, 4, 6), (1, 3, 5, 7)]
    assert all(c.level == 1 for c in rep.clusters)
    big = cluster_analysis(1.0 + 0.1 * psi, g, 1.0, threshold=1.0)
    assert len(big.clusters) == 1 and big.clusters[0].label == "neutral"


def test_clusters_partition(fixture_geometry):
    u = 1.0 + np.random.default_rng(5).standard_normal(8)
    rep = cluster_analysis(u, fixture_geometry, 1.0)
    members = sorted(m for c in rep.clusters for m in c.members)
    assert members == list(range(8))
    labels = rep.labels(8)
    for c in rep.clusters:
        assert all(labels[m] == c.label for m in c.members)


def test_cluster_exports(tmp_path, fixture_geometry):
    g = fixture_geometry
    psi = wavelet_samples(WaveletIndex(0, F(0), 1), g, "cos")
    rep = cluster_analysis(1.0 + 0.1 * psi, g, 1.0)
    write_clusters_json(rep, tmp_path / "c.json")
    doc = json.loads((tmp_path / "c.json").read_text())
    assert doc["count"] == 2 and doc["sizes"] == {"4": 2}
    dot = cluster_dot(rep, g)
    assert dot.startswith("graph tree {") and dot.rstrip().endswith("}")
    assert dot.count(" -- ") == 2 + 4 + 8
    assert "n1_0 [fillcolor=firebrick]" in dot and "n1_1 [fillcolor=steelblue]" in dot
    write_cluster_dot(rep, g, tmp_path / "t.dot")
    assert (tmp_path / "t.dot").read_text() == dot


def test_snapshots_csv(tmp_path, cfg):
    res = run(cfg.with_(t_end=0.02))
    write_snapshots_csv(res.trajectory, cfg.geometry, tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "step,t,index,digits,u,v"
    assert len(lines) == 1 + 3 * 8
    step_, t, idx, digits, u, v = lines[-1].split(",")
    assert int(step_) == 2 and int(idx) == 7 and digits == "111"
    assert float(u) == res.final.u[7]
