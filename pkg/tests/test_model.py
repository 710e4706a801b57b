import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from loscov.config import ConfigError, load_scenario, scenario_from_mapping, scenario_to_mapping
from loscov.model import (NoDetectableRegion, ObstacleSet, ProbEstimate, RadioParams,
                          ScenarioParams, TransmitterSet, covered, detect_radius, is_blocked,
                          project_lane, project_receivers, project_tx, sample_obstacles,
                          sample_ppp, window_length)


@pytest.mark.parametrize("p, sigma, tau, alpha, expected", [
    (1.0, 1.0, 1.0, 3.7, 1.0),
    (2.25, 1e-6, 1.0, 2.0, 1500.0),
    (8.0, 1.0, 1.0, 3.0, 2.0),
])
def test_detect_radius(p, sigma, tau, alpha, expected):
    assert detect_radius(RadioParams(p, sigma, alpha, tau)) == pytest.approx(expected, rel=1e-12)


def test_radio_rejects_nonpositive():
    with pytest.raises(ValueError):
        RadioParams(1.0, 0.0, 2.0, 1.0)


def test_window_length():
    assert window_length(1500, 10, 10) == pytest.approx(2999.7333, abs=1e-3)
    assert window_length(25, 10, 10) == pytest.approx(30.0)
    assert window_length(20 + 1e-9, 10, 10) < 1e-3
    with pytest.raises(NoDetectableRegion):
        window_length(20, 10, 10)


def test_projections():
    assert project_tx(200, 10, 10) == 100.0
    assert project_tx(0, 7, 3) == 0.0
    assert project_tx(300, 10, 20, receiver_x=30) == pytest.approx(120.0)
    assert project_lane(100, 5, 10, 10) == 25.0
    assert project_lane(10, 10, 10, 10, receiver_x=-10) == 0.0
    assert project_lane(300, 10, 10, 20, receiver_x=30) == project_tx(300, 10, 20, receiver_x=30)
    with pytest.raises(ValueError):
        project_lane(1, 20, 10, 10)


@given(st.floats(-1e4, 1e4), st.floats(-1e4, 1e4), st.floats(1, 50), st.floats(1, 50))
def test_project_tx_affine(x, c, d1, d2):
    # affine in x and equal to x*d1/(d1+d2) at the origin
    assert project_tx(x, d1, d2) == pytest.approx(x * d1 / (d1 + d2), abs=1e-9)
    assert project_tx(x + c, d1, d2, c) == pytest.approx(project_tx(x, d1, d2) + c, abs=1e-8)


def _set(left, right, h=10.0):
    left, right = np.asarray(left, float), np.asarray(right, float)
    centers = (left + right) / 2
    return ObstacleSet(centers, centers - left, right - centers, np.full(len(left), h), 100.0, 0.0)


def test_is_blocked_examples():
    obs = _set([48.0], [53.0])
    assert not is_blocked(obs, 200.0, 0.0, 10, 10)
    assert is_blocked(obs, 100.0, 0.0, 10, 10)
    assert not is_blocked(ObstacleSet.empty(), 100.0, 0.0, 10, 10)
    # closed interval
    assert is_blocked(obs, 96.0, 0.0, 10, 10) and is_blocked(obs, 106.0, 0.0, 10, 10)


def test_is_blocked_multilane():
    lane5 = ObstacleSet(np.array([24.0]), np.array([1.0]), np.array([1.0]), np.array([5.0]),
                        100.0, 0.0)
    # path to x=100 crosses height 5 at 25 and height 10 at 50
    assert is_blocked(lane5, 100.0, 0.0, 10, 10)
    assert not is_blocked(lane5, 120.0, 0.0, 10, 10)


def test_covered_brute_force():
    rng = np.random.default_rng(3)
    left = rng.uniform(0, 100, 40)
    right = left + rng.exponential(3, 40)
    pts = rng.uniform(-5, 110, 2000)
    brute = ((pts[:, None] >= left) & (pts[:, None] <= right)).any(axis=1)
    assert np.array_equal(covered(pts, left, right), brute)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(-500, 500), st.floats(-500, 500), st.floats(-300, 300))
def test_blockage_translation_equivariant(seed, tx, rx, c):
    params = ScenarioParams(0.0, 0.05, 0.3, 10, 10)
    obs = sample_obstacles(params, 600.0, seed)
    assert is_blocked(obs, tx, rx, 10, 10) == is_blocked(obs.shifted(c), tx + c, rx + c, 10, 10)


def test_sampler_deterministic_and_sorted(standard):
    a = sample_obstacles(standard, 500.0, 42)
    b = sample_obstacles(standard, 500.0, 42)
    assert a.same_as(b)
    assert np.all(np.diff(a.centers) >= 0)
    m = a.margin
    assert m == pytest.approx(20 / 0.4)
    assert np.all(np.abs(a.centers) <= 500 + m)
    assert not a.same_as(sample_obstacles(standard, 500.0, 43))
    assert len(list(a)) == len(a)


def test_sampler_empty_without_obstacles():
    params = ScenarioParams(0.0, 0.0, 0.4, 10, 10)
    assert len(sample_obstacles(params, 1000.0, 0)) == 0


def test_sampler_count_and_lengths(standard):
    # count: mean 0.02 * (10 km + 2 margin); 1000 draws
    half = 5000.0
    mean = 0.02 * (2 * half + 2 * 20 / 0.4)
    counts = np.array([len(sample_obstacles(standard, half, s)) for s in range(1000)])
    assert abs(counts.mean() - mean) <= 3 * math.sqrt(mean / 1000)
    obs = sample_obstacles(standard, 2e5, 7)
    n = len(obs)
    halves = np.concatenate([obs.v_tilde, obs.w_tilde])
    # Exp(mean 2.5): sd 2.5; Erlang-2(mean 5): sd 2.5*sqrt(2)
    assert abs(halves.mean() - 2.5) <= 3 * 2.5 / math.sqrt(2 * n)
    full = obs.v_tilde + obs.w_tilde
    assert abs(full.mean() - 5.0) <= 3 * 2.5 * math.sqrt(2) / math.sqrt(n)


def test_volume_fraction_of_sample(standard):
    obs = sample_obstacles(standard, 20000.0, 5)
    grid = np.arange(-15000, 15000, 0.05)
    frac = covered(grid, obs.left, obs.right).mean()
    # one long realization; autocorrelation length ~ 1/lambda_b, so use a loose 3-sigma
    # bound from ~ 30 km * lambda_b independent blocks
    assert abs(frac - (1 - math.exp(-0.1))) < 3 * math.sqrt(0.09 / (30000 * 0.02))


def test_receiver_projection_intensity():
    rng = np.random.default_rng(11)
    lam, d1, d2, tx = 0.03, 10.0, 30.0, 123.0
    counts = []
    for _ in range(2000):
        r = sample_ppp(lam, -2000, 2000, rng)
        q = project_receivers(r, tx, d1, d2)
        counts.append(np.count_nonzero((q > 0) & (q <= 100)))
    expected = lam * (d1 + d2) / d2 * 100
    counts = np.array(counts)
    assert abs(counts.mean() - expected) <= 3 * math.sqrt(expected / len(counts))
    # Poisson: variance equals mean
    assert counts.var() == pytest.approx(expected, rel=0.1)


def test_transmitter_set():
    txs = TransmitterSet([-10, 0, 40])
    assert np.allclose(txs.projections(10, 30), [-2.5, 0, 10])
    with pytest.raises(ValueError):
        TransmitterSet([0, 0])


def test_prob_estimate_invariants():
    assert ProbEstimate(0.5, "mc", stderr=0.1, n_samples=10).value == 0.5
    with pytest.raises(ValueError):
        ProbEstimate(1.5, "closed-form")
    with pytest.raises(ValueError):
        ProbEstimate(0.5, "mc", stderr=-1)
    with pytest.raises(ValueError):
        ProbEstimate(0.5, "guess")


def test_scenario_validation():
    with pytest.raises(ValueError):
        ScenarioParams(0.0, 0.01, 0.4, 0.5, 10)
    assert ScenarioParams(0.0, 0.01, 0.4, 0.5, 10, allow_small_offsets=True).d1 == 0.5
    with pytest.raises(ValueError):
        ScenarioParams(0.0, [0.01, 0.01], [0.4], 10, 10, lane_heights=[5, 10])
    with pytest.raises(ValueError):
        ScenarioParams(0.0, [0.01, 0.01], [0.4, 0.4], 10, 10, lane_heights=[5, 25])
    with pytest.raises(ValueError):
        ScenarioParams(0.0, 0.01, 0.0, 10, 10)
    two = ScenarioParams(0.0, [0.01, 0.02], [0.4, 0.5], 10, 10, lane_heights=[5, 10])
    assert two.lanes == [(0.01, 0.4, 5.0), (0.02, 0.5, 10.0)]
    with pytest.raises(ValueError):
        two.single_lane()


def test_bundled_scenarios_and_units():
    fig8 = load_scenario("fig8")
    assert fig8.lambda_t == pytest.approx(0.004)
    assert fig8.mu == pytest.approx(0.4)
    assert fig8.detect_radius == pytest.approx(1500.0)
    two = load_scenario("two_lane")
    assert two.is_multilane and two.lane_heights == (5.0, 10.0)


def test_scenario_roundtrip(standard):
    assert scenario_from_mapping(scenario_to_mapping(standard)) == standard


def test_d_star_overrides_radio():
    params = scenario_from_mapping({
        "lambda_t_per_km": 4, "lambda_b_per_km": 10, "mean_half_length_m": 2.5,
        "d1_m": 10, "d2_m": 10, "p": 1, "sigma": 1, "alpha_los": 2, "tau": 1, "d_star_m": 800,
    })
    assert params.detect_radius == 800


@pytest.mark.parametrize("mapping, key", [
    ({"lambda_t_per_km": 4, "mean_half_length_m": 2.5, "d1_m": 10, "d2_m": 10},
     "lambda_b_per_km"),
    ({"lambda_t_per_km": 4, "lambda_b_per_km": "x", "mean_half_length_m": 2.5, "d1_m": 10,
      "d2_m": 10}, "lambda_b_per_km"),
    ({"lambda_t_per_km": 4, "lambda_b_per_km": 1, "mean_half_length_m": 2.5, "d1_m": 10,
      "d2_m": 10, "bogus": 1}, "bogus"),
    ({"lambda_t_per_km": 4, "lambda_b_per_km": 1, "mean_half_length_m": 2.5, "d1_m": 10,
      "d2_m": 10, "p": 1}, "sigma"),
    ({"lambda_t_per_km": 4, "lambda_b_per_km": 1, "mean_half_length_m": -1, "d1_m": 10,
      "d2_m": 10}, "mean_half_length_m"),
])
def test_config_errors_name_the_key(mapping, key):
    with pytest.raises(ConfigError) as info:
        scenario_from_mapping(mapping)
    assert info.value.key == key


def test_scenario_file_parsing(tmp_path, monkeypatch):
    f = tmp_path / "mine.cfg"
    f.write_text("lambda_t_per_km = 5  # transmitters\nlambda_b_per_km = [10, 4]\n"
                 "mean_half_length_m = 2\nlane_heights_m = [4, 10]\nd1_m = 10\nd2_m = 10\n"
                 "d_star_m = 300\n")
    params = load_scenario(f)
    assert params.lanes == [(0.01, 0.5, 4.0), (0.004, 0.5, 10.0)]
    monkeypatch.setenv("LOSCOV_SCENARIO_DIR", str(tmp_path))
    assert load_scenario("mine") == params
    with pytest.raises(ConfigError):
        load_scenario("does-not-exist")
