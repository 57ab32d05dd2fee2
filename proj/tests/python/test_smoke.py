import json

import numpy as np
import pytest

import slth


def test_conv_matches_a_direct_sum():
    rng = np.random.default_rng(0)
    k = rng.normal(size=(2, 2, 2, 3))
    x = rng.uniform(-1, 1, size=(4, 4, 2))
    out = slth.conv(k, x)
    assert out.shape == (4, 4, 3)
    want = 0.0
    for i in range(2):
        for j in range(2):
            want += k[i, j, :, 1] @ x[3 - i, 3 - j, :]
    assert out[3, 3, 1] == pytest.approx(want, abs=1e-12)
    assert np.abs(out).max() <= np.abs(k).sum() * np.abs(x).max() + 1e-12


def test_relu_and_shape_errors():
    x = np.array([[[-1.0], [2.0]]])
    assert slth.relu(x).tolist() == [[[0.0], [2.0]]]
    with pytest.raises(slth.ShapeError):
        slth.conv(np.ones((1, 1, 2, 1)), np.ones((2, 2, 1)))


def test_solvers_agree_on_the_small_example():
    r = slth.solve_rssp_1d(np.array([0.5, -0.25, 0.75]), 0.25, 0.01)
    assert r["found"] and r["solution"]["indices"] == [0, 1]
    v = np.array([[0.3], [0.2], [-0.1]])
    for strategy in ("enum", "mitm", "greedy"):
        o = slth.solve_mrss(v, np.array([0.1]), 2, 0.05, strategy=strategy)
        assert o["solution"]["indices"] == [1, 2]
    assert slth.subset_sum_number(v, np.array([0.1]), 2, 0.05) == 1
    with pytest.raises(slth.ParameterError):
        slth.solve_rssp_1d(np.zeros(3), 0.0, -1.0)


def test_nsn_is_deterministic():
    a, s = slth.sample_nsn(20, 3, seed=4)
    b, _ = slth.sample_nsn(20, 3, seed=4)
    assert a.shape == (20, 3) and len(s) == 20
    assert np.array_equal(a, b)


def test_masks_round_trip():
    cb = slth.channel_blocked_mask(2, 3, 4)
    fr = slth.filter_removal_mask([2, 2, 3, 12], [0, 5])
    c = slth.compose(cb, fr)
    assert c.is_valid() and c.is_blocked_filter_composite(4)
    assert c.ones() == 2 * 4
    assert slth.Mask.from_bytes(c.to_bytes()) == c
    assert c.bits().shape == (2, 2, 3, 12)


def test_single_layer_pruning_report():
    u, v, k = slth.sample_layer_instance(2, 1, 1, 16, seed=3)
    out = slth.prune_single_layer(u, v, k, epsilon=0.25, probes=16, seed=3)
    rep = out["report"]
    assert rep["tolerance"] == pytest.approx(0.25 / 8)
    assert out["mask"].is_valid()
    assert rep["probe_error"] <= rep["certified_ratio"] + 1e-9
    for ch in rep["channels"]:
        if ch["success"]:
            assert ch["residual"] <= rep["tolerance"]


def test_network_bundle_recomputes():
    out = slth.prune_network(4, [1, 2, 1], [2, 2], [8, 8], probes=8, seed=2)
    bundle = out["bundle"]
    report = bundle["report"]
    again = slth.recompute_empirical_error(json.dumps(bundle))
    assert again == report["empirical_error"]
    assert report["empirical_error"] <= report["certified_bound"] + 1e-9


def test_bounds_and_scan():
    assert slth.intersection_tail_bound(36, 3) == pytest.approx(np.exp(-8 * (11 / 12) ** 2), rel=1e-12)
    csv = slth.scan_rssp_phase(n_list=[10, 20], trials=10)
    assert csv == slth.scan_rssp_phase(n_list=[10, 20], trials=10)
    assert csv.splitlines()[0].startswith("n,trials,successes")
