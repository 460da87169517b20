import math

import pytest

import lumen


def test_presets_and_lorentzian():
    assert "MR3" in lumen.preset_names()
    d = lumen.preset("MR3")
    assert lumen.transmission_at_detuning(d, 0.0) == pytest.approx(d.min_transmission)
    half = lumen.transmission_at_detuning(d, d.fwhm_nm / 2)
    assert half == pytest.approx((1 + d.min_transmission) / 2)
    delta = lumen.weight_to_detuning(d, 0.5)
    assert lumen.transmission_at_detuning(d, delta) == pytest.approx(0.5)
    with pytest.raises(KeyError):
        lumen.preset("nope")


def test_channel_capacity_error_maps_to_python():
    d = lumen.preset("crosslight")
    d.fsr_nm = 20.0
    with pytest.raises(lumen.Error):
        lumen.allocate_channels(10, 2.5, d)


def test_heterodyne_crosstalk_value():
    d = lumen.MRDesign()
    d.q_factor = 5000.0
    d.fsr_nm = 40.0
    assert lumen.heterodyne_crosstalk(16, 2.5, d) == pytest.approx(0.0128772661, abs=1e-9)


def test_ted_is_exact_and_beats_naive():
    k = lumen.build_coupling_matrix(lumen.linear_layout(8, 5.0), 10.0)
    targets = [0.3, 1.2, 0.0, 2.0, 0.7, 0.1, 1.5, 0.9]
    ideal = lumen.ted_solve(k, targets, actuator_bits=None, max_shift_nm=1e6)
    assert ideal.residual_norm <= 1e-9
    naive = lumen.naive_solve(k, targets)
    ted = lumen.ted_solve(k, targets)
    assert lumen.crosstalk_reduction(naive, ted) > 90.0


def test_quantization_helpers():
    w = [0.05, -0.4, 0.9, -0.01, 0.3, 0.0]
    pruned = lumen.prune_magnitude(w, 0.5)
    assert lumen.sparsity_of(pruned) == pytest.approx(0.5)
    codebook, index, objective = lumen.cluster_quantize([0.0, 0.1, 1.0, 1.1], 2)
    assert codebook == pytest.approx([0.05, 1.05])
    assert list(index) == [0, 0, 1, 1]
    assert objective == pytest.approx(0.01)
    q = lumen.uniform_quantize([0.5, -2.0], 2, 1.0)
    assert q == pytest.approx([1.0, -1.0])


def test_simulate_desk_mlp():
    report = lumen.simulate_desk("mlp", seed=1)
    assert 0.0 <= report["accuracy"] <= 1.0
    assert report["frames"] > 0
    assert math.isfinite(report["epb_pj_per_bit"])
    assert "[thermal]" in lumen.default_config_toml()
