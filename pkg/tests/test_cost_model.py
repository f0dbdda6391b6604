"""Cost model tests.

FLOP and memory formulas are checked against independent oracles: a
multiply-accumulate counter walking the layer's constituent matrix products,
and a tensor-shape enumerator for activation bytes.
"""

import json

import pytest

from splitplan import cost_model as cm
from splitplan.cost_model import LayerKind, LayerSpec


# --- independent oracles -----------------------------------------------------

def matmul_flops(m: int, k: int, n: int) -> int:
    # (m,k) @ (k,n): m*k*n multiply-accumulates, 2 FLOPs each
    return 2 * m * k * n


def attention_flops_oracle(s: int, d: int, h: int) -> int:
    assert d % h == 0, "oracle assumes evenly split heads"
    dh = d // h
    total = 0
    for _ in range(4):  # Q, K, V, output projections
        total += matmul_flops(s, d, d)
    total += h * matmul_flops(s, dh, s)  # attention scores per head
    total += 5 * h * s * s  # softmax over each h x s x s score map
    total += h * matmul_flops(s, s, dh)  # weighted sum of values
    return total


def ffn_flops_oracle(s: int, d: int, dff: int) -> int:
    return matmul_flops(s, d, dff) + matmul_flops(s, dff, d)


def attention_memory_oracle(s: int, d: int, h: int) -> int:
    activation = s * d * 4  # (s, d) float32
    scores = h * s * s * 4  # h score maps of (s, s)
    return activation + scores


# --- flop_of_layer ------------------------------------------------------------

def test_attention_flops_pinned_example():
    layer = LayerSpec(LayerKind.ATTENTION, hidden_dim=4, heads=1)
    assert attention_flops_oracle(2, 4, 1) == 340
    assert cm.flop_of_layer(layer, 2) == 340


def test_feed_forward_flops_pinned_example():
    layer = LayerSpec(LayerKind.FEED_FORWARD, hidden_dim=4, ffn_dim=8)
    assert ffn_flops_oracle(2, 4, 8) == 256
    assert cm.flop_of_layer(layer, 2) == 256


@pytest.mark.parametrize("s", [1, 2, 16, 100, 512])
@pytest.mark.parametrize("d,h", [(4, 1), (64, 4), (768, 12), (1024, 16)])
def test_attention_flops_match_mac_oracle(s, d, h):
    layer = LayerSpec(LayerKind.ATTENTION, hidden_dim=d, heads=h)
    assert cm.flop_of_layer(layer, s) == attention_flops_oracle(s, d, h)


@pytest.mark.parametrize("s,d,dff", [(1, 4, 8), (7, 64, 256), (128, 768, 3072)])
def test_ffn_flops_match_mac_oracle(s, d, dff):
    layer = LayerSpec(LayerKind.FEED_FORWARD, hidden_dim=d, ffn_dim=dff)
    assert cm.flop_of_layer(layer, s) == ffn_flops_oracle(s, d, dff)


def test_simple_layer_flops():
    assert cm.flop_of_layer(LayerSpec(LayerKind.LAYER_NORM, 8), 10) == 5 * 10 * 8
    assert cm.flop_of_layer(LayerSpec(LayerKind.EMBEDDING, 8), 10) == 2 * 10 * 8
    assert cm.flop_of_layer(LayerSpec(LayerKind.CLASSIFIER, 8, out_dim=3), 10) == 2 * 10 * 8 * 3


def test_attention_ratio_approaches_four():
    layer = LayerSpec(LayerKind.ATTENTION, hidden_dim=4, heads=1)
    s = 1 << 16
    ratio = cm.flop_of_layer(layer, 2 * s) / cm.flop_of_layer(layer, s)
    assert 3.9 < ratio <= 4.0


@pytest.mark.parametrize("d,h", [(512, 8), (768, 12), (1024, 16)])
def test_attention_ratio_band_past_quadratic_threshold(d, h):
    # the s^2 terms dominate once s >= 3 * (8 d^2) / (4 d + 5 h); from there
    # doubling s multiplies the cost by a factor in (3.5, 4]
    layer = LayerSpec(LayerKind.ATTENTION, hidden_dim=d, heads=h)
    threshold = 24 * d * d / (4 * d + 5 * h)
    s = int(threshold) + 1
    for _ in range(4):
        ratio = cm.flop_of_layer(layer, 2 * s) / cm.flop_of_layer(layer, s)
        assert 3.5 < ratio <= 4.0
        s *= 2


def test_non_attention_ratio_exactly_two():
    layers = [
        LayerSpec(LayerKind.FEED_FORWARD, 768, ffn_dim=3072),
        LayerSpec(LayerKind.LAYER_NORM, 768),
        LayerSpec(LayerKind.EMBEDDING, 768),
        LayerSpec(LayerKind.CLASSIFIER, 768, out_dim=1000),
    ]
    for layer in layers:
        for s in (16, 128, 1024):
            assert cm.flop_of_layer(layer, 2 * s) == 2 * cm.flop_of_layer(layer, s)


def test_total_flops_increase_with_seq_and_depth():
    spec = cm.build_preset("bert-12", 128)
    totals = [cm.model_flops(spec, s) for s in (64, 128, 256, 512)]
    assert all(a < b for a, b in zip(totals, totals[1:]))
    shallow = cm.ModelSpec("sub", spec.layers[:10], 128)
    assert cm.model_flops(shallow) < cm.model_flops(spec, 128)


# --- memory and output bytes ---------------------------------------------------

def test_memory_pinned_examples():
    norm = LayerSpec(LayerKind.LAYER_NORM, 8)
    assert cm.memory_of_layer(norm, 10) == 320
    attn = LayerSpec(LayerKind.ATTENTION, 8, heads=2)
    assert attention_memory_oracle(10, 8, 2) == 1120
    assert cm.memory_of_layer(attn, 10) == 1120


def test_attention_memory_ratio_approaches_four():
    attn = LayerSpec(LayerKind.ATTENTION, 8, heads=2)
    s = 1 << 16
    ratio = cm.memory_of_layer(attn, 2 * s) / cm.memory_of_layer(attn, s)
    assert 3.9 < ratio <= 4.0


def test_output_bytes():
    assert cm.output_bytes(LayerSpec(LayerKind.ATTENTION, 768, heads=12), 128) == 393216
    assert cm.output_bytes(LayerSpec(LayerKind.LAYER_NORM, 1), 1) == 4
    assert cm.output_bytes(LayerSpec(LayerKind.CLASSIFIER, 8, out_dim=10), 128) == 40


# --- presets -------------------------------------------------------------------

@pytest.mark.parametrize("name,attn", [("bert-12", 12), ("vanilla-6x6", 18), ("gpt2-24", 24)])
def test_preset_attention_counts(name, attn):
    spec = cm.build_preset(name, 128)
    assert spec.attention_count == attn


def test_gpt2_valid_at_seq_len_one():
    spec = cm.build_preset("gpt2-24", 1)
    assert spec.attention_count == 24
    assert cm.model_flops(spec) > 0


def test_unknown_preset_rejected():
    with pytest.raises(ValueError, match="unknown preset"):
        cm.build_preset("bert-13", 128)
    with pytest.raises(ValueError):
        cm.build_preset("bert-12", 0)


def test_presets_deterministic():
    assert cm.build_preset("cmt-like", 4096) == cm.build_preset("cmt-like", 4096)


def test_cmt_boundary_sizes_fluctuate():
    spec = cm.build_preset("cmt-like", 4096)
    sizes = {cm.output_bytes(layer, spec.seq_len) for layer in spec.layers}
    assert len(sizes) >= 4


# --- profiles and calibration ----------------------------------------------------

def test_profile_times_follow_throughput():
    spec = cm.build_preset("bert-12", 64)
    client = cm.DeviceSpec("client", 1e9)
    server = cm.DeviceSpec("server", 1e9)
    layers = cm.profile(spec, client, server)
    for layer, p in zip(spec.layers, layers):
        assert p.client_time_s == cm.flop_of_layer(layer, 64) / 1e9
        assert p.client_time_s == p.server_time_s  # identical devices
        assert p.r == cm.flop_of_layer(layer, 64)


def test_profile_tau_chain():
    spec = cm.build_preset("cmt-like", 1024)
    layers = cm.profile(spec, cm.DeviceSpec("c", 1e9), cm.DeviceSpec("s", 1e10))
    assert layers[0].tau_bytes == 1024 * 4
    for prev_spec, nxt in zip(spec.layers, layers[1:]):
        assert nxt.tau_bytes == cm.output_bytes(prev_spec, spec.seq_len)


def test_profile_memory_metric():
    spec = cm.build_preset("bert-12", 64)
    layers = cm.profile(spec, cm.DeviceSpec("c", 1e9), cm.DeviceSpec("s", 1e9), "memory")
    for layer, p in zip(spec.layers, layers):
        assert p.r == cm.memory_of_layer(layer, 64)
    with pytest.raises(ValueError):
        cm.profile(spec, cm.DeviceSpec("c", 1e9), cm.DeviceSpec("s", 1e9), "watts")


def test_profile_deterministic():
    spec = cm.build_preset("vanilla-6x6", 256)
    a = cm.profile(spec, cm.DeviceSpec("c", 3.3e9), cm.DeviceSpec("s", 7.7e12))
    b = cm.profile(spec, cm.DeviceSpec("c", 3.3e9), cm.DeviceSpec("s", 7.7e12))
    assert a == b


def test_calibrate_trivial():
    spec = cm.ModelSpec("one", (LayerSpec(LayerKind.CUSTOM, 1, flop_coeffs=(0, 0, 1e12)),), 8)
    dev = cm.calibrate(spec, 8, 1.0)
    assert dev.flops_per_s == 1e12


@pytest.mark.parametrize("target", [7.727, 0.0979])
def test_calibrate_hits_target_total(target):
    spec = cm.build_preset("bert-12", 4096)
    dev = cm.calibrate(spec, 4096, target)
    layers = cm.profile(spec, dev, dev)
    total = sum(p.client_time_s for p in layers)
    assert abs(total - target) <= 1e-9 * target


def test_calibrate_rejects_zero_flop_model():
    spec = cm.ModelSpec("null", (LayerSpec(LayerKind.CUSTOM, 1, flop_coeffs=(0, 0, 0)),), 8)
    with pytest.raises(ValueError, match="zero total FLOP"):
        cm.calibrate(spec, 8, 1.0)


def test_custom_layer_coefficients():
    layer = LayerSpec(LayerKind.CUSTOM, 16, flop_coeffs=(2.0, 3.0, 5.0),
                      mem_coeffs=(0.0, 64.0, 0.0), out_bytes_per_token=8.0)
    assert cm.flop_of_layer(layer, 10) == 2 * 100 + 3 * 10 + 5
    assert cm.memory_of_layer(layer, 10) == 640
    assert cm.output_bytes(layer, 10) == 80


def test_seq_divisor_downsamples():
    layer = LayerSpec(LayerKind.LAYER_NORM, 8, seq_divisor=4)
    assert cm.flop_of_layer(layer, 64) == 5 * 16 * 8
    assert cm.flop_of_layer(layer, 2) == 5 * 1 * 8  # floor at 1


def test_profile_json_roundtrip(tmp_path):
    spec = cm.build_preset("bert-12", 128)
    layers = cm.profile(spec, cm.DeviceSpec("c", 1e9), cm.DeviceSpec("s", 1e12))
    path = tmp_path / "profile.json"
    cm.save_profile(path, spec, layers, "flop")
    doc, loaded = cm.load_profile(path)
    assert doc["model"] == "bert-12" and doc["seq_len"] == 128
    assert loaded == layers


def test_load_model_spec_from_json(tmp_path):
    doc = {
        "name": "tiny",
        "layers": [
            {"kind": "embedding", "hidden_dim": 8},
            {"kind": "custom", "hidden_dim": 8, "flop_coeffs": [0, 100, 0]},
            {"kind": "classifier", "hidden_dim": 8, "out_dim": 2},
        ],
    }
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(doc))
    spec = cm.load_model_spec(str(path), 32)
    assert spec.name == "tiny" and len(spec.layers) == 3
    assert cm.flop_of_layer(spec.layers[1], 32) == 3200
    with pytest.raises(ValueError, match="neither a preset"):
        cm.load_model_spec("no-such-model", 32)
