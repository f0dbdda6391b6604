"""Analytic per-layer cost profiles for transformer models.

Builds layer-by-layer FLOP counts, activation memory, and boundary tensor
sizes as a function of input sequence length, then converts them into
client/server compute times for a pair of devices. Everything here is a
closed-form model: no real weights, no hardware measurements.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

BYTES_PER_ELEMENT = 4  # single-precision activations
SOFTMAX_FLOPS_PER_SCORE = 5

__all__ = [
    "LayerKind",
    "LayerSpec",
    "ModelSpec",
    "DeviceSpec",
    "LayerProfile",
    "PRESET_NAMES",
    "build_preset",
    "flop_of_layer",
    "memory_of_layer",
    "output_bytes",
    "raw_input_bytes",
    "model_flops",
    "profile",
    "calibrate",
    "profile_to_dict",
    "profile_from_dict",
    "save_profile",
    "load_profile",
    "load_model_spec",
]


class LayerKind(str, Enum):
    EMBEDDING = "embedding"
    ATTENTION = "attention"
    FEED_FORWARD = "feed_forward"
    LAYER_NORM = "layer_norm"
    CLASSIFIER = "classifier"
    CUSTOM = "custom"


@dataclass(frozen=True)
class LayerSpec:
    """One splittable entry of a model.

    Attention entries are atomic (their internals are never split), so every
    boundary tensor between entries stays sequence-by-hidden sized.
    `seq_divisor` scales the effective sequence length for staged models whose
    later stages run on downsampled token grids.

    Custom entries bypass the derived formulas: `flop_coeffs` and `mem_coeffs`
    are (quadratic, linear, constant) coefficients in the effective sequence
    length, and `out_bytes_per_token` fixes the boundary tensor size.
    """

    kind: LayerKind
    hidden_dim: int
    heads: int = 1
    ffn_dim: int = 0
    out_dim: int = 0
    seq_divisor: int = 1
    flop_coeffs: tuple[float, float, float] | None = None
    mem_coeffs: tuple[float, float, float] | None = None
    out_bytes_per_token: float | None = None

    def __post_init__(self):
        if self.hidden_dim <= 0:
            raise ValueError(f"hidden_dim must be positive, got {self.hidden_dim}")
        if self.heads <= 0 or self.seq_divisor <= 0:
            raise ValueError("heads and seq_divisor must be positive")
        if self.kind is LayerKind.FEED_FORWARD and self.ffn_dim <= 0:
            raise ValueError("feed_forward layers need a positive ffn_dim")
        if self.kind is LayerKind.CLASSIFIER and self.out_dim <= 0:
            raise ValueError("classifier layers need a positive out_dim")
        if self.kind is LayerKind.CUSTOM and self.flop_coeffs is None:
            raise ValueError("custom layers must supply flop_coeffs")


@dataclass(frozen=True)
class ModelSpec:
    """Ordered list of splittable layer entries plus the input length."""

    name: str
    layers: tuple[LayerSpec, ...]
    seq_len: int

    def __post_init__(self):
        if not self.layers:
            raise ValueError("model must have at least one layer")
        if self.seq_len < 1:
            raise ValueError(f"seq_len must be >= 1, got {self.seq_len}")
        object.__setattr__(self, "layers", tuple(self.layers))

    @property
    def attention_count(self) -> int:
        return sum(1 for l in self.layers if l.kind is LayerKind.ATTENTION)


@dataclass(frozen=True)
class DeviceSpec:
    """A device reduced to a single effective compute rate."""

    name: str
    flops_per_s: float

    def __post_init__(self):
        if not self.flops_per_s > 0:
            raise ValueError(f"throughput must be positive, got {self.flops_per_s}")


@dataclass(frozen=True)
class LayerProfile:
    """Per-layer placement inputs: cost metric, device times, boundary size.

    `tau_bytes` is the size of the layer's *input* tensor, i.e. the bytes that
    cross the network if the placement switches device right before this layer.
    """

    index: int
    kind: str
    r: float
    client_time_s: float
    server_time_s: float
    tau_bytes: float


def _eff_seq(layer: LayerSpec, seq_len: int) -> int:
    return max(1, seq_len // layer.seq_divisor)


def _poly(coeffs: tuple[float, float, float], s: int) -> float:
    quad, lin, const = coeffs
    return quad * s * s + lin * s + const


def flop_of_layer(layer: LayerSpec, seq_len: int):
    """Forward-pass FLOPs of one layer entry at the given sequence length.

    Attention counts its four projections (8*s*d^2), score and context
    matmuls (4*s^2*d), and softmax (5*s^2*h). All other derived kinds are
    linear in s. Multiply-accumulate counts as 2 FLOPs.
    """
    s = _eff_seq(layer, seq_len)
    d = layer.hidden_dim
    if layer.kind is LayerKind.ATTENTION:
        return 8 * s * d * d + 4 * s * s * d + SOFTMAX_FLOPS_PER_SCORE * s * s * layer.heads
    if layer.kind is LayerKind.FEED_FORWARD:
        return 4 * s * d * layer.ffn_dim
    if layer.kind is LayerKind.LAYER_NORM:
        return 5 * s * d
    if layer.kind is LayerKind.EMBEDDING:
        return 2 * s * d
    if layer.kind is LayerKind.CLASSIFIER:
        return 2 * s * d * layer.out_dim
    return _poly(layer.flop_coeffs, s)


def memory_of_layer(layer: LayerSpec, seq_len: int):
    """Activation bytes of one layer entry; attention adds its score maps."""
    s = _eff_seq(layer, seq_len)
    if layer.kind is LayerKind.CUSTOM:
        coeffs = layer.mem_coeffs or (0.0, BYTES_PER_ELEMENT * layer.hidden_dim, 0.0)
        return _poly(coeffs, s)
    mem = s * layer.hidden_dim * BYTES_PER_ELEMENT
    if layer.kind is LayerKind.ATTENTION:
        mem += s * s * layer.heads * BYTES_PER_ELEMENT
    return mem


def output_bytes(layer: LayerSpec, seq_len: int):
    """Size of the layer's output tensor, i.e. the next boundary transfer."""
    s = _eff_seq(layer, seq_len)
    if layer.kind is LayerKind.CLASSIFIER:
        return layer.out_dim * BYTES_PER_ELEMENT
    if layer.kind is LayerKind.CUSTOM and layer.out_bytes_per_token is not None:
        return layer.out_bytes_per_token * s
    return s * layer.hidden_dim * BYTES_PER_ELEMENT


def raw_input_bytes(spec: ModelSpec) -> int:
    # model input is a token-id (or patch-id) vector, one 4-byte id per position
    return spec.seq_len * BYTES_PER_ELEMENT


def model_flops(spec: ModelSpec, seq_len: int | None = None):
    s = spec.seq_len if seq_len is None else seq_len
    return sum(flop_of_layer(layer, s) for layer in spec.layers)


# ---------------------------------------------------------------------------
# presets


def _encoder_block(d: int, h: int, dff: int, div: int = 1) -> list[LayerSpec]:
    return [
        LayerSpec(LayerKind.ATTENTION, d, heads=h, seq_divisor=div),
        LayerSpec(LayerKind.LAYER_NORM, d, seq_divisor=div),
        LayerSpec(LayerKind.FEED_FORWARD, d, ffn_dim=dff, seq_divisor=div),
        LayerSpec(LayerKind.LAYER_NORM, d, seq_divisor=div),
    ]


def _decoder_block(d: int, h: int, dff: int) -> list[LayerSpec]:
    return [
        LayerSpec(LayerKind.ATTENTION, d, heads=h),  # self-attention
        LayerSpec(LayerKind.LAYER_NORM, d),
        LayerSpec(LayerKind.ATTENTION, d, heads=h),  # cross-attention, equal lengths
        LayerSpec(LayerKind.LAYER_NORM, d),
        LayerSpec(LayerKind.FEED_FORWARD, d, ffn_dim=dff),
        LayerSpec(LayerKind.LAYER_NORM, d),
    ]


def _vanilla_6x6(seq_len: int) -> ModelSpec:
    d, h, dff, vocab = 512, 8, 2048, 32000
    layers = [LayerSpec(LayerKind.EMBEDDING, d, out_dim=vocab)]
    for _ in range(6):
        layers += _encoder_block(d, h, dff)
    for _ in range(6):
        layers += _decoder_block(d, h, dff)
    layers.append(LayerSpec(LayerKind.CLASSIFIER, d, out_dim=vocab))
    return ModelSpec("vanilla-6x6", tuple(layers), seq_len)


def _bert_12(seq_len: int) -> ModelSpec:
    d, h, dff, vocab = 768, 12, 3072, 30522
    layers = [LayerSpec(LayerKind.EMBEDDING, d, out_dim=vocab)]
    for _ in range(12):
        layers += _encoder_block(d, h, dff)
    layers.append(LayerSpec(LayerKind.CLASSIFIER, d, out_dim=vocab))
    return ModelSpec("bert-12", tuple(layers), seq_len)


def _gpt2_24(seq_len: int) -> ModelSpec:
    d, h, dff, vocab = 1024, 16, 4096, 50257
    layers = [LayerSpec(LayerKind.EMBEDDING, d, out_dim=vocab)]
    for _ in range(24):
        layers += _encoder_block(d, h, dff)
    layers.append(LayerSpec(LayerKind.CLASSIFIER, d, out_dim=vocab))
    return ModelSpec("gpt2-24", tuple(layers), seq_len)


def _cmt_like(seq_len: int) -> ModelSpec:
    """Staged vision-style transformer: widths double while the token grid
    is downsampled 4x per stage, so boundary tensor sizes swing widely."""
    widths = (64, 128, 256, 512)
    heads = (1, 2, 4, 8)
    blocks_per_stage = 2
    layers = [LayerSpec(LayerKind.EMBEDDING, widths[0])]
    for stage, (d, h) in enumerate(zip(widths, heads)):
        div = 4**stage
        if stage > 0:
            # patch-merging entry: re-embeds onto the coarser grid
            layers.append(LayerSpec(LayerKind.EMBEDDING, d, seq_divisor=div))
        for _ in range(blocks_per_stage):
            layers += _encoder_block(d, h, 4 * d, div=div)
    layers.append(LayerSpec(LayerKind.CLASSIFIER, widths[-1], out_dim=1000, seq_divisor=4**3))
    return ModelSpec("cmt-like", tuple(layers), seq_len)


_PRESETS = {
    "vanilla-6x6": _vanilla_6x6,
    "bert-12": _bert_12,
    "gpt2-24": _gpt2_24,
    "cmt-like": _cmt_like,
}

PRESET_NAMES = tuple(sorted(_PRESETS))


def build_preset(name: str, seq_len: int) -> ModelSpec:
    """Construct a preset model; unknown names raise ValueError."""
    if name not in _PRESETS:
        raise ValueError(f"unknown preset {name!r}; known: {', '.join(PRESET_NAMES)}")
    if seq_len < 1:
        raise ValueError(f"seq_len must be >= 1, got {seq_len}")
    return _PRESETS[name](seq_len)


# ---------------------------------------------------------------------------
# profiles


def calibrate(spec: ModelSpec, seq_len: int, target_total_time_s: float,
              name: str = "calibrated") -> DeviceSpec:
    """Device whose rate makes the whole model take `target_total_time_s`."""
    if target_total_time_s <= 0:
        raise ValueError("target_total_time_s must be positive")
    total = model_flops(spec, seq_len)
    if total <= 0:
        raise ValueError(f"model {spec.name!r} has zero total FLOPs; cannot calibrate")
    return DeviceSpec(name, total / target_total_time_s)


def profile(spec: ModelSpec, client: DeviceSpec, server: DeviceSpec,
            metric: str = "flop") -> list[LayerProfile]:
    """Per-layer profile: resource cost r, device times, boundary sizes.

    Compute times are always FLOP-based; `metric` only selects whether r is
    FLOPs or activation bytes. tau of layer k is the output size of layer
    k-1 (the raw model input for the first layer).
    """
    if metric not in ("flop", "memory"):
        raise ValueError(f"metric must be 'flop' or 'memory', got {metric!r}")
    out = []
    tau = raw_input_bytes(spec)
    for idx, layer in enumerate(spec.layers):
        flops = flop_of_layer(layer, spec.seq_len)
        r = flops if metric == "flop" else memory_of_layer(layer, spec.seq_len)
        out.append(LayerProfile(
            index=idx,
            kind=layer.kind.value,
            r=float(r),
            client_time_s=flops / client.flops_per_s,
            server_time_s=flops / server.flops_per_s,
            tau_bytes=float(tau),
        ))
        tau = output_bytes(layer, spec.seq_len)
    return out


# ---------------------------------------------------------------------------
# serialization


def profile_to_dict(spec: ModelSpec, layers: Sequence[LayerProfile], metric: str) -> dict:
    return {
        "model": spec.name,
        "seq_len": spec.seq_len,
        "metric": metric,
        "layers": [
            {
                "index": p.index,
                "kind": p.kind,
                "r": p.r,
                "client_time_s": p.client_time_s,
                "server_time_s": p.server_time_s,
                "tau_bytes": p.tau_bytes,
            }
            for p in layers
        ],
    }


def profile_from_dict(doc: dict) -> list[LayerProfile]:
    return [
        LayerProfile(
            index=int(d["index"]),
            kind=str(d["kind"]),
            r=float(d["r"]),
            client_time_s=float(d["client_time_s"]),
            server_time_s=float(d["server_time_s"]),
            tau_bytes=float(d["tau_bytes"]),
        )
        for d in doc["layers"]
    ]


def save_profile(path, spec: ModelSpec, layers: Sequence[LayerProfile], metric: str) -> None:
    text = json.dumps(profile_to_dict(spec, layers, metric), indent=2, sort_keys=True)
    Path(path).write_text(text + "\n")


def load_profile(path) -> tuple[dict, list[LayerProfile]]:
    doc = json.loads(Path(path).read_text())
    return doc, profile_from_dict(doc)


def load_model_spec(source: str, seq_len: int) -> ModelSpec:
    """Resolve a preset name or a model-spec JSON file into a ModelSpec.

    The JSON schema mirrors LayerSpec:
    {"name": ..., "layers": [{"kind": "attention", "hidden_dim": 768,
      "heads": 12, "ffn_dim": 0, "out_dim": 0, "seq_divisor": 1,
      "flop_coeffs": [q, l, c], ...}, ...]}
    """
    if source in _PRESETS:
        return build_preset(source, seq_len)
    path = Path(source)
    if not path.exists():
        raise ValueError(f"{source!r} is neither a preset nor a model-spec file")
    doc = json.loads(path.read_text())
    layers = []
    for entry in doc["layers"]:
        kwargs = dict(entry)
        kind = LayerKind(kwargs.pop("kind"))
        for key in ("flop_coeffs", "mem_coeffs"):
            if kwargs.get(key) is not None:
                kwargs[key] = tuple(float(v) for v in kwargs[key])
        layers.append(LayerSpec(kind=kind, **kwargs))
    return ModelSpec(str(doc.get("name", path.stem)), tuple(layers), seq_len)
