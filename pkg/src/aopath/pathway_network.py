"""Trainable pathway layers: projections, shared BiLSTMs, heads, census.

Parameter names (in storage order) for the full model::

    fc_da.{weight,bias}  fc_do.{weight,bias}  fc_a.{weight,bias}  fc_o.{weight,bias}
    lstm_a.{fwd,bwd}.{w_ih,w_hh,b_ih,b_hh}    lstm_o.{fwd,bwd}.{w_ih,w_hh,b_ih,b_hh}
    fc_att.{weight,bias}  fc_t.{weight,bias}  fc_d.{weight,bias}

Only the layers a configuration actually uses are allocated. ``fc_a`` and
``fc_o`` project both text-modality labels and subtitle words; ``lstm_a`` and
``lstm_o`` are shared by subtitle, audio and text sequences.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .aoextractor import PathwayFeatureSet
from .errors import ConfigError, DimensionError, EmptySequenceError
from .lexicon import EMBED_DIM
from .numerics import LSTMParams, Tensor, affine, bilstm

VARIANTS = ("aopath-b", "aopath-s", "atclassifier", "nopaths")


@dataclass(frozen=True)
class PathwayConfig:
    variant: str = "aopath-s"
    feature_dim: int = EMBED_DIM
    proj_dim: int = 8
    lstm_hidden: int = 4
    K: int = 15
    use_actions: bool = True
    use_objects: bool = True
    use_audio_head: bool = False
    use_text_head: bool = True
    use_attention: bool = True

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {', '.join(VARIANTS)}")
        if self.feature_dim <= 0 or self.proj_dim <= 0 or self.lstm_hidden <= 0:
            raise ConfigError("feature_dim, proj_dim and lstm_hidden must be positive")
        if self.K < 1:
            raise ConfigError("K must be at least 1")
        if self.variant == "atclassifier":
            if not (self.use_text_head or self.use_audio_head):
                raise ConfigError("atclassifier needs the text or the audio input")
        elif self.variant == "nopaths":
            pass
        elif not (self.use_actions or self.use_objects or self.use_text_head or self.use_audio_head):
            raise ConfigError("configuration has no live output (all pathways and heads disabled)")

    @classmethod
    def preset(cls, variant: str, **overrides) -> PathwayConfig:
        """Reference sizes: base 256/128, small 8/4; ATClassifier reads D and T."""
        base = {
            "aopath-b": dict(proj_dim=256, lstm_hidden=128),
            "aopath-s": dict(proj_dim=8, lstm_hidden=4),
            "nopaths": dict(proj_dim=8, lstm_hidden=4),
            "atclassifier": dict(use_actions=False, use_objects=False, use_attention=False, use_audio_head=True),
        }
        if variant not in base:
            raise ConfigError(f"unknown variant {variant!r}")
        return cls(variant=variant, **{**base[variant], **overrides})

    @property
    def kinds(self) -> tuple[str, ...]:
        """Enabled pathway kinds (``"a"``, ``"o"``) for the AOPath variants."""
        if self.variant not in ("aopath-b", "aopath-s"):
            return ()
        return tuple(k for k, on in (("a", self.use_actions), ("o", self.use_objects)) if on)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> PathwayConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown pathway config keys: {', '.join(sorted(unknown))}")
        return cls(**d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _affine_shapes(name, out_dim, in_dim):
    return [(f"{name}.weight", (out_dim, in_dim), in_dim), (f"{name}.bias", (out_dim,), in_dim)]


def _lstm_shapes(name, in_dim, hidden):
    out = []
    for direction in ("fwd", "bwd"):
        p = f"{name}.{direction}"
        out += [
            (f"{p}.w_ih", (4 * hidden, in_dim), hidden),
            (f"{p}.w_hh", (4 * hidden, hidden), hidden),
            (f"{p}.b_ih", (4 * hidden,), hidden),
            (f"{p}.b_hh", (4 * hidden,), hidden),
        ]
    return out


def param_layout(cfg: PathwayConfig) -> list[tuple[str, tuple[int, ...], int]]:
    """``(name, shape, fan_in)`` for every parameter the configuration owns."""
    F, P, H = cfg.feature_dim, cfg.proj_dim, cfg.lstm_hidden
    layout = []
    if cfg.variant == "atclassifier":
        return _affine_shapes("fc_t", 1, F)
    if cfg.variant == "nopaths":
        layout += _affine_shapes("fc_da", P, F) + _affine_shapes("fc_a", P, F)
        layout += _lstm_shapes("lstm_a", P, H)
        layout += _affine_shapes("fc_att", 1, 2 * H)
        return layout + _affine_shapes("fc_t", 1, F)
    kinds = cfg.kinds
    for k in kinds:
        layout += _affine_shapes(f"fc_d{k}", P, F)
    for k in kinds:
        layout += _affine_shapes(f"fc_{k}", P, F)
    for k in kinds:
        layout += _lstm_shapes(f"lstm_{k}", P, H)
    if kinds and cfg.use_attention:
        layout += _affine_shapes("fc_att", 1, 2 * H)
    if cfg.use_text_head:
        layout += _affine_shapes("fc_t", 1, F)
    if cfg.use_audio_head:
        layout += _affine_shapes("fc_d", 1, F)
    return layout


def count_params(cfg: PathwayConfig) -> int:
    return sum(int(np.prod(shape)) for _, shape, _ in param_layout(cfg))


def census(cfg: PathwayConfig) -> list[tuple[str, int]]:
    """Per-layer parameter counts, e.g. ``("lstm_a", 448)``, in storage order."""
    rows: OrderedDict[str, int] = OrderedDict()
    for name, shape, _ in param_layout(cfg):
        layer = name.split(".")[0]
        rows[layer] = rows.get(layer, 0) + int(np.prod(shape))
    return list(rows.items())


class ModelParams:
    """Ordered name -> Tensor mapping plus layer accessors."""

    def __init__(self, cfg: PathwayConfig, tensors: dict[str, Tensor]):
        expected = [(n, s) for n, s, _ in param_layout(cfg)]
        got = [(n, t.shape) for n, t in tensors.items()]
        if expected != got:
            raise DimensionError(f"parameter set does not match config layout: {got} vs {expected}")
        self.cfg = cfg
        self.tensors = OrderedDict(tensors)

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def __iter__(self):
        return iter(self.tensors)

    def __len__(self) -> int:
        return len(self.tensors)

    def items(self):
        return self.tensors.items()

    def values(self):
        return self.tensors.values()

    def count(self) -> int:
        return sum(t.data.size for t in self.tensors.values())

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.grad = None

    def copy(self) -> ModelParams:
        return ModelParams(self.cfg, {n: Tensor(t.data.copy(), requires_grad=True, name=n) for n, t in self.items()})

    def affine(self, layer: str) -> tuple[Tensor, Tensor]:
        return self.tensors[f"{layer}.weight"], self.tensors[f"{layer}.bias"]

    def lstm(self, kind: str) -> tuple[LSTMParams, LSTMParams]:
        def one(direction):
            p = f"lstm_{kind}.{direction}"
            return LSTMParams(*(self.tensors[f"{p}.{n}"] for n in ("w_ih", "w_hh", "b_ih", "b_hh")))

        return one("fwd"), one("bwd")


def init_params(cfg: PathwayConfig, seed: int = 0) -> ModelParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias.

    Each tensor draws from its own stream keyed by ``(seed, name)``, so
    toggling an optional layer leaves the other initial values untouched.
    """
    tensors = {}
    for name, shape, fan_in in param_layout(cfg):
        key = int.from_bytes(hashlib.blake2b(name.encode(), digest_size=8).digest(), "little")
        rng = np.random.default_rng([seed, key])
        bound = 1.0 / np.sqrt(fan_in)
        tensors[name] = Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True, name=name)
    return ModelParams(cfg, tensors)


_PROJECTION = {
    ("audio", "action"): "fc_da",
    ("audio", "object"): "fc_do",
    ("text", "action"): "fc_a",
    ("text", "object"): "fc_o",
    ("subtitle", "action"): "fc_a",
    ("subtitle", "object"): "fc_o",
}


def projection_layer(source: str, kind: str) -> str:
    return _PROJECTION[(source, kind)]


def project_pathway(features: PathwayFeatureSet, params: ModelParams) -> Tensor:
    """Apply the pathway's projection row-wise: ``[n, feature_dim] -> [n, proj_dim]``."""
    W, b = params.affine(projection_layer(features.source, features.kind))
    return affine(Tensor(features.vectors), W, b)


def global_representation(seq, kind: str, params: ModelParams, mask=None) -> Tensor:
    """BiLSTM summary ``[..., 2 * lstm_hidden]`` of a projected pathway sequence.

    ``kind`` is ``"action"``/``"a"`` or ``"object"``/``"o"``. ``seq`` is a
    time-major tensor ``[L, ..., proj_dim]`` or a list of steps.
    """
    k = kind[0]
    if (isinstance(seq, Tensor) and seq.shape[0] == 0) or (not isinstance(seq, Tensor) and len(seq) == 0):
        raise EmptySequenceError("pathway sequence is empty; the extractor must supply a sentinel")
    fwd, bwd = params.lstm(k)
    return bilstm(seq, fwd, bwd, mask)
