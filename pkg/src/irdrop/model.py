"""Attention-based Inception U-Net, forward pass only.

Layout for input (7, H, W), default channels::

    enc1  (7x7 conv+BN+ReLU) x2          64 @ H      -> maxpool
    enc2  (7x7 conv+BN+ReLU) x2         128 @ H/2    -> maxpool
    enc3  Inception-A                   256 @ H/4    -> maxpool
    enc4  Inception-B                   512 @ H/8    -> maxpool
    mid   Inception-C                   512 @ H/16
    gatt  global (transformer) attention on the bottleneck
    dec4  deconv x2, concat enc4, Inception-C, CBAM   512 @ H/8
    dec3  deconv x2, concat enc3, Inception-B, CBAM   256 @ H/4
    dec2  deconv x2, concat enc2, Inception-A, CBAM   128 @ H/2
    dec1  deconv x2, concat enc1, (7x7 cbr) x2, CBAM   64 @ H
    head  1x1 conv -> 1 channel

Weights live in a flat ``{name: float32 array}`` dict.  The weights file is
``b"IRWT"``, u16 version, u32-length-prefixed UTF-8 JSON config, then one
record per tensor: u32 name length, name, u8 dtype (0 = f32), u32 ndim,
u32 dims, little-endian f32 payload.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import nn
from .errors import ConfigError, FormatError, ShapeError

DOWNSAMPLINGS = 4
DIVISOR = 2 ** DOWNSAMPLINGS
WEIGHTS_MAGIC = b"IRWT"
WEIGHTS_VERSION = 1


@dataclass(frozen=True)
class TransformerConfig:
    layers: int = 2
    heads: int = 8
    hidden: int = 512
    mlp_ratio: int = 4
    grid: int = 16


@dataclass(frozen=True)
class CbamConfig:
    spatial_kernel: int = 25
    reduction: int = 16


@dataclass(frozen=True)
class ModelConfig:
    in_channels: int = 7
    level_channels: tuple = (64, 128, 256, 512)
    bottleneck_channels: int = 512
    transformer: TransformerConfig = field(default_factory=TransformerConfig)
    cbam: CbamConfig = field(default_factory=CbamConfig)
    a_k: int = 5
    b_k: int = 7
    c_k: int = 3
    stem_kernel: int = 7
    deconv_kernel: int = 2
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "level_channels", tuple(int(c) for c in self.level_channels))

    def validate(self) -> None:
        t, c = self.transformer, self.cbam
        if len(self.level_channels) != DOWNSAMPLINGS:
            raise ConfigError(f"need {DOWNSAMPLINGS} level channel counts, got {self.level_channels}")
        if self.bottleneck_channels != t.hidden:
            raise ConfigError(f"transformer hidden size {t.hidden} must equal bottleneck "
                              f"channels {self.bottleneck_channels}")
        for ch in (*self.level_channels[2:], self.bottleneck_channels):
            if ch % 8:
                raise ConfigError(f"Inception widths must be multiples of 8, got {ch}")
        if self.level_channels[1] % 4:
            raise ConfigError(f"Inception-A width must be a multiple of 4, got {self.level_channels[1]}")
        if min(self.level_channels) < 1 or self.in_channels < 1:
            raise ConfigError("channel counts must be positive")
        if t.hidden % t.heads:
            raise ConfigError(f"hidden size {t.hidden} not divisible by {t.heads} heads")
        if t.layers < 0 or t.grid < 1 or t.mlp_ratio < 1:
            raise ConfigError("invalid transformer settings")
        for name, k in (("cbam.spatial_kernel", c.spatial_kernel), ("a_k", self.a_k),
                        ("b_k", self.b_k), ("c_k", self.c_k), ("stem_kernel", self.stem_kernel)):
            if k < 1 or k % 2 == 0:
                raise ConfigError(f"{name} must be a positive odd integer, got {k}")
        if self.deconv_kernel < 2 or self.deconv_kernel % 2:
            raise ConfigError(f"deconv_kernel must be even, got {self.deconv_kernel}")
        if c.reduction < 1:
            raise ConfigError("cbam.reduction must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["level_channels"] = list(self.level_channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["transformer"] = TransformerConfig(**d.get("transformer", {}))
        d["cbam"] = CbamConfig(**d.get("cbam", {}))
        d["level_channels"] = tuple(d.get("level_channels", (64, 128, 256, 512)))
        return cls(**d)

    def with_changes(self, **kw) -> "ModelConfig":
        return replace(self, **kw)


# -- parameter layout ---------------------------------------------------------
# Each spec is (name, shape, kind); kind picks the initialiser.

def _cbr(specs, prefix, cin, cout, kh, kw=None):
    kw = kh if kw is None else kw
    specs.append((f"{prefix}.w", (cout, cin, kh, kw), "fan_in"))
    for stat, kind in (("gamma", "one"), ("beta", "zero"), ("mean", "zero"), ("var", "one")):
        specs.append((f"{prefix}.bn.{stat}", (cout,), kind))


def _inception_specs(specs, prefix, variant, cin, cout, k):
    q = cout // 4
    if variant == "A":
        _cbr(specs, f"{prefix}.b1", cin, q, 1)
        _cbr(specs, f"{prefix}.b2.0", cin, q, 1)
        _cbr(specs, f"{prefix}.b2.1", q, q, k)
        _cbr(specs, f"{prefix}.b3.0", cin, q, 1)
        _cbr(specs, f"{prefix}.b3.1", q, q, k)
        _cbr(specs, f"{prefix}.b3.2", q, q, k)
    elif variant == "B":
        _cbr(specs, f"{prefix}.b1", cin, q, 1)
        _cbr(specs, f"{prefix}.b2.0", cin, q, 1)
        _cbr(specs, f"{prefix}.b2.1", q, q, 1, k)
        _cbr(specs, f"{prefix}.b2.2", q, q, k, 1)
        _cbr(specs, f"{prefix}.b3.0", cin, q, 1)
        for i, (kh, kw) in enumerate(((k, 1), (1, k), (k, 1), (1, k)), start=1):
            _cbr(specs, f"{prefix}.b3.{i}", q, q, kh, kw)
    elif variant == "C":
        e = cout // 8
        _cbr(specs, f"{prefix}.b1", cin, q, 1)
        _cbr(specs, f"{prefix}.b2.0", cin, q, 1)
        _cbr(specs, f"{prefix}.b2.h", q, e, 1, k)
        _cbr(specs, f"{prefix}.b2.v", q, e, k, 1)
        _cbr(specs, f"{prefix}.b3.0", cin, q, 1)
        _cbr(specs, f"{prefix}.b3.1", q, q, k, 1)
        _cbr(specs, f"{prefix}.b3.2", q, q, 1, k)
        _cbr(specs, f"{prefix}.b3.h", q, e, 1, k)
        _cbr(specs, f"{prefix}.b3.v", q, e, k, 1)
    else:
        raise ConfigError(f"unknown Inception variant {variant!r}")
    _cbr(specs, f"{prefix}.b4", cin, q, 1)


def _transformer_specs(specs, prefix, d, mlp):
    specs.append((f"{prefix}.ln1_g", (d,), "one"))
    specs.append((f"{prefix}.ln1_b", (d,), "zero"))
    for p in ("q", "k", "v", "o"):
        specs.append((f"{prefix}.w{p}", (d, d), "fan_in"))
        specs.append((f"{prefix}.b{p}", (d,), "zero"))
    specs.append((f"{prefix}.ln2_g", (d,), "one"))
    specs.append((f"{prefix}.ln2_b", (d,), "zero"))
    specs.append((f"{prefix}.fc1_w", (mlp, d), "fan_in"))
    specs.append((f"{prefix}.fc1_b", (mlp,), "zero"))
    specs.append((f"{prefix}.fc2_w", (d, mlp), "fan_in"))
    specs.append((f"{prefix}.fc2_b", (d,), "zero"))


def _cbam_specs(specs, prefix, c, cfg: CbamConfig):
    hidden = max(1, c // cfg.reduction)
    specs.append((f"{prefix}.fc1_w", (hidden, c), "fan_in"))
    specs.append((f"{prefix}.fc2_w", (c, hidden), "fan_in"))
    k = cfg.spatial_kernel
    specs.append((f"{prefix}.spatial_w", (1, 2, k, k), "fan_in"))


def param_specs(cfg: ModelConfig) -> list:
    cfg.validate()
    c1, c2, c3, c4 = cfg.level_channels
    cb = cfg.bottleneck_channels
    k = cfg.stem_kernel
    t = cfg.transformer
    specs = []
    _cbr(specs, "enc1.0", cfg.in_channels, c1, k)
    _cbr(specs, "enc1.1", c1, c1, k)
    _cbr(specs, "enc2.0", c1, c2, k)
    _cbr(specs, "enc2.1", c2, c2, k)
    _inception_specs(specs, "enc3", "A", c2, c3, cfg.a_k)
    _inception_specs(specs, "enc4", "B", c3, c4, cfg.b_k)
    _inception_specs(specs, "mid", "C", c4, cb, cfg.c_k)
    specs.append(("gatt.pos", (t.grid * t.grid, t.hidden), "pos"))
    for i in range(t.layers):
        _transformer_specs(specs, f"gatt.layer{i}", t.hidden, t.hidden * t.mlp_ratio)
    dk = cfg.deconv_kernel
    stages = (("dec4", cb, c4, "C", cfg.c_k), ("dec3", c4, c3, "B", cfg.b_k),
              ("dec2", c3, c2, "A", cfg.a_k), ("dec1", c2, c1, None, k))
    for name, cin, cout, variant, kk in stages:
        specs.append((f"{name}.up.w", (cin, cout, dk, dk), "fan_in_t"))
        specs.append((f"{name}.up.b", (cout,), "zero"))
        if variant is None:
            _cbr(specs, f"{name}.0", 2 * cout, cout, kk)
            _cbr(specs, f"{name}.1", cout, cout, kk)
        else:
            _inception_specs(specs, name, variant, 2 * cout, cout, kk)
        _cbam_specs(specs, f"{name}.cbam", cout, cfg.cbam)
    specs.append(("head.w", (1, c1, 1, 1), "fan_in"))
    specs.append(("head.b", (1,), "zero"))
    return specs


@dataclass
class Model:
    config: ModelConfig
    params: dict

    @property
    def parameter_count(self) -> int:
        return int(sum(a.size for a in self.params.values()))

    def forward(self, x):
        return forward(self, x)


def build_model(config: ModelConfig | None = None, seed: int | None = None) -> Model:
    """Initialise every tensor from one seeded stream, in layout order.

    Weights draw from U(-1/sqrt(fan_in), 1/sqrt(fan_in)); norm scales start at
    1, shifts, biases and running means at 0, the positional embedding from
    U(-0.02, 0.02).
    """
    config = config or ModelConfig()
    if seed is not None:
        config = config.with_changes(seed=seed)
    specs = param_specs(config)
    rng = np.random.default_rng(config.seed)
    params = {}
    for name, shape, kind in specs:
        if kind in ("fan_in", "fan_in_t"):
            fan_in = int(np.prod(shape)) // shape[0] if kind == "fan_in" else \
                int(np.prod(shape)) // shape[1]
            bound = 1.0 / np.sqrt(fan_in)
            a = rng.uniform(-bound, bound, size=shape)
        elif kind == "pos":
            a = rng.uniform(-0.02, 0.02, size=shape)
        elif kind == "one":
            a = np.ones(shape)
        else:
            a = np.zeros(shape)
        params[name] = a.astype(np.float32)
    return Model(config, params)


# -- blocks -------------------------------------------------------------------

def _apply_cbr(p, prefix, x):
    y = nn.conv2d(x, p[f"{prefix}.w"], padding="same")
    y = nn.batchnorm(y, p[f"{prefix}.bn.gamma"], p[f"{prefix}.bn.beta"],
                     p[f"{prefix}.bn.mean"], p[f"{prefix}.bn.var"])
    return nn.relu(y)


def inception_forward(x, variant: str, params: dict, prefix: str):
    """One Inception block; branches are concatenated along channels."""
    p = params
    b1 = _apply_cbr(p, f"{prefix}.b1", x)
    b4 = _apply_cbr(p, f"{prefix}.b4", nn.avgpool3(x))
    if variant == "A":
        b2 = _apply_cbr(p, f"{prefix}.b2.1", _apply_cbr(p, f"{prefix}.b2.0", x))
        b3 = x
        for i in range(3):
            b3 = _apply_cbr(p, f"{prefix}.b3.{i}", b3)
        branches = [b1, b2, b3, b4]
    elif variant == "B":
        b2 = x
        for i in range(3):
            b2 = _apply_cbr(p, f"{prefix}.b2.{i}", b2)
        b3 = x
        for i in range(5):
            b3 = _apply_cbr(p, f"{prefix}.b3.{i}", b3)
        branches = [b1, b2, b3, b4]
    elif variant == "C":
        s2 = _apply_cbr(p, f"{prefix}.b2.0", x)
        s3 = x
        for i in range(3):
            s3 = _apply_cbr(p, f"{prefix}.b3.{i}", s3)
        branches = [b1,
                    _apply_cbr(p, f"{prefix}.b2.h", s2), _apply_cbr(p, f"{prefix}.b2.v", s2),
                    _apply_cbr(p, f"{prefix}.b3.h", s3), _apply_cbr(p, f"{prefix}.b3.v", s3),
                    b4]
    else:
        raise ConfigError(f"unknown Inception variant {variant!r}")
    return np.concatenate(branches, axis=0)


def _layer_params(params, prefix):
    n = len(prefix) + 1
    return {k[n:]: v for k, v in params.items() if k.startswith(prefix + ".")}


def global_attention_forward(x, params: dict, config: ModelConfig, prefix: str = "gatt"):
    """Resize to a fixed token grid, run the transformer, add its update back.

    The block adds ``resize(T(z) - z)`` to ``x``, where ``z`` are the tokens
    with positional embedding and ``T`` the transformer stack, so zeroed
    output projections make the block an exact identity.
    """
    t = config.transformer
    c, h, w = x.shape
    if c != t.hidden:
        raise ShapeError(f"global attention expects {t.hidden} channels, got {c}")
    g = t.grid
    small = nn.bicubic_resize(x, g, g)
    z = small.reshape(c, g * g).T + params[f"{prefix}.pos"]
    y = z
    for i in range(t.layers):
        y = nn.mhsa_block(y, _layer_params(params, f"{prefix}.layer{i}"), t.heads)
    delta = (y - z).T.reshape(c, g, g)
    return x + nn.bicubic_resize(delta, h, w)


def local_attention_forward(x, params: dict, prefix: str):
    """CBAM (channel gate, then spatial gate) with a residual: ``x + CBAM(x)``."""
    p = params
    fc1, fc2 = p[f"{prefix}.fc1_w"], p[f"{prefix}.fc2_w"]
    if fc1.shape[1] != x.shape[0]:
        raise ShapeError(f"CBAM expects {fc1.shape[1]} channels, got {x.shape[0]}")

    def mlp(v):
        return fc2 @ nn.relu(fc1 @ v)

    gate_c = nn.sigmoid(mlp(nn.channel_avg(x)) + mlp(nn.channel_max(x)))
    xc = x * gate_c[:, None, None]
    pooled = np.concatenate([nn.spatial_avg(xc), nn.spatial_max(xc)], axis=0)
    gate_s = nn.sigmoid(nn.conv2d(pooled, p[f"{prefix}.spatial_w"], padding="same"))
    return x + xc * gate_s


def forward(model: Model, x) -> np.ndarray:
    """Predict a (1, H, W) map from (in_channels, H, W); H and W must divide by 16."""
    cfg, p = model.config, model.params
    x = np.asarray(x)
    if x.ndim != 3 or x.shape[0] != cfg.in_channels:
        raise ShapeError(f"expected ({cfg.in_channels}, H, W) input, got {x.shape}")
    _, h, w = x.shape
    if h % DIVISOR or w % DIVISOR:
        raise ShapeError(f"input {h}x{w} is not divisible by {DIVISOR}; pad it first with "
                         "irdrop.augment.adjust (e.g. pad-corner-tl)")
    x = x.astype(np.float32)

    e1 = _apply_cbr(p, "enc1.1", _apply_cbr(p, "enc1.0", x))
    e2 = _apply_cbr(p, "enc2.1", _apply_cbr(p, "enc2.0", nn.maxpool2(e1)))
    e3 = inception_forward(nn.maxpool2(e2), "A", p, "enc3")
    e4 = inception_forward(nn.maxpool2(e3), "B", p, "enc4")
    y = inception_forward(nn.maxpool2(e4), "C", p, "mid")
    y = global_attention_forward(y, p, cfg)

    for name, skip, variant in (("dec4", e4, "C"), ("dec3", e3, "B"), ("dec2", e2, "A"),
                                ("dec1", e1, None)):
        y = nn.deconv2d_x2(y, p[f"{name}.up.w"], p[f"{name}.up.b"])
        y = np.concatenate([y, skip], axis=0)
        if variant is None:
            y = _apply_cbr(p, f"{name}.1", _apply_cbr(p, f"{name}.0", y))
        else:
            y = inception_forward(y, variant, p, name)
        y = local_attention_forward(y, p, f"{name}.cbam")

    return nn.conv2d(y, p["head.w"], p["head.b"], padding="same")


# -- weights file -------------------------------------------------------------

def save(model: Model, path) -> None:
    cfg = json.dumps(model.config.to_dict(), sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(WEIGHTS_MAGIC)
        f.write(struct.pack("<HI", WEIGHTS_VERSION, len(cfg)))
        f.write(cfg)
        for name, arr in model.params.items():
            key = name.encode("utf-8")
            f.write(struct.pack("<I", len(key)))
            f.write(key)
            f.write(struct.pack("<BI", 0, arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


class _Reader:
    def __init__(self, buf):
        self.buf, self.pos = buf, 0

    def take(self, n, what):
        if self.pos + n > len(self.buf):
            raise FormatError(f"truncated weights file while reading {what}")
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def load(path) -> Model:
    with open(path, "rb") as f:
        r = _Reader(f.read())
    if r.take(4, "magic") != WEIGHTS_MAGIC:
        raise FormatError("not an IRWT weights file (bad magic)")
    version, cfg_len = r.unpack("<HI", "header")
    if version != WEIGHTS_VERSION:
        raise FormatError(f"unsupported weights version {version}")
    try:
        config = ModelConfig.from_dict(json.loads(r.take(cfg_len, "config").decode("utf-8")))
    except (ValueError, TypeError) as exc:
        raise FormatError(f"bad config block: {exc}") from None
    try:
        expected = {name: shape for name, shape, _ in param_specs(config)}
    except ConfigError as exc:
        raise FormatError(f"invalid config in weights file: {exc}") from None
    params = {}
    while r.pos < len(r.buf):
        (n,) = r.unpack("<I", "tensor name length")
        name = r.take(n, "tensor name").decode("utf-8")
        dtype, ndim = r.unpack("<BI", f"header of {name}")
        if dtype != 0:
            raise FormatError(f"tensor {name}: unsupported dtype code {dtype}")
        shape = r.unpack(f"<{ndim}I", f"shape of {name}")
        count = int(np.prod(shape)) if ndim else 1
        payload = r.take(4 * count, f"data of {name}")
        if name not in expected:
            raise FormatError(f"unexpected tensor {name!r} for this config")
        if tuple(shape) != tuple(expected[name]):
            raise FormatError(f"tensor {name!r} has shape {tuple(shape)}, config expects "
                              f"{tuple(expected[name])}")
        params[name] = np.frombuffer(payload, dtype="<f4").reshape(shape).astype(np.float32)
    missing = [n for n in expected if n not in params]
    if missing:
        raise FormatError(f"weights file lacks {len(missing)} tensor(s), first {missing[0]!r}")
    return Model(config, {n: params[n] for n in expected})
