"""SE-VGG11 + LSTM network: configuration, wiring, forward and backward.

The stack is five convolutional parts (ReLU after every conv, an optional
SE block at the end of a part, then a max pool), an LSTM whose last hidden
state feeds a three-layer dense head, and a softmax.  Layer objects are
stateless descriptors; parameters live in an ordered name -> array dict and
activations travel through explicit caches, so a built model can serve
concurrent readers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .lstm import lstm_backward, lstm_forward
from .validation import as_batch

DEFAULT_CONV_PARTS = ((1, 64), (1, 128), (2, 256), (2, 512), (2, 512))
POOL_WINDOW = 2
POOL_STRIDE = 2


@dataclass(frozen=True)
class ModelConfig:
    input_len: int
    num_classes: int
    conv_parts: tuple = DEFAULT_CONV_PARTS
    kernel_len: int = 3
    se_positions: tuple = (4, 5)
    se_reduction: int = 16
    lstm_hidden: int = 128
    fc_sizes: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "conv_parts", tuple((int(n), int(c)) for n, c in self.conv_parts))
        object.__setattr__(self, "se_positions", tuple(sorted(int(p) for p in self.se_positions)))
        fc = self.fc_sizes
        if fc is None:
            fc = (256, 64, self.num_classes)
        object.__setattr__(self, "fc_sizes", tuple(int(w) for w in fc))
        self._validate()

    def _validate(self):
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        if len(self.conv_parts) != 5:
            raise ValueError(f"conv_parts must have exactly 5 parts, got {len(self.conv_parts)}")
        for count, channels in self.conv_parts:
            if count < 1 or channels < 1:
                raise ValueError(f"bad conv part ({count}, {channels})")
        if self.kernel_len < 1:
            raise ValueError("kernel_len must be >= 1")
        for p in self.se_positions:
            if not 1 <= p <= 5:
                raise ValueError(f"se position {p} outside parts 1..5")
        if self.se_reduction < 1:
            raise ValueError("se_reduction must be >= 1")
        for p in self.se_positions:
            channels = self.conv_parts[p - 1][1]
            if channels % self.se_reduction != 0:
                raise ValueError(
                    f"part {p} has {channels} channels, not divisible by reduction "
                    f"{self.se_reduction}"
                )
        if self.lstm_hidden < 1:
            raise ValueError("lstm_hidden must be >= 1")
        if len(self.fc_sizes) != 3:
            raise ValueError(f"fc_sizes must have exactly 3 entries, got {len(self.fc_sizes)}")
        if self.fc_sizes[-1] != self.num_classes:
            raise ValueError(
                f"last fc size {self.fc_sizes[-1]} must equal num_classes {self.num_classes}"
            )
        if self.input_len < 2**5:
            raise ValueError(f"input_len {self.input_len} too short for five stride-2 pools")
        # Every pool must see at least one full window.
        length = self.input_len
        for _ in range(5):
            if length < POOL_WINDOW:
                raise ValueError(f"input_len {self.input_len} too short for five pools")
            length = (length - POOL_WINDOW) // POOL_STRIDE + 1


# --- canonical text serialization (shared by checkpoints and run configs) ---

_CONFIG_KEYS = (
    "input_len",
    "num_classes",
    "conv_parts",
    "kernel_len",
    "se_positions",
    "se_reduction",
    "lstm_hidden",
    "fc_sizes",
)


def config_to_text(cfg):
    parts = ",".join(f"{n}x{c}" for n, c in cfg.conv_parts)
    values = {
        "input_len": str(cfg.input_len),
        "num_classes": str(cfg.num_classes),
        "conv_parts": parts,
        "kernel_len": str(cfg.kernel_len),
        "se_positions": ",".join(str(p) for p in cfg.se_positions),
        "se_reduction": str(cfg.se_reduction),
        "lstm_hidden": str(cfg.lstm_hidden),
        "fc_sizes": ",".join(str(w) for w in cfg.fc_sizes),
    }
    return "".join(f"{k} = {values[k]}\n" for k in _CONFIG_KEYS)


def parse_conv_parts(text):
    parts = []
    for item in text.split(","):
        item = item.strip()
        count, _, channels = item.partition("x")
        try:
            parts.append((int(count), int(channels)))
        except ValueError:
            raise ValueError(f"bad conv part spec {item!r}, expected e.g. 2x256") from None
    return tuple(parts)


def _parse_int_tuple(text):
    text = text.strip()
    if not text:
        return ()
    return tuple(int(v) for v in text.split(","))


def config_from_mapping(kv):
    """Build a ModelConfig from a key -> string mapping (all keys required)."""
    missing = [k for k in _CONFIG_KEYS if k not in kv]
    if missing:
        raise ValueError(f"model config missing keys: {missing}")
    return ModelConfig(
        input_len=int(kv["input_len"]),
        num_classes=int(kv["num_classes"]),
        conv_parts=parse_conv_parts(kv["conv_parts"]),
        kernel_len=int(kv["kernel_len"]),
        se_positions=_parse_int_tuple(kv["se_positions"]),
        se_reduction=int(kv["se_reduction"]),
        lstm_hidden=int(kv["lstm_hidden"]),
        fc_sizes=_parse_int_tuple(kv["fc_sizes"]),
    )


def parse_key_values(text, source="config"):
    """Parse canonical ``key = value`` text with ``#`` comments."""
    kv = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ValueError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key = key.strip()
        if key in kv:
            raise ValueError(f"{source}:{lineno}: duplicate key {key!r}")
        kv[key] = value.strip()
    return kv


# ---------------------------------------------------------------------------
# layer descriptors


class _Conv:
    kind = "conv"

    def __init__(self, name, c_in, c_out, kernel_len):
        self.name = name
        self.c_in = c_in
        self.c_out = c_out
        self.kernel_len = kernel_len

    def param_shapes(self):
        return {f"{self.name}.w": (self.c_out, self.c_in, self.kernel_len), f"{self.name}.b": (self.c_out,)}

    def init_params(self, rng, dtype):
        # fan-in-scaled uniform; the He gain keeps activation variance stable
        # through the relu stack, the bias stays at the classic 1/sqrt scale
        fan_in = self.c_in * self.kernel_len
        w_limit = np.sqrt(6.0 / fan_in)
        b_limit = 1.0 / np.sqrt(fan_in)
        return {
            f"{self.name}.w": rng.uniform(-w_limit, w_limit, (self.c_out, self.c_in, self.kernel_len)).astype(dtype),
            f"{self.name}.b": rng.uniform(-b_limit, b_limit, self.c_out).astype(dtype),
        }

    def output_shape(self, shape):
        return (self.c_out, shape[1])

    def forward(self, x, params):
        return nn.conv1d_forward(x, params[f"{self.name}.w"], params[f"{self.name}.b"])

    def backward(self, grad_out, cache, params, grads):
        grad_x, grad_w, grad_b = nn.conv1d_backward(grad_out, cache)
        grads[f"{self.name}.w"] = grad_w
        grads[f"{self.name}.b"] = grad_b
        return grad_x


class _Relu:
    kind = "relu"

    def param_shapes(self):
        return {}

    def init_params(self, rng, dtype):
        return {}

    def output_shape(self, shape):
        return shape

    def forward(self, x, params):
        return nn.relu(x), x

    def backward(self, grad_out, cache, params, grads):
        return nn.relu_backward(cache, grad_out)


class _Pool:
    kind = "pool"

    def param_shapes(self):
        return {}

    def init_params(self, rng, dtype):
        return {}

    def output_shape(self, shape):
        return (shape[0], (shape[1] - POOL_WINDOW) // POOL_STRIDE + 1)

    def forward(self, x, params):
        out, idx = nn.maxpool1d(x, POOL_WINDOW, POOL_STRIDE)
        return out, (idx, x.shape)

    def backward(self, grad_out, cache, params, grads):
        idx, x_shape = cache
        return nn.maxpool1d_backward(grad_out, idx, x_shape)


class _Se:
    kind = "se"

    def __init__(self, name, channels, reduction):
        self.name = name
        self.channels = channels
        self.reduced = channels // reduction

    def param_shapes(self):
        return {
            f"{self.name}.w1": (self.reduced, self.channels),
            f"{self.name}.w2": (self.channels, self.reduced),
        }

    def init_params(self, rng, dtype):
        lim1 = 1.0 / np.sqrt(self.channels)
        lim2 = 1.0 / np.sqrt(self.reduced)
        return {
            f"{self.name}.w1": rng.uniform(-lim1, lim1, (self.reduced, self.channels)).astype(dtype),
            f"{self.name}.w2": rng.uniform(-lim2, lim2, (self.channels, self.reduced)).astype(dtype),
        }

    def output_shape(self, shape):
        return shape

    def forward(self, x, params):
        return nn.se_block_forward(x, params[f"{self.name}.w1"], params[f"{self.name}.w2"])

    def backward(self, grad_out, cache, params, grads):
        grad_x, grad_w1, grad_w2 = nn.se_block_backward(grad_out, cache)
        grads[f"{self.name}.w1"] = grad_w1
        grads[f"{self.name}.w2"] = grad_w2
        return grad_x


class _Lstm:
    kind = "lstm"

    def __init__(self, name, features, hidden):
        self.name = name
        self.features = features
        self.hidden = hidden

    def param_shapes(self):
        return {
            f"{self.name}.wx": (4 * self.hidden, self.features),
            f"{self.name}.wh": (4 * self.hidden, self.hidden),
            f"{self.name}.b": (4 * self.hidden,),
        }

    def init_params(self, rng, dtype):
        lim_x = 1.0 / np.sqrt(self.features)
        lim_h = 1.0 / np.sqrt(self.hidden)
        b = np.zeros(4 * self.hidden, dtype=dtype)
        b[self.hidden : 2 * self.hidden] = 1.0  # forget gate starts open
        return {
            f"{self.name}.wx": rng.uniform(-lim_x, lim_x, (4 * self.hidden, self.features)).astype(dtype),
            f"{self.name}.wh": rng.uniform(-lim_h, lim_h, (4 * self.hidden, self.hidden)).astype(dtype),
            f"{self.name}.b": b,
        }

    def output_shape(self, shape):
        return (self.hidden,)

    def forward(self, x, params):
        _, h_last, cache = lstm_forward(
            x, params[f"{self.name}.wx"], params[f"{self.name}.wh"], params[f"{self.name}.b"]
        )
        return h_last, cache

    def backward(self, grad_out, cache, params, grads):
        grad_x, grad_wx, grad_wh, grad_b = lstm_backward(None, grad_out, cache)
        grads[f"{self.name}.wx"] = grad_wx
        grads[f"{self.name}.wh"] = grad_wh
        grads[f"{self.name}.b"] = grad_b
        return grad_x


class _Dense:
    kind = "dense"

    def __init__(self, name, n_in, n_out):
        self.name = name
        self.n_in = n_in
        self.n_out = n_out

    def param_shapes(self):
        return {f"{self.name}.w": (self.n_out, self.n_in), f"{self.name}.b": (self.n_out,)}

    def init_params(self, rng, dtype):
        w_limit = np.sqrt(6.0 / self.n_in)
        b_limit = 1.0 / np.sqrt(self.n_in)
        return {
            f"{self.name}.w": rng.uniform(-w_limit, w_limit, (self.n_out, self.n_in)).astype(dtype),
            f"{self.name}.b": rng.uniform(-b_limit, b_limit, self.n_out).astype(dtype),
        }

    def output_shape(self, shape):
        return (self.n_out,)

    def forward(self, x, params):
        return nn.dense_forward(x, params[f"{self.name}.w"], params[f"{self.name}.b"])

    def backward(self, grad_out, cache, params, grads):
        grad_x, grad_w, grad_b = nn.dense_backward(grad_out, cache)
        grads[f"{self.name}.w"] = grad_w
        grads[f"{self.name}.b"] = grad_b
        return grad_x


def _wire(cfg):
    layers = []
    c_in = 1
    conv_idx = 0
    for part, (count, channels) in enumerate(cfg.conv_parts, start=1):
        for _ in range(count):
            conv_idx += 1
            layers.append(_Conv(f"conv{conv_idx}", c_in, channels, cfg.kernel_len))
            layers.append(_Relu())
            c_in = channels
        if part in cfg.se_positions:
            layers.append(_Se(f"se{part}", channels, cfg.se_reduction))
        layers.append(_Pool())
    layers.append(_Lstm("lstm", c_in, cfg.lstm_hidden))
    n_in = cfg.lstm_hidden
    for i, width in enumerate(cfg.fc_sizes, start=1):
        layers.append(_Dense(f"fc{i}", n_in, width))
        if i < len(cfg.fc_sizes):
            layers.append(_Relu())
        n_in = width
    return layers


def trace_shapes(cfg):
    """Per-layer output shapes (without batch dim), inferred without running."""
    layers = _wire(cfg)
    shape = (1, cfg.input_len)
    trace = []
    for layer in layers:
        shape = layer.output_shape(shape)
        trace.append((getattr(layer, "name", layer.kind), shape))
    trace.append(("softmax", shape))
    return trace


@dataclass
class GradBundle:
    """Input gradient plus per-parameter gradients from one backward pass."""

    input_grad: np.ndarray
    param_grads: dict = field(default_factory=dict)


class SevggLstm:
    """The assembled network: immutable wiring plus an ordered parameter dict."""

    def __init__(self, config, params):
        self.config = config
        self.layers = _wire(config)
        expected = {}
        for layer in self.layers:
            expected.update(layer.param_shapes())
        if list(params) != list(expected):
            raise ValueError("parameter names do not match the configured architecture")
        for name, shape in expected.items():
            if params[name].shape != shape:
                raise ValueError(f"parameter {name} has shape {params[name].shape}, expected {shape}")
        self.params = params

    @classmethod
    def build(cls, config, seed, dtype=np.float32):
        """Deterministically initialize all parameters from ``seed``."""
        rng = np.random.default_rng(seed)
        params = {}
        for layer in _wire(config):
            params.update(layer.init_params(rng, dtype))
        return cls(config, params)

    @property
    def dtype(self):
        return next(iter(self.params.values())).dtype

    def astype(self, dtype):
        return SevggLstm(self.config, {k: v.astype(dtype) for k, v in self.params.items()})

    def copy_params(self):
        return {k: v.copy() for k, v in self.params.items()}

    def layer_census(self):
        counts = {}
        for layer in self.layers:
            if layer.kind != "relu":
                counts[layer.kind] = counts.get(layer.kind, 0) + 1
        return counts

    def count_parameters(self):
        return int(sum(v.size for v in self.params.values()))

    def forward(self, batch, return_caches=False):
        """Class probabilities for a (B, 1, input_len) batch.

        With ``return_caches`` the per-layer caches needed by ``backward``
        are returned too; pure inference skips them.
        """
        x = as_batch(batch, self.config.input_len).astype(self.dtype, copy=False)
        caches = [] if return_caches else None
        for layer in self.layers:
            x, cache = layer.forward(x, self.params)
            if caches is not None:
                caches.append(cache)
        probs = nn.softmax(x)
        if caches is not None:
            return probs, caches
        return probs

    def backward(self, grad_logits, caches):
        """Walk the layers in reverse from d(loss)/d(logits)."""
        grads = {}
        g = grad_logits
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            g = layer.backward(g, cache, self.params, grads)
        return GradBundle(input_grad=g, param_grads=grads)

    def loss_and_grads(self, batch, labels):
        """Cross-entropy loss and parameter gradients for one batch."""
        probs, caches = self.forward(batch, return_caches=True)
        loss, grad_logits = nn.cross_entropy(probs, labels)
        bundle = self.backward(grad_logits, caches)
        return loss, bundle

    def predict_proba(self, x, batch_size=256):
        """Batched inference over (n, input_len) rows."""
        x = np.asarray(x)
        if x.ndim == 2:
            x = x[:, None, :]
        chunks = [
            self.forward(x[i : i + batch_size]) for i in range(0, x.shape[0], batch_size)
        ]
        return np.concatenate(chunks, axis=0)

    def predict(self, x, batch_size=256):
        return self.predict_proba(x, batch_size).argmax(axis=1)


def build_model(config, seed, dtype=np.float32):
    return SevggLstm.build(config, seed, dtype)
