"""Network assembly: pyramidal stack, dense layers, softmax head.

Parameters are kept per layer; ``Network.tensors()`` lists them in declaration
order (each pyramidal layer's weights then biases, then each dense layer's
weights then biases).  Gradient sets are plain lists congruent with that order.
Between the last pyramidal layer and the first dense layer the feature map is
flattened sub-layer-major, then row-major (C order of ``(S, H, W)``).
"""

import io
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .activations import (
    Activation,
    activation_derivative,
    apply_activation,
    as_real,
    softmax,
    softmax_xent,
)
from .errors import GeometryMismatch, ShapeMismatch
from .pyramidal import (
    LayerCache,
    PyramidalLayerSpec,
    PyramidalParams,
    backprop_sensitivity,
    pyramidal_forward,
    weight_gradients,
)
from .rng import SplitMix64

MAGIC = b"HPNN"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class DenseLayerSpec:
    units: int
    activation: Activation = Activation.TANH

    def __post_init__(self):
        if self.units < 1:
            raise GeometryMismatch("dense layer needs at least one unit")
        object.__setattr__(self, "activation", Activation(self.activation))


@dataclass
class DenseParams:
    """weights: ``(units, fan_in)``; biases: ``(units,)``."""

    weights: np.ndarray
    biases: np.ndarray


@dataclass(frozen=True)
class NetworkSpec:
    input_height: int
    input_width: int
    pyramidal: tuple = ()
    dense: tuple = ()
    bias_per_neuron: bool = True

    def __post_init__(self):
        object.__setattr__(self, "pyramidal", tuple(self.pyramidal))
        object.__setattr__(self, "dense", tuple(self.dense))

    def feature_shapes(self) -> list[tuple[int, int, int]]:
        """Shapes ``(S, H, W)`` from the input image through every pyramidal layer."""
        if self.input_height < 1 or self.input_width < 1:
            raise GeometryMismatch("input size must be positive")
        shapes = [(1, self.input_height, self.input_width)]
        for n, layer in enumerate(self.pyramidal):
            _, h, w = shapes[-1]
            try:
                oh, ow = layer.output_shape(h, w)
            except GeometryMismatch as exc:
                raise GeometryMismatch(f"pyramidal layer {n + 1}: {exc}") from None
            shapes.append((layer.sublayers, oh, ow))
        return shapes

    def flat_size(self) -> int:
        return math.prod(self.feature_shapes()[-1])

    @property
    def num_classes(self) -> int:
        return self.dense[-1].units if self.dense else self.flat_size()

    def validate(self) -> None:
        self.feature_shapes()


@dataclass
class Network:
    spec: NetworkSpec
    pyramidal: list = field(default_factory=list)
    dense: list = field(default_factory=list)

    def tensors(self) -> list[np.ndarray]:
        out = []
        for p in self.pyramidal + self.dense:
            out += [p.weights, p.biases]
        return out

    def copy(self) -> "Network":
        return Network(
            self.spec,
            [PyramidalParams(p.weights.copy(), p.biases.copy()) for p in self.pyramidal],
            [DenseParams(p.weights.copy(), p.biases.copy()) for p in self.dense],
        )

    @property
    def num_params(self) -> int:
        return sum(t.size for t in self.tensors())


def param_shapes(spec: NetworkSpec) -> list[tuple[str, tuple, tuple]]:
    """``(layer name, weight shape, bias shape)`` for every layer."""
    shapes = spec.feature_shapes()
    rows = []
    for n, layer in enumerate(spec.pyramidal):
        k, h, w = shapes[n]
        s, oh, ow = shapes[n + 1]
        bias = (s, oh, ow) if spec.bias_per_neuron else (s,)
        rows.append((f"pyramidal{n + 1}", (s, k, h, w), bias))
    fan_in = math.prod(shapes[-1])
    for n, layer in enumerate(spec.dense):
        rows.append((f"dense{n + 1}", (layer.units, fan_in), (layer.units,)))
        fan_in = layer.units
    return rows


@dataclass
class ParamCount:
    rows: list  # (layer, weights, biases, total)
    total: int


def count_params(spec: NetworkSpec) -> ParamCount:
    rows = []
    for name, wshape, bshape in param_shapes(spec):
        nw, nb = math.prod(wshape), math.prod(bshape)
        rows.append((name, nw, nb, nw + nb))
    return ParamCount(rows, sum(r[3] for r in rows))


def init_params(spec: NetworkSpec, seed: int) -> Network:
    """Glorot-uniform weights, zero biases, fully determined by ``seed``.

    Each weight tensor is drawn from U[-a, a] with a = sqrt(6 / (fan_in + fan_out)).
    For a pyramidal layer, fan_in = r*r*K (inputs feeding one output neuron) and
    fan_out = S * r*r * H_out*W_out / (H_in*W_in), i.e. the output sub-layer
    count times the mean number of fields covering an input neuron.  Dense
    layers use their input and unit counts.
    """
    rng = SplitMix64(seed)
    shapes = spec.feature_shapes()
    net = Network(spec)
    for n, (layer, (_, wshape, bshape)) in enumerate(zip(spec.pyramidal, param_shapes(spec))):
        k, h, w = shapes[n]
        s, oh, ow = shapes[n + 1]
        r = layer.field_size
        fan_in = r * r * k
        fan_out = s * r * r * oh * ow / (h * w)
        a = math.sqrt(6.0 / (fan_in + fan_out))
        weights = rng.uniform(-a, a, math.prod(wshape)).reshape(wshape)
        net.pyramidal.append(PyramidalParams(weights, np.zeros(bshape)))
    for _, wshape, bshape in param_shapes(spec)[len(spec.pyramidal) :]:
        units, fan_in = wshape
        a = math.sqrt(6.0 / (fan_in + units))
        weights = rng.uniform(-a, a, units * fan_in).reshape(wshape)
        net.dense.append(DenseParams(weights, np.zeros(bshape)))
    return net


def dense_forward(x, params: DenseParams, kind: Activation) -> LayerCache:
    """Affine map plus activation on ``(fan_in,)`` or ``(B, fan_in)`` inputs."""
    x = as_real(x)
    if x.shape[-1] != params.weights.shape[1]:
        raise ShapeMismatch(f"input size {x.shape[-1]} != fan_in {params.weights.shape[1]}")
    pre = x @ params.weights.T + params.biases
    return LayerCache(x, pre, apply_activation(pre, kind))


def dense_backward(
    delta_out,
    cache: LayerCache,
    params: DenseParams,
    prev_pre=None,
    prev_activation: Activation = Activation.IDENTITY,
):
    """Returns ``(delta_in, DenseParams of gradients)``.

    ``delta_out`` is dE/d(pre-activation) of this layer; ``delta_in`` is the
    same quantity for the previous layer (or dE/d(input) when ``prev_pre`` is
    None).  Gradients are summed over a leading batch axis.
    """
    delta = as_real(delta_out)
    if delta.shape != cache.pre_activation.shape:
        raise ShapeMismatch(f"delta {delta.shape} != layer output {cache.pre_activation.shape}")
    d2 = np.atleast_2d(delta)
    x2 = np.atleast_2d(cache.input)
    grads = DenseParams(d2.T @ x2, d2.sum(axis=0))
    back = delta @ params.weights
    if prev_pre is not None:
        back = back * activation_derivative(prev_pre, prev_activation)
    return back, grads


@dataclass
class ForwardCache:
    pyramidal: list
    dense: list
    logits: np.ndarray
    probs: np.ndarray


def network_forward(net: Network, image) -> ForwardCache:
    """Forward pass for one image ``(1, H, W)`` or a batch ``(B, 1, H, W)``."""
    x = as_real(image)
    spec = net.spec
    expected = (1, spec.input_height, spec.input_width)
    single = x.ndim == 3
    xb = x[None] if single else x
    if xb.ndim != 4 or xb.shape[1:] != expected:
        raise ShapeMismatch(f"image shape {x.shape} does not match network input {expected}")
    pyr = []
    h = xb
    for layer, params in zip(spec.pyramidal, net.pyramidal):
        c = pyramidal_forward(h, layer, params)
        pyr.append(c)
        h = c.output
    flat = h.reshape(h.shape[0], -1)
    dense = []
    for layer, params in zip(spec.dense, net.dense):
        c = dense_forward(flat, params, layer.activation)
        dense.append(c)
        flat = c.output
    logits = flat
    probs = softmax(logits)
    if single:
        logits, probs = logits[0], probs[0]
    return ForwardCache(pyr, dense, logits, probs)


def network_backward(net: Network, cache: ForwardCache, target):
    """Mean loss and its gradient list (congruent with ``net.tensors()``).

    For a batch both the loss and the gradients are averaged over samples.
    """
    spec = net.spec
    logits = np.atleast_2d(cache.logits)
    target = np.atleast_1d(np.asarray(target))
    if target.shape != (logits.shape[0],):
        raise ShapeMismatch("one target per sample is required")
    losses, _, g = softmax_xent(logits, target)
    batch = logits.shape[0]
    g = g / batch

    # (pre-activation, activation) of every layer in forward order
    layers = [(c.pre_activation, l.activation) for c, l in zip(cache.pyramidal, spec.pyramidal)]
    layers += [(np.atleast_2d(c.pre_activation), l.activation) for c, l in zip(cache.dense, spec.dense)]
    n_pyr = len(spec.pyramidal)
    if layers:
        last_pre, last_kind = layers[-1]
        delta = g * activation_derivative(last_pre.reshape(batch, -1), last_kind)
    else:
        delta = g

    dense_grads = []
    for n in range(len(spec.dense) - 1, -1, -1):
        c = cache.dense[n]
        c2 = LayerCache(np.atleast_2d(c.input), np.atleast_2d(c.pre_activation), None)
        prev = layers[n_pyr + n - 1] if n_pyr + n > 0 else (None, Activation.IDENTITY)
        prev_pre = prev[0].reshape(batch, -1) if prev[0] is not None else None
        delta, grads = dense_backward(delta, c2, net.dense[n], prev_pre, prev[1])
        dense_grads.insert(0, grads)

    pyr_grads = []
    if n_pyr:
        last = cache.pyramidal[-1].pre_activation
        delta = delta.reshape((batch,) + last.shape[-3:])
        for n in range(n_pyr - 1, -1, -1):
            c = cache.pyramidal[n]
            layer, params = spec.pyramidal[n], net.pyramidal[n]
            pyr_grads.insert(0, weight_gradients(delta, c, layer, params))
            if n > 0:
                delta = backprop_sensitivity(
                    delta, layer, params, cache.pyramidal[n - 1].pre_activation,
                    spec.pyramidal[n - 1].activation,
                )

    grads = []
    for p in pyr_grads + dense_grads:
        grads += [p.weights, p.biases]
    return float(np.mean(losses)), grads


def loss_and_gradients(net: Network, images, targets):
    return network_backward(net, network_forward(net, images), targets)


# ---------------------------------------------------------------- serialization

def _pack_spec(spec: NetworkSpec) -> bytes:
    fields = [spec.input_height, spec.input_width, int(spec.bias_per_neuron), len(spec.pyramidal)]
    for p in spec.pyramidal:
        fields += [p.sublayers, p.field_size, p.overlap, p.activation.code]
    fields.append(len(spec.dense))
    for d in spec.dense:
        fields += [d.units, d.activation.code]
    return struct.pack(f"<{len(fields)}I", *fields)


def to_bytes(net: Network) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<H", FORMAT_VERSION))
    buf.write(_pack_spec(net.spec))
    for t in net.tensors():
        buf.write(np.ascontiguousarray(t, dtype="<f8").tobytes())
    return buf.getvalue()


def from_bytes(data: bytes) -> Network:
    if data[:4] != MAGIC:
        raise ValueError("not an HPNN model file")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version}")
    pos = 6

    def u32():
        nonlocal pos
        (v,) = struct.unpack_from("<I", data, pos)
        pos += 4
        return v

    height, width, per_neuron, n_pyr = u32(), u32(), u32(), u32()
    pyr = [
        PyramidalLayerSpec(u32(), u32(), u32(), Activation.from_code(u32())) for _ in range(n_pyr)
    ]
    dense = [DenseLayerSpec(u32(), Activation.from_code(u32())) for _ in range(u32())]
    spec = NetworkSpec(height, width, tuple(pyr), tuple(dense), bool(per_neuron))
    tensors = []
    for _, wshape, bshape in param_shapes(spec):
        for shape in (wshape, bshape):
            n = math.prod(shape)
            if pos + 8 * n > len(data):
                raise ValueError("model file is truncated")
            tensors.append(np.frombuffer(data, "<f8", n, pos).astype(np.float64).reshape(shape))
            pos += 8 * n
    if pos != len(data):
        raise ValueError("trailing bytes after model parameters")
    net = Network(spec)
    it = iter(tensors)
    net.pyramidal = [PyramidalParams(next(it), next(it)) for _ in pyr]
    net.dense = [DenseParams(next(it), next(it)) for _ in dense]
    return net


def save(net: Network, path) -> None:
    with open(path, "wb") as fh:
        fh.write(to_bytes(net))


def load(path) -> Network:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
