"""Sub-layered pyramidal layers.

A pyramidal layer maps ``K`` input sub-layers of ``H_in x W_in`` neurons to
``S`` output sub-layers of ``H_out x W_out``.  Output neuron ``(s, u, v)`` sees
the square field rows ``u*g .. u*g + r - 1`` and columns ``v*g .. v*g + r - 1``
of every input sub-layer, where ``g = r - o`` is the stride implied by the
field size ``r`` and overlap ``o``.  Weights are tied to input positions: the
weight ``w[s, k, i, j]`` is shared by every output neuron of sub-layer ``s``
whose field covers ``(i, j)``.

All functions accept a single sample ``(K, H, W)`` or a batch ``(B, K, H, W)``.
"""

from dataclasses import dataclass

import numpy as np

from .activations import Activation, activation_derivative, apply_activation, as_real
from .errors import GeometryMismatch, ShapeMismatch


def output_grid_shape(in_dim: int, r: int, o: int) -> int:
    if not 1 <= r <= in_dim or not 0 <= o < r:
        raise GeometryMismatch(f"invalid field size {r} / overlap {o} for input {in_dim}")
    g = r - o
    if (in_dim - o) % g:
        raise GeometryMismatch(
            f"input {in_dim} is not tiled by fields of {r} with overlap {o} "
            f"({in_dim - o} mod {g} != 0)"
        )
    return (in_dim - o) // g


def field_bounds(u: int, r: int, o: int) -> tuple[int, int]:
    """Inclusive input-index range seen by output index ``u``."""
    lo = u * (r - o)
    return lo, lo + r - 1


def covering_bounds(i: int, r: int, o: int, out_dim: int) -> tuple[int, int]:
    """Inclusive range of output indices whose fields contain input index ``i``."""
    g = r - o
    lo = max(0, -((r - 1 - i) // g))  # ceil((i - r + 1) / g)
    hi = min(out_dim - 1, i // g)
    return lo, hi


@dataclass(frozen=True)
class PyramidalLayerSpec:
    sublayers: int
    field_size: int
    overlap: int = 0
    activation: Activation = Activation.TANH

    def __post_init__(self):
        if self.sublayers < 1:
            raise GeometryMismatch("a pyramidal layer needs at least one sub-layer")
        if self.field_size < 1 or not 0 <= self.overlap < self.field_size:
            raise GeometryMismatch(
                f"need field_size >= 1 and 0 <= overlap < field_size, "
                f"got {self.field_size}/{self.overlap}"
            )
        object.__setattr__(self, "activation", Activation(self.activation))

    @property
    def stride(self) -> int:
        return self.field_size - self.overlap

    def output_shape(self, height: int, width: int) -> tuple[int, int]:
        return (
            output_grid_shape(height, self.field_size, self.overlap),
            output_grid_shape(width, self.field_size, self.overlap),
        )


@dataclass
class PyramidalParams:
    """weights: ``(S, K, H_in, W_in)``; biases: ``(S, H_out, W_out)`` or ``(S,)``."""

    weights: np.ndarray
    biases: np.ndarray


@dataclass
class LayerCache:
    input: np.ndarray
    pre_activation: np.ndarray
    output: np.ndarray


def _batched(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = as_real(x)
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise ShapeMismatch(f"expected (K, H, W) or (B, K, H, W), got shape {x.shape}")


def _check_params(spec: PyramidalLayerSpec, params: PyramidalParams, in_shape):
    k, h, w = in_shape
    out_h, out_w = spec.output_shape(h, w)
    if params.weights.shape != (spec.sublayers, k, h, w):
        raise ShapeMismatch(
            f"weights {params.weights.shape} do not match "
            f"{(spec.sublayers, k, h, w)}"
        )
    if params.biases.shape not in ((spec.sublayers, out_h, out_w), (spec.sublayers,)):
        raise ShapeMismatch(f"biases {params.biases.shape} do not match layer output")
    return out_h, out_w


def _bias_grid(biases: np.ndarray) -> np.ndarray:
    return biases[:, None, None] if biases.ndim == 1 else biases


def window_sum(z: np.ndarray, r: int, g: int, out_h: int, out_w: int) -> np.ndarray:
    """Sum of ``z`` over every r x r field placed with stride ``g``."""
    span_h = g * (out_h - 1) + 1
    span_w = g * (out_w - 1) + 1
    out = np.zeros(z.shape[:-2] + (out_h, out_w), dtype=z.dtype)
    for a in range(r):
        for b in range(r):
            out += z[..., a : a + span_h : g, b : b + span_w : g]
    return out


def coverage_sum(delta: np.ndarray, r: int, g: int, in_h: int, in_w: int) -> np.ndarray:
    """Adjoint of :func:`window_sum`: for each input position, the sum of
    ``delta`` over the output neurons covering it."""
    out_h, out_w = delta.shape[-2:]
    span_h = g * (out_h - 1) + 1
    span_w = g * (out_w - 1) + 1
    acc = np.zeros(delta.shape[:-2] + (in_h, in_w), dtype=delta.dtype)
    for a in range(r):
        for b in range(r):
            acc[..., a : a + span_h : g, b : b + span_w : g] += delta
    return acc


def pyramidal_forward(x, spec: PyramidalLayerSpec, params: PyramidalParams) -> LayerCache:
    xb, single = _batched(x)
    out_h, out_w = _check_params(spec, params, xb.shape[1:])
    # weighted input, summed over input sub-layers: (B, S, H_in, W_in)
    weighted = np.einsum("bkhw,skhw->bshw", xb, params.weights)
    pre = window_sum(weighted, spec.field_size, spec.stride, out_h, out_w)
    pre += _bias_grid(params.biases)
    out = apply_activation(pre, spec.activation)
    if single:
        return LayerCache(xb[0], pre[0], out[0])
    return LayerCache(xb, pre, out)


def backprop_sensitivity(
    delta_out,
    spec: PyramidalLayerSpec,
    params: PyramidalParams,
    prev_pre=None,
    prev_activation: Activation = Activation.IDENTITY,
) -> np.ndarray:
    """Error sensitivities of the layer's input neurons.

    ``prev_pre`` is the pre-activation of the layer that produced this layer's
    input, with activation ``prev_activation``.  When it is ``None`` (the input
    image) the result is dE/d(input) with no derivative factor.
    """
    db, single = _batched(delta_out)
    s, k, in_h, in_w = params.weights.shape
    out_h, out_w = spec.output_shape(in_h, in_w)
    if db.shape[1:] != (s, out_h, out_w):
        raise ShapeMismatch(f"delta {db.shape[1:]} does not match output {(s, out_h, out_w)}")
    covered = coverage_sum(db, spec.field_size, spec.stride, in_h, in_w)
    back = np.einsum("bshw,skhw->bkhw", covered, params.weights)
    if prev_pre is not None:
        pb, _ = _batched(prev_pre)
        if pb.shape != back.shape:
            raise ShapeMismatch(f"previous pre-activation {pb.shape} != {back.shape}")
        back *= activation_derivative(pb, prev_activation)
    return back[0] if single else back


def weight_gradients(
    delta_out, cache: LayerCache, spec: PyramidalLayerSpec, params: PyramidalParams
) -> PyramidalParams:
    """dE/dw and dE/db, summed over the batch axis when one is present."""
    db, _ = _batched(delta_out)
    xb, _ = _batched(cache.input)
    out_h, out_w = _check_params(spec, params, xb.shape[1:])
    if db.shape[0] != xb.shape[0] or db.shape[1:] != (spec.sublayers, out_h, out_w):
        raise ShapeMismatch(f"delta {db.shape} does not match cached input {xb.shape}")
    covered = coverage_sum(db, spec.field_size, spec.stride, *xb.shape[2:])
    gw = np.einsum("bkhw,bshw->skhw", xb, covered)
    gb = db.sum(axis=0)
    if params.biases.ndim == 1:
        gb = gb.sum(axis=(1, 2))
    return PyramidalParams(gw, gb)
