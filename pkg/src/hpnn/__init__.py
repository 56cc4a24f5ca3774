"""Sub-layered hierarchical pyramidal neural networks in numpy."""

from .activations import Activation, activation_derivative, apply_activation, softmax, softmax_xent
from .errors import GeometryMismatch, HPNNError, ShapeMismatch
from .network import (
    DenseLayerSpec,
    DenseParams,
    Network,
    NetworkSpec,
    count_params,
    init_params,
    load,
    network_backward,
    network_forward,
    save,
)
from .pyramidal import (
    LayerCache,
    PyramidalLayerSpec,
    PyramidalParams,
    backprop_sensitivity,
    output_grid_shape,
    pyramidal_forward,
    weight_gradients,
)
from .rng import SplitMix64

__version__ = "0.1.0"
