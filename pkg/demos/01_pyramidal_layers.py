# %% [markdown]
# # Pyramidal layers with sub-layers
#
# A pyramidal neuron looks at a fixed square patch of the layer below.  Every
# input neuron carries its own weight, so two output neurons whose patches
# overlap share the weights of the overlapping inputs.  Sub-layers give each
# layer several independent weight maps over the same input.

# %%
import numpy as np

from hpnn import Activation, PyramidalLayerSpec, PyramidalParams, output_grid_shape, pyramidal_forward
from hpnn.pyramidal import covering_bounds, field_bounds

# %% [markdown]
# ## Geometry
# Field size r and overlap o give a stride of r - o.  No padding is applied,
# so only sizes tiled exactly by the fields are accepted.

# %%
for r, o in [(4, 0), (3, 0), (6, 3), (3, 1)]:
    try:
        print(f"96x96 with r={r}, o={o} -> {output_grid_shape(96, r, o)}")
    except ValueError as exc:
        print(f"96x96 with r={r}, o={o} -> {exc}")

# Fields of a 3x3 layer with one column of overlap, as index ranges
print([field_bounds(u, 3, 1) for u in range(3)])
# and which outputs cover each input row
print([covering_bounds(i, 3, 1, 3) for i in range(7)])

# %% [markdown]
# ## Forward pass
# A 7x7 input, two sub-layers, 3x3 fields overlapping by one.

# %%
rng = np.random.default_rng(0)
spec = PyramidalLayerSpec(sublayers=2, field_size=3, overlap=1, activation=Activation.TANH)
x = rng.uniform(-1, 1, size=(1, 7, 7))
params = PyramidalParams(
    weights=rng.normal(scale=0.3, size=(2, 1, 7, 7)),
    biases=np.zeros((2, 3, 3)),
)
cache = pyramidal_forward(x, spec, params)
print("output shape:", cache.output.shape)

# %% [markdown]
# ## Weights are tied to input positions
# Zeroing the weight of input (3, 3) in sub-layer 0 only changes the outputs of
# sub-layer 0 whose fields include (3, 3): here the 2x2 block around the centre.

# %%
impulse = np.zeros((1, 7, 7))
impulse[0, 3, 3] = 1.0
before = pyramidal_forward(impulse, spec, params).pre_activation
params.weights[0, 0, 3, 3] = 0.0
after = pyramidal_forward(impulse, spec, params).pre_activation
print((before != after).astype(int))
