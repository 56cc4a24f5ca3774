# %% [markdown]
# # Checking backpropagation
#
# The analytic gradients of every weight and bias are compared with central
# differences of the loss.  The perturbed losses are evaluated in extended
# precision so that round-off does not hide in the comparison.

# %%
import numpy as np

from hpnn import Activation, DenseLayerSpec, NetworkSpec, PyramidalLayerSpec, init_params
from hpnn.network import loss_and_gradients
from hpnn.trainer import gradient_check

P, D = PyramidalLayerSpec, DenseLayerSpec
spec = NetworkSpec(13, 13, (P(2, 3, 1), P(3, 2, 0)), (D(10), D(4, Activation.IDENTITY)))

# %%
for seed in range(3):
    net = init_params(spec, seed)
    image = np.random.default_rng(seed).uniform(-1, 1, size=(1, 13, 13))
    print(f"seed {seed}: {net.num_params} parameters, "
          f"max relative error {gradient_check(net, (image, seed % 4)):.2e}")

# %% [markdown]
# Pure float64 differencing is noticeably worse for tiny gradients:

# %%
print(f"float64 differences: {gradient_check(net, (image, 2), extended=False):.2e}")

# %% [markdown]
# A 1% error in a single gradient entry is caught immediately.

# %%
_, grads = loss_and_gradients(net, image, 2)
grads[0].reshape(-1)[0] *= 1.01
print(f"with an injected fault: {gradient_check(net, (image, 2), analytic=grads):.2e}")
