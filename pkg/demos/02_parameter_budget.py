# %% [markdown]
# # Parameter budgets
#
# Pyramidal layers are cheap: a layer holds one weight per input neuron per
# output sub-layer, plus one bias per output neuron.  This script compares the
# shipped 96x96 architectures and searches the field sizes that yield a given
# budget.

# %%
from pathlib import Path

from hpnn import DenseLayerSpec, NetworkSpec, PyramidalLayerSpec, count_params
from hpnn.config import ExperimentConfig
from hpnn.errors import GeometryMismatch

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

# %%
for name in ("hpnn_96.json", "pyranet3_96.json", "pyranet1_96.json"):
    counts = count_params(ExperimentConfig.load(CONFIGS / name).network)
    print(f"{name:18s} {counts.total:>8,d}")
    for layer, weights, biases, total in counts.rows:
        print(f"    {layer:11s} {weights:>8,d} + {biases:>6,d} = {total:>8,d}")

# %% [markdown]
# ## Which geometries give 113,520 parameters?
# Sub-layers are fixed at 4, 8, 8 and dense layers at 40 and 8; we enumerate
# every valid (field, overlap) per layer.


# %%
def tilings(n):
    return [(r, o) for r in range(1, n + 1) for o in range(r) if (n - o) % (r - o) == 0 and r > 1]


def networks(per_neuron):
    P, D = PyramidalLayerSpec, DenseLayerSpec
    for r1, o1 in tilings(96):
        h1 = (96 - o1) // (r1 - o1)
        for r2, o2 in tilings(h1):
            h2 = (h1 - o2) // (r2 - o2)
            for r3, o3 in tilings(h2):
                layers = (P(4, r1, o1), P(8, r2, o2), P(8, r3, o3))
                yield NetworkSpec(96, 96, layers, (D(40), D(8)), per_neuron)


for per_neuron in (True, False):
    hits = []
    for spec in networks(per_neuron):
        try:
            if count_params(spec).total == 113_520:
                hits.append([(p.field_size, p.overlap) for p in spec.pyramidal])
        except GeometryMismatch:
            pass
    print(f"per-neuron bias={per_neuron}: {len(hits)} matches, e.g. {hits[:2]}")
