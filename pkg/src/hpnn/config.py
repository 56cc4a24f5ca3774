"""JSON experiment configuration."""

import json
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

from .activations import Activation
from .network import DenseLayerSpec, NetworkSpec
from .pyramidal import PyramidalLayerSpec
from .trainer import TrainConfig


@dataclass
class ExperimentConfig:
    network: NetworkSpec
    train: TrainConfig = field(default_factory=TrainConfig)
    index: Optional[str] = None
    out: Optional[str] = None

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        unknown = set(doc) - {"input_size", "pyramidal", "dense", "bias", "train", "index", "out"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        train_doc = dict(doc.get("train", {}))
        allowed = {f.name for f in fields(TrainConfig)}
        if set(train_doc) - allowed:
            raise ValueError(f"unknown train keys: {sorted(set(train_doc) - allowed)}")
        train = TrainConfig(**train_doc)
        hidden = train.activation

        pyr = [
            PyramidalLayerSpec(
                int(p["sublayers"]),
                int(p["field_size"]),
                int(p.get("overlap", 0)),
                Activation(p.get("activation", hidden)),
            )
            for p in doc.get("pyramidal", [])
        ]
        dense_docs = doc.get("dense", [])
        dense = []
        for n, d in enumerate(dense_docs):
            default = Activation.IDENTITY if n == len(dense_docs) - 1 else hidden
            dense.append(DenseLayerSpec(int(d["units"]), Activation(d.get("activation", default))))
        bias = doc.get("bias", "per_neuron")
        if bias not in ("per_neuron", "per_sublayer"):
            raise ValueError(f"bias must be 'per_neuron' or 'per_sublayer', got {bias!r}")
        height, width = doc["input_size"]
        spec = NetworkSpec(int(height), int(width), tuple(pyr), tuple(dense), bias == "per_neuron")
        spec.validate()
        return cls(spec, train, doc.get("index"), doc.get("out"))

    def to_dict(self) -> dict:
        spec = self.network
        train = asdict(self.train)
        train["activation"] = self.train.activation.value
        return {
            "input_size": [spec.input_height, spec.input_width],
            "pyramidal": [
                {
                    "sublayers": p.sublayers,
                    "field_size": p.field_size,
                    "overlap": p.overlap,
                    "activation": p.activation.value,
                }
                for p in spec.pyramidal
            ],
            "dense": [{"units": d.units, "activation": d.activation.value} for d in spec.dense],
            "bias": "per_neuron" if spec.bias_per_neuron else "per_sublayer",
            "train": train,
            "index": self.index,
            "out": self.out,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))
