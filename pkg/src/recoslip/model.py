"""Graph classifier architecture, Adam optimizer, and checkpoint format.

The classifier is a two-layer graph convolution encoder followed by a
two-layer MLP head with two output logits; the novelty score of a node is
the softmax probability of logit index 1. Forward passes are full-graph
(transductive), so batch statistics are whole-graph statistics.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .autodiff import BatchNormState, Tensor

__all__ = ["ClassifierConfig", "NoveltyClassifier", "Adam", "save_checkpoint", "load_checkpoint"]


@dataclass(frozen=True)
class ClassifierConfig:
    in_dim: int
    gcn_hidden: int = 16
    gcn_out: int = 16
    mlp_hidden: int = 8
    dropout: float = 0.5
    batchnorm: bool = True
    bn_eps: float = 1e-5


def _uniform_fan_in(rng: np.random.Generator, fan_in: int, shape: tuple[int, int]) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class NoveltyClassifier:
    """Encoder + head producing per-node novelty scores in [0, 1].

    Layer sequence: GCN -> BN -> ReLU -> Dropout -> GCN -> BN -> ReLU
    (encoder output), then Linear -> BN -> ReLU -> Dropout -> Linear(., 2).
    Batchnorm layers are optional via config; graph convolutions carry no
    bias (the following affine shift would make one redundant).
    """

    def __init__(self, config: ClassifierConfig, rng: np.random.Generator):
        self.config = config
        c = config
        self.w_gcn1 = Tensor.param(_uniform_fan_in(rng, c.in_dim, (c.in_dim, c.gcn_hidden)))
        self.w_gcn2 = Tensor.param(_uniform_fan_in(rng, c.gcn_hidden, (c.gcn_hidden, c.gcn_out)))
        self.w_mlp1 = Tensor.param(_uniform_fan_in(rng, c.gcn_out, (c.gcn_out, c.mlp_hidden)))
        self.b_mlp1 = Tensor.param(np.zeros((1, c.mlp_hidden)))
        self.w_mlp2 = Tensor.param(_uniform_fan_in(rng, c.mlp_hidden, (c.mlp_hidden, 2)))
        self.b_mlp2 = Tensor.param(np.zeros((1, 2)))
        self._bn_params: dict[str, Tensor] = {}
        self._bn_states: dict[str, BatchNormState] = {}
        if c.batchnorm:
            for name, width in (("bn1", c.gcn_hidden), ("bn2", c.gcn_out), ("bn3", c.mlp_hidden)):
                self._bn_params[f"{name}_scale"] = Tensor.param(np.ones((1, width)))
                self._bn_params[f"{name}_shift"] = Tensor.param(np.zeros((1, width)))
                self._bn_states[name] = BatchNormState(width, eps=c.bn_eps)

    def parameters(self) -> list[Tensor]:
        params = [self.w_gcn1, self.w_gcn2, self.w_mlp1, self.b_mlp1, self.w_mlp2, self.b_mlp2]
        params.extend(self._bn_params[k] for k in sorted(self._bn_params))
        return params

    def _maybe_bn(self, x: Tensor, name: str, train: bool) -> Tensor:
        if not self.config.batchnorm:
            return x
        return ad.batchnorm1d(
            x,
            self._bn_params[f"{name}_scale"],
            self._bn_params[f"{name}_shift"],
            self._bn_states[name],
            train,
        )

    def forward(
        self,
        features: np.ndarray,
        adj: sp.spmatrix,
        train: bool,
        rng: np.random.Generator | None = None,
    ) -> tuple[Tensor, Tensor]:
        """Return (scores (N,1), encoder embeddings (N, gcn_out)).

        Eval mode consumes no randomness and reuses the last recorded batch
        statistics, so repeated calls are deterministic.
        """
        p = self.config.dropout
        x = Tensor.constant(features)
        h = ad.sparse_dense_matmul(adj, ad.matmul(x, self.w_gcn1))
        h = ad.relu(self._maybe_bn(h, "bn1", train))
        h = ad.dropout(h, p, train, rng)
        h = ad.sparse_dense_matmul(adj, ad.matmul(h, self.w_gcn2))
        emb = ad.relu(self._maybe_bn(h, "bn2", train))
        m = ad.add_bias(ad.matmul(emb, self.w_mlp1), self.b_mlp1)
        m = ad.relu(self._maybe_bn(m, "bn3", train))
        m = ad.dropout(m, p, train, rng)
        logits = ad.add_bias(ad.matmul(m, self.w_mlp2), self.b_mlp2)
        scores = ad.column(ad.row_softmax(logits), 1)
        return scores, emb

    def eval_scores(self, features: np.ndarray, adj: sp.spmatrix) -> np.ndarray:
        scores, _ = self.forward(features, adj, train=False)
        return scores.data[:, 0].copy()

    # named views used by checkpoints and early-stopping snapshots
    def _named_arrays(self) -> dict[str, np.ndarray]:
        named = {
            "w_gcn1": self.w_gcn1.data,
            "w_gcn2": self.w_gcn2.data,
            "w_mlp1": self.w_mlp1.data,
            "b_mlp1": self.b_mlp1.data,
            "w_mlp2": self.w_mlp2.data,
            "b_mlp2": self.b_mlp2.data,
        }
        for key, tensor in self._bn_params.items():
            named[key] = tensor.data
        for name, state in self._bn_states.items():
            named[f"{name}_running_mean"] = state.mean
            named[f"{name}_running_var"] = state.var
        return named

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self._named_arrays().items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        arrays = self._named_arrays()
        if set(state) != set(arrays):
            missing = set(arrays).symmetric_difference(state)
            raise ValueError(f"checkpoint layer mismatch: {sorted(missing)}")
        for key, arr in arrays.items():
            src = np.asarray(state[key], dtype=np.float64)
            if src.shape != arr.shape:
                raise ValueError(f"layer {key}: shape {src.shape} != {arr.shape}")
            arr[...] = src


def save_checkpoint(model: NoveltyClassifier, path: str | Path) -> None:
    """Write parameters as an .npz plus a JSON manifest of names/shapes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    state = model.state_dict()
    np.savez(path, **state)
    manifest = {
        "config": asdict(model.config),
        "layers": {k: list(v.shape) for k, v in sorted(state.items())},
    }
    Path(str(path) + ".manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def load_checkpoint(path: str | Path) -> NoveltyClassifier:
    path = Path(path)
    manifest = json.loads(Path(str(path) + ".manifest.json").read_text())
    config = ClassifierConfig(**manifest["config"])
    model = NoveltyClassifier(config, np.random.default_rng(0))
    with np.load(path if path.suffix == ".npz" else str(path) + ".npz") as data:
        model.load_state_dict({k: data[k] for k in data.files})
    return model


class Adam:
    """Adam with bias correction; beta1=0.9, beta2=0.999, eps=1e-8."""

    def __init__(self, params: list[Tensor], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)
