"""Small dense networks in plain numpy with hand-written reverse-mode gradients.

Everything is float64.  A net is a stack of affine layers with a rectifier on
the hidden layers and a linear output.  backward() returns exact gradients of
any scalar loss whose gradient with respect to the outputs is supplied by the
caller, which keeps the loss definitions next to the trainers that own them.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import CheckpointError, NumericalFaultError

CHECKPOINT_VERSION = 1


@dataclass
class Mlp:
    weights: list            # W_i with shape (fan_in, fan_out)
    biases: list             # b_i with shape (fan_out,)
    activation: str = "relu"
    m_scale: int = 1         # input normalization divisor carried with the net

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def copy(self) -> "Mlp":
        return Mlp(weights=[w.copy() for w in self.weights],
                   biases=[b.copy() for b in self.biases],
                   activation=self.activation, m_scale=self.m_scale)


def init_mlp(sizes, rng: np.random.Generator, activation: str = "relu", m_scale: int = 1) -> Mlp:
    """Scaled-normal weights (sqrt(2/fan_in)), zero biases."""
    if len(sizes) < 2:
        raise ValueError("need at least an input and an output size")
    ws, bs = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        ws.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        bs.append(np.zeros(fan_out))
    return Mlp(weights=ws, biases=bs, activation=activation, m_scale=m_scale)


def normalize_state(s: np.ndarray, m_scale: int) -> np.ndarray:
    """Map integer occupancy differences into [-1, 1] floats."""
    return np.asarray(s, dtype=np.float64) / float(m_scale)


def _act(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    raise ValueError(f"unknown activation {kind!r}")


def _act_grad(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0.0).astype(np.float64)
    raise ValueError(f"unknown activation {kind!r}")


def forward(net: Mlp, x: np.ndarray) -> np.ndarray:
    """x: (batch, in) -> (batch, out). Output layer is linear."""
    h = np.asarray(x, dtype=np.float64)
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        h = z if i == last else _act(z, net.activation)
    return h


def forward_cached(net: Mlp, x: np.ndarray):
    """Forward pass keeping layer inputs and pre-activations for backward()."""
    h = np.asarray(x, dtype=np.float64)
    inputs, preacts = [], []
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        inputs.append(h)
        z = h @ w + b
        preacts.append(z)
        h = z if i == last else _act(z, net.activation)
    return h, (inputs, preacts)


@dataclass
class Grads:
    weights: list
    biases: list


def backward(net: Mlp, cache, dout: np.ndarray) -> Grads:
    """Exact gradients of the caller's scalar loss; dout is dLoss/dOutputs."""
    inputs, preacts = cache
    dws = [None] * len(net.weights)
    dbs = [None] * len(net.biases)
    delta = np.asarray(dout, dtype=np.float64)
    for i in range(len(net.weights) - 1, -1, -1):
        if i != len(net.weights) - 1:
            delta = delta * _act_grad(preacts[i], net.activation)
        dws[i] = inputs[i].T @ delta
        dbs[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ net.weights[i].T
    return Grads(weights=dws, biases=dbs)


def sgd_step(net: Mlp, grads: Grads, lr: float) -> None:
    for w, dw in zip(net.weights, grads.weights):
        w -= lr * dw
    for b, db in zip(net.biases, grads.biases):
        b -= lr * db


@dataclass
class AdamState:
    mw: list = field(default_factory=list)
    vw: list = field(default_factory=list)
    mb: list = field(default_factory=list)
    vb: list = field(default_factory=list)
    t: int = 0

    @classmethod
    def for_net(cls, net: Mlp) -> "AdamState":
        return cls(mw=[np.zeros_like(w) for w in net.weights],
                   vw=[np.zeros_like(w) for w in net.weights],
                   mb=[np.zeros_like(b) for b in net.biases],
                   vb=[np.zeros_like(b) for b in net.biases])


def adam_step(net: Mlp, grads: Grads, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for group, ms, vs, gs in (
        (net.weights, state.mw, state.vw, grads.weights),
        (net.biases, state.mb, state.vb, grads.biases),
    ):
        for p, m, v, g in zip(group, ms, vs, gs):
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def masked_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Row-wise softmax restricted to mask==True; excluded entries get exactly 0."""
    logits = np.asarray(logits, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any(axis=1).all():
        raise NumericalFaultError("a softmax row admits no action")
    z = np.where(mask, logits, -np.inf)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def masked_entropy(probs: np.ndarray) -> np.ndarray:
    """Row entropies with the 0 log 0 = 0 convention."""
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(probs > 0.0, probs * np.log(probs), 0.0)
    return -terms.sum(axis=1)


# ---------------------------------------------------------------------------
# checkpoint serialization
# ---------------------------------------------------------------------------

def _net_payload(net: Mlp) -> dict:
    for w in net.weights + net.biases:
        if not np.isfinite(w).all():
            raise NumericalFaultError("refusing to checkpoint non-finite parameters")
    return {
        "sizes": net.sizes,
        "activation": net.activation,
        "m_scale": net.m_scale,
        "shapes": [list(w.shape) for w in net.weights],
        "weights": [w.reshape(-1).tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }


def _net_from_payload(payload: dict) -> Mlp:
    sizes = payload["sizes"]
    shapes = [tuple(sh) for sh in payload["shapes"]]
    expect = list(zip(sizes[:-1], sizes[1:]))
    if shapes != expect:
        raise CheckpointError(f"layer shapes {shapes} do not chain into sizes {sizes}")
    ws, bs = [], []
    for shape, flat, bias in zip(shapes, payload["weights"], payload["biases"]):
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != shape[0] * shape[1]:
            raise CheckpointError(f"weight block has {flat.size} values, expected {shape}")
        if len(bias) != shape[1]:
            raise CheckpointError(f"bias length {len(bias)} does not match layer width {shape[1]}")
        ws.append(flat.reshape(shape))
        bs.append(np.asarray(bias, dtype=np.float64))
    net = Mlp(weights=ws, biases=bs, activation=payload["activation"],
              m_scale=int(payload["m_scale"]))
    for w in net.weights + net.biases:
        if not np.isfinite(w).all():
            raise CheckpointError("checkpoint contains non-finite parameters")
    return net


def save_checkpoint(path, nets: dict[str, Mlp], meta: dict) -> None:
    """Versioned JSON checkpoint; float64 values survive the round trip exactly."""
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "meta": meta,
        "nets": {name: _net_payload(net) for name, net in nets.items()},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_checkpoint(path) -> tuple[dict[str, Mlp], dict]:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint version {doc.get('format_version')!r} unsupported "
            f"(expected {CHECKPOINT_VERSION})")
    nets = {name: _net_from_payload(p) for name, p in doc["nets"].items()}
    return nets, doc.get("meta", {})
