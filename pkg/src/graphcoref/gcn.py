"""Two-layer graph-convolutional encoders with hand-written backprop.

Forward pass for the deterministic encoder:

    H = relu(A @ X @ W0)        # A is the normalized adjacency
    Z = A @ dropout(H) @ W1

The variational encoder shares the first layer and has two output heads
(means and log standard deviations) instead of a single Z head.  Every
intermediate needed by the backward pass is kept in a trace dict so the
gradient code never recomputes activations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DataError
from .graph import FeatureMatrix

KIND_GAE = "gae"
KIND_VGAE = "vgae"


@dataclass
class EncoderWeights:
    kind: str
    params: dict[str, np.ndarray]

    def n_parameters(self) -> int:
        return sum(int(w.size) for w in self.params.values())

    def copy(self) -> "EncoderWeights":
        return EncoderWeights(self.kind, {k: v.copy() for k, v in self.params.items()})


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    """Uniform(-b, b) with b = sqrt(6 / (fan_in + fan_out))."""
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_weights(
    kind: str, in_dim: int, hidden_dim: int, latent_dim: int, rng: np.random.Generator
) -> EncoderWeights:
    """Draw Glorot-initialized weights.

    The first layer is drawn first, then the output head(s); with a fixed
    generator the deterministic encoder and the mean head of the variational
    encoder therefore start from identical values.
    """
    if min(in_dim, hidden_dim, latent_dim) < 1:
        raise DataError("encoder dimensions must be positive")
    w0 = glorot(rng, in_dim, hidden_dim)
    if kind == KIND_GAE:
        return EncoderWeights(kind, {"w0": w0, "w1": glorot(rng, hidden_dim, latent_dim)})
    if kind == KIND_VGAE:
        w_mu = glorot(rng, hidden_dim, latent_dim)
        w_logsig = glorot(rng, hidden_dim, latent_dim)
        return EncoderWeights(kind, {"w0": w0, "w_mu": w_mu, "w_logsig": w_logsig})
    raise DataError(f"unknown encoder kind '{kind}'")


def _propagate(adj, mat: np.ndarray) -> np.ndarray:
    out = adj @ mat
    return np.asarray(out)


def encoder_forward(
    adj,
    features: FeatureMatrix,
    weights: EncoderWeights,
    *,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
) -> dict:
    """Run the encoder and return a trace holding outputs and intermediates.

    Trace keys: "p0" (A @ X), "h_pre", "mask" (inverted-dropout mask or
    None), "p1", and either "z" or the pair "mu"/"logsig".  When the
    features are the identity, A @ X is A itself and is not re-multiplied.
    """
    if not 0.0 <= dropout < 1.0:
        raise DataError(f"dropout must be in [0, 1), got {dropout}")
    if features.kind == "identity":
        p0 = adj
    else:
        p0 = _propagate(adj, features.data)
    h_pre = np.asarray(p0 @ weights.params["w0"])
    h = np.maximum(h_pre, 0.0)

    mask = None
    if dropout > 0.0:
        if rng is None:
            raise DataError("dropout requires a random generator")
        mask = (rng.random(h.shape) >= dropout) / (1.0 - dropout)
        h = h * mask

    p1 = _propagate(adj, h)
    trace = {"p0": p0, "h_pre": h_pre, "mask": mask, "p1": p1}
    if weights.kind == KIND_GAE:
        trace["z"] = p1 @ weights.params["w1"]
    else:
        trace["mu"] = p1 @ weights.params["w_mu"]
        trace["logsig"] = p1 @ weights.params["w_logsig"]
    return trace


def encoder_backward(
    adj,
    weights: EncoderWeights,
    trace: dict,
    *,
    dz: np.ndarray | None = None,
    dmu: np.ndarray | None = None,
    dlogsig: np.ndarray | None = None,
) -> dict[str, np.ndarray]:
    """Backpropagate output gradients to weight gradients.

    The deterministic encoder takes dz; the variational one takes dmu and
    dlogsig.  relu' at exactly zero is taken as zero.
    """
    p1 = trace["p1"]
    grads: dict[str, np.ndarray] = {}
    if weights.kind == KIND_GAE:
        if dz is None:
            raise DataError("gae backward needs dz")
        grads["w1"] = p1.T @ dz
        d_p1 = dz @ weights.params["w1"].T
    else:
        if dmu is None or dlogsig is None:
            raise DataError("vgae backward needs dmu and dlogsig")
        grads["w_mu"] = p1.T @ dmu
        grads["w_logsig"] = p1.T @ dlogsig
        d_p1 = dmu @ weights.params["w_mu"].T + dlogsig @ weights.params["w_logsig"].T

    # A is symmetric, so the adjoint of (A @ .) is another A @ .
    d_h = _propagate(adj, d_p1)
    if trace["mask"] is not None:
        d_h = d_h * trace["mask"]
    d_h_pre = d_h * (trace["h_pre"] > 0.0)

    p0 = trace["p0"]
    if sp.issparse(p0):
        grads["w0"] = np.asarray(p0.T @ d_h_pre)
    else:
        grads["w0"] = p0.T @ d_h_pre
    return grads
