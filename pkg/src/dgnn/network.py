"""Batched per-element shallow networks with closed-form differentiation.

All N element networks evaluate in one pass through stacked weight tensors
(one slice per element), so parameters stay fully disjoint across elements.
The forward pass also propagates input Jacobians, and the reverse pass
accepts cotangents for both the values and the input gradients, which is
what a loss built from u and grad(u) needs.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NetArch",
    "PiecewiseNet",
    "GradientTape",
    "init_net",
    "forward",
    "input_gradient",
    "parameter_gradient",
    "save_checkpoint",
    "load_checkpoint",
]


@dataclass(frozen=True)
class NetArch:
    input_dim: int
    hidden_layers: int = 2
    width: int = 40
    # output dim is 1 and the activation is tanh throughout

    def __post_init__(self):
        if self.hidden_layers < 1:
            raise ValueError("need at least one hidden layer")
        if self.input_dim < 1 or self.width < 1:
            raise ValueError("invalid architecture sizes")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.input_dim] + [self.width] * self.hidden_layers + [1]


class PiecewiseNet:
    """N stacked networks; weights[j] has shape (N, out_j, in_j)."""

    def __init__(self, n_elements: int, arch: NetArch,
                 weights: list[np.ndarray], biases: list[np.ndarray]):
        self.n_elements = n_elements
        self.arch = arch
        self.weights = weights
        self.biases = biases

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def n_parameters(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def get_flat(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b.ravel())
        return np.concatenate(parts)

    def set_flat(self, vec: np.ndarray) -> None:
        i = 0
        for j in range(self.n_layers):
            for arr in (self.weights[j], self.biases[j]):
                arr[...] = vec[i:i + arr.size].reshape(arr.shape)
                i += arr.size
        if i != len(vec):
            raise ValueError("flat vector length does not match parameters")

    def flatten_like(self, grads: list[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
        parts = []
        for gw, gb in grads:
            parts.append(gw.ravel())
            parts.append(gb.ravel())
        return np.concatenate(parts)


@dataclass
class GradientTape:
    """Cached activations/Jacobians from one batched forward pass."""

    points: np.ndarray  # (N, P, d)
    acts: list[np.ndarray]  # inputs to each affine layer, acts[0] = points
    jacs: list[np.ndarray]  # d acts[j] / d x, shape (N, P, d, n_j)
    zjacs: list[np.ndarray | None]  # pre-activation Jacobians per hidden layer
    values: np.ndarray  # (N, P)
    grad: np.ndarray  # (N, P, d)


def init_net(n_elements: int, arch: NetArch, seed: int,
             input_center: np.ndarray | None = None,
             input_scale: np.ndarray | None = None) -> PiecewiseNet:
    """Glorot-uniform weights per element slice, zero biases; deterministic.

    When input_center/input_scale (each (N, d)) are given, the first layer
    is drawn as if inputs were the local coordinates (x - center) / scale
    and then folded back to raw inputs. Element supports are tiny compared
    to the domain, so without this the first layer starts orders of
    magnitude away from a useful scale and training crawls.
    """
    rng = np.random.default_rng(seed)
    sizes = arch.layer_sizes
    weights, biases = [], []
    for j in range(len(sizes) - 1):
        fan_in, fan_out = sizes[j], sizes[j + 1]
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, (n_elements, fan_out, fan_in)))
        biases.append(np.zeros((n_elements, fan_out)))
    if input_scale is not None:
        scale = np.asarray(input_scale, dtype=float)
        center = (np.zeros_like(scale) if input_center is None
                  else np.asarray(input_center, dtype=float))
        if scale.shape != (n_elements, arch.input_dim):
            raise ValueError("input_scale must be shaped (N, input_dim)")
        local = weights[0].copy()
        weights[0][...] = local / scale[:, None, :]
        biases[0][...] = -np.einsum("nwd,nd->nw", local, center / scale)
    return PiecewiseNet(n_elements, arch, weights, biases)


def forward(net: PiecewiseNet, points: np.ndarray) -> tuple[np.ndarray, GradientTape]:
    """Evaluate all element networks at their own point batches.

    points: (N, P, d) with row i owned by element i. Returns values (N, P)
    and the tape for gradient passes.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 3 or points.shape[0] != net.n_elements:
        raise ValueError(
            f"expected points shaped (N={net.n_elements}, P, d), got {points.shape}")
    if points.shape[2] != net.arch.input_dim:
        raise ValueError(f"input dim {points.shape[2]} != arch {net.arch.input_dim}")
    n, p, d = points.shape
    a = points
    # A[j] holds the Jacobian as (N, P, d, n_j): the d-before-width layout
    # keeps every reshape in the matmul chain a view
    A = np.broadcast_to(np.eye(d), (n, p, d, d)).copy()
    acts, jacs, zjacs = [a], [A], [None]
    L = net.n_layers
    for j in range(L):
        W, b = net.weights[j], net.biases[j]
        Wt = W.transpose(0, 2, 1)
        z = np.matmul(a, Wt) + b[:, None, :]
        n_in = A.shape[3]
        Z = np.matmul(A.reshape(n, p * d, n_in), Wt).reshape(n, p, d, -1)
        if j < L - 1:
            a = np.tanh(z)
            A = (1.0 - a * a)[:, :, None, :] * Z
            acts.append(a)
            jacs.append(A)
            zjacs.append(Z)
        else:
            values = z[:, :, 0]
            grad = Z[:, :, :, 0]
    tape = GradientTape(points, acts, jacs, zjacs, values, grad)
    return values, tape


def input_gradient(net: PiecewiseNet, tape: GradientTape) -> np.ndarray:
    """du/dx at every tape point, shape (N, P, d); exact chain rule."""
    if tape.points.shape[0] != net.n_elements:
        raise ValueError("tape does not match this network")
    return tape.grad


def parameter_gradient(net: PiecewiseNet, tape: GradientTape,
                       value_cotangent: np.ndarray,
                       grad_cotangent: np.ndarray | None = None,
                       ) -> list[tuple[np.ndarray, np.ndarray]]:
    """Reverse pass for a loss depending on values and input gradients.

    value_cotangent: dLoss/du, shape (N, P). grad_cotangent: dLoss/d(grad u),
    shape (N, P, d) or None. Returns per-layer (dW, db) matching parameter
    shapes; element i's slices depend only on element i's cotangents.
    """
    n, p, d = tape.points.shape
    ubar = np.asarray(value_cotangent, dtype=float)
    if ubar.shape != (n, p):
        raise ValueError(f"value cotangent shape {ubar.shape} != {(n, p)}")
    if grad_cotangent is None:
        gbar = np.zeros((n, p, d))
    else:
        gbar = np.asarray(grad_cotangent, dtype=float)
        if gbar.shape != (n, p, d):
            raise ValueError(f"grad cotangent shape {gbar.shape} != {(n, p, d)}")

    L = net.n_layers
    zbar = ubar[:, :, None]  # (N, P, 1)
    Zbar = gbar[:, :, :, None]  # (N, P, d, 1), matching the Jacobian layout
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * L
    for j in range(L - 1, -1, -1):
        a_prev, A_prev = tape.acts[j], tape.jacs[j]
        n_out, n_in = zbar.shape[2], a_prev.shape[2]
        dW = np.matmul(zbar.transpose(0, 2, 1), a_prev)
        dW += np.matmul(
            Zbar.reshape(n, p * d, n_out).transpose(0, 2, 1),
            A_prev.reshape(n, p * d, n_in))
        db = zbar.sum(axis=1)
        grads[j] = (dW, db)
        if j == 0:
            break
        W = net.weights[j]
        abar = np.matmul(zbar, W)
        Abar = np.matmul(Zbar.reshape(n, p * d, n_out), W).reshape(n, p, d, n_in)
        # through tanh: a = tanh(z), A = (1 - a^2) Z
        t = tape.acts[j]  # tanh values of layer j
        Z = tape.zjacs[j]
        sp = 1.0 - t * t  # sigma'
        spp = -2.0 * t * sp  # sigma''
        zbar = abar * sp + spp * np.sum(Abar * Z, axis=2)
        Zbar = sp[:, :, None, :] * Abar
    return grads


_CHECKPOINT_FORMAT = "dgnn-checkpoint v1"


def save_checkpoint(net: PiecewiseNet, path, seed: int = 0, iteration: int = 0,
                    extra: dict | None = None) -> None:
    """Binary checkpoint: u64-LE header length, JSON header, float64-LE blob.

    The blob concatenates W1, b1, W2, b2, ... in C order; the header records
    every shape so other tools can slice the blob without this package.
    """
    shapes = []
    parts = []
    for w, b in zip(net.weights, net.biases):
        shapes.append(list(w.shape))
        shapes.append(list(b.shape))
        parts.append(np.ascontiguousarray(w, dtype="<f8"))
        parts.append(np.ascontiguousarray(b, dtype="<f8"))
    header = {
        "format": _CHECKPOINT_FORMAT,
        "n_elements": net.n_elements,
        "arch": {
            "input_dim": net.arch.input_dim,
            "hidden_layers": net.arch.hidden_layers,
            "width": net.arch.width,
        },
        "shapes": shapes,
        "seed": seed,
        "iteration": iteration,
    }
    if extra:
        header.update(extra)
    raw = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(struct.pack("<Q", len(raw)))
        f.write(raw)
        for arr in parts:
            f.write(arr.tobytes())


def load_checkpoint(path) -> tuple[PiecewiseNet, dict]:
    with open(path, "rb") as f:
        (hlen,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(hlen).decode())
        if header.get("format") != _CHECKPOINT_FORMAT:
            raise ValueError(f"unrecognized checkpoint format in {path}")
        arch = NetArch(**header["arch"])
        weights, biases = [], []
        shapes = [tuple(s) for s in header["shapes"]]
        for ws, bs in zip(shapes[0::2], shapes[1::2]):
            w = np.frombuffer(f.read(8 * int(np.prod(ws))), dtype="<f8").reshape(ws)
            b = np.frombuffer(f.read(8 * int(np.prod(bs))), dtype="<f8").reshape(bs)
            weights.append(w.copy())
            biases.append(b.copy())
    net = PiecewiseNet(header["n_elements"], arch, weights, biases)
    return net, header
