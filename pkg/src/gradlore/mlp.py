"""Feed-forward networks with input-Jacobian computation and double backprop.

Hidden layers are tanh (twice continuously differentiable, which the
derivative-matching loss needs); the output layer is affine for regression
surrogates and sigmoid for discriminators/generators. Parameters live in
plain float64 arrays; a network is treated as a value and updates return
new networks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import Rng


class ShapeMismatch(ValueError):
    """Inputs, targets, or gradients do not conform to the network shape."""


class BadAlpha(ValueError):
    """Loss-mixing weight outside [0, 1]."""


OUT_ACTIVATIONS = ("identity", "sigmoid")


@dataclass
class Mlp:
    """Fully-connected network: weights[l] has shape (n_{l+1}, n_l)."""

    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    out_activation: str = "identity"

    @property
    def d_in(self) -> int:
        return self.layer_sizes[0]

    @property
    def d_out(self) -> int:
        return self.layer_sizes[-1]

    def param_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def clone(self) -> "Mlp":
        return Mlp(
            list(self.layer_sizes),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.out_activation,
        )


@dataclass
class Grads:
    """Parameter gradients mirroring Mlp.weights / Mlp.biases."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]


@dataclass
class GiBatch:
    """Training triples: inputs (n, d_in), targets (n, d_out), target_grads (n, d_out, d_in)."""

    inputs: np.ndarray
    targets: np.ndarray
    target_grads: np.ndarray

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
        self.targets = np.atleast_2d(np.asarray(self.targets, dtype=np.float64))
        self.target_grads = np.asarray(self.target_grads, dtype=np.float64)
        n, d_in = self.inputs.shape
        if self.targets.shape[0] != n:
            raise ShapeMismatch("GiBatch: inputs and targets disagree on sample count")
        d_out = self.targets.shape[1]
        if self.target_grads.shape != (n, d_out, d_in):
            raise ShapeMismatch(
                f"GiBatch: target_grads shape {self.target_grads.shape} "
                f"!= {(n, d_out, d_in)}"
            )
        if not np.all(np.isfinite(self.target_grads)):
            raise ShapeMismatch("GiBatch: target_grads contain non-finite entries")

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    def take(self, idx: np.ndarray) -> "GiBatch":
        return GiBatch(self.inputs[idx], self.targets[idx], self.target_grads[idx])


def init_mlp(
    layer_sizes: list[int], rng: Rng, out_activation: str = "identity"
) -> tuple[Mlp, Rng]:
    """Weights ~ N(0, 1/fan_in), biases zero; keeps initial Jacobians O(1)."""
    if len(layer_sizes) < 2 or any(s < 1 for s in layer_sizes):
        raise ShapeMismatch(f"init_mlp: bad layer sizes {layer_sizes}")
    if out_activation not in OUT_ACTIVATIONS:
        raise ShapeMismatch(f"init_mlp: unknown output activation {out_activation!r}")
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        flat, rng = rng.normal(0.0, 1.0, fan_out * fan_in)
        weights.append(flat.reshape(fan_out, fan_in) / np.sqrt(fan_in))
        biases.append(np.zeros(fan_out))
    return Mlp(list(layer_sizes), weights, biases, out_activation), rng


def _out_act(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "identity":
        return z
    return 1.0 / (1.0 + np.exp(-z))


def _out_act_d(a: np.ndarray, kind: str) -> np.ndarray:
    # First derivative expressed through the activation value a.
    if kind == "identity":
        return np.ones_like(a)
    return a * (1.0 - a)


def _out_act_dd(a: np.ndarray, kind: str) -> np.ndarray:
    if kind == "identity":
        return np.zeros_like(a)
    return a * (1.0 - a) * (1.0 - 2.0 * a)


def _check_input(net: Mlp, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.d_in:
        raise ShapeMismatch(f"forward: input shape {x.shape} incompatible with d_in={net.d_in}")
    return x


def forward_cache(net: Mlp, x: np.ndarray) -> tuple[np.ndarray, dict]:
    """Batch forward pass returning outputs and cached activations."""
    a = _check_input(net, x)
    acts = [a]
    last = len(net.weights) - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = acts[-1] @ w.T + b
        a = _out_act(z, net.out_activation) if l == last else np.tanh(z)
        acts.append(a)
    return acts[-1], {"acts": acts}


def forward_batch(net: Mlp, x: np.ndarray) -> np.ndarray:
    y, _ = forward_cache(net, x)
    return y


def forward(net: Mlp, x: np.ndarray) -> np.ndarray:
    """Single-sample evaluation: 1-D input of length d_in -> 1-D output."""
    return forward_batch(net, np.asarray(x, dtype=np.float64)[None, :])[0]


def backward_from_delta(net: Mlp, cache: dict, delta: np.ndarray) -> tuple[Grads, np.ndarray]:
    """Reverse sweep from delta = dL/dz at the output pre-activation.

    Returns parameter gradients and dL/dx for the batch.
    """
    acts = cache["acts"]
    n_layers = len(net.weights)
    g_w = [None] * n_layers
    g_b = [None] * n_layers
    for l in range(n_layers - 1, -1, -1):
        g_w[l] = delta.T @ acts[l]
        g_b[l] = delta.sum(axis=0)
        d_prev = delta @ net.weights[l]
        if l > 0:
            delta = d_prev * (1.0 - acts[l] ** 2)  # tanh' through cached activation
    return Grads(g_w, g_b), d_prev


def target_loss(net: Mlp, batch: GiBatch) -> float:
    """E = (1/n) * sum_i ||z_i - zhat_i||^2."""
    y = forward_batch(net, batch.inputs)
    return float(np.sum((y - batch.targets) ** 2) / batch.n)


def param_grad_target(net: Mlp, batch: GiBatch) -> Grads:
    """dE/dtheta for the value-matching loss."""
    if batch.n == 0:
        raise ShapeMismatch("param_grad_target: empty batch")
    y, cache = forward_cache(net, batch.inputs)
    d_y = 2.0 * (y - batch.targets) / batch.n
    delta = d_y * _out_act_d(y, net.out_activation)
    grads, _ = backward_from_delta(net, cache, delta)
    return grads


def jacobian_cache(net: Mlp, x: np.ndarray) -> tuple[np.ndarray, dict]:
    """Batch input-Jacobians (n, d_out, d_in) plus the tensors double backprop reuses."""
    a = _check_input(net, x)
    n = a.shape[0]
    acts = [a]
    jacs = [np.broadcast_to(np.eye(net.d_in), (n, net.d_in, net.d_in)).copy()]
    pres = [None]  # pres[l] = W_l @ J_{l-1}, 1-indexed alongside acts
    last = len(net.weights) - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = acts[-1] @ w.T + b
        a = _out_act(z, net.out_activation) if l == last else np.tanh(z)
        p = np.matmul(w, jacs[-1])
        phi_d = _out_act_d(a, net.out_activation) if l == last else 1.0 - a**2
        acts.append(a)
        pres.append(p)
        jacs.append(phi_d[:, :, None] * p)
    return jacs[-1], {"acts": acts, "jacs": jacs, "pres": pres}


def jacobian_batch(net: Mlp, x: np.ndarray) -> np.ndarray:
    j, _ = jacobian_cache(net, x)
    return j


def input_jacobian(net: Mlp, x: np.ndarray) -> np.ndarray:
    """Analytic d output / d input for one sample, shape (d_out, d_in)."""
    return jacobian_batch(net, np.asarray(x, dtype=np.float64)[None, :])[0]


def jacobian_backprop(
    net: Mlp, x: np.ndarray, d_jac: np.ndarray, cache: dict | None = None
) -> tuple[Grads, np.ndarray]:
    """Double backpropagation: gradients of a Jacobian-dependent loss.

    Given the upstream cotangent d_jac = dL/dJ where J = jacobian_batch(net, x)
    (shape (n, d_out, d_in)), differentiates the Jacobian computation graph a
    second time and returns (dL/dtheta, dL/dx).

    Per layer the forward recursion is J_l = phi'(z_l) * (W_l @ J_{l-1});
    reversing it threads two cotangents downward: dL/dJ_l and dL/da_l (the
    latter because z_l = W_l a_{l-1} + b_l makes phi'(z_l) depend on every
    earlier activation). phi'' enters through the phi'(z_l) factor, which is
    why hidden activations must be C^2.
    """
    if cache is None:
        _, cache = jacobian_cache(net, x)
    acts, jacs, pres = cache["acts"], cache["jacs"], cache["pres"]
    n_layers = len(net.weights)
    if d_jac.shape != jacs[-1].shape:
        raise ShapeMismatch(
            f"jacobian_backprop: cotangent shape {d_jac.shape} != {jacs[-1].shape}"
        )
    g_w = [None] * n_layers
    g_b = [None] * n_layers
    d_j = d_jac
    d_a = 0.0
    for l in range(n_layers - 1, -1, -1):
        a = acts[l + 1]
        if l == n_layers - 1:
            phi_d = _out_act_d(a, net.out_activation)
            phi_dd = _out_act_dd(a, net.out_activation)
        else:
            phi_d = 1.0 - a**2
            phi_dd = -2.0 * a * phi_d
        d_p = phi_d[:, :, None] * d_j
        d_phi = np.sum(d_j * pres[l + 1], axis=2)
        delta = phi_d * d_a + phi_dd * d_phi if l < n_layers - 1 else phi_dd * d_phi
        g_w[l] = np.einsum("nik,njk->ij", d_p, jacs[l]) + delta.T @ acts[l]
        g_b[l] = delta.sum(axis=0)
        d_j = np.matmul(net.weights[l].T, d_p)
        d_a = delta @ net.weights[l]
    return Grads(g_w, g_b), d_a


def gi_loss(net: Mlp, batch: GiBatch) -> float:
    """E_grad = (1/n) * sum_i ||G_i - J(x_i)||_F^2 (unnormalised Frobenius MSE)."""
    j = jacobian_batch(net, batch.inputs)
    return float(np.sum((j - batch.target_grads) ** 2) / batch.n)


def param_grad_gi(net: Mlp, batch: GiBatch) -> Grads:
    """dE_grad/dtheta via double backpropagation."""
    if batch.n == 0:
        raise ShapeMismatch("param_grad_gi: empty batch")
    j, cache = jacobian_cache(net, batch.inputs)
    d_jac = 2.0 * (j - batch.target_grads) / batch.n
    grads, _ = jacobian_backprop(net, batch.inputs, d_jac, cache=cache)
    return grads


def _check_grads(net: Mlp, g: Grads, name: str) -> None:
    for w, gw in zip(net.weights, g.weights):
        if w.shape != gw.shape:
            raise ShapeMismatch(f"apply_update: {name} weight gradient shape mismatch")
    for b, gb in zip(net.biases, g.biases):
        if b.shape != gb.shape:
            raise ShapeMismatch(f"apply_update: {name} bias gradient shape mismatch")


def apply_update(
    net: Mlp,
    g_target: Grads,
    g_gi: Grads | None,
    eta: float,
    alpha: float,
) -> tuple[Mlp, float]:
    """One combined step: theta+ = theta - alpha*eta*gT - (1-alpha)*eta*gG.

    Returns the updated network and the reported parameter delta: the mean
    over parameters of |alpha*eta*gT| + |(1-alpha)*eta*gG|, i.e. the sum of
    absolute contributions of the two terms (they can offset in sign, but
    the absolute movement is what the per-epoch delta metric tracks).
    """
    if not 0.0 <= alpha <= 1.0:
        raise BadAlpha(f"apply_update: alpha must be in [0, 1], got {alpha}")
    _check_grads(net, g_target, "target")
    if g_gi is not None:
        _check_grads(net, g_gi, "gi")
    w_t = alpha * eta
    w_g = (1.0 - alpha) * eta
    new_w, new_b = [], []
    abs_sum = 0.0
    count = 0
    for l in range(len(net.weights)):
        step_w = np.zeros_like(net.weights[l])
        step_b = np.zeros_like(net.biases[l])
        # Terms with an exactly-zero coefficient are skipped so that e.g.
        # alpha=1 reproduces the plain update bit-for-bit.
        if w_t != 0.0:
            step_w += w_t * g_target.weights[l]
            step_b += w_t * g_target.biases[l]
            abs_sum += np.abs(w_t * g_target.weights[l]).sum()
            abs_sum += np.abs(w_t * g_target.biases[l]).sum()
        if g_gi is not None and w_g != 0.0:
            step_w += w_g * g_gi.weights[l]
            step_b += w_g * g_gi.biases[l]
            abs_sum += np.abs(w_g * g_gi.weights[l]).sum()
            abs_sum += np.abs(w_g * g_gi.biases[l]).sum()
        new_w.append(net.weights[l] - step_w)
        new_b.append(net.biases[l] - step_b)
        count += step_w.size + step_b.size
    updated = Mlp(list(net.layer_sizes), new_w, new_b, net.out_activation)
    return updated, abs_sum / count


def flatten_params(net: Mlp) -> np.ndarray:
    parts = []
    for w, b in zip(net.weights, net.biases):
        parts.append(w.ravel())
        parts.append(b)
    return np.concatenate(parts)


def with_params(net: Mlp, theta: np.ndarray) -> Mlp:
    theta = np.asarray(theta, dtype=np.float64)
    if theta.size != net.param_count():
        raise ShapeMismatch("with_params: flat vector length mismatch")
    new_w, new_b = [], []
    pos = 0
    for w, b in zip(net.weights, net.biases):
        new_w.append(theta[pos : pos + w.size].reshape(w.shape).copy())
        pos += w.size
        new_b.append(theta[pos : pos + b.size].copy())
        pos += b.size
    return Mlp(list(net.layer_sizes), new_w, new_b, net.out_activation)


def flatten_grads(g: Grads) -> np.ndarray:
    parts = []
    for w, b in zip(g.weights, g.biases):
        parts.append(w.ravel())
        parts.append(b)
    return np.concatenate(parts)


def dumps_mlp(net: Mlp) -> str:
    """Flat text model format: header, then one hex-float line per parameter.

    Header: ``mlp v1 <layer sizes...>`` plus a trailing ``sigmoid`` token when
    the output layer is sigmoid. Hex floats round-trip bit-exactly.
    """
    header = "mlp v1 " + " ".join(str(s) for s in net.layer_sizes)
    if net.out_activation == "sigmoid":
        header += " sigmoid"
    lines = [header]
    for v in flatten_params(net):
        lines.append(float(v).hex())
    return "\n".join(lines) + "\n"


def loads_mlp(text: str) -> Mlp:
    lines = text.strip().split("\n")
    head = lines[0].split()
    if len(head) < 4 or head[0] != "mlp" or head[1] != "v1":
        raise ValueError(f"loads_mlp: bad header {lines[0]!r}")
    out_activation = "identity"
    if head[-1] == "sigmoid":
        out_activation = "sigmoid"
        head = head[:-1]
    sizes = [int(s) for s in head[2:]]
    values = np.array([float.fromhex(line) for line in lines[1:]])
    template, _ = init_mlp(sizes, Rng(0), out_activation)
    if values.size != template.param_count():
        raise ValueError(
            f"loads_mlp: expected {template.param_count()} parameters, got {values.size}"
        )
    return with_params(template, values)


def save_mlp(net: Mlp, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_mlp(net))


def load_mlp(path) -> Mlp:
    with open(path) as fh:
        return loads_mlp(fh.read())
