"""Synthetic data generators whose output gradients are known in closed form.

Five processes: a noisy 1-D quadratic, a 2-D cosine simulator observed on a
fixed time grid, multi-horizon GARCH(1,1) volatility forecasts, an
8-parameter exponential response surface, and a noiseless sine wave. Each
generator returns values together with the analytic Jacobian of outputs
with respect to the sampled parameters -- the extra training signal the
rest of the library consumes.

Surrogate convention: for cosine2d and garch the learned map is parameter
vector -> the full output vector over the fixed grid (10 time steps /
5 horizons); for exp8d it is the 8 coefficients -> values on a fixed input
design. Gradients carry no observation noise even when targets do.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mlp import GiBatch
from .numerics import BadParams, Rng

PROCESS_KINDS = ("quadratic", "cosine2d", "garch", "exp8d", "sine")


@dataclass(frozen=True)
class ProcessSpec:
    """Fixed constants for every generator; defaults match the studied setups."""

    kind: str = "quadratic"
    noise_sigma: float = 1.0
    quad_lo: float = -3.0
    quad_hi: float = 3.0
    # cosine2d: y_t = (cos[phi(th1 - t - psi)] cos[phi(th2 - t - psi)])^2
    phi: float = 0.1
    psi: float = 5.0
    t_grid: tuple = tuple(range(1, 11))
    theta_lo: float = 0.0
    theta_hi: float = 15.0
    # garch surrogate sampling ranges and fixed current variance
    horizons: tuple = (1, 2, 3, 4, 5)
    sigma2_t: float = 1.0
    u_range: tuple = (-0.1, 0.1)
    omega_range: tuple = (0.0, 0.1)
    alpha_range: tuple = (0.0, 0.5)
    beta_range: tuple = (0.0, 0.95)
    # exp8d fixed offsets, coefficient range, and input design
    alpha_fix: float = 0.5
    eta_fix: float = 0.5
    theta8_lo: float = -1.0
    theta8_hi: float = 1.0
    design_points: int = 8
    design_seed: int = 88
    # sine interval
    sine_lo: float = 0.0
    sine_hi: float = 2.0 * math.pi


@dataclass(frozen=True)
class GarchParams:
    """GARCH(1,1) state: next variance = omega + alpha_g*u^2 + beta_g*sigma2_t."""

    u: float
    omega: float
    alpha_g: float
    beta_g: float
    sigma2_t: float
    horizons: tuple = (1, 2, 3, 4, 5)

    def __post_init__(self):
        if self.omega < 0 or self.alpha_g < 0 or self.beta_g < 0:
            raise BadParams("gen_garch: omega, alpha_g, beta_g must be >= 0")
        if not self.sigma2_t > 0:
            raise BadParams(f"gen_garch: sigma2_t must be > 0, got {self.sigma2_t}")
        if len(self.horizons) == 0 or any(int(h) < 1 or int(h) != h for h in self.horizons):
            raise BadParams(f"gen_garch: horizons must be integers >= 1, got {self.horizons}")


def default_spec(kind: str) -> ProcessSpec:
    if kind not in PROCESS_KINDS:
        raise BadParams(f"make_dataset: unknown process kind {kind!r}")
    return ProcessSpec(kind=kind)


def gen_quadratic(n: int, rng: Rng, spec: ProcessSpec | None = None) -> tuple[GiBatch, Rng]:
    """z = 2x^2 + eps with eps ~ N(0,1); gradient target is the noiseless 4x."""
    spec = spec or default_spec("quadratic")
    x, rng = rng.uniform(spec.quad_lo, spec.quad_hi, n)
    eps, rng = rng.normal(0.0, spec.noise_sigma, n)
    z = 2.0 * x**2 + eps
    gi = 4.0 * x
    return GiBatch(x[:, None], z[:, None], gi[:, None, None]), rng


def gen_sine(n: int, rng: Rng, spec: ProcessSpec | None = None) -> tuple[GiBatch, Rng]:
    """Noiseless sine over [0, 2pi]: z = sin x, gradient cos x."""
    spec = spec or default_spec("sine")
    x, rng = rng.uniform(spec.sine_lo, spec.sine_hi, n)
    return GiBatch(x[:, None], np.sin(x)[:, None], np.cos(x)[:, None, None]), rng


def cosine2d_outputs(theta, spec: ProcessSpec | None = None) -> np.ndarray:
    """y_t over the time grid for one parameter pair."""
    spec = spec or default_spec("cosine2d")
    t = np.asarray(spec.t_grid, dtype=np.float64)
    a = np.cos(spec.phi * (theta[0] - t - spec.psi))
    b = np.cos(spec.phi * (theta[1] - t - spec.psi))
    return (a * b) ** 2


def cosine2d_jacobian(theta, spec: ProcessSpec | None = None) -> np.ndarray:
    """Analytic (len(t_grid), 2) Jacobian; dy/dth1 = -phi sin(2 phi u1) cos^2(phi u2)."""
    spec = spec or default_spec("cosine2d")
    t = np.asarray(spec.t_grid, dtype=np.float64)
    u1 = spec.phi * (theta[0] - t - spec.psi)
    u2 = spec.phi * (theta[1] - t - spec.psi)
    d1 = -spec.phi * np.sin(2.0 * u1) * np.cos(u2) ** 2
    d2 = -spec.phi * np.sin(2.0 * u2) * np.cos(u1) ** 2
    return np.stack([d1, d2], axis=1)


def gen_cosine2d(theta, spec: ProcessSpec | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Outputs over the grid plus the Jacobian w.r.t. (theta1, theta2)."""
    return cosine2d_outputs(theta, spec), cosine2d_jacobian(theta, spec)


def gen_garch(p: GarchParams) -> tuple[np.ndarray, np.ndarray]:
    """Multi-horizon variance forecasts and their Jacobian w.r.t. (u, omega, alpha, beta).

    h=1 is the defining recursion; h>=2 uses sigma2_{t+h} = omega + (alpha+beta) *
    sigma2_{t+h-1}, differentiated alongside the values.
    """
    h_max = int(max(p.horizons))
    val = p.omega + p.alpha_g * p.u**2 + p.beta_g * p.sigma2_t
    jac = np.array([2.0 * p.alpha_g * p.u, 1.0, p.u**2, p.sigma2_t])
    by_h = {1: (val, jac.copy())}
    ab = p.alpha_g + p.beta_g
    for h in range(2, h_max + 1):
        prev_val, prev_jac = by_h[h - 1]
        val = p.omega + ab * prev_val
        jac = ab * prev_jac
        jac[1] += 1.0
        jac[2] += prev_val
        jac[3] += prev_val
        by_h[h] = (val, jac)
    values = np.array([by_h[int(h)][0] for h in p.horizons])
    jacobian = np.stack([by_h[int(h)][1] for h in p.horizons])
    return values, jacobian


def exp8d_design(spec: ProcessSpec | None = None) -> np.ndarray:
    """The fixed input design the 8-D surrogate is evaluated on (rows in [0,1]^3)."""
    spec = spec or default_spec("exp8d")
    flat, _ = Rng(spec.design_seed).uniform(0.0, 1.0, spec.design_points * 3)
    return flat.reshape(spec.design_points, 3)


def exp8d_values(theta8, x: np.ndarray, spec: ProcessSpec | None = None) -> np.ndarray:
    """y = b1*x0 + b2*(b3 exp[b4(x1-alpha)]) + b5*(b6 exp[b7(x2-eta)]) + b8 per row."""
    spec = spec or default_spec("exp8d")
    b = np.asarray(theta8, dtype=np.float64)
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    e1 = np.exp(b[3] * (x[:, 1] - spec.alpha_fix))
    e2 = np.exp(b[6] * (x[:, 2] - spec.eta_fix))
    return b[0] * x[:, 0] + b[1] * b[2] * e1 + b[4] * b[5] * e2 + b[7]


def exp8d_jacobian(theta8, x: np.ndarray, spec: ProcessSpec | None = None) -> np.ndarray:
    """Analytic (n, 8) partials of y w.r.t. the coefficients."""
    spec = spec or default_spec("exp8d")
    b = np.asarray(theta8, dtype=np.float64)
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    d1 = x[:, 1] - spec.alpha_fix
    d2 = x[:, 2] - spec.eta_fix
    e1 = np.exp(b[3] * d1)
    e2 = np.exp(b[6] * d2)
    n = x.shape[0]
    jac = np.empty((n, 8))
    jac[:, 0] = x[:, 0]
    jac[:, 1] = b[2] * e1
    jac[:, 2] = b[1] * e1
    jac[:, 3] = b[1] * b[2] * d1 * e1
    jac[:, 4] = b[5] * e2
    jac[:, 5] = b[4] * e2
    jac[:, 6] = b[4] * b[5] * d2 * e2
    jac[:, 7] = 1.0
    return jac


def gen_exp8d(
    theta8, x: np.ndarray, spec: ProcessSpec | None = None
) -> tuple[np.ndarray, np.ndarray]:
    return exp8d_values(theta8, x, spec), exp8d_jacobian(theta8, x, spec)


def dataset_cosine2d(n: int, rng: Rng, spec: ProcessSpec | None = None) -> tuple[GiBatch, Rng]:
    spec = spec or default_spec("cosine2d")
    flat, rng = rng.uniform(spec.theta_lo, spec.theta_hi, 2 * n)
    thetas = flat.reshape(n, 2)
    targets = np.stack([cosine2d_outputs(th, spec) for th in thetas])
    grads = np.stack([cosine2d_jacobian(th, spec) for th in thetas])
    return GiBatch(thetas, targets, grads), rng


def sample_garch_params(rng: Rng, spec: ProcessSpec | None = None) -> tuple[GarchParams, Rng]:
    """One stationary draw (alpha_g + beta_g < 1, by rejection on beta_g)."""
    spec = spec or default_spec("garch")
    u, rng = rng.uniform(*spec.u_range, 1)
    omega, rng = rng.uniform(*spec.omega_range, 1)
    alpha_g, rng = rng.uniform(*spec.alpha_range, 1)
    while True:
        beta_g, rng = rng.uniform(*spec.beta_range, 1)
        if alpha_g[0] + beta_g[0] < 1.0:
            break
    return (
        GarchParams(u[0], omega[0], alpha_g[0], beta_g[0], spec.sigma2_t, spec.horizons),
        rng,
    )


def dataset_garch(n: int, rng: Rng, spec: ProcessSpec | None = None) -> tuple[GiBatch, Rng]:
    spec = spec or default_spec("garch")
    thetas = np.empty((n, 4))
    targets = np.empty((n, len(spec.horizons)))
    grads = np.empty((n, len(spec.horizons), 4))
    for i in range(n):
        p, rng = sample_garch_params(rng, spec)
        thetas[i] = (p.u, p.omega, p.alpha_g, p.beta_g)
        targets[i], grads[i] = gen_garch(p)
    return GiBatch(thetas, targets, grads), rng


def dataset_exp8d(n: int, rng: Rng, spec: ProcessSpec | None = None) -> tuple[GiBatch, Rng]:
    spec = spec or default_spec("exp8d")
    design = exp8d_design(spec)
    flat, rng = rng.uniform(spec.theta8_lo, spec.theta8_hi, 8 * n)
    thetas = flat.reshape(n, 8)
    targets = np.stack([exp8d_values(th, design, spec) for th in thetas])
    grads = np.stack([exp8d_jacobian(th, design, spec) for th in thetas])
    return GiBatch(thetas, targets, grads), rng


def make_dataset(
    kind: str, n: int, rng: Rng, spec: ProcessSpec | None = None
) -> tuple[GiBatch, Rng]:
    """Surrogate-convention GiBatch for any process kind."""
    if kind == "quadratic":
        return gen_quadratic(n, rng, spec)
    if kind == "sine":
        return gen_sine(n, rng, spec)
    if kind == "cosine2d":
        return dataset_cosine2d(n, rng, spec)
    if kind == "garch":
        return dataset_garch(n, rng, spec)
    if kind == "exp8d":
        return dataset_exp8d(n, rng, spec)
    raise BadParams(f"make_dataset: unknown process kind {kind!r}")


def save_gibatch(path, batch: GiBatch) -> None:
    """CSV dump: columns x<i>, z<j>, g<j>_<i> (Jacobian row-major)."""
    n, d_in = batch.inputs.shape
    d_out = batch.targets.shape[1]
    header = (
        [f"x{i}" for i in range(d_in)]
        + [f"z{j}" for j in range(d_out)]
        + [f"g{j}_{i}" for j in range(d_out) for i in range(d_in)]
    )
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for k in range(n):
            row = (
                list(batch.inputs[k])
                + list(batch.targets[k])
                + list(batch.target_grads[k].ravel())
            )
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_gibatch(path) -> GiBatch:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [[float(v) for v in line.strip().split(",")] for line in fh if line.strip()]
    d_in = sum(1 for h in header if h.startswith("x"))
    d_out = sum(1 for h in header if h.startswith("z"))
    data = np.asarray(rows)
    inputs = data[:, :d_in]
    targets = data[:, d_in : d_in + d_out]
    grads = data[:, d_in + d_out :].reshape(len(rows), d_out, d_in)
    return GiBatch(inputs, targets, grads)
