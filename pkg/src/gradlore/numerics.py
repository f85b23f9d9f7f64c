"""Dense linear algebra, seeded sampling, and finite-difference oracles.

Every other module funnels randomness through :class:`Rng` (a fixed
counter-based SplitMix64 stream, reproduced bit-for-bit across platforms)
and checks its analytic derivatives against :func:`fd_jacobian`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RNG_ALGORITHM = "splitmix64-counter/v1"

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX_A = np.uint64(0xBF58476D1CE4E5B9)
_MIX_B = np.uint64(0x94D049BB133111EB)
_MASK = 0xFFFFFFFFFFFFFFFF
_INV_2_53 = 1.0 / float(1 << 53)

CHOLESKY_PIVOT_FLOOR = 1e-12
SYMMETRY_TOL = 1e-10


class BadParams(ValueError):
    """Parameters outside their valid domain."""


class NotSpd(ValueError):
    """Matrix is not symmetric positive-definite (Cholesky pivot failed)."""


class NonFinite(ValueError):
    """A numeric evaluation produced inf or nan."""


def _mix64(x: np.ndarray) -> np.ndarray:
    # SplitMix64 finalizer; operands must be uint64 arrays (wrap mod 2^64).
    with np.errstate(over="ignore"):
        x = (x ^ (x >> np.uint64(30))) * _MIX_A
        x = (x ^ (x >> np.uint64(27))) * _MIX_B
        return x ^ (x >> np.uint64(31))


@dataclass(frozen=True)
class Rng:
    """Deterministic random stream with value semantics.

    Raw draw i is ``mix64(seed + (counter+i+1)*GAMMA)`` -- SplitMix64 with
    an explicit counter, so a (seed, counter) pair names one exact point in
    the stream. Sampling never mutates; every sampler returns the drawn
    values together with the advanced Rng.
    """

    seed: int
    counter: int = 0

    algorithm = RNG_ALGORITHM

    def _raw(self, n: int) -> np.ndarray:
        with np.errstate(over="ignore"):
            base = np.uint64(self.seed & _MASK)
            idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
            return _mix64(base + idx * _GAMMA)

    def _step(self, n: int) -> "Rng":
        return Rng(self.seed, self.counter + n)

    def derive(self, label: int) -> "Rng":
        """Independent child stream; same (seed, label) always gives the same child."""
        with np.errstate(over="ignore"):
            child = _mix64(
                np.uint64(self.seed & _MASK)
                ^ _mix64(np.uint64((label + 1) & _MASK) * _GAMMA)
            )
        return Rng(int(child), 0)

    def uniform(self, a: float, b: float, n: int) -> tuple[np.ndarray, "Rng"]:
        """n samples from U[a, b)."""
        if not a < b:
            raise BadParams(f"sample: uniform needs a < b, got a={a}, b={b}")
        u = (self._raw(n) >> np.uint64(11)).astype(np.float64) * _INV_2_53
        return a + (b - a) * u, self._step(n)

    def normal(self, mu: float, sigma: float, n: int) -> tuple[np.ndarray, "Rng"]:
        """n samples from N(mu, sigma^2) via Box-Muller on the raw stream.

        Consumes 2*ceil(n/2) raw draws (pairs), regardless of n's parity.
        """
        if not sigma > 0:
            raise BadParams(f"sample: normal needs sigma > 0, got {sigma}")
        m = (n + 1) // 2
        raw = self._raw(2 * m)
        # u1 in (0, 1] so log never sees 0; u2 in [0, 1).
        u1 = ((raw[:m] >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53
        u2 = (raw[m:] >> np.uint64(11)).astype(np.float64) * _INV_2_53
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])
        return mu + sigma * z[:n], self._step(2 * m)

    def integers(self, lo: int, hi: int, n: int) -> tuple[np.ndarray, "Rng"]:
        """n integers in [lo, hi). Modulo mapping; bias is negligible for small ranges."""
        if not lo < hi:
            raise BadParams(f"sample: integers needs lo < hi, got lo={lo}, hi={hi}")
        span = np.uint64(hi - lo)
        vals = (self._raw(n) % span).astype(np.int64) + lo
        return vals, self._step(n)

    def permutation(self, n: int) -> tuple[np.ndarray, "Rng"]:
        u, rng = self.uniform(0.0, 1.0, n)
        return np.argsort(u, kind="stable"), rng


def sample(rng: Rng, dist: tuple, n: int) -> tuple[np.ndarray, Rng]:
    """Draw n values from dist = ("normal", mu, sigma) or ("uniform", a, b)."""
    kind = dist[0]
    if kind == "normal":
        return rng.normal(dist[1], dist[2], n)
    if kind == "uniform":
        return rng.uniform(dist[1], dist[2], n)
    raise BadParams(f"sample: unknown distribution {kind!r}")


def cholesky_spd(a: np.ndarray, pivot_floor: float = CHOLESKY_PIVOT_FLOOR) -> np.ndarray:
    """Lower-triangular Cholesky factor; NotSpd on any pivot <= pivot_floor."""
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    lower = np.zeros((n, n))
    for j in range(n):
        pivot = a[j, j] - lower[j, :j] @ lower[j, :j]
        if not pivot > pivot_floor:
            raise NotSpd(f"solve_spd: pivot {pivot:.3e} <= {pivot_floor:.0e} at column {j}")
        lower[j, j] = np.sqrt(pivot)
        if j + 1 < n:
            lower[j + 1 :, j] = (a[j + 1 :, j] - lower[j + 1 :, :j] @ lower[j, :j]) / lower[j, j]
    return lower


def solve_spd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A x = b for symmetric positive-definite A via Cholesky."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotSpd(f"solve_spd: expected square matrix, got shape {a.shape}")
    if a.shape[0] != b.size:
        raise NotSpd(f"solve_spd: shape mismatch A {a.shape} vs b {b.shape}")
    if np.max(np.abs(a - a.T), initial=0.0) > SYMMETRY_TOL:
        raise NotSpd("solve_spd: matrix not symmetric within 1e-10")
    lower = cholesky_spd(a)
    n = b.size
    y = np.zeros(n)
    for i in range(n):
        y[i] = (b[i] - lower[i, :i] @ y[:i]) / lower[i, i]
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        x[i] = (y[i] - lower[i + 1 :, i] @ x[i + 1 :]) / lower[i, i]
    return x


def fd_jacobian(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian of a vector function; entry (i, j) = df_i/dx_j."""
    if not h > 0:
        raise BadParams(f"fd_jacobian: step must be positive, got {h}")
    x = np.asarray(x, dtype=np.float64).ravel()
    cols = []
    for j in range(x.size):
        xp = x.copy()
        xp[j] += h
        fp = np.atleast_1d(np.asarray(f(xp), dtype=np.float64))
        xm = x.copy()
        xm[j] -= h
        fm = np.atleast_1d(np.asarray(f(xm), dtype=np.float64))
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise NonFinite(f"fd_jacobian: non-finite evaluation at coordinate {j}")
        cols.append((fp - fm) / (2.0 * h))
    return np.stack(cols, axis=1)
