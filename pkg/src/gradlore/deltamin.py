"""Model-complexity sweeps and the delta-min upper bound.

A sweep trains paired surrogates (with and without derivative matching,
equal randomness) across a complexity grid and records seed-averaged test
accuracy for both schemes. The complexity where the two accuracy curves
are closest, argmin_c |A_gi(c) - A_conv(c)|, serves as an upper bound on
useful model complexity; a genetic hyperparameter search can reject
oversized candidates against that bound before paying to train them.

Complexity c means nodes per hidden layer of a 4-hidden-layer network
(the sweep architecture is d_in -> c,c,c,c -> d_out).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .mlp import forward_batch, init_mlp
from .numerics import BadParams, Rng
from .processes import ProcessSpec, default_spec, make_dataset
from .trainer import TrainConfig, pearson, rmse, train


class TooFewRows(ValueError):
    """A sweep metric needs more complexity rows than it got."""


MEASURES = ("rmse", "pearson")  # rmse: lower is better; pearson: higher is better


@dataclass
class SweepRow:
    complexity: int
    a_conv: float
    a_gi: float


@dataclass
class SweepResult:
    process: str
    train_size: int
    seeds: int
    rows: list[SweepRow]
    measure: str = "rmse"


@dataclass
class TrainBudget:
    """Per-cell training settings shared by sweep and GA fitness."""

    epochs: int = 150
    eta: float = 0.05
    alpha: float = 0.5
    test_size: int = 500
    hidden_layers: int = 4


def _accuracy(measure: str, pred: np.ndarray, truth: np.ndarray) -> float:
    if measure == "rmse":
        return rmse(pred, truth)
    return pearson(pred, truth)


def _better(measure: str, a: float, b: float) -> bool:
    return a < b if measure == "rmse" else a > b


def train_pair(
    process: str,
    train_size: int,
    complexity: int,
    seed_rng: Rng,
    budget: TrainBudget,
    measure: str = "rmse",
    spec: ProcessSpec | None = None,
) -> tuple[float, float]:
    """One paired cell: (accuracy without gradients, accuracy with).

    Both schemes share the training draw, the test draw, and the initial
    weights, so the accuracy gap isolates the update rule.
    """
    spec = spec or default_spec(process)
    data, r = make_dataset(process, train_size, seed_rng.derive(1), spec)
    test, _ = make_dataset(process, budget.test_size, seed_rng.derive(2), spec)
    d_in = data.inputs.shape[1]
    d_out = data.targets.shape[1]
    sizes = [d_in] + [complexity] * budget.hidden_layers + [d_out]
    net0, _ = init_mlp(sizes, seed_rng.derive(3))
    base = dict(epochs=budget.epochs, eta=budget.eta, alpha=budget.alpha)
    net_conv, _ = train(net0.clone(), data, TrainConfig(use_gi=False, **base))
    net_gi, _ = train(net0.clone(), data, TrainConfig(use_gi=True, **base))
    a_conv = _accuracy(measure, forward_batch(net_conv, test.inputs), test.targets)
    a_gi = _accuracy(measure, forward_batch(net_gi, test.inputs), test.targets)
    return a_conv, a_gi


def sweep_cell_rng(seed: int, size: int, complexity: int, seed_index: int) -> Rng:
    """The one derivation every sweep cell uses (parallel callers must match it)."""
    return Rng(seed).derive(size).derive(complexity).derive(seed_index)


def sweep(
    process: str,
    sizes: list[int],
    complexities: list[int],
    k: int,
    budget: TrainBudget | None = None,
    seed: int = 0,
    measure: str = "rmse",
    spec: ProcessSpec | None = None,
    pair_results: dict | None = None,
) -> list[SweepResult]:
    """Seed-averaged accuracy per (train size, complexity), one result per size.

    pair_results, when given, is a prefilled {(size, c, seed_index): (a_conv,
    a_gi)} cache -- the hook the CLI uses to compute cells in parallel.
    """
    if not sizes or not complexities:
        raise BadParams("sweep: sizes and complexities must be nonempty")
    if k < 1:
        raise BadParams(f"sweep: need k >= 1 seeds, got {k}")
    if measure not in MEASURES:
        raise BadParams(f"sweep: unknown accuracy measure {measure!r}")
    budget = budget or TrainBudget()
    results = []
    for size in sizes:
        rows = []
        for c in sorted(complexities):
            conv, gi = [], []
            for s in range(k):
                key = (size, c, s)
                if pair_results is not None and key in pair_results:
                    a_conv, a_gi = pair_results[key]
                else:
                    a_conv, a_gi = train_pair(
                        process, size, c, sweep_cell_rng(seed, size, c, s),
                        budget, measure, spec,
                    )
                conv.append(a_conv)
                gi.append(a_gi)
            rows.append(SweepRow(c, float(np.mean(conv)), float(np.mean(gi))))
        results.append(SweepResult(process, size, k, rows, measure))
    return results


def delta_min(result: SweepResult) -> tuple[int, float]:
    """(c_upper, min |A_gi - A_conv|); ties break toward the smallest c."""
    if len(result.rows) < 2:
        raise TooFewRows(f"delta_min: need >= 2 rows, got {len(result.rows)}")
    rows = sorted(result.rows, key=lambda r: r.complexity)
    gaps = [abs(r.a_gi - r.a_conv) for r in rows]
    i = int(np.argmin(gaps))  # first occurrence = smallest complexity
    return rows[i].complexity, gaps[i]


def optimal_complexity(result: SweepResult) -> int:
    """Complexity of the best conventional accuracy (lowest RMSE on unseen data)."""
    if len(result.rows) < 1:
        raise TooFewRows("optimal_complexity: empty sweep")
    rows = sorted(result.rows, key=lambda r: r.complexity)
    best = rows[0]
    for r in rows[1:]:
        if _better(result.measure, r.a_conv, best.a_conv):
            best = r
    return best.complexity


def assumption_diagnostics(result: SweepResult) -> dict:
    """Fractions of the sweep grid where each monotonicity assumption holds.

    Reported, never asserted: the assumptions describe the process, not
    theorems. assumption1 = convexity of the conventional accuracy curve
    (slopes non-decreasing in c); assumption2 = GI at least as accurate below
    the optimum; assumption3 = GI's accuracy slope at least as large below
    the optimum (its improvement from extra complexity diminishes first).
    """
    rows = sorted(result.rows, key=lambda r: r.complexity)
    sign = 1.0 if result.measure == "rmse" else -1.0
    c = np.array([r.complexity for r in rows], dtype=float)
    a_conv = sign * np.array([r.a_conv for r in rows])
    a_gi = sign * np.array([r.a_gi for r in rows])
    c_star = optimal_complexity(result)

    slopes_conv = np.diff(a_conv) / np.diff(c)
    slopes_gi = np.diff(a_gi) / np.diff(c)
    a1 = float(np.mean(np.diff(slopes_conv) >= 0)) if slopes_conv.size > 1 else math.nan

    below = c <= c_star
    a2 = float(np.mean(a_gi[below] <= a_conv[below])) if below.any() else math.nan

    pair_below = below[:-1] & below[1:]
    a3 = (
        float(np.mean(slopes_gi[pair_below] >= slopes_conv[pair_below]))
        if pair_below.any()
        else math.nan
    )
    return {"assumption1": a1, "assumption2": a2, "assumption3": a3}


def save_sweep(path, results: list[SweepResult]) -> None:
    """sweep.csv: size, complexity, a_conv, a_gi, abs_delta."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["size", "complexity", "a_conv", "a_gi", "abs_delta"])
        for res in results:
            for r in sorted(res.rows, key=lambda r: r.complexity):
                writer.writerow(
                    [
                        res.train_size,
                        r.complexity,
                        repr(r.a_conv),
                        repr(r.a_gi),
                        repr(abs(r.a_gi - r.a_conv)),
                    ]
                )


@dataclass
class GaConfig:
    population: int = 8
    generations: int = 4
    mutation_rate: float = 0.25
    complexity_genes: tuple = (4, 8, 16, 32, 64)
    eta_genes: tuple = (0.02, 0.05)
    prune: bool = True
    seed: int = 0
    train_size: int = 100
    fitness_seeds: int = 1
    estimation_points: int = 5
    estimation_seeds: int = 3
    budget: TrainBudget = field(default_factory=TrainBudget)

    def __post_init__(self):
        if self.population < 2:
            raise BadParams(f"ga_optimize: population must be >= 2, got {self.population}")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise BadParams(f"ga_optimize: mutation_rate must be in [0,1]")
        if self.generations < 0:
            raise BadParams("ga_optimize: generations must be >= 0")
        if not self.complexity_genes or not self.eta_genes:
            raise BadParams("ga_optimize: gene spaces must be nonempty")


@dataclass
class GaResult:
    best_genes: dict
    best_fitness: float
    c_upper: int | None
    audit: list[dict]


def _pick(rng: Rng, options) -> tuple[object, Rng]:
    idx, rng = rng.integers(0, len(options), 1)
    return options[int(idx[0])], rng


def ga_optimize(process: str, cfg: GaConfig, spec: ProcessSpec | None = None) -> GaResult:
    """Genetic search over (complexity, eta) with optional delta-min pruning.

    With pruning on, a coarse complexity sweep (estimation_points across the
    gene range, estimation_seeds each) fixes c_upper first; any candidate
    whose complexity exceeds it is rejected before training. Every candidate
    is audited; `trained` records whether a fitness training actually ran.
    """
    spec = spec or default_spec(process)
    audit: list[dict] = []
    root = Rng(cfg.seed)
    ga_rng = root.derive(1)  # selection/crossover/mutation stream
    est_rng_seed = root.derive(2)  # kept apart so pruning never shifts GA draws

    c_upper = None
    if cfg.prune:
        lo, hi = min(cfg.complexity_genes), max(cfg.complexity_genes)
        grid = sorted({int(round(v)) for v in np.linspace(lo, hi, cfg.estimation_points)})
        est = sweep(
            process,
            [cfg.train_size],
            grid,
            cfg.estimation_seeds,
            cfg.budget,
            seed=est_rng_seed.seed,
            spec=spec,
        )[0]
        c_upper, gap = delta_min(est)
        for r in est.rows:
            audit.append(
                {
                    "phase": "estimate",
                    "complexity": r.complexity,
                    "a_conv": r.a_conv,
                    "a_gi": r.a_gi,
                }
            )
        audit.append({"phase": "estimate_bound", "c_upper": c_upper, "delta_min": gap})

    def evaluate(genes: dict, generation: int) -> float:
        pruned = cfg.prune and genes["complexity"] > c_upper
        fitness = math.inf
        if not pruned:
            budget = TrainBudget(
                epochs=cfg.budget.epochs,
                eta=genes["eta"],
                alpha=cfg.budget.alpha,
                test_size=cfg.budget.test_size,
                hidden_layers=cfg.budget.hidden_layers,
            )
            accs = []
            for s in range(cfg.fitness_seeds):
                cell = root.derive(3).derive(genes["complexity"]).derive(s)
                data, _ = make_dataset(process, cfg.train_size, cell.derive(1), spec)
                test, _ = make_dataset(process, cfg.budget.test_size, cell.derive(2), spec)
                sizes = (
                    [data.inputs.shape[1]]
                    + [genes["complexity"]] * budget.hidden_layers
                    + [data.targets.shape[1]]
                )
                net, _ = init_mlp(sizes, cell.derive(3))
                net, _ = train(
                    net,
                    data,
                    TrainConfig(epochs=budget.epochs, eta=budget.eta, alpha=budget.alpha),
                )
                accs.append(rmse(forward_batch(net, test.inputs), test.targets))
            fitness = float(np.mean(accs))
        audit.append(
            {
                "phase": "candidate",
                "generation": generation,
                "genes": dict(genes),
                "pruned": bool(pruned),
                "trained": not pruned,
                "fitness": None if pruned else fitness,
            }
        )
        return fitness

    def sample_genes(rng: Rng) -> tuple[dict, Rng]:
        c, rng = _pick(rng, cfg.complexity_genes)
        eta, rng = _pick(rng, cfg.eta_genes)
        return {"complexity": int(c), "eta": float(eta)}, rng

    population = []
    for _ in range(cfg.population):
        genes, ga_rng = sample_genes(ga_rng)
        population.append(genes)
    fits = [evaluate(g, 0) for g in population]

    best_genes, best_fit = None, math.inf
    for g, f in zip(population, fits):
        if f < best_fit:
            best_genes, best_fit = dict(g), f

    for gen in range(1, cfg.generations + 1):
        elite_idx = int(np.argmin(fits))
        new_pop = [dict(population[elite_idx])]
        new_fits = [fits[elite_idx]]
        while len(new_pop) < cfg.population:
            parents = []
            for _ in range(2):
                i, ga_rng = ga_rng.integers(0, cfg.population, 2)
                a, b = int(i[0]), int(i[1])
                parents.append(population[a] if fits[a] <= fits[b] else population[b])
            child = {}
            for key in ("complexity", "eta"):
                coin, ga_rng = ga_rng.uniform(0.0, 1.0, 1)
                child[key] = parents[0][key] if coin[0] < 0.5 else parents[1][key]
            for key, space in (("complexity", cfg.complexity_genes), ("eta", cfg.eta_genes)):
                coin, ga_rng = ga_rng.uniform(0.0, 1.0, 1)
                if coin[0] < cfg.mutation_rate:
                    val, ga_rng = _pick(ga_rng, space)
                    child[key] = int(val) if key == "complexity" else float(val)
            new_pop.append(child)
            new_fits.append(evaluate(child, gen))
        population, fits = new_pop, new_fits
        for g, f in zip(population, fits):
            if f < best_fit:
                best_genes, best_fit = dict(g), f

    return GaResult(best_genes, best_fit, c_upper, audit)


def save_audit(path, audit: list[dict]) -> None:
    """ga_audit.jsonl: one JSON object per event."""
    with open(path, "w") as fh:
        for entry in audit:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
