"""Multi-modal genetic algorithm with probabilistic crowding.

One generation, in fixed order: crossover over a random disjoint pairing,
per-offspring mutation, an optional batch improvement operator, Hamming
crowding distances, minimum-cost parent/offspring matching, a linear
greediness ramp, pairwise crowding selection, bookkeeping.  Every random
draw comes from a single seeded generator in that order, so a run is fully
reproducible from (instance, config, operator).
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigurationError,
    ContractViolationError,
    InvalidInputError,
    OperatorFailureError,
)
from .improve import ImprovementOperator, identity_operator
from .matching import find_matchings
from .model import (
    Instance,
    NUM_CODES,
    Schedule,
    as_schedule,
    batch_cell_scores,
    batch_penalties,
    cell_penalty_scores,
    max_fitness,
)

CROSSOVER_KINDS = ("one_line", "one_line_partially")
MUTATION_KINDS = ("swap", "change", "penalty")

TRACE_COLUMNS = (
    "epoch",
    "mean_fitness",
    "max_fitness",
    "min_soft_feasible",
    "mean_soft_feasible",
    "min_hard",
    "mean_hard",
    "num_feasible",
    "num_optimal",
    "mean_crowding",
    "max_crowding",
    "elapsed_seconds",
)


@dataclass
class GaConfig:
    pop_size: int = 200
    stop_cond_version: str = "v2"
    nb_max_epochs: int = 50000
    max_patience: int = 3000
    probab_crossover: float = 0.5
    probab_mutation: float = 1.0
    min_prob_greedy: float = 0.4
    use_improver: bool = False
    crossover_mix: tuple[float, float] = (0.5, 0.5)
    mutation_mix: tuple[float, float, float] = (0.2, 0.2, 0.6)
    seed: int = 0
    max_wall_seconds: float | None = None

    def __post_init__(self):
        if self.pop_size < 2 or self.pop_size % 2 != 0:
            raise InvalidInputError("pop_size must be a positive even number")
        if self.stop_cond_version not in ("v1", "v2"):
            raise InvalidInputError("stop_cond_version must be 'v1' or 'v2'")
        if self.nb_max_epochs < 1 or self.max_patience < 1:
            raise InvalidInputError("epoch and patience limits must be positive")
        for name in ("probab_crossover", "probab_mutation", "min_prob_greedy"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise InvalidInputError(f"{name} must lie in [0, 1]")
        if abs(sum(self.crossover_mix) - 1.0) > 1e-9 or len(self.crossover_mix) != 2:
            raise InvalidInputError("crossover_mix must be two probabilities summing to 1")
        if abs(sum(self.mutation_mix) - 1.0) > 1e-9 or len(self.mutation_mix) != 3:
            raise InvalidInputError("mutation_mix must be three probabilities summing to 1")


@dataclass
class PopulationState:
    chromosomes: np.ndarray  # (P, E, D)
    fitness: np.ndarray  # (P,)
    hard: np.ndarray  # (P,)
    soft_normalized: np.ndarray
    soft_unnormalized: np.ndarray
    best_fitness_so_far: float
    patience: int = 0
    prob_greedy: float = 0.0
    epoch: int = 0
    elapsed_seconds: float = 0.0


@dataclass
class GenerationRecord:
    epoch: int
    mean_fitness: float
    max_fitness: float
    min_soft_feasible: int | None
    mean_soft_feasible: float | None
    min_hard: int
    mean_hard: float
    num_feasible: int
    num_optimal: int | None
    mean_crowding: float
    max_crowding: int
    elapsed_seconds: float


@dataclass
class RunTrace:
    records: list[GenerationRecord]
    final_population: np.ndarray
    best_schedule: np.ndarray
    best_fitness: float
    stop_epoch: int
    total_seconds: float
    first_optimal_epoch: int | None

    @property
    def reached_optimal(self) -> bool:
        return self.first_optimal_epoch is not None


def _eval_population(cells: np.ndarray, instance: Instance):
    ev = batch_penalties(cells, instance)
    cap = max_fitness(instance.num_employees, instance.num_days, instance.num_shifts)
    fit = cap - (ev.hard + ev.soft_normalized)
    return fit, ev.hard.astype(np.int64), ev.soft_normalized, ev.soft_unnormalized.astype(np.int64)


def get_init_population(instance: Instance, pop_size: int, rng) -> PopulationState:
    """Uniform random population; feasible and unfeasible members alike."""
    if pop_size < 2 or pop_size % 2 != 0:
        raise InvalidInputError("pop_size must be a positive even number")
    E, D = instance.shape
    cells = rng.integers(0, NUM_CODES, size=(pop_size, E, D), dtype=np.int64)
    fit, hard, soft_n, soft_u = _eval_population(cells, instance)
    return PopulationState(
        chromosomes=cells,
        fitness=fit,
        hard=hard,
        soft_normalized=soft_n,
        soft_unnormalized=soft_u,
        best_fitness_so_far=float(fit.max()),
    )


def cx_one_line(p1: Schedule, p2: Schedule, rng) -> tuple[Schedule, Schedule]:
    """Swap one uniformly drawn row of p1 with one of p2."""
    p1 = np.asarray(p1)
    p2 = np.asarray(p2)
    if p1.shape != p2.shape:
        raise InvalidInputError("parents must share dimensions")
    i = int(rng.integers(p1.shape[0]))
    j = int(rng.integers(p2.shape[0]))
    c1, c2 = p1.copy(), p2.copy()
    c1[i] = p2[j]
    c2[j] = p1[i]
    return c1, c2


def cx_one_line_partially(p1: Schedule, p2: Schedule, rng) -> tuple[Schedule, Schedule]:
    """Swap equal-length row segments with independent starting offsets."""
    p1 = np.asarray(p1)
    p2 = np.asarray(p2)
    if p1.shape != p2.shape:
        raise InvalidInputError("parents must share dimensions")
    D = p1.shape[1]
    length = int(rng.integers(1, D + 1))
    i = int(rng.integers(p1.shape[0]))
    j = int(rng.integers(p2.shape[0]))
    a = int(rng.integers(0, D - length + 1))
    b = int(rng.integers(0, D - length + 1))
    c1, c2 = p1.copy(), p2.copy()
    c1[i, a : a + length] = p2[j, b : b + length]
    c2[j, b : b + length] = p1[i, a : a + length]
    return c1, c2


def _mutate_inplace(cells, instance, mix, rng, scores=None) -> None:
    """Core mutation draws; mutates `cells` (E, D) in place."""
    n = cells.size
    flat = cells.reshape(-1)
    u = rng.random()
    if u < mix[0]:
        # swap two distinct cells
        i1 = int(rng.integers(n))
        i2 = int(rng.integers(n - 1))
        if i2 >= i1:
            i2 += 1
        flat[i1], flat[i2] = flat[i2], flat[i1]
    elif u < mix[0] + mix[1]:
        i = int(rng.integers(n))
        flat[i] = (flat[i] + int(rng.integers(1, NUM_CODES))) % NUM_CODES
    else:
        if scores is None:
            scores = cell_penalty_scores(cells, instance)
        flat_scores = scores.reshape(-1)
        ties = np.flatnonzero(flat_scores == flat_scores.max())
        i = int(ties[rng.integers(len(ties))])
        flat[i] = (flat[i] + int(rng.integers(1, NUM_CODES))) % NUM_CODES


def mutate(
    ch: Schedule,
    instance: Instance,
    mix: tuple[float, float, float],
    rng,
    _scores: np.ndarray | None = None,
) -> Schedule:
    """Swap two cells, retarget one cell, or retarget the worst-scoring cell."""
    cells = as_schedule(ch, instance).copy()
    _mutate_inplace(cells, instance, mix, rng, scores=_scores)
    return cells


def calc_crowding_distances(parents, offspring) -> np.ndarray:
    """Hamming distance between every parent and every offspring."""
    p = np.asarray(parents)
    o = np.asarray(offspring)
    if p.shape != o.shape:
        raise InvalidInputError("parent and offspring lists must match in shape")
    n = p.shape[0]
    flat_p = p.reshape(n, -1)
    flat_o = o.reshape(n, -1)
    return (flat_p[:, None, :] != flat_o[None, :, :]).sum(axis=2).astype(np.int64)


def update_prob_greedy(epoch: int, cfg: GaConfig) -> float:
    """Linear ramp from min_prob_greedy at epoch 0 to 1.0 at nb_max_epochs."""
    if epoch < 0:
        raise InvalidInputError("epoch must be nonnegative")
    frac = epoch / cfg.nb_max_epochs
    return min(1.0, cfg.min_prob_greedy + (1.0 - cfg.min_prob_greedy) * frac)


def selection(
    parents: np.ndarray,
    offspring: np.ndarray,
    matching: np.ndarray,
    prob_greedy: float,
    parent_fitness: np.ndarray,
    offspring_fitness: np.ndarray,
    rng,
) -> tuple[np.ndarray, np.ndarray]:
    """Pairwise crowding tournament; returns (new population, offspring-won mask).

    With probability prob_greedy the strictly fitter member wins (parent on
    ties); otherwise the offspring wins with probability f(c)/(f(c)+f(p)).
    """
    n = parents.shape[0]
    sigma = np.asarray(matching)
    if sorted(sigma.tolist()) != list(range(n)):
        raise InvalidInputError("matching must be a permutation")
    if parent_fitness.min() <= 0 or offspring_fitness.min() <= 0:
        raise ContractViolationError("selection requires strictly positive fitness")
    new_pop = parents.copy()
    took_offspring = np.zeros(n, dtype=bool)
    for i in range(n):
        c = int(sigma[i])
        fp = float(parent_fitness[i])
        fc = float(offspring_fitness[c])
        if rng.random() < prob_greedy:
            wins = fc > fp
        else:
            wins = rng.random() < fc / (fc + fp)
        if wins:
            new_pop[i] = offspring[c]
            took_offspring[i] = True
    return new_pop, took_offspring


def stop_alg(state: PopulationState, cfg: GaConfig, instance: Instance) -> bool:
    """Stopping rule: epoch cap plus optimality (v1) or patience (v2)."""
    if (
        cfg.max_wall_seconds is not None
        and state.elapsed_seconds >= cfg.max_wall_seconds
    ):
        return True
    if state.epoch >= cfg.nb_max_epochs:
        return True
    if cfg.stop_cond_version == "v1":
        if instance.reference_min_soft is None:
            raise ConfigurationError(
                "stop condition v1 requires instance.reference_min_soft"
            )
        return bool(
            ((state.hard == 0) & (state.soft_unnormalized == instance.reference_min_soft)).any()
        )
    return state.patience >= cfg.max_patience


def update_patience(state: PopulationState, new_best_fitness: float) -> int:
    """Reset on any strict improvement of the best fitness, else increment."""
    if new_best_fitness > state.best_fitness_so_far:
        return 0
    return state.patience + 1


def _crossover_all(pop: np.ndarray, cfg: GaConfig, rng) -> np.ndarray:
    n = pop.shape[0]
    perm = rng.permutation(n)
    offspring = np.empty_like(pop)
    for k in range(0, n, 2):
        a, b = int(perm[k]), int(perm[k + 1])
        if rng.random() < cfg.probab_crossover:
            if rng.random() < cfg.crossover_mix[0]:
                c1, c2 = cx_one_line(pop[a], pop[b], rng)
            else:
                c1, c2 = cx_one_line_partially(pop[a], pop[b], rng)
        else:
            c1, c2 = pop[a].copy(), pop[b].copy()
        offspring[k] = c1
        offspring[k + 1] = c2
    return offspring


def _mutation_all(
    offspring: np.ndarray, instance: Instance, cfg: GaConfig, rng
) -> np.ndarray:
    # Attribution scores are batched over the pre-mutation offspring; each
    # chromosome is mutated at most once, so its row stays valid.
    scores = None
    if cfg.probab_mutation > 0 and cfg.mutation_mix[2] > 0:
        scores = batch_cell_scores(offspring, instance)
    for k in range(offspring.shape[0]):
        if rng.random() < cfg.probab_mutation:
            _mutate_inplace(
                offspring[k],
                instance,
                cfg.mutation_mix,
                rng,
                scores=None if scores is None else scores[k],
            )
    return offspring


def run(
    instance: Instance,
    cfg: GaConfig,
    improver: ImprovementOperator | None = None,
) -> RunTrace:
    """Full GA run; returns the per-generation trace and the best schedule."""
    if cfg.stop_cond_version == "v1" and instance.reference_min_soft is None:
        raise ConfigurationError("stop condition v1 requires instance.reference_min_soft")
    if improver is None:
        improver = identity_operator()
    rng = np.random.default_rng(cfg.seed)
    state = get_init_population(instance, cfg.pop_size, rng)
    state.prob_greedy = cfg.min_prob_greedy

    ref = instance.reference_min_soft
    started = time.perf_counter()
    records: list[GenerationRecord] = []
    best_idx = int(np.argmax(state.fitness))
    best_fitness = float(state.fitness[best_idx])
    best_schedule = state.chromosomes[best_idx].copy()
    first_optimal_epoch: int | None = None

    def optimal_mask() -> np.ndarray | None:
        if ref is None:
            return None
        return (state.hard == 0) & (state.soft_unnormalized == ref)

    mask = optimal_mask()
    if mask is not None and mask.any():
        first_optimal_epoch = 0

    while True:
        state.elapsed_seconds = time.perf_counter() - started
        if stop_alg(state, cfg, instance):
            break

        offspring = _crossover_all(state.chromosomes, cfg, rng)
        offspring = _mutation_all(offspring, instance, cfg, rng)
        if cfg.use_improver:
            try:
                improved = improver.improve(list(offspring), instance)
            except OperatorFailureError as exc:
                exc.epoch = state.epoch
                raise
            except Exception as exc:  # noqa: BLE001 - operator contract boundary
                raise OperatorFailureError(
                    f"improvement operator failed: {exc}", epoch=state.epoch
                ) from exc
            if len(improved) != offspring.shape[0]:
                raise OperatorFailureError(
                    "operator changed the batch size", epoch=state.epoch
                )
            offspring = np.stack(
                [as_schedule(s, instance) for s in improved]
            )

        off_fit, off_hard, off_soft_n, off_soft_u = _eval_population(
            offspring, instance
        )
        distances = calc_crowding_distances(state.chromosomes, offspring)
        sigma = find_matchings(distances)
        state.prob_greedy = update_prob_greedy(state.epoch, cfg)
        new_pop, took = selection(
            state.chromosomes,
            offspring,
            sigma,
            state.prob_greedy,
            state.fitness,
            off_fit,
            rng,
        )

        state.chromosomes = new_pop
        state.fitness = np.where(took, off_fit[sigma], state.fitness)
        state.hard = np.where(took, off_hard[sigma], state.hard)
        state.soft_normalized = np.where(took, off_soft_n[sigma], state.soft_normalized)
        state.soft_unnormalized = np.where(
            took, off_soft_u[sigma], state.soft_unnormalized
        )

        gen_best = int(np.argmax(state.fitness))
        gen_best_fitness = float(state.fitness[gen_best])
        state.patience = update_patience(state, gen_best_fitness)
        if gen_best_fitness > best_fitness:
            best_fitness = gen_best_fitness
            best_schedule = state.chromosomes[gen_best].copy()
        state.best_fitness_so_far = max(state.best_fitness_so_far, gen_best_fitness)

        mask = optimal_mask()
        num_optimal = None if mask is None else int(mask.sum())
        if first_optimal_epoch is None and mask is not None and mask.any():
            first_optimal_epoch = state.epoch

        feasible = state.hard == 0
        num_feasible = int(feasible.sum())
        pair_d = distances[np.arange(cfg.pop_size), sigma]
        soft_feas = state.soft_unnormalized[feasible]
        records.append(
            GenerationRecord(
                epoch=state.epoch,
                mean_fitness=float(state.fitness.mean()),
                max_fitness=float(state.fitness.max()),
                min_soft_feasible=int(soft_feas.min()) if num_feasible else None,
                mean_soft_feasible=float(soft_feas.mean()) if num_feasible else None,
                min_hard=int(state.hard.min()),
                mean_hard=float(state.hard.mean()),
                num_feasible=num_feasible,
                num_optimal=num_optimal,
                mean_crowding=float(pair_d.mean()),
                max_crowding=int(pair_d.max()),
                elapsed_seconds=time.perf_counter() - started,
            )
        )
        state.epoch += 1

    return RunTrace(
        records=records,
        final_population=state.chromosomes,
        best_schedule=best_schedule,
        best_fitness=best_fitness,
        stop_epoch=state.epoch,
        total_seconds=time.perf_counter() - started,
        first_optimal_epoch=first_optimal_epoch,
    )


def write_trace_csv(records: list[GenerationRecord], path) -> None:
    """Trace CSV with exactly the GenerationRecord fields, in order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for rec in records:
            writer.writerow(
                [
                    rec.epoch,
                    repr(rec.mean_fitness),
                    repr(rec.max_fitness),
                    "" if rec.min_soft_feasible is None else rec.min_soft_feasible,
                    "" if rec.mean_soft_feasible is None else repr(rec.mean_soft_feasible),
                    rec.min_hard,
                    repr(rec.mean_hard),
                    rec.num_feasible,
                    "" if rec.num_optimal is None else rec.num_optimal,
                    repr(rec.mean_crowding),
                    rec.max_crowding,
                    repr(rec.elapsed_seconds),
                ]
            )


def read_trace_csv(path) -> list[GenerationRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            records.append(
                GenerationRecord(
                    epoch=int(row["epoch"]),
                    mean_fitness=float(row["mean_fitness"]),
                    max_fitness=float(row["max_fitness"]),
                    min_soft_feasible=(
                        int(row["min_soft_feasible"]) if row["min_soft_feasible"] else None
                    ),
                    mean_soft_feasible=(
                        float(row["mean_soft_feasible"]) if row["mean_soft_feasible"] else None
                    ),
                    min_hard=int(row["min_hard"]),
                    mean_hard=float(row["mean_hard"]),
                    num_feasible=int(row["num_feasible"]),
                    num_optimal=int(row["num_optimal"]) if row["num_optimal"] else None,
                    mean_crowding=float(row["mean_crowding"]),
                    max_crowding=int(row["max_crowding"]),
                    elapsed_seconds=float(row["elapsed_seconds"]),
                )
            )
    return records
