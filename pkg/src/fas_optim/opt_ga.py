"""Genetic search for antenna positions under a spacing penalty.

Individuals are full layouts.  Fitness is the smallest per-user rate
minus `omega` per pair of antennas closer than `d_min`, so infeasible
layouts are dominated as long as `omega` exceeds the achievable rate.
Selection is 3-way tournament, crossover swaps whole antennas between
parents, and mutation jitters coordinates with wavelength/10 noise.
One elite survives unchanged per generation, so the best fitness never
decreases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rate
from .scenario import Scenario, ScenarioError, upa_layout

TOURNAMENT = 3
CROSSOVER_P = 0.9   # probability a child mixes both parents
MUTATION_P = 0.1    # per-coordinate jitter probability
SEED_DIVISOR = 10   # fraction of the population started at the regular grid
CONVERGE_WINDOW = 20
CONVERGE_TOL = 1e-3


def violation_set(layout: np.ndarray, d_min: float) -> list[tuple[int, int]]:
    """Antenna index pairs strictly closer than `d_min`.

    Distances are compared squared, so a grid at pitch exactly `d_min`
    yields no violations.
    """
    layout = np.asarray(layout, dtype=float)
    diff = layout[:, :, None] - layout[:, None, :]
    dist_sq = np.sum(diff**2, axis=0)
    m = layout.shape[1]
    pairs = []
    for i in range(m):
        for j in range(i + 1, m):
            if dist_sq[i, j] < d_min * d_min:
                pairs.append((i, j))
    return pairs


def violation_counts(layouts: np.ndarray, d_min: float) -> np.ndarray:
    """Number of violating pairs for a batch of layouts, shape (...,)."""
    layouts = np.asarray(layouts, dtype=float)
    diff = layouts[..., :, :, None] - layouts[..., :, None, :]
    dist_sq = np.sum(diff**2, axis=-3)
    m = layouts.shape[-1]
    upper = np.triu(np.ones((m, m), dtype=bool), k=1)
    return np.sum((dist_sq < d_min * d_min) & upper, axis=(-2, -1))


def fitness(layout: np.ndarray, scn: Scenario) -> float:
    """Min rate minus the spacing penalty for one layout."""
    ctx = rate.closed_form_context(scn)
    return float(_fitness_batch(ctx, np.asarray(layout), scn)[()])


def _fitness_batch(ctx, layouts: np.ndarray, scn: Scenario) -> np.ndarray:
    min_rates = rate.rates_for(ctx, layouts).min(axis=-1)
    counts = violation_counts(layouts, scn.d_min)
    return min_rates - scn.hyper.omega * counts


@dataclass
class Individual:
    layout: np.ndarray
    fitness: float
    violations: int


@dataclass
class GaState:
    """Population snapshot plus the running best and the RNG stream."""

    population: list[Individual]
    generation: int
    best: Individual
    best_feasible: Individual | None
    rng: np.random.Generator
    history: list[float]


def _make_individuals(layouts: np.ndarray, ctx, scn: Scenario) -> list[Individual]:
    fits = _fitness_batch(ctx, layouts, scn)
    counts = violation_counts(layouts, scn.d_min)
    return [
        Individual(layouts[i].copy(), float(fits[i]), int(counts[i]))
        for i in range(layouts.shape[0])
    ]


def _track_best(state_best, state_feasible, individuals):
    best = state_best
    feasible = state_feasible
    for ind in individuals:
        if best is None or ind.fitness > best.fitness:
            best = ind
        if ind.violations == 0 and (
            feasible is None or ind.fitness > feasible.fitness
        ):
            feasible = ind
    return best, feasible


def init_population(scn: Scenario, rng: np.random.Generator) -> GaState:
    """Uniform random layouts plus a few copies of the regular grid."""
    n = scn.hyper.ga_pop
    m = scn.m_antennas
    half = scn.region_size / 2.0
    layouts = rng.uniform(-half, half, (n, 2, m))
    try:
        seed_layout = upa_layout(
            m, max(scn.wavelength / 2.0, scn.d_min), scn.region_size
        )
        for i in range(max(1, n // SEED_DIVISOR)):
            layouts[i] = seed_layout
    except ScenarioError:
        pass  # grid does not fit; start from random layouts only
    ctx = rate.closed_form_context(scn)
    population = _make_individuals(layouts, ctx, scn)
    best, feasible = _track_best(None, None, population)
    return GaState(
        population=population,
        generation=0,
        best=best,
        best_feasible=feasible,
        rng=rng,
        history=[best.fitness],
    )


def evolve(state: GaState, scn: Scenario) -> GaState:
    """Advance the population by one generation."""
    rng = state.rng
    n = len(state.population)
    m = scn.m_antennas
    half = scn.region_size / 2.0
    pop = np.stack([ind.layout for ind in state.population])
    fits = np.array([ind.fitness for ind in state.population])

    elite = state.population[int(np.argmax(fits))]
    nc = n - 1
    contenders = rng.integers(0, n, (2, nc, TOURNAMENT))
    winners = np.take_along_axis(
        contenders, np.argmax(fits[contenders], axis=-1)[..., None], axis=-1
    )[..., 0]
    pa, pb = pop[winners[0]], pop[winners[1]]

    gate = rng.random(nc) < CROSSOVER_P
    keep_a = rng.random((nc, 1, m)) < 0.5  # swap whole antennas, not coordinates
    children = np.where(keep_a, pa, pb)
    children = np.where(gate[:, None, None], children, pa)

    jitter_mask = rng.random((nc, 2, m)) < MUTATION_P
    jitter = rng.normal(0.0, scn.wavelength / 10.0, (nc, 2, m))
    children = np.clip(children + jitter_mask * jitter, -half, half)

    ctx = rate.closed_form_context(scn)
    offspring = _make_individuals(children, ctx, scn)
    population = [elite] + offspring
    best, feasible = _track_best(state.best, state.best_feasible, offspring)
    history = state.history + [best.fitness]
    return GaState(
        population=population,
        generation=state.generation + 1,
        best=best,
        best_feasible=feasible,
        rng=rng,
        history=history,
    )


def run_ga(scn: Scenario, seed=None) -> tuple[np.ndarray, list[float]]:
    """Evolve until the best fitness stalls, returning a feasible layout.

    Stops when the best fitness improved by less than `CONVERGE_TOL`
    over the last `CONVERGE_WINDOW` generations, or at
    `hyper.ga_max_iter`.  Returns the best spacing-feasible layout seen
    and the best-fitness trace (one entry per generation, starting at
    the initial population).
    """
    rng = np.random.default_rng(scn.hyper.seed if seed is None else seed)
    state = init_population(scn, rng)
    for _ in range(scn.hyper.ga_max_iter):
        state = evolve(state, scn)
        hist = state.history
        if (
            len(hist) > CONVERGE_WINDOW
            and hist[-1] - hist[-1 - CONVERGE_WINDOW] < CONVERGE_TOL
        ):
            break
    if state.best_feasible is None:
        raise RuntimeError("genetic search found no layout meeting the spacing limit")
    return state.best_feasible.layout.copy(), state.history
