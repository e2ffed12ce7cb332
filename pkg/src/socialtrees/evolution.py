"""Grammatical-evolution operators over fixed-length integer genotypes."""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grammar import GENE_VALUE_MAX

INVALID_FITNESS = -math.inf   # incomplete translations; worse than any finite score


class UnevaluatedFitness(RuntimeError):
    pass


@dataclass(frozen=True)
class EvoParams:
    population_size: int = 500
    generations: int = 100
    crossover_prob: float = 0.1
    mutation_prob: float = 0.9
    mutation_rate: float = 0.05
    gene_value_max: int = GENE_VALUE_MAX
    tournament_size: int = 2
    genotype_length: int = 1000
    carry_q: bool = True

    def __post_init__(self):
        for name in ("population_size", "generations", "genotype_length", "tournament_size", "gene_value_max"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("crossover_prob", "mutation_prob", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


@dataclass(eq=False)
class Individual:
    genotype: np.ndarray
    fitness: Optional[float] = None
    translation: object = None
    tree: object = None

    @property
    def evaluated(self):
        return self.fitness is not None

    @property
    def valid(self):
        return self.fitness is None or self.fitness != INVALID_FITNESS

    def clone(self):
        return Individual(self.genotype.copy(), self.fitness, self.translation,
                          None if self.tree is None else self.tree.copy())


def init_pop(params, rng):
    genes = rng.integers(0, params.gene_value_max, size=(params.population_size, params.genotype_length))
    return [Individual(g) for g in genes]


def tournament_select(pop, rng, k=2):
    """Best of ``k`` uniform draws with replacement; ties go to the earliest draw."""
    if not pop:
        raise ValueError("empty population")
    draws = rng.integers(len(pop), size=k)
    best = None
    for idx in draws:
        ind = pop[idx]
        if ind.fitness is None:
            raise UnevaluatedFitness("tournament over an unevaluated individual")
        if best is None or ind.fitness > best.fitness:
            best = ind
    return best.clone()


def one_point_crossover(a, b, rng, cut=None):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"genotype lengths differ: {a.shape} vs {b.shape}")
    n = len(a)
    if n < 2:
        return a.copy(), b.copy()
    if cut is None:
        cut = int(rng.integers(1, n))
    return (np.concatenate([a[:cut], b[cut:]]),
            np.concatenate([b[:cut], a[cut:]]))


def mutate(g, mutation_rate, gene_value_max, rng):
    """Redraw each gene with probability ``mutation_rate`` from U{0, ..., gene_value_max - 1}."""
    g = np.array(g, copy=True)
    mask = rng.random(len(g)) < mutation_rate
    g[mask] = rng.integers(0, gene_value_max, size=int(mask.sum()))
    return g


def update_pop(pop, params, rng, scores=None):
    """Next generation of ``params.population_size`` children.

    Parents come from size-``tournament_size`` tournaments; a pair is crossed
    over with ``crossover_prob`` and each child is mutated with
    ``mutation_prob``. No elitism. A child whose genotype equals its parent's
    keeps the parent's tree (and learned Q-values) when ``carry_q`` is set.
    """
    if scores is not None:
        if len(scores) != len(pop):
            raise ValueError("scores must align with the population")
        for ind, s in zip(pop, scores):
            ind.fitness = float(s)
    children = []
    while len(children) < params.population_size:
        p1 = tournament_select(pop, rng, params.tournament_size)
        p2 = tournament_select(pop, rng, params.tournament_size)
        g1, g2 = p1.genotype, p2.genotype
        if rng.random() < params.crossover_prob:
            g1, g2 = one_point_crossover(g1, g2, rng)
        for parent, g in ((p1, g1), (p2, g2)):
            if rng.random() < params.mutation_prob:
                g = mutate(g, params.mutation_rate, params.gene_value_max, rng)
            child = Individual(np.array(g, copy=True))
            if params.carry_q and np.array_equal(g, parent.genotype):
                child.translation = parent.translation
                child.tree = parent.tree
            children.append(child)
    return children[:params.population_size]


def is_better(candidate, incumbent):
    """Strict improvement of a finite fitness over the incumbent (None = no incumbent)."""
    if candidate is None or candidate == INVALID_FITNESS:
        return False
    return incumbent is None or candidate > incumbent
