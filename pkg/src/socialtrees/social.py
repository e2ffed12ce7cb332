"""Social training of decision-tree agents.

Each generation has two phases:

* collaborative: every agent proposes an action for the state of one shared
  environment, one proposal is drawn uniformly at random and executed, and
  every agent Q-learns from the resulting transition;
* individual: each agent runs alone on a private environment, keeps
  Q-learning, and its mean episode return becomes its fitness.

The collaborative phase can be split across ``e_p`` workers running ``i``
episodes each on private copies of all agents; the copies' Q-values are then
averaged back into the agents.
"""

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import seeding
from .dtree import InvalidObservation, QLearnParams, TreeBatch, average_trees, from_phenotype
from .evolution import INVALID_FITNESS, EvoParams, init_pop, is_better, update_pop
from .grammar import translate


class NoValidSolution(RuntimeError):
    pass


@dataclass(frozen=True)
class SocialConfig:
    """Episode counts per generation.

    ``e_c`` collaborative episodes, ``e_i`` individual episodes per agent.
    With ``i`` set, the collaborative phase runs as ``e_p`` workers of ``i``
    episodes and ``e_c`` must equal ``e_p * i``.
    """

    e_c: int = 1000
    e_i: int = 3
    e_p: int = 1
    i: Optional[int] = None
    q: QLearnParams = field(default_factory=QLearnParams)
    explore_collab: bool = True

    def __post_init__(self):
        if self.e_c < 0:
            raise ValueError("e_c must be >= 0")
        if self.e_i < 1:
            raise ValueError("e_i must be >= 1")
        if self.e_p < 1:
            raise ValueError("e_p must be >= 1")
        if self.i is not None:
            if self.i < 1:
                raise ValueError("i must be >= 1")
            if self.e_p * self.i != self.e_c:
                raise ValueError(f"e_p * i = {self.e_p * self.i} does not equal e_c = {self.e_c}")
        elif self.e_p != 1:
            raise ValueError("e_p > 1 requires i")

    @classmethod
    def parallel(cls, e_p, i, e_i, **kwargs):
        return cls(e_c=e_p * i, e_i=e_i, e_p=e_p, i=i, **kwargs)

    @property
    def workers_and_episodes(self):
        """``(e_p, i)``; a serial phase is one worker running all ``e_c`` episodes."""
        if self.i is None:
            return 1, self.e_c
        return self.e_p, self.i


@dataclass
class EpisodeLedger:
    collaborative_episodes: int = 0
    individual_episodes: int = 0

    def total(self):
        return self.collaborative_episodes + self.individual_episodes

    def __str__(self):
        return (f"collaborative={self.collaborative_episodes} individual={self.individual_episodes} "
                f"total={self.total()}")


def planned_budget(evo, soc):
    """Episodes a full run will simulate when every individual is valid."""
    collab = evo.generations * soc.e_c
    indiv = evo.population_size * evo.generations * soc.e_i
    return EpisodeLedger(collab, indiv)


@dataclass(frozen=True)
class BudgetReport:
    social_cost: float          # episodes per generation: e_c + p * e_i
    baseline_cost: float        # p * e
    social_experience: int      # episodes seen per agent: e_c + e_i
    baseline_experience: int    # e
    cheaper: bool               # e_i + e_c / p < e
    more_experience: bool       # e_i + e_c > e

    @property
    def reduction_pct(self):
        return 100.0 * (1.0 - self.social_cost / self.baseline_cost)

    def __str__(self):
        return "\n".join([
            f"cost per generation: social {self.social_cost:g} vs baseline {self.baseline_cost:g} "
            f"({self.reduction_pct:.1f}% cost reduction)",
            f"episodes per agent: social {self.social_experience} vs baseline {self.baseline_experience}",
            f"cheaper: {self.cheaper}",
            f"more experience: {self.more_experience}",
        ])

    def csv(self):
        return ("social_cost,baseline_cost,reduction_pct,social_experience,baseline_experience,cheaper,more_experience\n"
                f"{self.social_cost:g},{self.baseline_cost:g},{self.reduction_pct:.6f},{self.social_experience},"
                f"{self.baseline_experience},{int(self.cheaper)},{int(self.more_experience)}\n")


def budget_report(p, e_c, e_i, baseline_e):
    """Compare social training against ``baseline_e`` solo episodes per agent."""
    if baseline_e < 1:
        raise ValueError("baseline_e must be >= 1")
    # integer cross-multiplication keeps the strict inequality exact
    return BudgetReport(
        social_cost=e_c + p * e_i,
        baseline_cost=p * baseline_e,
        social_experience=e_c + e_i,
        baseline_experience=baseline_e,
        cheaper=e_i * p + e_c < baseline_e * p,
        more_experience=e_i + e_c > baseline_e,
    )


def vote(proposals, rng):
    """One proposal drawn uniformly from the list (duplicates weigh more)."""
    if len(proposals) == 0:
        raise ValueError("no proposals to vote on")
    return proposals[int(rng.integers(len(proposals)))]


def _reset_seed(rng):
    return int(rng.integers(0, 2**63 - 1))


def _check(s):
    if not np.isfinite(s).all():
        raise InvalidObservation("environment produced a non-finite observation")


def run_batch_episode(batch, env, params, rng, learn=True, explore=True):
    """One episode with all agents of ``batch`` voting; returns the undiscounted return."""
    s = env.reset(_reset_seed(rng))
    _check(s)
    leaves = batch.route(s)
    eps = params.epsilon if explore else 0.0
    total = 0.0
    done = False
    while not done:
        proposals = batch.propose(leaves, eps, rng)
        a = int(proposals[0]) if batch.n_agents == 1 else int(vote(proposals, rng))
        s, r, done = env.step(a)
        total += r
        if done:
            next_leaves = leaves
        else:
            _check(s)
            next_leaves = batch.route(s)
        if learn:
            batch.update(leaves, a, r, next_leaves, done, params)
        leaves = next_leaves
    return total


def run_solo_episode(tree, env, params, rng, learn=True, explore=True):
    """Single-agent episode; consumes random numbers exactly like a batch of one."""
    s = env.reset(_reset_seed(rng))
    leaf = tree.route(s)
    q = tree.q
    eps = params.epsilon if explore else 0.0
    alpha, gamma = params.alpha, params.gamma
    n_actions = tree.n_actions
    total = 0.0
    done = False
    while not done:
        row = q[leaf]
        explore_now = rng.random() < eps
        rand_a = int(rng.integers(n_actions))
        a = rand_a if explore_now else int(row.argmax())
        s, r, done = env.step(a)
        total += r
        if done:
            target = float(r)
            nxt = leaf
        else:
            nxt = tree.route(s)
            target = float(r) + gamma * q[nxt].max()
        if learn:
            old = row[a]
            row[a] = old + alpha * (target - old)
        leaf = nxt
    return total


def collaborative_phase(agents, env, e_c, params, ledger, rng, explore=True):
    """Run ``e_c`` shared episodes, updating every agent's leaves in place."""
    if e_c == 0 or not agents:
        return []
    batch = TreeBatch(agents)
    returns = [run_batch_episode(batch, env, params, rng, explore=explore) for _ in range(e_c)]
    batch.write_back(agents)
    ledger.collaborative_episodes += e_c
    return returns


def individual_phase(agent, env, e_i, params, ledger, rng, explore=True):
    """Solo Q-learning for ``e_i`` episodes; returns the mean return (invalid agents score -inf)."""
    if agent is None:
        return INVALID_FITNESS
    if e_i < 1:
        raise ValueError("e_i must be >= 1")
    returns = [run_solo_episode(agent, env, params, rng, explore=explore) for _ in range(e_i)]
    ledger.individual_episodes += e_i
    return float(np.mean(returns))


def _collab_worker(agents, env_factory, episodes, params, seq, explore):
    ledger = EpisodeLedger()
    collaborative_phase(agents, env_factory(), episodes, params, ledger, seeding.stream(seq), explore)
    return [a.q for a in agents]


def parallel_collaborative(agents, env_factory, e_p, i, params, ledger, seed, explore=True,
                           executor=None, return_copies=False):
    """Collaborative phase split over ``e_p`` workers of ``i`` episodes, merged by averaging.

    Worker ``w`` draws from ``seeding.stream(seed, w)``, so the merged result
    does not depend on scheduling. With ``return_copies`` the per-worker Q
    matrices are returned as ``copies[w][agent]``.
    """
    if e_p < 1 or i < 1:
        raise ValueError("e_p and i must be >= 1")
    if not agents:
        return [] if return_copies else None
    seqs = [seeding.seed_sequence(seed, w) for w in range(e_p)]
    if executor is None:
        results = [_collab_worker([a.copy() for a in agents], env_factory, i, params, seqs[w], explore)
                   for w in range(e_p)]
    else:
        futures = [executor.submit(_collab_worker, [a.copy() for a in agents], env_factory, i, params, seqs[w], explore)
                   for w in range(e_p)]
        results = [f.result() for f in futures]
    for k, agent in enumerate(agents):
        copies = []
        for w in range(e_p):
            c = agent.copy()
            c.q = results[w][k]
            copies.append(c)
        agent.q[:] = average_trees(copies).q
    ledger.collaborative_episodes += e_p * i
    return results if return_copies else None


def _individual_worker(tree, env_factory, e_i, params, seq):
    ledger = EpisodeLedger()
    fit = individual_phase(tree, env_factory(), e_i, params, ledger, seeding.stream(seq))
    return tree.q, fit


@dataclass
class TrainResult:
    best_tree: object
    best_fitness: float
    best_genotype: np.ndarray
    best_generation: int
    ledger: EpisodeLedger
    log: list


RUN_LOG_FIELDS = ["generation", "best_fitness", "mean_fitness", "collab_episodes",
                  "individual_episodes", "total_episodes", "wall_seconds"]
EVOLUTION_LOG_FIELDS = ["generation", "best_fitness", "mean_fitness", "invalid_count", "episodes_used"]


def train(grammar, env_factory, evo, soc, seed=0, workers=1, on_generation=None):
    """Evolve tree structures while leaves learn socially; returns the best tree found.

    ``on_generation(row, best_tree)`` is called after every generation with
    the log row and the best tree so far.
    """
    probe = env_factory()
    n_inputs, n_actions = probe.spec.n_inputs, probe.spec.n
    if probe.spec.action_kind != "discrete":
        raise ValueError("train needs a discrete-action environment (wrap continuous ones in DiscreteActions)")
    e_p, i = soc.workers_and_episodes
    ledger = EpisodeLedger()
    log = []
    best = None
    best_fitness = None
    any_valid = False
    rng_evo = seeding.stream(seed, seeding.EVOLVE)
    t0 = time.perf_counter()
    executor = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        pop = init_pop(evo, seeding.stream(seed, seeding.POPULATION))
        for gen in range(evo.generations):
            if gen > 0:
                pop = update_pop(pop, evo, rng_evo)
            for idx, ind in enumerate(pop):
                if ind.tree is None and ind.translation is None:
                    ind.translation = translate(ind.genotype, grammar)
                if ind.tree is None and ind.translation.complete:
                    ind.tree = from_phenotype(ind.translation.text, n_inputs, n_actions,
                                              seeding.stream(seed, seeding.QINIT, gen, idx))
            valid = [(idx, ind) for idx, ind in enumerate(pop) if ind.tree is not None]
            any_valid = any_valid or bool(valid)
            before = ledger.total()

            if soc.e_c > 0 and valid:
                parallel_collaborative([ind.tree for _, ind in valid], env_factory, e_p, i, soc.q, ledger,
                                       seeding.seed_sequence(seed, seeding.COLLAB, gen),
                                       explore=soc.explore_collab, executor=executor)

            for ind in pop:
                if ind.tree is None:
                    ind.fitness = INVALID_FITNESS
            seqs = {idx: seeding.seed_sequence(seed, seeding.INDIVIDUAL, gen, idx) for idx, _ in valid}
            if executor is None:
                for idx, ind in valid:
                    ind.fitness = individual_phase(ind.tree, env_factory(), soc.e_i, soc.q, ledger,
                                                   seeding.stream(seqs[idx]))
            else:
                futures = [executor.submit(_individual_worker, ind.tree, env_factory, soc.e_i, soc.q, seqs[idx])
                           for idx, ind in valid]
                for (idx, ind), fut in zip(valid, futures):
                    ind.tree.q[:], ind.fitness = fut.result()
                    ledger.individual_episodes += soc.e_i

            gen_best = None
            for ind in pop:
                if ind.fitness != INVALID_FITNESS and (gen_best is None or ind.fitness > gen_best.fitness):
                    gen_best = ind
            if gen_best is not None and is_better(gen_best.fitness, best_fitness):
                best = (gen_best.tree.copy(), gen_best.genotype.copy(), gen)
                best_fitness = gen_best.fitness

            fits = [ind.fitness for _, ind in valid]
            row = {
                "generation": gen,
                "best_fitness": gen_best.fitness if gen_best is not None else float("nan"),
                "mean_fitness": float(np.mean(fits)) if fits else float("nan"),
                "invalid_count": len(pop) - len(valid),
                "episodes_used": ledger.total() - before,
                "collab_episodes": ledger.collaborative_episodes,
                "individual_episodes": ledger.individual_episodes,
                "total_episodes": ledger.total(),
                "wall_seconds": time.perf_counter() - t0,
                "best_so_far": best_fitness,
            }
            log.append(row)
            if on_generation is not None:
                on_generation(row, best[0] if best else None)
    finally:
        if executor is not None:
            executor.shutdown()
    if not any_valid or best is None:
        raise NoValidSolution("no individual produced a complete tree during the run")
    return TrainResult(best[0], best_fitness, best[1], best[2], ledger, log)
