import numpy as np
import pytest

from socialtrees import seeding
from socialtrees.dtree import DecisionTree, Leaf, QLearnParams, Split, average_trees
from socialtrees.envs import EnvFactory, EnvSpec, Environment
from socialtrees.evolution import INVALID_FITNESS, EvoParams
from socialtrees.grammar import default_oblique_grammar
from socialtrees.social import (EpisodeLedger, NoValidSolution, SocialConfig, budget_report,
                                collaborative_phase, individual_phase, parallel_collaborative, planned_budget,
                                run_solo_episode, train, vote)


class TenSteps(Environment):
    """Reward 1 per step, always exactly 10 steps."""

    def __init__(self):
        super().__init__()
        self.spec = EnvSpec(2, "discrete", 3, 10)

    def _reset(self):
        return self.rng.normal(size=2)

    def _step(self, action):
        return self.rng.normal(size=2), 1.0, False


def chain_tree(rng, n=3):
    """One leaf per chain state, routed on the state-index input."""
    dim = n + 1

    def node(k):
        if k == n - 1:
            return Leaf(rng.uniform(-1, 1, 2))
        w = np.zeros(dim)
        w[-1] = 1.0
        return Split(w, k + 0.5, Leaf(rng.uniform(-1, 1, 2)), node(k + 1))

    return DecisionTree(node(0), dim, 2)


def random_agents(rng, k, n=3):
    return [chain_tree(rng, n) for _ in range(k)]


# --- voting -------------------------------------------------------------------

def test_vote_weights_duplicates(rng):
    draws = np.array([vote([2, 2, 1], rng) for _ in range(10000)])
    p = 2 / 3
    sigma = np.sqrt(10000 * p * (1 - p))
    assert abs((draws == 2).sum() - 10000 * p) < 3 * sigma
    assert set(draws.tolist()) == {1, 2}


def test_vote_degenerate_cases(rng):
    assert {vote([4, 4, 4], rng) for _ in range(100)} == {4}
    assert vote([7], rng) == 7
    with pytest.raises(ValueError):
        vote([], rng)


# --- collaborative phase --------------------------------------------------------

def test_zero_collaborative_episodes_change_nothing(rng):
    agents = random_agents(rng, 3)
    before = [a.q.copy() for a in agents]
    ledger = EpisodeLedger()
    collaborative_phase(agents, EnvFactory("chain")(), 0, QLearnParams(), ledger, rng)
    assert all(np.array_equal(a.q, b) for a, b in zip(agents, before))
    assert ledger.total() == 0


def test_population_of_one_matches_solo_learning():
    tree = chain_tree(np.random.default_rng(1), 4)
    solo = tree.copy()
    env = EnvFactory("chain", kwargs={"n_states": 4})
    ledger = EpisodeLedger()
    r1 = collaborative_phase([tree], env(), 25, QLearnParams(), ledger, np.random.default_rng(2))
    rng = np.random.default_rng(2)
    r2 = [run_solo_episode(solo, env(), QLearnParams(), rng) for _ in range(25)]
    assert r1 == r2
    assert np.array_equal(tree.q, solo.q)
    assert ledger.collaborative_episodes == 25


def test_identical_agents_stay_identical(rng):
    a = chain_tree(rng, 5)
    agents = [a.copy() for _ in range(4)]
    collaborative_phase(agents, EnvFactory("chain", kwargs={"n_states": 5})(), 30, QLearnParams(),
                        EpisodeLedger(), rng)
    assert not np.array_equal(agents[0].q, a.q)
    assert all(np.array_equal(x.q, agents[0].q) for x in agents[1:])


def test_shared_episodes_are_counted_once(rng):
    ledger = EpisodeLedger()
    collaborative_phase(random_agents(rng, 10), EnvFactory("chain")(), 7, QLearnParams(), ledger, rng)
    assert ledger.collaborative_episodes == 7 and ledger.individual_episodes == 0


# --- individual phase -----------------------------------------------------------

def test_fitness_is_forced_by_constant_environment(rng):
    tree = DecisionTree(Split(np.array([1.0, -1.0]), 0.0, Leaf(np.zeros(3)), Leaf(np.ones(3))), 2, 3)
    ledger = EpisodeLedger()
    assert individual_phase(tree, TenSteps(), 4, QLearnParams(), ledger, rng) == 10.0
    assert ledger.individual_episodes == 4


def test_fitness_is_mean_of_returns():
    tree = chain_tree(np.random.default_rng(3), 5)
    clone = tree.copy()
    env = EnvFactory("chain", kwargs={"n_states": 5})
    fit = individual_phase(tree, env(), 6, QLearnParams(epsilon=0.3), EpisodeLedger(), np.random.default_rng(4))
    rng = np.random.default_rng(4)
    returns = [run_solo_episode(clone, env(), QLearnParams(epsilon=0.3), rng) for _ in range(6)]
    assert fit * 6 == pytest.approx(sum(returns), abs=1e-12)
    one = individual_phase(clone.copy(), env(), 1, QLearnParams(), EpisodeLedger(), np.random.default_rng(5))
    assert one == run_solo_episode(clone.copy(), env(), QLearnParams(), np.random.default_rng(5))


def test_invalid_agent_scores_sentinel_without_episodes(rng):
    ledger = EpisodeLedger()
    assert individual_phase(None, TenSteps(), 3, QLearnParams(), ledger, rng) == INVALID_FITNESS
    assert ledger.total() == 0


# --- parallel scheme --------------------------------------------------------------

def test_single_worker_is_bitwise_serial():
    agents = random_agents(np.random.default_rng(6), 5)
    serial = [a.copy() for a in agents]
    env = EnvFactory("chain")
    parallel_collaborative(agents, env, 1, 40, QLearnParams(), EpisodeLedger(), seed=11)
    collaborative_phase(serial, env(), 40, QLearnParams(), EpisodeLedger(),
                        seeding.stream(seeding.seed_sequence(11, 0)))
    for a, b in zip(agents, serial):
        assert a.q.tobytes() == b.q.tobytes()


@pytest.mark.parametrize("e_p", [1, 2, 4, 8])
def test_merged_q_is_mean_of_worker_copies(e_p):
    agents = random_agents(np.random.default_rng(7), 4)
    ledger = EpisodeLedger()
    copies = parallel_collaborative(agents, EnvFactory("chain"), e_p, 10, QLearnParams(), ledger, seed=3,
                                    return_copies=True)
    assert ledger.collaborative_episodes == e_p * 10
    for k, a in enumerate(agents):
        expected = np.mean([copies[w][k] for w in range(e_p)], axis=0)
        assert np.abs(a.q - expected).max() < 1e-12


def test_unreachable_leaf_keeps_initial_q():
    # 0*x < 0 is never true, so leaf 0 is never visited in any worker
    dead = Split(np.zeros(4), 0.0, Leaf(np.array([0.3, -0.7])), chain_tree(np.random.default_rng(8)).to_nodes())
    agents = [DecisionTree(dead, 4, 2)]
    init = agents[0].q[0].copy()
    parallel_collaborative(agents, EnvFactory("chain"), 3, 20, QLearnParams(), EpisodeLedger(), seed=0)
    assert np.array_equal(agents[0].q[0], init)


def test_parallel_result_does_not_depend_on_executor():
    from concurrent.futures import ThreadPoolExecutor

    base = random_agents(np.random.default_rng(9), 3)
    a = [t.copy() for t in base]
    b = [t.copy() for t in base]
    parallel_collaborative(a, EnvFactory("chain"), 4, 15, QLearnParams(), EpisodeLedger(), seed=5)
    with ThreadPoolExecutor(4) as ex:
        parallel_collaborative(b, EnvFactory("chain"), 4, 15, QLearnParams(), EpisodeLedger(), seed=5, executor=ex)
    assert all(np.array_equal(x.q, y.q) for x, y in zip(a, b))


# --- budgets ------------------------------------------------------------------------

def test_budget_fixture():
    rep = budget_report(500, 1000, 3, 9)
    assert (rep.social_cost, rep.baseline_cost) == (2500, 4500)
    assert (rep.social_experience, rep.baseline_experience) == (1003, 9)
    assert round(rep.reduction_pct, 1) == 44.4
    assert "44.4% cost reduction" in str(rep)
    assert rep.cheaper and rep.more_experience


def test_budget_degenerate_and_equality_cases():
    rep = budget_report(10, 0, 3, 3)
    assert rep.social_cost == 30 and rep.reduction_pct == 0.0 and not rep.cheaper
    assert budget_report(10, 0, 2, 3).cheaper
    # e_i + e_c / p == e exactly
    assert not budget_report(10, 20, 1, 3).cheaper
    assert not budget_report(10, 5, 3, 3).cheaper
    with pytest.raises(ValueError):
        budget_report(10, 0, 1, 0)


@pytest.mark.parametrize("e_i,e_p,i,total", [(3, 10, 100, 250_000), (10, 10, 100, 600_000), (5, 10, 80, 330_000)])
def test_planned_budgets(e_i, e_p, i, total):
    assert planned_budget(EvoParams(), SocialConfig.parallel(e_p, i, e_i)).total() == total


def test_social_config_validation():
    with pytest.raises(ValueError):
        SocialConfig(e_c=10, e_p=2, i=4)
    with pytest.raises(ValueError):
        SocialConfig(e_i=0)
    with pytest.raises(ValueError):
        SocialConfig(e_c=-1)
    assert SocialConfig(e_c=0).e_c == 0


# --- training loop --------------------------------------------------------------------

SMALL = EvoParams(population_size=12, generations=4, genotype_length=300)


def _train(seed, workers=1, soc=SocialConfig(e_c=6, e_i=2)):
    return train(default_oblique_grammar(4), EnvFactory("chain", kwargs={"n_states": 3}), SMALL, soc,
                 seed=seed, workers=workers)


def test_training_ledger_matches_accounting():
    res = _train(1)
    assert len(res.log) == SMALL.generations
    valid = sum(SMALL.population_size - row["invalid_count"] for row in res.log)
    assert res.ledger.individual_episodes == 2 * valid
    assert res.ledger.collaborative_episodes == 6 * sum(row["invalid_count"] < SMALL.population_size
                                                         for row in res.log)
    assert res.log[-1]["total_episodes"] == res.ledger.total()
    best = [row["best_so_far"] for row in res.log]
    assert best == sorted(best) and best[-1] == res.best_fitness


def test_training_is_reproducible_across_runs_and_workers():
    from socialtrees.dtree import serialize
    a, b = _train(4), _train(4)
    assert serialize(a.best_tree) == serialize(b.best_tree)
    soc = SocialConfig.parallel(2, 3, 2)
    c, d = _train(4, 1, soc), _train(4, 2, soc)
    assert serialize(c.best_tree) == serialize(d.best_tree)
    assert c.ledger == d.ledger


def test_all_invalid_population_raises():
    evo = EvoParams(population_size=4, generations=2, genotype_length=3)
    with pytest.raises(NoValidSolution):
        train(default_oblique_grammar(2), EnvFactory("chain", kwargs={"n_states": 1 + 1}), evo,
              SocialConfig(e_c=1, e_i=1))


def test_collaboration_changes_only_q_values(rng):
    from socialtrees.dtree import serialize
    agents = random_agents(rng, 3, 4)
    shapes = [serialize(a, with_q=False) for a in agents]
    collaborative_phase(agents, EnvFactory("chain", kwargs={"n_states": 4})(), 10, QLearnParams(),
                        EpisodeLedger(), rng)
    assert [serialize(a, with_q=False) for a in agents] == shapes


def test_non_social_baseline_runs_without_collaboration():
    res = _train(2, soc=SocialConfig(e_c=0, e_i=2))
    assert res.ledger.collaborative_episodes == 0
