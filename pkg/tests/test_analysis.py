import numpy as np
import pytest

from socialtrees.analysis import SweepSpec, evaluate, prune_with_traces, sweep, sweep_csv, with_coefficient
from socialtrees.config import read_text
from socialtrees.dtree import DecisionTree, Leaf, Split, mac_count, parse
from socialtrees.envs import EnvFactory, EnvSpec, Environment


class TenSteps(Environment):
    def __init__(self):
        super().__init__()
        self.spec = EnvSpec(2, "discrete", 2, 10)

    def _reset(self):
        return np.zeros(2)

    def _step(self, action):
        return np.zeros(2), 1.0, False


def _leaf_tree(q=(0.0, 1.0)):
    return DecisionTree(Leaf(np.array(q)), 2, 2)


def test_constant_environment_statistics():
    res = evaluate(_leaf_tree(), TenSteps, 7)
    assert res.mean == 10.0 and res.std == 0.0 and len(res.returns) == 7
    one = evaluate(_leaf_tree(), TenSteps, 1)
    assert one.mean == one.returns[0] and one.std == 0.0


def test_evaluation_is_read_only_and_recomputable():
    tree = parse(read_text("invertedpendulum.tree"))
    q = tree.q.copy()
    res = evaluate(tree, EnvFactory("cartpole", kwargs={"max_steps": 100}), 5, seed=3)
    assert np.array_equal(tree.q, q) and not tree.visits.any()
    assert abs(res.mean - np.mean(res.returns)) < 1e-9
    lines = res.csv().splitlines()
    assert lines[0] == "episode,return" and len(lines) == 6
    again = evaluate(tree, EnvFactory("cartpole", kwargs={"max_steps": 100}), 5, seed=3)
    assert np.array_equal(res.returns, again.returns)


def test_with_coefficient_leaves_original_untouched():
    tree = parse(read_text("invertedpendulum.tree"))
    w = tree.weights.copy()
    mod = with_coefficient(tree, 0, 2, 9.0)
    assert mod.weights[0, 2] == 9.0 and np.array_equal(tree.weights, w)
    mod = with_coefficient(tree, 0, None, -1.0)
    assert mod.bias[0] == -1.0 and tree.bias[0] == 0.285
    with pytest.raises(IndexError):
        with_coefficient(tree, 1, 0, 0.0)
    with pytest.raises(IndexError):
        with_coefficient(tree, 0, 4, 0.0)


def test_sweep_rows():
    tree = parse(read_text("invertedpendulum.tree"))
    env = EnvFactory("cartpole", kwargs={"max_steps": 200})
    spec = SweepSpec(0, 2, [-0.684, 0.0, 3.0], episodes_per_value=4, seed=1)
    rows = sweep(tree, spec, env)
    assert [r.value for r in rows] == [-0.684, 0.0, 3.0]
    assert rows[0].mean == evaluate(tree, env, 4, 1).mean
    perm = sweep(tree, SweepSpec(0, 2, [3.0, -0.684], 4, 1), env)
    assert {r.value: r.mean for r in perm} == {r.value: r.mean for r in rows if r.value != 0.0}
    assert sweep_csv(rows).splitlines()[0] == "value,mean,std"


def test_zero_coefficient_removes_input_influence():
    # x1 - x2 < 0 over one-hot inputs
    tree = DecisionTree(Split(np.array([1.0, -1.0]), 0.0, Leaf(np.array([1.0, 0.0])), Leaf(np.array([0.0, 1.0]))),
                        2, 2)
    mod = with_coefficient(tree, 0, 0, 0.0)
    assert mod.route(np.array([0.0, 1.0])) == mod.route(np.array([1.0, 1.0]))
    assert tree.route(np.array([0.0, 1.0])) != tree.route(np.array([1.0, 1.0]))


def test_trace_pruning_removes_dead_branch():
    dead = Split(np.zeros(4), 0.0, Leaf(np.eye(7)[3]), parse(read_text("invertedpendulum.tree")).to_nodes())
    tree = DecisionTree(dead, 4, 7)
    env = EnvFactory("cartpole", kwargs={"max_steps": 200})
    pruned, rep = prune_with_traces(tree, env, n_episodes=5, eval_episodes=3)
    assert [nid for nid, _ in rep.prune.removed] == [1]
    assert pruned.n_splits == 1
    assert rep.mac_after <= rep.mac_before == mac_count(tree)
    assert rep.mean_before == rep.mean_after
    assert rep.visits_csv.startswith("node_id,visits,parent_id\n")


def test_fully_visited_tree_survives_trace_pruning():
    tree = parse(read_text("invertedpendulum.tree"))
    pruned, rep = prune_with_traces(tree, EnvFactory("cartpole", kwargs={"max_steps": 200}), 3, eval_episodes=2)
    assert pruned == tree and rep.prune.removed == []
