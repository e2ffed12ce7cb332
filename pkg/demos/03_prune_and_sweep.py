"""Inspecting a finished tree: pruning by visit ratio and coefficient sweeps.

Uses the bundled cart-pole tree (one oblique split, two actions) and a padded
copy of it whose extra branch can never fire.
"""
import numpy as np

from socialtrees import DecisionTree, Leaf, Split, SweepSpec, parse, prune_with_traces, serialize, sweep
from socialtrees.config import read_text
from socialtrees.envs import EnvFactory

env = EnvFactory("cartpole")
tree = parse(read_text("invertedpendulum.tree"))
print(serialize(tree, with_q=False))

# 0*x < 0 never holds, so the true side is dead weight
padded = DecisionTree(Split(np.zeros(4), 0.0, Leaf(np.eye(7)[3]), tree.to_nodes()), 4, 7)
pruned, report = prune_with_traces(padded, env, n_episodes=100)
print("\n" + str(report))
print(serialize(pruned, with_q=False))

# how sensitive is balancing to the velocity and angular-velocity gains?
for coef, label in ((2, "cart velocity"), (3, "pole angular velocity")):
    original = tree.weights[0, coef]
    values = sorted({round(v, 3) for v in np.linspace(-8, 2, 11)} | {original})
    rows = sweep(tree, SweepSpec(split=0, coef=coef, values=values, episodes_per_value=20, seed=5), env)
    print(f"\n{label} weight (original {original}):")
    for r in rows:
        mark = "  <- published" if r.value == original else ""
        print(f"  {r.value:7.3f}  mean {r.mean:7.1f}  std {r.std:6.1f}{mark}")
