"""Social training on cart-pole at desk scale.

64 trees share a cart-pole for 200 voted episodes per generation (4 workers
of 50, averaged), then each refines itself for 3 episodes. Takes about half
a minute on one core.
"""
import sys

from socialtrees import evaluate, serialize, train
from socialtrees.config import load_config
from socialtrees.dtree import mac_count
from socialtrees.grammar import default_oblique_grammar

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
cfg = load_config("desk.cfg")
print("planned:", cfg.planned_budget())


def progress(row, best):
    print(f"gen {row['generation']:2d}  best {row['best_fitness']:7.1f}  mean {row['mean_fitness']:7.1f}"
          f"  invalid {row['invalid_count']:2d}  episodes {row['total_episodes']}")


res = train(default_oblique_grammar(4), cfg.env_factory(), cfg.evo_params(), cfg.social_config(),
            seed=seed, on_generation=progress)
print("\nused:", res.ledger)

ev = evaluate(res.best_tree, cfg.env_factory(), n_episodes=100, seed=123)
print(f"best tree from generation {res.best_generation}: {res.best_tree.n_splits} splits,"
      f" {mac_count(res.best_tree)} MACs per decision")
print(f"greedy return over 100 episodes: {ev.mean:.1f} +- {ev.std:.1f}")
print(serialize(res.best_tree, with_q=False))
