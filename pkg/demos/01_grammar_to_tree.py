"""From integer genotype to an executable tree.

Walks one genotype through the grammar by hand, then shows how random
genotypes split into complete and incomplete translations.
"""
import numpy as np

from socialtrees import default_oblique_grammar, from_phenotype, serialize, translate

grammar = default_oblique_grammar(n_inputs=2)
for name, options in grammar.rules.items():
    shown = options if len(options) < 5 else options[:3] + ["...", options[-1]]
    print(f"<{name}> ::= {' | '.join(shown)}")

# Every gene picks option gene % len(options) for the leftmost nonterminal.
# start, if, condition, const -> nonzero[173] = 7.3, const 0 (x2), const 0 (bias),
# first action -> a nested if with an all-zero condition and two leaves, second action -> Leaf
genes = [0, 0, 0, 1, 173, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0]
t = translate(genes, grammar)
print("\nphenotype:", t.text, f"({t.genes_used} genes)")

tree = from_phenotype(t.text, 2, 3, np.random.default_rng(0))
print("canonical:", serialize(tree))
for s in ([-1.0, 0.0], [1.0, 0.0]):
    print(f"  x = {s} -> leaf {tree.route(np.array(s))}, greedy action {tree.greedy_action(np.array(s))}")

rng = np.random.default_rng(1)
results = [translate(rng.integers(0, 40000, 1000), grammar) for _ in range(2000)]
done = [r for r in results if r.complete]
sizes = np.array([r.text.count("Node(") for r in done])
print(f"\n{len(done)}/2000 random genotypes translate completely;"
      f" median {np.median(sizes):.0f} splits, largest {sizes.max()}")
