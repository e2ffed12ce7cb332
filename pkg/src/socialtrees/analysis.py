"""Post-training tools: greedy evaluation, coefficient sweeps and trace-driven pruning."""

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import seeding
from .dtree import QLearnParams, mac_count, prune
from .social import run_solo_episode

_GREEDY = QLearnParams(epsilon=0.0)


@dataclass
class EvalResult:
    mean: float
    std: float
    returns: np.ndarray

    def csv(self):
        lines = ["episode,return"]
        lines += [f"{k},{r!r}" for k, r in enumerate(self.returns.tolist())]
        return "\n".join(lines) + "\n"


def evaluate(tree, env_factory, n_episodes=100, seed=0):
    """Greedy rollouts without learning; episode ``k`` uses a fresh env seeded from ``(seed, k)``.

    Visit counters are only touched when ``tree.counting`` is enabled.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    returns = np.empty(n_episodes)
    for k in range(n_episodes):
        rng = seeding.stream(seed, seeding.EVALUATE, k)
        returns[k] = run_solo_episode(tree, env_factory(), _GREEDY, rng, learn=False, explore=False)
    return EvalResult(float(returns.mean()), float(returns.std()), returns)


def with_coefficient(tree, split, coef, value):
    """Copy of ``tree`` with one weight (``coef`` index) or the bias (``coef=None``) of ``split`` replaced."""
    if not 0 <= split < tree.n_splits:
        raise IndexError(f"split {split} out of range for a tree with {tree.n_splits} splits")
    out = tree.copy()
    if coef is None:
        out.bias[split] = value
        out._refresh_lists()
    else:
        if not 0 <= coef < tree.n_inputs:
            raise IndexError(f"coefficient {coef} out of range for {tree.n_inputs} inputs")
        out.weights[split, coef] = value
    return out


@dataclass
class SweepSpec:
    """Which coefficient to vary.

    ``split`` is the pre-order index of the split (0 = root); ``coef`` is the
    weight index, or None for the bias.
    """

    split: int
    coef: Optional[int]
    values: Sequence[float]
    episodes_per_value: int = 100
    seed: int = 0

    def __post_init__(self):
        if len(self.values) == 0:
            raise ValueError("sweep needs at least one value")
        if self.episodes_per_value < 1:
            raise ValueError("episodes_per_value must be >= 1")


@dataclass
class SweepRow:
    value: float
    mean: float
    std: float


def sweep(tree, spec, env_factory):
    """Evaluate ``tree`` once per value of the targeted coefficient.

    Every row is evaluated on the same episode seeds, so a row depends only on
    its value and the original tree is left untouched.
    """
    rows = []
    for v in spec.values:
        res = evaluate(with_coefficient(tree, spec.split, spec.coef, v), env_factory,
                       spec.episodes_per_value, spec.seed)
        rows.append(SweepRow(float(v), res.mean, res.std))
    return rows


def sweep_csv(rows):
    return "value,mean,std\n" + "".join(f"{r.value!r},{r.mean!r},{r.std!r}\n" for r in rows)


@dataclass
class TracePruneReport:
    prune: object
    nodes_before: int
    nodes_after: int
    mac_before: int
    mac_after: int
    mean_before: float
    mean_after: float
    visits_csv: str = field(repr=False, default="")

    def __str__(self):
        return "\n".join([
            str(self.prune),
            f"MACs per decision: {self.mac_before} -> {self.mac_after}",
            f"greedy mean return: {self.mean_before:.3f} -> {self.mean_after:.3f}",
        ])


def prune_with_traces(tree, env_factory, n_episodes=100, threshold=0.005, seed=0, eval_episodes=100):
    """Count node visits over ``n_episodes`` greedy episodes, then prune by visit ratio."""
    traced = tree.copy()
    traced.reset_visits()
    traced.counting = True
    evaluate(traced, env_factory, n_episodes, seed)
    traced.counting = False
    pruned, report = prune(traced, traced.visits, threshold)
    before = evaluate(tree, env_factory, eval_episodes, seed + 1)
    after = evaluate(pruned, env_factory, eval_episodes, seed + 1)
    return pruned, TracePruneReport(report, tree.n_nodes, pruned.n_nodes, mac_count(tree), mac_count(pruned),
                                    before.mean, after.mean, traced.visits_csv())
