"""Interpretable tree policies: grammatical evolution of oblique decision trees
whose leaves learn Q-values socially across a population."""

__version__ = "0.1.0"

from .actionmap import DiscretizedActionMap
from .analysis import SweepSpec, evaluate, prune_with_traces, sweep
from .dtree import (DecisionTree, Leaf, QLearnParams, Split, Transition, TreeBatch, average_trees,
                    from_phenotype, mac_count, mac_per_episode, parse, prune, serialize)
from .envs import EnvFactory, make_env, value_iteration
from .evolution import EvoParams, Individual, init_pop, mutate, one_point_crossover, tournament_select, update_pop
from .grammar import Grammar, Translation, default_oblique_grammar, translate
from .social import (EpisodeLedger, SocialConfig, budget_report, collaborative_phase, individual_phase,
                     parallel_collaborative, planned_budget, train, vote)
