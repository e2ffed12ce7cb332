"""Grammar for oblique decision trees and the genotype -> phenotype mapping.

A grammar maps nonterminal names to ordered option lists. Each option is a
production string in which nonterminals appear as ``<name>``. Translation
always expands the leftmost nonterminal with ``options[gene % len(options)]``
and consumes one gene per expansion.
"""

import re
from dataclasses import dataclass, field

import numpy as np

_NT = re.compile(r"<([A-Za-z_][A-Za-z0-9_]*)>")

# coefficient grid, in tenths: -10.0, -9.9, ..., 10.0
COEF_MIN_TENTHS = -100
COEF_MAX_TENTHS = 100
GENE_VALUE_MAX = 40000


class GrammarError(ValueError):
    pass


@dataclass(frozen=True)
class NonTerminal:
    name: str

    def __str__(self):
        return f"<{self.name}>"


def _tokenize(production):
    tokens = []
    pos = 0
    for m in _NT.finditer(production):
        if m.start() > pos:
            tokens.append(production[pos:m.start()])
        tokens.append(NonTerminal(m.group(1)))
        pos = m.end()
    if pos < len(production):
        tokens.append(production[pos:])
    return tuple(tokens)


def tenths_to_str(k):
    """Exact one-decimal text for ``k / 10``."""
    sign = "-" if k < 0 else ""
    k = abs(int(k))
    return f"{sign}{k // 10}.{k % 10}"


class Grammar:
    """Ordered rewrite rules.

    Parameters
    ----------
    rules : mapping of nonterminal name -> list of production strings
    start_symbol : name of the start nonterminal
    """

    def __init__(self, rules, start_symbol="start"):
        self.start_symbol = start_symbol
        self.rules = {name: list(options) for name, options in rules.items()}
        self._compiled = {name: [_tokenize(o) for o in opts] for name, opts in self.rules.items()}
        self._validate()

    def _validate(self):
        if self.start_symbol not in self.rules:
            raise GrammarError(f"start symbol <{self.start_symbol}> has no rule")
        for name, options in self._compiled.items():
            if not options:
                raise GrammarError(f"rule <{name}> has no options")
            for opt in options:
                for tok in opt:
                    if isinstance(tok, NonTerminal) and tok.name not in self.rules:
                        raise GrammarError(f"rule <{name}> references undefined <{tok.name}>")

    def options(self, name):
        return self.rules[name]

    def __repr__(self):
        return f"Grammar({len(self.rules)} rules, start=<{self.start_symbol}>)"


def default_oblique_grammar(n_inputs):
    """The oblique-split tree grammar over ``n_inputs`` observation variables.

    ``condition`` expands to ``c1·x1 + ... + cN·xN < c`` where every ``c``
    is a ``<const>``: either ``0`` or one of the 201 values of ``<nonzero>``
    (-10.0 to 10.0 in steps of 0.1).
    """
    if int(n_inputs) != n_inputs or n_inputs < 1:
        raise GrammarError(f"n_inputs must be a positive integer, got {n_inputs!r}")
    n_inputs = int(n_inputs)
    terms = " + ".join(f"<const>·x{i}" for i in range(1, n_inputs + 1))
    rules = {
        "start": ["<if>"],
        "if": ["Node(<condition>, <action>, <action>)"],
        "condition": [f"{terms} < <const>"],
        "action": ["Leaf", "<if>"],
        "const": ["0", "<nonzero>"],
        "nonzero": [tenths_to_str(k) for k in range(COEF_MIN_TENTHS, COEF_MAX_TENTHS + 1)],
    }
    return Grammar(rules, "start")


@dataclass(frozen=True)
class Translation:
    """Result of mapping a genotype.

    ``text`` is the phenotype when complete. An incomplete translation keeps
    ``text=None`` and records how many nonterminals were left unexpanded.
    """

    text: str = None
    genes_used: int = 0
    unexpanded: int = 0

    @property
    def complete(self):
        return self.unexpanded == 0


def translate(genotype, grammar):
    """Leftmost derivation driven by ``genotype``.

    Equivalent to repeatedly replacing the first nonterminal of the working
    string, but runs in time linear in the output length.
    """
    genes = np.asarray(genotype).ravel()
    out = []
    stack = [NonTerminal(grammar.start_symbol)]
    used = 0
    n = len(genes)
    compiled = grammar._compiled
    while stack:
        tok = stack.pop()
        if not isinstance(tok, NonTerminal):
            out.append(tok)
            continue
        if used == n:
            stack.append(tok)
            remaining = sum(isinstance(t, NonTerminal) for t in stack)
            return Translation(None, used, remaining)
        options = compiled[tok.name]
        choice = options[int(genes[used]) % len(options)]
        used += 1
        stack.extend(reversed(choice))
    return Translation("".join(out), used, 0)
