"""Oblique decision trees with Q-learning leaves.

A tree routes an observation ``x`` through internal nodes testing
``weights @ x < bias`` (true branch on strict less-than) down to a leaf that
holds one Q-value per discrete action.

Internally a tree is a set of flat arrays (split weights, biases, child codes
and a ``(n_leaves, n_actions)`` Q matrix). Child codes are split indices when
non-negative and ``-(leaf + 1)`` for leaves. Splits and leaves are numbered in
pre-order, true branch first. :class:`Split` / :class:`Leaf` objects are only
materialized for structural work (pruning, serialization).
"""

import io
import re
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Union

import numpy as np


class InvalidObservation(ValueError):
    pass


class IncompatibleTrees(ValueError):
    pass


class TreeParseError(ValueError):
    def __init__(self, msg, pos):
        super().__init__(f"{msg} at position {pos}")
        self.pos = pos


@dataclass(frozen=True)
class QLearnParams:
    alpha: float = 0.1
    gamma: float = 0.9
    epsilon: float = 0.05

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")


class Transition(NamedTuple):
    s: np.ndarray
    a: int
    r: float
    s_next: np.ndarray
    done: bool


@dataclass(eq=False)
class Leaf:
    q: np.ndarray
    node_id: int = -1


@dataclass(eq=False)
class Split:
    weights: np.ndarray
    bias: float
    true_branch: Union["Split", Leaf]
    false_branch: Union["Split", Leaf]
    node_id: int = -1


Node = Union[Split, Leaf]


class DecisionTree:
    """Executable oblique tree.

    Build one from node objects (``DecisionTree(root, n_inputs, n_actions)``),
    from a grammar phenotype (:func:`from_phenotype`) or from canonical text
    (:func:`parse`).
    """

    def __init__(self, root, n_inputs, n_actions):
        if n_inputs < 1 or n_actions < 1:
            raise ValueError("n_inputs and n_actions must be positive")
        self.n_inputs = int(n_inputs)
        self.n_actions = int(n_actions)
        self._compile(root)
        self.counting = False

    # ------------------------------------------------------------------
    # construction
    def _compile(self, root):
        W, b, tc, fc, q = [], [], [], [], []
        split_node, leaf_node, parent = [], [], []

        def visit(node, par):
            nid = len(parent)
            parent.append(par)
            if isinstance(node, Leaf):
                qv = np.asarray(node.q, dtype=np.float64)
                if qv.shape != (self.n_actions,):
                    raise ValueError(f"leaf Q-vector has shape {qv.shape}, expected ({self.n_actions},)")
                leaf_node.append(nid)
                q.append(qv)
                return -len(q)
            w = np.asarray(node.weights, dtype=np.float64)
            if w.shape != (self.n_inputs,):
                raise ValueError(f"split weights have shape {w.shape}, expected ({self.n_inputs},)")
            i = len(W)
            W.append(w)
            b.append(float(node.bias))
            tc.append(0)
            fc.append(0)
            split_node.append(nid)
            tc[i] = visit(node.true_branch, nid)
            fc[i] = visit(node.false_branch, nid)
            return i

        self._root = visit(root, -1)
        self.weights = np.array(W, dtype=np.float64).reshape(len(W), self.n_inputs)
        self.bias = np.array(b, dtype=np.float64)
        self.true_child = np.array(tc, dtype=np.int64)
        self.false_child = np.array(fc, dtype=np.int64)
        self.q = np.array(q, dtype=np.float64).reshape(len(q), self.n_actions)
        self.split_node = np.array(split_node, dtype=np.int64)
        self.leaf_node = np.array(leaf_node, dtype=np.int64)
        self.parent = np.array(parent, dtype=np.int64)
        self.visits = np.zeros(len(parent), dtype=np.int64)
        self._refresh_lists()

    def _refresh_lists(self):
        # plain lists make the per-step descent several times faster than numpy scalars
        self._tc = self.true_child.tolist()
        self._fc = self.false_child.tolist()
        self._b = self.bias.tolist()

    @property
    def n_splits(self):
        return len(self.bias)

    @property
    def n_leaves(self):
        return len(self.q)

    @property
    def n_nodes(self):
        return len(self.parent)

    def depth(self):
        def d(code):
            if code < 0:
                return 0
            return 1 + max(d(self.true_child[code]), d(self.false_child[code]))
        return d(self._root)

    def copy(self):
        new = object.__new__(DecisionTree)
        new.__dict__.update(self.__dict__)
        for name in ("weights", "bias", "q", "visits"):
            setattr(new, name, getattr(self, name).copy())
        return new

    def to_nodes(self):
        """Fresh node objects (copies) mirroring this tree; ``node_id`` is the pre-order id."""
        def build(code):
            if code < 0:
                j = -code - 1
                return Leaf(self.q[j].copy(), int(self.leaf_node[j]))
            return Split(self.weights[code].copy(), float(self.bias[code]),
                         build(self.true_child[code]), build(self.false_child[code]),
                         int(self.split_node[code]))
        return build(self._root)

    def same_structure(self, other):
        return (self.n_inputs == other.n_inputs and self.n_actions == other.n_actions
                and self._root == other._root
                and np.array_equal(self.true_child, other.true_child)
                and np.array_equal(self.false_child, other.false_child)
                and np.array_equal(self.weights, other.weights)
                and np.array_equal(self.bias, other.bias))

    def __eq__(self, other):
        if not isinstance(other, DecisionTree):
            return NotImplemented
        return self.same_structure(other) and np.array_equal(self.q, other.q)

    __hash__ = None

    def __repr__(self):
        return (f"DecisionTree(n_inputs={self.n_inputs}, n_actions={self.n_actions}, "
                f"splits={self.n_splits}, leaves={self.n_leaves})")

    # ------------------------------------------------------------------
    # execution
    def route(self, s):
        """Index of the leaf reached by observation ``s``."""
        s = np.asarray(s, dtype=np.float64)
        if s.shape != (self.n_inputs,):
            raise InvalidObservation(f"observation has shape {s.shape}, expected ({self.n_inputs},)")
        if not np.isfinite(s).all():
            raise InvalidObservation("observation contains non-finite values")
        code = self._root
        if code >= 0:
            vals = (self.weights @ s).tolist()
            tc, fc, b = self._tc, self._fc, self._b
            if self.counting:
                visits = self.visits
                nodes = self.split_node
                while code >= 0:
                    visits[nodes[code]] += 1
                    code = tc[code] if vals[code] < b[code] else fc[code]
            else:
                while code >= 0:
                    code = tc[code] if vals[code] < b[code] else fc[code]
        leaf = -code - 1
        if self.counting:
            self.visits[self.leaf_node[leaf]] += 1
        return leaf

    def greedy_action(self, s):
        return int(np.argmax(self.q[self.route(s)]))

    def act(self, s, params, rng):
        """Epsilon-greedy action; argmax ties go to the lowest index."""
        leaf = self.route(s)
        if rng.random() < params.epsilon:
            return int(rng.integers(self.n_actions))
        return int(np.argmax(self.q[leaf]))

    def q_update(self, t, params):
        """One-step Q-learning on the leaf reached by ``t.s``; no bootstrap when ``t.done``."""
        a = int(t.a)
        if not 0 <= a < self.n_actions:
            raise ValueError(f"action {a} out of range for {self.n_actions} actions")
        leaf = self.route(t.s)
        if t.done:
            target = float(t.r)
        else:
            target = float(t.r) + params.gamma * self.q[self.route(t.s_next)].max()
        old = self.q[leaf, a]
        self.q[leaf, a] = old + params.alpha * (target - old)

    # ------------------------------------------------------------------
    # instrumentation
    def reset_visits(self):
        self.visits[:] = 0

    def visits_csv(self):
        buf = io.StringIO()
        buf.write("node_id,visits,parent_id\n")
        for nid, (v, p) in enumerate(zip(self.visits, self.parent)):
            buf.write(f"{nid},{int(v)},{'' if p < 0 else int(p)}\n")
        return buf.getvalue()


# ----------------------------------------------------------------------
# text formats

def _fmt_coef(w):
    w = float(w)
    s = f"{w:.1f}"
    return s if float(s) == w else repr(w)


def _fmt_q(v):
    return "%.17g" % v


def serialize(tree, with_q=True):
    """Canonical text: ``Node(w1*x1 + ... < b, <true>, <false>)`` with ``Leaf#<id>[q=...]`` leaves."""
    parts = []

    def emit(code):
        if code < 0:
            j = -code - 1
            if with_q:
                parts.append(f"Leaf#{j}[q={','.join(_fmt_q(v) for v in tree.q[j])}]")
            else:
                parts.append(f"Leaf#{j}")
            return
        terms = " + ".join(f"{_fmt_coef(w)}*x{k + 1}" for k, w in enumerate(tree.weights[code]))
        parts.append(f"Node({terms} < {_fmt_coef(tree.bias[code])}, ")
        emit(tree.true_child[code])
        parts.append(", ")
        emit(tree.false_child[code])
        parts.append(")")

    emit(tree._root)
    return "".join(parts)


_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<node>Node\()
  | (?P<leaf>Leaf)
  | (?P<qopen>\[q=)
  | (?P<var>x(?P<idx>\d+))
  | (?P<num>[-+]?(?:\d+\.?\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|inf|nan))
  | (?P<sym>[#,()<+*·\]])
""", re.VERBOSE)


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None:
                raise TreeParseError(f"unexpected character {text[pos]!r}", pos)
            kind = m.lastgroup if m.lastgroup != "idx" else "var"
            if kind != "ws":
                val = m.group(kind)
                if kind == "var":
                    val = int(m.group("idx"))
                self.toks.append((kind, val, pos))
            pos = m.end()
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else ("eof", None, len(self.text))

    def take(self, kind, val=None):
        tok = self.peek()
        if tok[0] != kind or (val is not None and tok[1] != val):
            want = val if val is not None else kind
            raise TreeParseError(f"expected {want!r}, found {tok[1] if tok[1] is not None else 'end of input'!r}", tok[2])
        self.i += 1
        return tok

    def number(self):
        return float(self.take("num")[1])

    def tree(self):
        kind, _, pos = self.peek()
        if kind == "node":
            self.i += 1
            terms = []
            while True:
                w = self.number()
                op = self.peek()
                if not (op[0] == "sym" and op[1] in "*·"):
                    raise TreeParseError("expected '*' or '·' after coefficient", op[2])
                self.i += 1
                _, idx, vpos = self.take("var")
                if idx < 1:
                    raise TreeParseError("variable indices start at 1", vpos)
                terms.append((idx, w, vpos))
                nxt = self.peek()
                if nxt[0] == "sym" and nxt[1] == "+":
                    self.i += 1
                    continue
                break
            self.take("sym", "<")
            bias = self.number()
            self.take("sym", ",")
            t = self.tree()
            self.take("sym", ",")
            f = self.tree()
            self.take("sym", ")")
            return ("split", terms, bias, t, f, pos)
        if kind == "leaf":
            self.i += 1
            q = None
            if self.peek() == ("sym", "#", self.peek()[2]):
                self.i += 1
                self.take("num")
            if self.peek()[0] == "qopen":
                self.i += 1
                q = [self.number()]
                while self.peek()[0] == "sym" and self.peek()[1] == ",":
                    # a comma may also end the leaf inside a Node(...); only consume when a number follows
                    if self.i + 1 < len(self.toks) and self.toks[self.i + 1][0] == "num":
                        self.i += 1
                        q.append(self.number())
                    else:
                        break
                self.take("sym", "]")
            return ("leaf", q, pos)
        raise TreeParseError(f"expected 'Node(' or 'Leaf', found {self.peek()[1]!r}", pos)


def _max_var(ast):
    if ast[0] == "leaf":
        return 0
    return max(max(i for i, _, _ in ast[1]), _max_var(ast[3]), _max_var(ast[4]))


def _max_q(ast):
    if ast[0] == "leaf":
        return len(ast[1]) if ast[1] is not None else 0
    return max(_max_q(ast[3]), _max_q(ast[4]))


def parse(text, n_inputs=None, n_actions=None, rng=None):
    """Parse canonical or phenotype text into a :class:`DecisionTree`.

    Leaves without ``[q=...]`` get Q-values from ``rng.uniform(-1, 1)`` in
    leaf order, or zeros when ``rng`` is None. Missing dimensions are inferred
    from the text.
    """
    p = _Parser(text)
    ast = p.tree()
    tok = p.peek()
    if tok[0] != "eof":
        raise TreeParseError(f"trailing input {tok[1]!r}", tok[2])
    if n_inputs is None:
        n_inputs = max(_max_var(ast), 1)
    if n_actions is None:
        n_actions = _max_q(ast)
        if n_actions == 0:
            raise TreeParseError("cannot infer n_actions from leaves without Q-values", 0)

    def build(node):
        if node[0] == "leaf":
            q = node[1]
            if q is None:
                q = rng.uniform(-1.0, 1.0, n_actions) if rng is not None else np.zeros(n_actions)
            elif len(q) != n_actions:
                raise TreeParseError(f"leaf has {len(q)} Q-values, expected {n_actions}", node[2])
            return Leaf(np.asarray(q, dtype=np.float64))
        _, terms, bias, t, f, _ = node
        w = np.zeros(n_inputs)
        seen = set()
        for idx, coef, vpos in terms:
            if idx > n_inputs:
                raise TreeParseError(f"x{idx} exceeds n_inputs={n_inputs}", vpos)
            if idx in seen:
                raise TreeParseError(f"x{idx} appears twice in one condition", vpos)
            seen.add(idx)
            w[idx - 1] = coef
        # children built in order so rng draws follow leaf order
        tt = build(t)
        ff = build(f)
        return Split(w, bias, tt, ff)

    return DecisionTree(build(ast), n_inputs, n_actions)


def from_phenotype(text, n_inputs, n_actions, rng=None, low=-1.0, high=1.0):
    """Tree for a grammar phenotype; Q-values drawn from U(low, high) in leaf order."""
    if text is None:
        raise ValueError("incomplete translation has no phenotype")
    tree = parse(text, n_inputs, n_actions, rng=None)
    if rng is not None:
        tree.q[:] = rng.uniform(low, high, size=tree.q.shape)
    return tree


# ----------------------------------------------------------------------
# tree-level operations

def average_trees(trees):
    """Tree sharing the common structure whose Q-values are the elementwise mean."""
    trees = list(trees)
    if not trees:
        raise IncompatibleTrees("cannot average an empty list of trees")
    first = trees[0]
    for t in trees[1:]:
        if not first.same_structure(t):
            raise IncompatibleTrees("trees differ in structure or splits")
    out = first.copy()
    stack = np.stack([t.q for t in trees])
    # entries no copy changed stay bit-identical instead of picking up rounding from the mean
    out.q = np.where((stack == stack[0]).all(axis=0), stack[0], np.mean(stack, axis=0))
    out.visits = np.zeros_like(first.visits)
    return out


def mac_count(tree):
    """Multiply-accumulates per decision along the worst-case root-to-leaf path."""
    nnz = np.count_nonzero(tree.weights, axis=1) if tree.n_splits else np.zeros(0, dtype=int)

    def cost(code):
        if code < 0:
            return 0
        return int(nnz[code]) + max(cost(tree.true_child[code]), cost(tree.false_child[code]))

    return cost(tree._root)


def mac_per_episode(tree, episode_length):
    return mac_count(tree) * int(episode_length)


@dataclass
class PruneReport:
    removed: list = field(default_factory=list)   # (node_id, ratio)
    merged: list = field(default_factory=list)    # node ids of splits collapsed into a leaf
    nodes_before: int = 0
    nodes_after: int = 0

    def __str__(self):
        lines = [f"{len(self.removed)} nodes removed, {len(self.merged)} splits merged",
                 f"nodes: {self.nodes_before} -> {self.nodes_after}"]
        lines += [f"  removed node {nid} (visit ratio {r:.6f})" for nid, r in self.removed]
        lines += [f"  merged split {nid}" for nid in self.merged]
        return "\n".join(lines)


def prune(tree, visits=None, threshold=0.005):
    """Visit-ratio pruning.

    A non-root node whose visits are below ``threshold`` times its parent's is
    deleted and the parent is replaced by the node's sibling. This repeats
    until no node qualifies; afterwards any split whose children are leaves
    with the same greedy action collapses into its more visited leaf.
    ``visits`` is indexed by pre-order node id (defaults to ``tree.visits``).
    """
    visits = np.asarray(tree.visits if visits is None else visits)
    if len(visits) != tree.n_nodes:
        raise ValueError(f"expected {tree.n_nodes} visit counts, got {len(visits)}")
    report = PruneReport(nodes_before=tree.n_nodes)
    root = tree.to_nodes()

    def ratio(node, par):
        vp = visits[par.node_id]
        return float(visits[node.node_id]) / vp if vp > 0 else 0.0

    def find(node):
        # pre-order: (child, parent, grandparent) of the first qualifying node
        stack = [(node, None)]
        parents = {}
        while stack:
            n, par = stack.pop()
            if par is not None and ratio(n, par) < threshold:
                return n, par, parents.get(id(par))
            if isinstance(n, Split):
                parents[id(n.true_branch)] = n
                parents[id(n.false_branch)] = n
                stack.append((n.false_branch, n))
                stack.append((n.true_branch, n))
        return None

    while True:
        hit = find(root)
        if hit is None:
            break
        n, par, grand = hit
        report.removed.append((n.node_id, ratio(n, par)))
        sibling = par.false_branch if n is par.true_branch else par.true_branch
        if grand is None:
            root = sibling
        elif grand.true_branch is par:
            grand.true_branch = sibling
        else:
            grand.false_branch = sibling

    def merge(node):
        if isinstance(node, Leaf):
            return node
        node.true_branch = merge(node.true_branch)
        node.false_branch = merge(node.false_branch)
        t, f = node.true_branch, node.false_branch
        if isinstance(t, Leaf) and isinstance(f, Leaf) and np.argmax(t.q) == np.argmax(f.q):
            report.merged.append(node.node_id)
            return t if visits[t.node_id] >= visits[f.node_id] else f
        return node

    root = merge(root)
    out = DecisionTree(root, tree.n_inputs, tree.n_actions)
    report.nodes_after = out.n_nodes
    return out, report


# ----------------------------------------------------------------------
# population kernel

class TreeBatch:
    """Several trees packed into shared arrays for lock-step routing and updates.

    Used when many agents observe the same state (collaborative learning). The
    Q matrix is a private copy; call :meth:`write_back` to store it.
    """

    def __init__(self, trees):
        trees = list(trees)
        if not trees:
            raise ValueError("empty batch")
        n_in, n_act = trees[0].n_inputs, trees[0].n_actions
        for t in trees:
            if t.n_inputs != n_in or t.n_actions != n_act:
                raise ValueError("all trees in a batch must share input and action dimensions")
        self.n_inputs, self.n_actions = n_in, n_act
        s_off = np.cumsum([0] + [t.n_splits for t in trees])
        l_off = np.cumsum([0] + [t.n_leaves for t in trees])
        self.leaf_offset = l_off

        def shift(codes, k):
            codes = codes.copy()
            leaf = codes < 0
            codes[leaf] -= l_off[k]
            codes[~leaf] += s_off[k]
            return codes

        self.weights = np.concatenate([t.weights for t in trees]) if s_off[-1] else np.zeros((0, n_in))
        self.bias = np.concatenate([t.bias for t in trees])
        self.true_child = np.concatenate([shift(t.true_child, k) for k, t in enumerate(trees)])
        self.false_child = np.concatenate([shift(t.false_child, k) for k, t in enumerate(trees)])
        self.roots = np.array([shift(np.array([t._root]), k)[0] for k, t in enumerate(trees)], dtype=np.int64)
        self.q = np.concatenate([t.q for t in trees])
        self.n_agents = len(trees)
        self._agents = np.arange(self.n_agents)

    def route(self, s):
        """Global leaf index reached by every agent for observation ``s``."""
        cur = self.roots.copy()
        if len(self.bias):
            nxt = np.where(self.weights @ s < self.bias, self.true_child, self.false_child)
            active = np.flatnonzero(cur >= 0)
            while active.size:
                cur[active] = nxt[cur[active]]
                active = active[cur[active] >= 0]
        return -cur - 1

    def propose(self, leaves, epsilon, rng):
        """Epsilon-greedy proposals, one per agent."""
        greedy = np.argmax(self.q[leaves], axis=1)
        explore = rng.random(self.n_agents) < epsilon
        random_actions = rng.integers(self.n_actions, size=self.n_agents)
        return np.where(explore, random_actions, greedy)

    def update(self, leaves, a, r, next_leaves, done, params):
        if done:
            target = np.full(self.n_agents, float(r))
        else:
            target = float(r) + params.gamma * self.q[next_leaves].max(axis=1)
        old = self.q[leaves, a]
        self.q[leaves, a] = old + params.alpha * (target - old)

    def write_back(self, trees):
        for k, t in enumerate(trees):
            t.q[:] = self.q[self.leaf_offset[k]:self.leaf_offset[k + 1]]
