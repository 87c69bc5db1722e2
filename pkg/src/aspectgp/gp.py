"""Integer expression trees over the five indicator terminals, and a steady-state GP.

A tree is immutable and caches its value on all 32 possible indicator
inputs, computed bottom-up when the node is built. Subtrees are shared
between individuals, so crossover only pays for the nodes on the path it
rewrites.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .clause import TERMINALS, IndicatorBits

INT64_MAX = 2**63 - 1
INT64_MIN = -(2**63)

FUNCTIONS = ("add", "sub", "mul", "and", "or", "if")
ARITY = {"add": 2, "sub": 2, "mul": 2, "and": 2, "or": 2, "if": 3}
NODE_KINDS = FUNCTIONS + TERMINALS


def saturate(x: int) -> int:
    if x > INT64_MAX:
        return INT64_MAX
    if x < INT64_MIN:
        return INT64_MIN
    return x


def _combine(op, cols):
    if op == "add":
        return tuple(saturate(a + b) for a, b in zip(*cols))
    if op == "sub":
        return tuple(saturate(a - b) for a, b in zip(*cols))
    if op == "mul":
        return tuple(saturate(a * b) for a, b in zip(*cols))
    if op == "and":
        return tuple(1 if a and b else 0 for a, b in zip(*cols))
    if op == "or":
        return tuple(1 if a or b else 0 for a, b in zip(*cols))
    return tuple(a if c else b for c, a, b in zip(*cols))


_LEAF_VALUES = {
    name: tuple((code >> i) & 1 for code in range(32)) for i, name in enumerate(TERMINALS)
}


class ExprTree:
    """One node of an expression tree (a bare terminal is a whole tree)."""

    __slots__ = ("op", "children", "values", "size", "depth", "_vec")

    def __init__(self, op: str, children: Sequence["ExprTree"] = ()):
        children = tuple(children)
        if op in _LEAF_VALUES:
            if children:
                raise ValueError(f"terminal {op} takes no children")
            values = _LEAF_VALUES[op]
        elif op in ARITY:
            if len(children) != ARITY[op]:
                raise ValueError(f"{op} takes {ARITY[op]} children, got {len(children)}")
            values = _combine(op, [c.values for c in children])
        else:
            raise ValueError(f"unknown node kind {op!r}")
        self.op = op
        self.children = children
        self.values = values
        self.size = 1 + sum(c.size for c in children)
        self.depth = 1 + max((c.depth for c in children), default=0)
        self._vec = None

    @property
    def vector(self) -> np.ndarray:
        """Values on the 32 indicator codes as an int64 array."""
        if self._vec is None:
            self._vec = np.array(self.values, dtype=np.int64)
        return self._vec

    @property
    def is_terminal(self) -> bool:
        return not self.children

    def __eq__(self, other):
        if not isinstance(other, ExprTree):
            return NotImplemented
        return self is other or (self.op == other.op and self.children == other.children)

    def __hash__(self):
        return hash((self.op, self.children))

    def __str__(self):
        if not self.children:
            return self.op
        return "(" + " ".join([self.op] + [str(c) for c in self.children]) + ")"

    def __repr__(self):
        return f"ExprTree({str(self)!r})"

    def subtrees(self) -> list[tuple[tuple[int, ...], "ExprTree"]]:
        """All (path, node) pairs in preorder; a path is a sequence of child indices."""
        out = []
        stack = [((), self)]
        while stack:
            path, node = stack.pop()
            out.append((path, node))
            for i in range(len(node.children) - 1, -1, -1):
                stack.append((path + (i,), node.children[i]))
        return out

    def replace(self, path: tuple[int, ...], new: "ExprTree") -> "ExprTree":
        if not path:
            return new
        i = path[0]
        kids = list(self.children)
        kids[i] = kids[i].replace(path[1:], new)
        return ExprTree(self.op, kids)


def eval_tree(tree: ExprTree, bits) -> int:
    """Value of ``tree`` on one similar clause's indicator bits."""
    code = bits if isinstance(bits, (int, np.integer)) else IndicatorBits(*bits).code
    return tree.values[code]


_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def parse_tree(text: str) -> ExprTree:
    """Parse the prefix s-expression form, e.g. ``(if AM (mul (add NP NPT) SP) (sub NP PPP))``."""
    tokens = _TOKEN.findall(text)
    pos = 0

    def parse():
        nonlocal pos
        if pos >= len(tokens):
            raise ValueError("unexpected end of expression")
        tok = tokens[pos]
        pos += 1
        if tok == "(":
            if pos >= len(tokens):
                raise ValueError("unexpected end of expression")
            op = tokens[pos]
            pos += 1
            kids = []
            while pos < len(tokens) and tokens[pos] != ")":
                kids.append(parse())
            if pos >= len(tokens):
                raise ValueError("missing ')'")
            pos += 1
            return ExprTree(op, kids)
        if tok == ")":
            raise ValueError("unexpected ')'")
        return ExprTree(tok)

    tree = parse()
    if pos != len(tokens):
        raise ValueError(f"trailing tokens after expression: {' '.join(tokens[pos:])}")
    return tree


@dataclass(frozen=True)
class GPConfig:
    population_size: int = 500
    total_inserts: int = 10_000
    tournament_size: int = 4
    max_nodes: int = 256
    init_depth_range: tuple[int, int] = (2, 6)
    mutation_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.init_depth_range
        object.__setattr__(self, "init_depth_range", (int(lo), int(hi)))
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if not 1 <= self.tournament_size <= self.population_size:
            raise ValueError("tournament_size must lie in [1, population_size]")
        if self.total_inserts < 1 or self.max_nodes < 1:
            raise ValueError("total_inserts and max_nodes must be positive")
        if not 1 <= lo <= hi:
            raise ValueError("init_depth_range must satisfy 1 <= lower <= upper")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must lie in [0, 1]")

    def fingerprint(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _grow(rng: np.random.Generator, depth: int) -> ExprTree:
    if depth <= 1:
        return ExprTree(TERMINALS[rng.integers(len(TERMINALS))])
    kind = NODE_KINDS[rng.integers(len(NODE_KINDS))]
    if kind in _LEAF_VALUES:
        return ExprTree(kind)
    return ExprTree(kind, [_grow(rng, depth - 1) for _ in range(ARITY[kind])])


def random_tree(
    rng: np.random.Generator,
    config: GPConfig,
    depth_range: Optional[tuple[int, int]] = None,
    max_tries: int = 100,
) -> ExprTree:
    """Grow a random tree whose depth bound is drawn uniformly from ``depth_range``.

    Below the bound every node kind is equally likely; at the bound only
    terminals are drawn. Trees over ``config.max_nodes`` are redrawn at the
    same depth bound.
    """
    lo, hi = depth_range or config.init_depth_range
    depth = int(rng.integers(lo, hi + 1))
    for _ in range(max_tries):
        tree = _grow(rng, depth)
        if tree.size <= config.max_nodes:
            return tree
    return _grow(rng, 1)


def crossover(rng: np.random.Generator, parent_a: ExprTree, parent_b: ExprTree, config: GPConfig) -> ExprTree:
    """Replace a uniformly chosen subtree of ``parent_a`` with one from ``parent_b``."""
    sites_a = parent_a.subtrees()
    sites_b = parent_b.subtrees()
    for _ in range(10):
        path, _old = sites_a[rng.integers(len(sites_a))]
        _, donor = sites_b[rng.integers(len(sites_b))]
        child = parent_a.replace(path, donor)
        if child.size <= config.max_nodes:
            return child
    return parent_a


def mutate(rng: np.random.Generator, tree: ExprTree, config: GPConfig) -> ExprTree:
    """With probability ``config.mutation_rate`` swap one subtree for a fresh depth-<=3 tree."""
    if config.mutation_rate <= 0.0 or rng.random() >= config.mutation_rate:
        return tree
    sites = tree.subtrees()
    for _ in range(10):
        path, _old = sites[rng.integers(len(sites))]
        child = tree.replace(path, random_tree(rng, config, (1, 3)))
        if child.size <= config.max_nodes:
            return child
    return tree


@dataclass
class Population:
    trees: list[ExprTree]
    fitness: np.ndarray
    best_index: int = 0

    def __len__(self):
        return len(self.trees)

    @property
    def best(self) -> ExprTree:
        return self.trees[self.best_index]

    @property
    def best_fitness(self) -> float:
        return float(self.fitness[self.best_index])


@dataclass
class EvolveResult:
    best: ExprTree
    best_fitness: float
    history: list[tuple[int, float]] = field(default_factory=list)
    population: Optional[Population] = None


def _tournament(rng, fitness, size, worst=False):
    picks = rng.integers(len(fitness), size=size)
    if worst:
        return int(min(picks, key=lambda i: (fitness[i], i)))
    return int(min(picks, key=lambda i: (-fitness[i], i)))


ProgressSink = Callable[[int, float, Population], None]


def evolve(
    fitness_fn: Callable[[ExprTree], float],
    config: GPConfig,
    rng: Optional[np.random.Generator] = None,
    progress: Optional[ProgressSink] = None,
) -> EvolveResult:
    """Steady-state GP maximizing ``fitness_fn``.

    Draw order per insert: parent tournament A, parent tournament B,
    crossover sites, mutation, then victim anti-tournament(s). Tournaments
    sample with replacement; the fittest pick wins (lowest index on ties) and
    the least fit pick is replaced (lowest index on ties), redrawn whenever it
    is the current best. ``progress`` is called after initialization
    (insert 0) and after every insert.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    size = config.population_size
    trees = [random_tree(rng, config) for _ in range(size)]
    fitness = np.array([fitness_fn(t) for t in trees], dtype=float)
    # first maximum: lowest index among ties
    pop = Population(trees, fitness, int(np.argmax(fitness)))
    history = [(0, pop.best_fitness)]
    if progress:
        progress(0, pop.best_fitness, pop)

    for n in range(1, config.total_inserts + 1):
        a = trees[_tournament(rng, fitness, config.tournament_size)]
        b = trees[_tournament(rng, fitness, config.tournament_size)]
        child = mutate(rng, crossover(rng, a, b, config), config)
        child_fit = float(fitness_fn(child))
        victim = _tournament(rng, fitness, config.tournament_size, worst=True)
        while victim == pop.best_index:
            victim = _tournament(rng, fitness, config.tournament_size, worst=True)
        trees[victim] = child
        fitness[victim] = child_fit
        if child_fit > fitness[pop.best_index]:
            pop.best_index = victim
        history.append((n, pop.best_fitness))
        if progress:
            progress(n, pop.best_fitness, pop)

    return EvolveResult(pop.best, pop.best_fitness, history, pop)
