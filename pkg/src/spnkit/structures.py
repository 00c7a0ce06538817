"""Deterministic generators for test and experiment structures.

``gen_pd_grid`` builds the recursive axis-aligned rectangle decomposition
over an l x l grid of variables: every sub-rectangle owns one sum node whose
children are product nodes, one per unit-resolution vertical or horizontal
split of that rectangle, and each product joins the two sub-rectangle sums.
Rectangles are memoized, so the result is a DAG. Unit cells are mixtures
over the cell's leaves. ``gen_chain`` builds the sum-chain whose
augmentation grows quadratically. ``sample_weights`` redraws every sum's
weight vector from a seeded Dirichlet.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import GraphBuilder, SpnGraph, SumNode, _normalize_exact, build_spn


@dataclass(frozen=True)
class GaussianCells:
    """Gaussian leaf mixture per grid cell: ``count`` components with means
    evenly spaced over ``mean_range`` and a shared initial variance."""

    count: int = 2
    mean_range: tuple[float, float] = (-1.0, 1.0)
    variance: float = 1.0


@dataclass(frozen=True)
class GridSpec:
    side: int
    leaves: str | GaussianCells = "indicators"  # "indicators" => binary RVs

    def __post_init__(self):
        if self.side < 2:
            raise ValueError("grid side must be >= 2")


@dataclass(frozen=True)
class WeightPrior:
    """Symmetric Dirichlet over each sum's weight simplex, seeded.

    Streams come from numpy's PCG64 generator, so a given (alpha, seed)
    reproduces the same weights on any platform.
    """

    alpha: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")


def gen_pd_grid(spec: GridSpec) -> SpnGraph:
    """Rectangle-decomposition SPN over an l x l grid (row-major variables)."""
    l = spec.side
    b = GraphBuilder()
    cell_var = {}
    for r in range(l):
        for c in range(l):
            name = f"X{r * l + c}"
            if spec.leaves == "indicators":
                cell_var[r, c] = b.discrete(name, 2)
            else:
                cell_var[r, c] = b.continuous(name)

    memo: dict[tuple[int, int, int, int], int] = {}

    def rect(r0: int, c0: int, r1: int, c1: int) -> int:
        key = (r0, c0, r1, c1)
        if key in memo:
            return memo[key]
        if r1 - r0 == 1 and c1 - c0 == 1:
            var = cell_var[r0, c0]
            if spec.leaves == "indicators":
                children = [b.indicator(var, s) for s in (0, 1)]
            else:
                g = spec.leaves
                lo, hi = g.mean_range
                means = np.linspace(lo, hi, g.count) if g.count > 1 else [0.5 * (lo + hi)]
                children = [b.gaussian(var, float(m), g.variance) for m in means]
            node = b.sum(children, [1.0 / len(children)] * len(children))
        else:
            products = []
            for c in range(c0 + 1, c1):  # vertical splits, left to right
                products.append(b.product([rect(r0, c0, r1, c), rect(r0, c, r1, c1)]))
            for r in range(r0 + 1, r1):  # horizontal splits, top to bottom
                products.append(b.product([rect(r0, c0, r, c1), rect(r, c0, r1, c1)]))
            node = b.sum(products, [1.0 / len(products)] * len(products))
        memo[key] = node
        return node

    root = rect(0, 0, l, l)
    return b.build(root)


def gen_chain(K: int) -> SpnGraph:
    """Chain of K sum nodes over K+1 binary variables.

    Sum k (1-based, k < K) has children (sum k+1, distribution k); the last
    sum has the last two distributions. Distribution k is realized as the
    product of indicators for the one-hot assignment with variable k-1 set
    to 1, so distributions share the full scope (the chain is complete and
    decomposable) and have disjoint supports.
    """
    if K < 2:
        raise ValueError("chain needs K >= 2")
    n = K + 1
    b = GraphBuilder()
    var_ids = [b.discrete(f"X{i}", 2) for i in range(n)]

    def distribution(k: int) -> int:  # one-hot pattern at position k
        leaves = [b.indicator(var_ids[i], 1 if i == k else 0) for i in range(n)]
        return b.product(leaves)

    dists = [distribution(k) for k in range(n)]
    next_sum = b.sum([dists[K - 1], dists[K]], [0.5, 0.5])  # K-th sum
    for k in range(K - 2, -1, -1):
        next_sum = b.sum([next_sum, dists[k]], [0.5, 0.5])
    return b.build(next_sum)


def gen_shared_demo() -> SpnGraph:
    """Small 3-variable SPN with four sums sharing one root.

    The root mixes two factorizations: {X0} x {X1,X2} and {X0,X1} x {X2}.
    Each inner sum sits under exactly one root branch, which makes this the
    smallest structure where augmentation has to introduce twins.
    """
    b = GraphBuilder()
    x0 = b.discrete("X0", 2)
    x1 = b.discrete("X1", 2)
    x2 = b.discrete("X2", 2)
    s_x0 = b.sum([b.indicator(x0, 0), b.indicator(x0, 1)], [0.6, 0.4])
    s_x12 = b.sum(
        [
            b.product([b.indicator(x1, 0), b.indicator(x2, 0)]),
            b.product([b.indicator(x1, 1), b.indicator(x2, 1)]),
        ],
        [0.7, 0.3],
    )
    s_x01 = b.sum(
        [
            b.product([b.indicator(x0, 0), b.indicator(x1, 1)]),
            b.product([b.indicator(x0, 1), b.indicator(x1, 0)]),
        ],
        [0.2, 0.8],
    )
    left = b.product([s_x0, s_x12])
    right = b.product([s_x01, b.indicator(x2, 0)])
    root = b.sum([left, right], [0.5, 0.5])
    return b.build(root)


def gen_depth_bias_demo(
    root_weights=(0.3, 0.4, 0.3),
    inner1_weights=(0.6, 0.4),
    inner2_weights=(0.5, 0.5),
) -> SpnGraph:
    """3-variable SPN whose root mixes one fully factorized branch with two
    branches that each contain an inner sum.

    With deterministic twin-weights, max-backtracking favors the flat branch
    because the structured branches are dampened by their inner sum-weights;
    uniform twin-weights dampen the flat branch twice instead and can flip
    the choice.
    """
    b = GraphBuilder()
    x0 = b.discrete("X0", 2)
    x1 = b.discrete("X1", 2)
    x2 = b.discrete("X2", 2)
    flat = b.product([b.indicator(x0, 0), b.indicator(x1, 0), b.indicator(x2, 0)])
    inner1 = b.sum(
        [
            b.product([b.indicator(x0, 0), b.indicator(x1, 1)]),
            b.product([b.indicator(x0, 1), b.indicator(x1, 0)]),
        ],
        inner1_weights,
    )
    mid = b.product([inner1, b.indicator(x2, 0)])
    inner2 = b.sum(
        [
            b.product([b.indicator(x1, 0), b.indicator(x2, 1)]),
            b.product([b.indicator(x1, 1), b.indicator(x2, 0)]),
        ],
        inner2_weights,
    )
    deep = b.product([b.indicator(x0, 0), inner2])
    root = b.sum([flat, mid, deep], root_weights)
    return b.build(root)


def sample_weights(spn: SpnGraph, prior: WeightPrior) -> SpnGraph:
    """Redraw every sum's weights i.i.d. from Dirichlet(alpha, ..., alpha)."""
    rng = np.random.default_rng(np.random.SeedSequence(prior.seed))
    nodes = []
    for node in spn.nodes:
        if isinstance(node, SumNode):
            w = rng.dirichlet(np.full(len(node.children), prior.alpha))
            nodes.append(
                SumNode(id=node.id, children=node.children, weights=_normalize_exact(w))
            )
        else:
            nodes.append(node)
    return build_spn(spn.variables, nodes, spn.root, weight_tolerance=None)
