"""Backward pass: log-domain derivatives of the root with respect to every
node, plus the modified-evidence table they induce at indicator leaves.

For a complete and decomposable SPN the root output is multilinear in the
node outputs, so the derivative of the root with respect to an indicator
leaf equals the network value with that variable's evidence replaced by the
leaf's state. A single downward sweep yields all of these at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import EvidenceTypeMismatch
from .graph import (
    DISCRETE,
    Evidence,
    IndicatorLeaf,
    Marginalized,
    ProductNode,
    SpnGraph,
    SumNode,
    leaf_log_matrix,
    upward_log,
)


@dataclass(frozen=True)
class BackpropResult:
    log_value: float
    log_node_derivatives: np.ndarray  # (n_nodes,)
    log_leaf_values: np.ndarray  # (n_nodes,), rows of internal nodes are 0

    def log_derivative(self, node_id: int) -> float:
        return float(self.log_node_derivatives[node_id])


def downward_log(spn: SpnGraph, values: np.ndarray) -> np.ndarray:
    """Per-node log derivatives of the root, given upward-pass values.

    Works on (n_nodes, L) batches. Derivatives through a product with zero
    children are resolved by counting the -inf children instead of dividing
    by the child value: a child sees -inf whenever some sibling is zero,
    and the finite-sibling sum otherwise.
    """
    n, width = values.shape
    deriv = np.full((n, width), -np.inf)
    deriv[spn.root] = 0.0
    log_w = spn.log_weights
    for node in reversed(spn.nodes):
        if isinstance(node, SumNode):
            d = deriv[node.id]
            lw = log_w[node.id]
            for k, c in enumerate(node.children):
                deriv[c] = np.logaddexp(deriv[c], d + lw[k])
        elif isinstance(node, ProductNode):
            d = deriv[node.id]
            rows = values[np.asarray(node.children), :]
            zero = np.isinf(rows) & (rows < 0)
            zero_count = zero.sum(axis=0)
            finite_sum = np.where(zero, 0.0, rows).sum(axis=0)
            for k, c in enumerate(node.children):
                others_zero = zero_count - zero[k]
                sibling_sum = finite_sum - np.where(zero[k], 0.0, rows[k])
                contrib = np.where(others_zero == 0, d + sibling_sum, -np.inf)
                deriv[c] = np.logaddexp(deriv[c], contrib)
    return deriv


def backprop(spn: SpnGraph, e: Evidence) -> BackpropResult:
    """Evaluate ``e`` and differentiate the root w.r.t. every node."""
    leaf_vals = leaf_log_matrix(spn, [e])
    values = upward_log(spn, leaf_vals)
    deriv = downward_log(spn, values)
    return BackpropResult(
        log_value=float(values[spn.root, 0]),
        log_node_derivatives=deriv[:, 0],
        log_leaf_values=leaf_vals[:, 0],
    )


def modified_evidence_all(spn: SpnGraph, e: Evidence) -> dict[int, np.ndarray]:
    """For each discrete variable X, the vector over states x of
    log S(X=x, e minus X), from one backward pass.

    The entry for state x aggregates the derivatives of every indicator
    leaf for (X, x); states with no leaf get -inf (they are outside the
    support). Summing a row in linear domain recovers the evaluation with
    X marginalized.
    """
    discrete = [v for v in spn.variables if v.kind == DISCRETE]
    if not discrete:
        raise EvidenceTypeMismatch("no discrete variables in graph")
    result = backprop(spn, e)
    buckets: dict[tuple[int, int], list[float]] = {}
    for nid in spn.leaves:
        node = spn.nodes[nid]
        if isinstance(node, IndicatorLeaf):
            buckets.setdefault((node.var, node.state), []).append(
                result.log_node_derivatives[nid]
            )
    table: dict[int, np.ndarray] = {}
    for v in discrete:
        row = np.full(v.cardinality, -np.inf)
        for x in range(v.cardinality):
            contribs = buckets.get((v.id, x))
            if contribs:
                row[x] = logsumexp(np.asarray(contribs))
        table[v.id] = row
    return table
