"""Brute-force ground truth for small all-discrete SPNs.

Builds the dense table of log probabilities over the full joint state space
and answers marginal/max queries by direct table reduction. This is the
reference path used to check the circuit-level algorithms; it deliberately
avoids the evaluation code in :mod:`spnkit.graph` and keeps everything as
plain array manipulation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContinuousVariablePresent, EvidenceTypeMismatch, TooLarge
from .graph import (
    DISCRETE,
    Complete,
    DiscreteSubset,
    Evidence,
    IndicatorLeaf,
    Marginalized,
    ProductNode,
    SpnGraph,
    SumNode,
)

MAX_TABLE_ENTRIES = 1 << 24


@dataclass(frozen=True)
class JointTable:
    var_ids: tuple[int, ...]
    cardinalities: tuple[int, ...]
    log_probs: np.ndarray  # shape == cardinalities

    @property
    def n_entries(self) -> int:
        return self.log_probs.size


def _logsumexp_flat(a: np.ndarray) -> float:
    m = np.max(a)
    if np.isneginf(m):
        return float("-inf")
    return float(m + np.log(np.sum(np.exp(a - m))))


def joint_table(spn: SpnGraph, *, max_entries: int = MAX_TABLE_ENTRIES) -> JointTable:
    """Dense log-probability table over all complete assignments."""
    if any(v.kind != DISCRETE for v in spn.variables):
        raise ContinuousVariablePresent("joint table requires all-discrete variables")
    cards = tuple(v.cardinality for v in spn.variables)
    total = 1
    for c in cards:
        total *= c
        if total > max_entries:
            raise TooLarge(f"joint state space exceeds {max_entries} entries")

    # State of variable v at flat index i is (i // stride[v]) % card[v].
    strides = [0] * len(cards)
    acc = 1
    for v in reversed(range(len(cards))):
        strides[v] = acc
        acc *= cards[v]
    idx = np.arange(total, dtype=np.int64)

    refcount = [len(p) for p in spn.parents]
    vals: dict[int, np.ndarray] = {}
    for node in spn.nodes:
        if isinstance(node, IndicatorLeaf):
            hit = ((idx // strides[node.var]) % cards[node.var]) == node.state
            vals[node.id] = np.where(hit, 0.0, -np.inf)
        elif isinstance(node, SumNode):
            stacked = np.stack([vals[c] for c in node.children])
            with np.errstate(divide="ignore"):
                stacked += np.log(np.asarray(node.weights, dtype=np.float64))[:, None]
            m = stacked.max(axis=0)
            safe = np.where(np.isneginf(m), 0.0, m)
            out = safe + np.log(np.exp(stacked - safe[None, :]).sum(axis=0))
            vals[node.id] = np.where(np.isneginf(m), -np.inf, out)
            for c in node.children:
                refcount[c] -= 1
                if refcount[c] == 0:
                    del vals[c]
        else:  # ProductNode
            acc_vals = vals[node.children[0]].copy()
            for c in node.children[1:]:
                acc_vals += vals[c]
            vals[node.id] = acc_vals
            for c in node.children:
                refcount[c] -= 1
                if refcount[c] == 0:
                    del vals[c]

    table = vals[spn.root].reshape(cards)
    table.setflags(write=False)
    return JointTable(
        var_ids=tuple(v.id for v in spn.variables),
        cardinalities=cards,
        log_probs=table,
    )


@dataclass(frozen=True)
class OracleAnswer:
    log_value: float
    argmax: dict[int, int] | None = None


def oracle_query(table: JointTable, e: Evidence, mode: str = "marginal") -> OracleAnswer:
    """Marginal (log-sum) or max (with one maximizer) over evidence-consistent
    entries. Ties in max mode resolve to the lexicographically smallest
    assignment in variable-id order.
    """
    if mode not in ("marginal", "max"):
        raise ValueError(f"unknown mode {mode!r}")
    if len(e) != len(table.var_ids):
        raise EvidenceTypeMismatch("evidence does not match table variables")
    masked = np.array(table.log_probs, copy=True)
    for axis, vid in enumerate(table.var_ids):
        item = e[vid]
        if isinstance(item, Marginalized):
            continue
        card = table.cardinalities[axis]
        allowed = np.zeros(card, dtype=bool)
        if isinstance(item, Complete):
            allowed[int(item.value)] = True
        elif isinstance(item, DiscreteSubset):
            allowed[list(item.states)] = True
        else:
            raise EvidenceTypeMismatch("interval evidence on discrete table")
        shape = [1] * masked.ndim
        shape[axis] = card
        masked = np.where(allowed.reshape(shape), masked, -np.inf)

    flat = masked.reshape(-1)
    if mode == "marginal":
        return OracleAnswer(log_value=_logsumexp_flat(flat))
    best = int(np.argmax(flat))  # first maximum = lexicographically smallest
    states = np.unravel_index(best, table.cardinalities)
    assignment = {vid: int(s) for vid, s in zip(table.var_ids, states)}
    return OracleAnswer(log_value=float(flat[best]), argmax=assignment)
