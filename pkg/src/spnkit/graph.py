"""Core SPN representation: immutable rooted DAGs of sum/product/leaf nodes.

A graph is built once (topologically sorted, scopes computed, weights
normalized) and never mutated afterwards, so it can be shared freely across
threads. All evaluation happens in log domain; ``-inf`` encodes zero
probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence, Union

import numpy as np
from scipy.special import logsumexp

from . import _normal
from .errors import (
    CycleDetected,
    EmptyChildren,
    EvidenceTypeMismatch,
    InvalidLeaf,
    NegativeWeight,
    NonNormalizedWeights,
    NonPositiveVariance,
    SpnError,
    UnknownNode,
    UnknownReference,
)

DISCRETE = "discrete"
CONTINUOUS = "continuous"

#: Sums whose weights deviate from a normalized distribution by more than
#: this at build time are rejected; smaller deviations are renormalized.
WEIGHT_TOLERANCE = 1e-9

#: Joint-state budget above which the selectivity check reports "unknown".
SELECTIVITY_BUDGET = 1 << 20


@dataclass(frozen=True)
class Variable:
    """A model random variable (or a latent variable added by augmentation).

    Discrete variables carry a cardinality; state values are 0..cardinality-1.
    Latent variables of single-child sums degenerate to cardinality 1.
    """

    id: int
    name: str
    kind: str
    cardinality: int | None = None

    def __post_init__(self):
        if self.kind not in (DISCRETE, CONTINUOUS):
            raise InvalidLeaf(f"unknown variable kind {self.kind!r}")
        if self.kind == DISCRETE and (self.cardinality is None or self.cardinality < 1):
            raise InvalidLeaf(f"discrete variable {self.name!r} needs cardinality >= 1")
        if self.kind == CONTINUOUS and self.cardinality is not None:
            raise InvalidLeaf(f"continuous variable {self.name!r} cannot have a cardinality")


@dataclass(frozen=True)
class SumNode:
    id: int
    children: tuple[int, ...]
    weights: tuple[float, ...]


@dataclass(frozen=True)
class ProductNode:
    id: int
    children: tuple[int, ...]


@dataclass(frozen=True)
class IndicatorLeaf:
    id: int
    var: int
    state: int


@dataclass(frozen=True)
class GaussianLeaf:
    id: int
    var: int
    mean: float
    variance: float


Node = Union[SumNode, ProductNode, IndicatorLeaf, GaussianLeaf]


# --------------------------------------------------------------------------
# Evidence
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Complete:
    """The variable is observed at a single value."""

    value: float


@dataclass(frozen=True)
class DiscreteSubset:
    """The variable takes one of the given states (marginalized or maximized
    over the subset, depending on the query)."""

    states: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "states", frozenset(self.states))
        if not self.states:
            raise EvidenceTypeMismatch("discrete subset evidence must be non-empty")


@dataclass(frozen=True)
class Interval:
    """Closed real interval; +-inf endpoints allowed."""

    lo: float
    hi: float

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi) or self.lo > self.hi:
            raise EvidenceTypeMismatch(f"bad interval [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class Marginalized:
    """The variable is unobserved (full range)."""


MARGINALIZED = Marginalized()

EvidenceItem = Union[Complete, DiscreteSubset, Interval, Marginalized]


@dataclass(frozen=True)
class Evidence:
    """Per-variable evidence for every variable of a graph, by variable id."""

    items: tuple[EvidenceItem, ...]

    @classmethod
    def marginalized(cls, n_vars: int) -> "Evidence":
        return cls(items=(MARGINALIZED,) * n_vars)

    @classmethod
    def complete(cls, values: Sequence[float]) -> "Evidence":
        return cls(items=tuple(Complete(v) for v in values))

    @classmethod
    def from_mapping(cls, n_vars: int, mapping: Mapping[int, EvidenceItem]) -> "Evidence":
        items = [MARGINALIZED] * n_vars
        for var, item in mapping.items():
            if not 0 <= var < n_vars:
                raise UnknownReference(f"evidence references unknown variable {var}")
            items[var] = item
        return cls(items=tuple(items))

    def replace(self, var: int, item: EvidenceItem) -> "Evidence":
        items = list(self.items)
        items[var] = item
        return Evidence(items=tuple(items))

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, var: int) -> EvidenceItem:
        return self.items[var]


def check_evidence(spn: "SpnGraph", e: Evidence) -> None:
    """Raise EvidenceTypeMismatch unless ``e`` is well-formed for ``spn``."""
    if len(e) != len(spn.variables):
        raise EvidenceTypeMismatch(
            f"evidence covers {len(e)} variables, graph has {len(spn.variables)}"
        )
    for v, item in zip(spn.variables, e.items):
        if isinstance(item, Marginalized):
            continue
        if v.kind == DISCRETE:
            if isinstance(item, Interval):
                raise EvidenceTypeMismatch(f"interval evidence on discrete variable {v.name}")
            if isinstance(item, Complete):
                value = item.value
                if value != int(value) or not 0 <= int(value) < v.cardinality:
                    raise EvidenceTypeMismatch(
                        f"value {value!r} out of range for {v.name} (cardinality {v.cardinality})"
                    )
            if isinstance(item, DiscreteSubset):
                if any(not 0 <= s < v.cardinality for s in item.states):
                    raise EvidenceTypeMismatch(f"subset {set(item.states)} out of range for {v.name}")
        else:
            if isinstance(item, DiscreteSubset):
                raise EvidenceTypeMismatch(f"subset evidence on continuous variable {v.name}")
            if isinstance(item, Complete) and not math.isfinite(item.value):
                raise EvidenceTypeMismatch(f"non-finite value for {v.name}")


# --------------------------------------------------------------------------
# Graph
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SpnGraph:
    """Immutable SPN. ``nodes[i].id == i`` and children precede parents.

    ``normalized`` is False only for configured graphs, whose surviving sum
    edges keep their original weights and need not form distributions.
    """

    variables: tuple[Variable, ...]
    nodes: tuple[Node, ...]
    root: int
    scopes: tuple[frozenset[int], ...]
    normalized: bool = True

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    def scope(self, node_id: int) -> frozenset[int]:
        if not 0 <= node_id < len(self.nodes):
            raise UnknownNode(f"no node with id {node_id}")
        return self.scopes[node_id]

    @cached_property
    def sums(self) -> tuple[int, ...]:
        return tuple(n.id for n in self.nodes if isinstance(n, SumNode))

    @cached_property
    def leaves(self) -> tuple[int, ...]:
        return tuple(n.id for n in self.nodes if isinstance(n, (IndicatorLeaf, GaussianLeaf)))

    @cached_property
    def log_weights(self) -> dict[int, np.ndarray]:
        out = {}
        with np.errstate(divide="ignore"):
            for s in self.sums:
                w = np.asarray(self.nodes[s].weights, dtype=np.float64)
                lw = np.log(w)
                lw.setflags(write=False)
                out[s] = lw
        return out

    @cached_property
    def sum_descendants(self) -> tuple[frozenset[int], ...]:
        """Per node, the set of sum-node ids in its sub-graph (itself included)."""
        desc: list[frozenset[int]] = []
        for node in self.nodes:
            own = frozenset((node.id,)) if isinstance(node, SumNode) else frozenset()
            if isinstance(node, (SumNode, ProductNode)):
                own = own.union(*(desc[c] for c in node.children))
            desc.append(own)
        return tuple(desc)

    @cached_property
    def parents(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in self.nodes]
        for node in self.nodes:
            if isinstance(node, (SumNode, ProductNode)):
                for c in node.children:
                    out[c].append(node.id)
        return tuple(tuple(p) for p in out)


def _normalize_exact(weights: Sequence[float]) -> tuple[float, ...]:
    """Scale weights to sum to exactly 1.0 in float arithmetic.

    Idempotent: already-normalized vectors are returned bit-identical, which
    makes model files round-trip exactly.
    """
    w = [float(x) for x in weights]
    total = math.fsum(w)
    if total <= 0.0 or not math.isfinite(total):
        raise NonNormalizedWeights(f"weights sum to {total}")
    if total != 1.0:
        w = [x / total for x in w]
    for _ in range(10):
        residual = 1.0 - math.fsum(w)
        if residual == 0.0:
            return tuple(w)
        w[max(range(len(w)), key=lambda j: w[j])] += residual
    raise NonNormalizedWeights("weight normalization did not converge")


def build_spn(
    variables: Sequence[Variable],
    nodes: Sequence[Node],
    root: int,
    *,
    weight_tolerance: float | None = WEIGHT_TOLERANCE,
    normalized: bool = True,
) -> SpnGraph:
    """Assemble an SpnGraph from declarations with arbitrary node ids.

    Nodes are topologically sorted and renumbered densely (children before
    parents); scopes follow the usual recursion (leaf scope is its variable,
    internal scope is the union over children). Rejects cycles, references
    to undeclared ids, unreachable nodes, empty child lists, negative or
    (beyond tolerance) unnormalized weights, and non-positive variances.
    Weights are renormalized to an exact distribution on acceptance.
    """
    var_ids = [v.id for v in variables]
    if var_ids != list(range(len(variables))):
        raise UnknownReference("variable ids must be dense 0..N-1 in order")
    by_id: dict[int, Node] = {}
    for node in nodes:
        if node.id in by_id:
            raise UnknownReference(f"duplicate node id {node.id}")
        by_id[node.id] = node

    def declared(nid: int) -> Node:
        try:
            return by_id[nid]
        except KeyError:
            raise UnknownReference(f"reference to undeclared node {nid}") from None

    declared(root)

    # Iterative DFS from the root: detects cycles, orders children first.
    order: list[int] = []
    state: dict[int, int] = {}  # 1 = on stack, 2 = done
    stack: list[tuple[int, int]] = [(root, 0)]
    while stack:
        nid, child_pos = stack.pop()
        node = declared(nid)
        if child_pos == 0:
            if state.get(nid) == 1:
                raise CycleDetected(f"cycle through node {nid}")
            if state.get(nid) == 2:
                continue
            state[nid] = 1
        children = node.children if isinstance(node, (SumNode, ProductNode)) else ()
        if child_pos < len(children):
            stack.append((nid, child_pos + 1))
            child = children[child_pos]
            if state.get(child) == 1:
                raise CycleDetected(f"cycle through node {child}")
            if state.get(child) != 2:
                stack.append((child, 0))
        else:
            state[nid] = 2
            order.append(nid)

    if len(order) != len(by_id):
        unreachable = sorted(set(by_id) - set(order))
        raise UnknownReference(f"nodes unreachable from root: {unreachable}")

    renumber = {old: new for new, old in enumerate(order)}
    new_nodes: list[Node] = []
    scopes: list[frozenset[int]] = []
    for old in order:
        node = by_id[old]
        nid = renumber[old]
        if isinstance(node, (SumNode, ProductNode)):
            if not node.children:
                raise EmptyChildren(f"node {old} has no children")
            children = tuple(renumber[c] for c in node.children)
            scope = frozenset().union(*(scopes[c] for c in children))
            if isinstance(node, SumNode):
                if len(node.weights) != len(node.children):
                    raise SpnError(f"sum {old}: {len(node.weights)} weights for {len(node.children)} children")
                if any(w < 0 for w in node.weights):
                    raise NegativeWeight(f"sum {old} has a negative weight")
                weights = tuple(float(w) for w in node.weights)
                if normalized:
                    if weight_tolerance is not None:
                        total = math.fsum(weights)
                        if abs(total - 1.0) > weight_tolerance:
                            raise NonNormalizedWeights(f"sum {old}: weights sum to {total!r}")
                    weights = _normalize_exact(weights)
                new_nodes.append(SumNode(id=nid, children=children, weights=weights))
            else:
                new_nodes.append(ProductNode(id=nid, children=children))
        elif isinstance(node, IndicatorLeaf):
            if not 0 <= node.var < len(variables):
                raise UnknownReference(f"leaf {old} references unknown variable {node.var}")
            var = variables[node.var]
            if var.kind != DISCRETE:
                raise InvalidLeaf(f"indicator leaf {old} on continuous variable {var.name}")
            if not 0 <= node.state < var.cardinality:
                raise InvalidLeaf(f"leaf {old}: state {node.state} out of range for {var.name}")
            scope = frozenset((node.var,))
            new_nodes.append(IndicatorLeaf(id=nid, var=node.var, state=node.state))
        elif isinstance(node, GaussianLeaf):
            if not 0 <= node.var < len(variables):
                raise UnknownReference(f"leaf {old} references unknown variable {node.var}")
            if variables[node.var].kind != CONTINUOUS:
                raise InvalidLeaf(f"gaussian leaf {old} on discrete variable {variables[node.var].name}")
            if not node.variance > 0 or not math.isfinite(node.variance):
                raise NonPositiveVariance(f"leaf {old}: variance {node.variance}")
            scope = frozenset((node.var,))
            new_nodes.append(GaussianLeaf(id=nid, var=node.var, mean=float(node.mean), variance=float(node.variance)))
        else:
            raise SpnError(f"unknown node type {type(node).__name__}")
        scopes.append(scope)

    return SpnGraph(
        variables=tuple(variables),
        nodes=tuple(new_nodes),
        root=renumber[root],
        scopes=tuple(scopes),
        normalized=normalized,
    )


class GraphBuilder:
    """Convenience builder: allocates dense ids and assembles via build_spn."""

    def __init__(self):
        self.variables: list[Variable] = []
        self.nodes: list[Node] = []

    def discrete(self, name: str, cardinality: int) -> int:
        v = Variable(id=len(self.variables), name=name, kind=DISCRETE, cardinality=cardinality)
        self.variables.append(v)
        return v.id

    def continuous(self, name: str) -> int:
        v = Variable(id=len(self.variables), name=name, kind=CONTINUOUS)
        self.variables.append(v)
        return v.id

    def indicator(self, var: int, state: int) -> int:
        nid = len(self.nodes)
        self.nodes.append(IndicatorLeaf(id=nid, var=var, state=state))
        return nid

    def gaussian(self, var: int, mean: float, variance: float) -> int:
        nid = len(self.nodes)
        self.nodes.append(GaussianLeaf(id=nid, var=var, mean=mean, variance=variance))
        return nid

    def sum(self, children: Sequence[int], weights: Sequence[float]) -> int:
        nid = len(self.nodes)
        self.nodes.append(SumNode(id=nid, children=tuple(children), weights=tuple(weights)))
        return nid

    def product(self, children: Sequence[int]) -> int:
        nid = len(self.nodes)
        self.nodes.append(ProductNode(id=nid, children=tuple(children)))
        return nid

    def build(self, root: int, **kwargs) -> SpnGraph:
        return build_spn(self.variables, self.nodes, root, **kwargs)


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------


def leaf_log_matrix(spn: SpnGraph, records: Sequence[Evidence]) -> np.ndarray:
    """(n_nodes, L) matrix of leaf log values under each record.

    Rows of internal nodes are left at 0 and ignored by the upward pass.
    """
    for e in records:
        check_evidence(spn, e)
    out = np.zeros((len(spn.nodes), len(records)), dtype=np.float64)
    for nid in spn.leaves:
        node = spn.nodes[nid]
        row = out[nid]
        if isinstance(node, IndicatorLeaf):
            for j, e in enumerate(records):
                item = e[node.var]
                if isinstance(item, Marginalized):
                    row[j] = 0.0
                elif isinstance(item, Complete):
                    row[j] = 0.0 if int(item.value) == node.state else -np.inf
                else:  # DiscreteSubset
                    row[j] = 0.0 if node.state in item.states else -np.inf
        else:
            for j, e in enumerate(records):
                item = e[node.var]
                if isinstance(item, Marginalized):
                    row[j] = 0.0
                elif isinstance(item, Complete):
                    row[j] = _normal.log_pdf(item.value, node.mean, node.variance)
                else:  # Interval
                    row[j] = _normal.log_interval_mass(node.mean, node.variance, item.lo, item.hi)
    return out


def upward_log(spn: SpnGraph, leaf_vals: np.ndarray) -> np.ndarray:
    """Forward pass: per-node log values given leaf log values (n_nodes, L)."""
    vals = leaf_vals.copy()
    log_w = spn.log_weights
    for node in spn.nodes:
        if isinstance(node, SumNode):
            idx = np.asarray(node.children)
            vals[node.id] = logsumexp(vals[idx, :] + log_w[node.id][:, None], axis=0)
        elif isinstance(node, ProductNode):
            idx = np.asarray(node.children)
            vals[node.id] = np.sum(vals[idx, :], axis=0)
    return vals


def log_evaluate_many(spn: SpnGraph, records: Sequence[Evidence]) -> np.ndarray:
    return upward_log(spn, leaf_log_matrix(spn, records))[spn.root]


def log_evaluate(spn: SpnGraph, e: Evidence) -> float:
    """log S(e); -inf when the evidence has zero probability."""
    return float(log_evaluate_many(spn, [e])[0])


# --------------------------------------------------------------------------
# Structural validation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationReport:
    complete: bool
    incomplete_sums: tuple[int, ...]
    decomposable: bool
    nondecomposable_products: tuple[int, ...]
    selective: str  # "yes" | "no" | "unknown"
    selectivity_witness: tuple[int, dict] | None = None  # (sum id, assignment)

    @property
    def ok(self) -> bool:
        return self.complete and self.decomposable


def validate(spn: SpnGraph, selectivity_budget: int = SELECTIVITY_BUDGET) -> ValidationReport:
    """Check completeness and decomposability per node, plus selectivity.

    Selectivity is a property over all inputs, so it is decided by exhaustive
    enumeration of the joint discrete state space. That is only attempted
    when every leaf is an indicator and the state space has at most
    ``selectivity_budget`` entries; otherwise it is reported as "unknown".
    The enumeration treats all sum-weights as strictly positive, since the
    property must hold for every weight choice.
    """
    incomplete = []
    nondecomp = []
    for node in spn.nodes:
        if isinstance(node, SumNode):
            first = spn.scopes[node.children[0]]
            if any(spn.scopes[c] != first for c in node.children[1:]):
                incomplete.append(node.id)
        elif isinstance(node, ProductNode):
            sizes = sum(len(spn.scopes[c]) for c in node.children)
            if sizes != len(spn.scopes[node.id]):
                nondecomp.append(node.id)

    selective = "unknown"
    witness = None
    all_indicator = all(isinstance(spn.nodes[i], IndicatorLeaf) for i in spn.leaves)
    if all_indicator:
        n_states = 1
        for v in spn.variables:
            n_states *= v.cardinality
            if n_states > selectivity_budget:
                break
        if n_states <= selectivity_budget:
            selective, witness = _selectivity_by_enumeration(spn, n_states)
    return ValidationReport(
        complete=not incomplete,
        incomplete_sums=tuple(incomplete),
        decomposable=not nondecomp,
        nondecomposable_products=tuple(nondecomp),
        selective=selective,
        selectivity_witness=witness,
    )


def _joint_strides(variables: Sequence[Variable]) -> tuple[list[int], int]:
    """C-order strides so that state of var v in joint index i is
    (i // stride[v]) % cardinality[v]."""
    strides = [0] * len(variables)
    acc = 1
    for v in reversed(variables):
        strides[v.id] = acc
        acc *= v.cardinality
    return strides, acc


def _selectivity_by_enumeration(spn: SpnGraph, n_states: int):
    strides, total = _joint_strides(spn.variables)
    assert total == n_states
    idx = np.arange(n_states, dtype=np.int64)
    refcount = [len(p) for p in spn.parents]
    support: dict[int, np.ndarray] = {}

    def release(children: Iterable[int]):
        for c in children:
            refcount[c] -= 1
            if refcount[c] == 0:
                del support[c]

    for node in spn.nodes:
        if isinstance(node, IndicatorLeaf):
            card = spn.variables[node.var].cardinality
            support[node.id] = ((idx // strides[node.var]) % card) == node.state
        elif isinstance(node, SumNode):
            rows = np.stack([support[c] for c in node.children])
            counts = rows.sum(axis=0)
            bad = counts >= 2
            if bad.any():
                state_idx = int(np.argmax(bad))
                assignment = {
                    v.id: int((state_idx // strides[v.id]) % v.cardinality) for v in spn.variables
                }
                return "no", (node.id, assignment)
            support[node.id] = counts.astype(bool)
            release(node.children)
        else:  # ProductNode
            acc = support[node.children[0]].copy()
            for c in node.children[1:]:
                acc &= support[c]
            support[node.id] = acc
            release(node.children)
    return "yes", None
