from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Dict, Iterator, List, NamedTuple, Set

import networkx as nx

from preguss.absint.models import RteAssertion
from preguss.specs.models import ContractEnv


class CallEdge(NamedTuple):
    caller: str
    callee: str
    node_id: int


@dataclass
class CallGraph:
    """Functions in source order and one edge per syntactic call site."""

    functions: List[str]
    edges: List[CallEdge] = field(default_factory=list)

    @cached_property
    def graph(self) -> nx.MultiDiGraph:
        graph = nx.MultiDiGraph()
        graph.add_nodes_from(self.functions)
        for edge in self.edges:
            graph.add_edge(edge.caller, edge.callee, key=edge.node_id)
        return graph

    def callees(self, function: str) -> List[str]:
        """Direct callees in call-site order, without repeats."""
        names: List[str] = []
        for edge in self.edges:
            if edge.caller == function and edge.callee not in names:
                names.append(edge.callee)
        return names

    def callers(self, function: str) -> List[str]:
        names: List[str] = []
        for edge in self.edges:
            if edge.callee == function and edge.caller not in names:
                names.append(edge.caller)
        return names

    def call_sites(self, caller: str, callee: str) -> List[int]:
        return [edge.node_id for edge in self.edges if edge.caller == caller and edge.callee == callee]

    def transitive_callees(self, function: str) -> Set[str]:
        return nx.descendants(self.graph, function)

    def is_root(self, function: str) -> bool:
        return not self.callers(function)


@dataclass
class VUnit:
    """
    One target assertion with the two-layer slice it is verified in: the host
    body plus the bodies of the direct callees it depends on. Every other
    function reachable from the host is only seen through its contract.
    """

    target: RteAssertion
    host: str
    slice: List[str]
    contracts: ContractEnv = field(default_factory=ContractEnv)
    priority: int = 0
    dropped: List[str] = field(default_factory=list)

    @property
    def callees(self) -> List[str]:
        return self.slice[1:]

    def with_contracts(self, contracts: ContractEnv) -> "VUnit":
        return replace(self, contracts=contracts)

    def to_dict(self) -> Dict:
        return {
            "priority": self.priority,
            "assertion": self.target.id,
            "kind": self.target.kind.value,
            "host": self.host,
            "slice": list(self.slice),
            "dropped": list(self.dropped),
        }


@dataclass
class VUnitQueue:
    units: List[VUnit] = field(default_factory=list)

    def __iter__(self) -> Iterator[VUnit]:
        return iter(self.units)

    def __len__(self) -> int:
        return len(self.units)

    def __getitem__(self, index: int) -> VUnit:
        return self.units[index]

    def to_dict(self) -> Dict:
        return {"units": [unit.to_dict() for unit in self.units]}
