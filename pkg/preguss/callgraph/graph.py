import logging
from typing import List

import networkx as nx

from preguss.absint.models import AnalysisResult, AssertionKind, AssertionStatus, RteAssertion, assertion_id
from preguss.callgraph.models import CallEdge, CallGraph
from preguss.errors import MutualRecursion
from preguss.frontend.models import TypedProgram, call_sites
from preguss.specs.models import TRUE

logger = logging.getLogger("preguss")


def build_call_graph(program: TypedProgram) -> CallGraph:
    functions = [func.name for func in program.functions]
    edges = [
        CallEdge(func.name, call.name, call.node_id)
        for func in program.functions
        for call in call_sites(func)
    ]
    cg = CallGraph(functions, edges)

    try:
        cycle = nx.find_cycle(cg.graph)
    except nx.NetworkXNoCycle:
        return cg
    path = [edge[0] for edge in cycle]
    logger.error(f"Recursive call cycle {' -> '.join(path + path[:1])}, aborting")
    raise MutualRecursion(path)


def collect_assertions(analysis: AnalysisResult, cg: CallGraph, program: TypedProgram = None) -> List[RteAssertion]:
    """UB guard assertions plus one pending call-site precondition per call, hosted in the caller."""
    assertions = list(analysis.assertions)
    for edge in cg.edges:
        location = program.node(edge.node_id).location if program is not None else None
        assertions.append(RteAssertion(
            id=assertion_id(AssertionKind.CALLSITE, edge.node_id),
            kind=AssertionKind.CALLSITE,
            predicate=TRUE,
            node_id=edge.node_id,
            function=edge.caller,
            location=location,
            status=AssertionStatus.PENDING,
            callee=edge.callee,
        ))
    return assertions


def post_order(cg: CallGraph) -> List[str]:
    """Callees before their callers, ties broken by source order."""
    index = {name: position for position, name in enumerate(cg.functions)}
    return list(nx.lexicographical_topological_sort(cg.graph.reverse(copy=True), key=index.__getitem__))
