import json
from typing import List

from preguss.absint.models import RteAssertion
from preguss.callgraph.graph import post_order
from preguss.callgraph.models import CallGraph, VUnitQueue
from preguss.callgraph.slicing import build_vunit
from preguss.frontend.models import TypedProgram
from preguss.specs.models import ContractEnv


def enqueue(
    assertions: List[RteAssertion],
    cg: CallGraph,
    program: TypedProgram,
    contracts: ContractEnv = ContractEnv(),
    filter_dependencies: bool = True,
) -> VUnitQueue:
    """Units ordered by post-order of their host, then by source order inside the host."""
    rank = {name: position for position, name in enumerate(post_order(cg))}
    ordered = sorted(
        enumerate(assertions),
        key=lambda item: (rank[item[1].function], item[1].node_id, item[0]),
    )
    return VUnitQueue([
        build_vunit(assertion, program, cg, contracts, priority, filter_dependencies)
        for priority, (_, assertion) in enumerate(ordered)
    ])


def dump_queue(queue: VUnitQueue) -> str:
    return json.dumps(queue.to_dict(), indent=2)
