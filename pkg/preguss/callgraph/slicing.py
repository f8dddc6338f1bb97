"""
Two-layer program slices. A verification unit holds the host body and the bodies
of its direct callees; deeper functions only contribute their contracts.
"""

import logging
from typing import Iterable, List, Set

from preguss.absint.models import AssertionKind, RteAssertion
from preguss.callgraph.models import CallGraph, VUnit
from preguss.frontend.models import (
    AssignStmt, Block, DeclStmt, IfStmt, Node, ReturnStmt, TypedProgram, WhileStmt, call_sites, expr_names, walk,
)
from preguss.specs.models import ContractEnv
from preguss.specs.utils import free_vars

logger = logging.getLogger("preguss")


def restrict_contracts(contracts: ContractEnv, functions: Iterable[str], program: TypedProgram) -> ContractEnv:
    functions = set(functions)
    return ContractEnv(
        {name: contract for name, contract in contracts.contracts.items() if name in functions},
        {loop_id: loop for loop_id, loop in contracts.loops.items() if program.host_of(loop_id) in functions},
    )


def build_vunit(
    a: RteAssertion,
    program: TypedProgram,
    cg: CallGraph,
    contracts: ContractEnv,
    priority: int = 0,
    filter_dependencies: bool = True,
) -> VUnit:
    host = a.function
    reachable = [host] + [name for name in cg.functions if name in cg.transitive_callees(host)]
    unit = VUnit(
        target=a,
        host=host,
        slice=[host] + cg.callees(host),
        contracts=restrict_contracts(contracts, reachable, program),
        priority=priority,
    )
    if filter_dependencies:
        unit = filter_callees_by_dependency(unit, program)
    return unit


def _can_return(stmt: Node) -> bool:
    return any(isinstance(node, ReturnStmt) for node in walk(stmt))


def _control_conditions(node_id: int, program: TypedProgram) -> List[Node]:
    """Conditions deciding whether the node runs: enclosing branches and loops, and earlier statements that may return."""
    conditions = []
    child = program.node(node_id)
    for ancestor in program.ancestors(node_id):
        if isinstance(ancestor, (IfStmt, WhileStmt)):
            conditions.append(ancestor.cond)
        elif isinstance(ancestor, Block):
            position = [stmt.node_id for stmt in ancestor.stmts].index(child.node_id)
            for earlier in ancestor.stmts[:position]:
                if _can_return(earlier):
                    conditions.extend(node.cond for node in walk(earlier) if isinstance(node, (IfStmt, WhileStmt)))
        child = ancestor
    return conditions


def relevant_variables(target: RteAssertion, program: TypedProgram) -> Set[str]:
    """Flow-insensitive backward closure of the variables the target depends on."""
    host = program.function(target.function)
    if target.kind == AssertionKind.CALLSITE:
        relevant = set(expr_names(program.node(target.node_id)))
    else:
        relevant = set(free_vars(target.predicate))
    for cond in _control_conditions(target.node_id, program):
        relevant.update(expr_names(cond))

    definitions = [node for node in walk(host) if isinstance(node, (DeclStmt, AssignStmt))]
    changed = True
    while changed:
        changed = False
        for stmt in definitions:
            if stmt.name not in relevant:
                continue
            value = stmt.init if isinstance(stmt, DeclStmt) else stmt.value
            names = set(expr_names(value))
            for cond in _control_conditions(stmt.node_id, program):
                names.update(expr_names(cond))
            if not names <= relevant:
                relevant |= names
                changed = True
    return relevant


def filter_callees_by_dependency(v: VUnit, program: TypedProgram) -> VUnit:
    relevant = relevant_variables(v.target, program)
    guarding = {node.node_id for cond in _control_conditions(v.target.node_id, program) for node in walk(cond)}

    kept = set()
    for call in call_sites(program.function(v.host)):
        stmt = program.enclosing_statement(call.node_id)
        defines = isinstance(stmt, (DeclStmt, AssignStmt)) and stmt.name in relevant
        if defines or call.node_id == v.target.node_id or call.node_id in guarding:
            kept.add(call.name)

    retained = [name for name in v.callees if name in kept]
    dropped = [name for name in v.callees if name not in kept]
    if dropped:
        logger.debug(f"{v.target.id}: callees {', '.join(dropped)} do not reach the target, kept as contracts only")
    return VUnit(v.target, v.host, [v.host] + retained, v.contracts, v.priority, v.dropped + dropped)
