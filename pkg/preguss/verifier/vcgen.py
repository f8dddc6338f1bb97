import logging
from typing import Dict, List, Mapping, Optional, Sequence

from preguss.absint.guards import instrument
from preguss.absint.models import RteAssertion
from preguss.callgraph.models import VUnit
from preguss.errors import UnknownAssertion
from preguss.frontend.models import TypedProgram, WhileStmt, assigned_names, call_sites
from preguss.specs.models import TRUE, BoolConst, Clause, ClauseKind, ContractEnv, Pred
from preguss.specs.utils import conj, fold_constants
from preguss.verifier.models import ObligationKind, VerificationCondition
from preguss.verifier.wp import WPContext, assert_id, ensures_id, invariant_id

logger = logging.getLogger("preguss")


def obligation_vc(
    program: TypedProgram,
    contracts: ContractEnv,
    function: str,
    obligation_id: str,
    kind: Optional[ObligationKind] = None,
    asserts: Optional[Mapping[int, Sequence[Pred]]] = None,
    guards: Optional[Sequence[RteAssertion]] = None,
    clause: Optional[Clause] = None,
) -> VerificationCondition:
    """VC of one obligation in function: its requires as hypothesis, the obligation active, the rest assumed."""
    func = program.function(function)
    contract = contracts.contract(function)
    context = WPContext(program, contracts, active=obligation_id, guards=guards, asserts=asserts)
    goal = context.wp_function(func, contract.ensures)
    obligation = context.obligations.get(obligation_id)
    if obligation is None:
        raise UnknownAssertion(f"no obligation '{obligation_id}' in {function}")

    return VerificationCondition(
        id=obligation_id,
        hypothesis=fold_constants(conj(contract.requires), program.constants),
        goal=fold_constants(goal, program.constants),
        origin=obligation.node_id,
        description=obligation.description,
        kind=kind or obligation.kind,
        function=function,
        width=program.width,
        clause=clause or obligation.clause,
        symbols=tuple(context.symbols.items()),
        loops_without_invariant=tuple(context.missing_invariants),
        call_results=tuple(context.call_results.items()),
    )


def _loop_assigns_vc(program: TypedProgram, clause: Clause) -> VerificationCondition:
    loop = program.node(clause.anchor)
    modified = assigned_names(loop.body)
    missing = [name for name in modified if name not in clause.variables]
    description = f"loop assigns of loop {clause.anchor}"
    if missing:
        description += f" misses {', '.join(missing)}"
    return VerificationCondition(
        id=f"loop_assigns@{clause.anchor}",
        hypothesis=TRUE,
        goal=BoolConst(not missing),
        origin=clause.anchor,
        description=description,
        kind=ObligationKind.LOOP_ASSIGNS,
        function=program.host_of(clause.anchor),
        width=program.width,
        clause=clause,
    )


def gen_vcs(v: VUnit, candidate: Sequence[Clause], program: TypedProgram) -> List[VerificationCondition]:
    """
    VCs of a unit under candidate clauses: the target, every candidate loop invariant
    (established and preserved), ensures and assert, and the call-site preconditions
    of the sliced callees. Host requires are hypotheses, never obligations here.
    """
    anchors = {func.node_id: func.name for func in program.functions}
    contracts = v.contracts.with_clauses([c for c in candidate if c.kind != ClauseKind.ASSERT], anchors)
    asserts: Dict[int, List[Pred]] = {}
    for clause in candidate:
        if clause.kind == ClauseKind.ASSERT and clause.body not in asserts.get(clause.anchor, []):
            asserts.setdefault(clause.anchor, []).append(clause.body)
    guards = instrument(program)

    def vc(function, obligation_id, kind=None, clause=None):
        return obligation_vc(program, contracts, function, obligation_id, kind, asserts, guards, clause)

    vcs = [vc(v.host, v.target.id, ObligationKind.TARGET)]
    for clause in candidate:
        if clause.kind == ClauseKind.LOOP_INVARIANT:
            function = program.host_of(clause.anchor)
            index = contracts.loop(clause.anchor).invariants.index(clause.body)
            for kind in (ObligationKind.INVARIANT_ESTABLISHED, ObligationKind.INVARIANT_PRESERVED):
                vcs.append(vc(function, invariant_id(kind, clause.anchor, index), clause=clause))
        elif clause.kind == ClauseKind.ENSURES:
            function = anchors[clause.anchor]
            index = contracts.contract(function).ensures.index(clause.body)
            vcs.append(vc(function, ensures_id(function, index), clause=clause))
        elif clause.kind == ClauseKind.ASSERT:
            index = asserts[clause.anchor].index(clause.body)
            vcs.append(vc(program.host_of(clause.anchor), assert_id(clause.anchor, index), clause=clause))
        elif clause.kind == ClauseKind.LOOP_ASSIGNS and isinstance(program.node(clause.anchor), WhileStmt):
            vcs.append(_loop_assigns_vc(program, clause))

    for call in call_sites(program.function(v.host)):
        callsite = f"callsite_precondition@{call.node_id}"
        if call.name in v.callees and contracts.contract(call.name).requires and callsite != v.target.id:
            vcs.append(vc(v.host, callsite))

    unique: Dict[str, VerificationCondition] = {}
    for condition in vcs:
        unique.setdefault(condition.id, condition)
    logger.debug(f"{v.target.id}: {len(unique)} verification conditions under {len(candidate)} candidate clauses")
    return list(unique.values())
