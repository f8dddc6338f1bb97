"""
Deterministic specification generator.

Host phase: requires clauses read off the weakest precondition of the target guard,
and interval loop invariants taken from the analysis. Callee phase: ensures clauses
from a symbolic run of each callee body, and return intervals from the analysis.
"""

import logging
from typing import Dict, List, Optional, Tuple

from preguss.absint.domain import Interval
from preguss.errors import TemplateExhausted
from preguss.frontend.models import (
    AssignStmt, Block, CallExpr, DeclStmt, ExprStmt, FunctionDef, IfStmt, IntWidth, ReturnStmt, WhileStmt,
    assigned_names, walk,
)
from preguss.specs.models import RESULT, TRUE, Clause, ClauseKind, Compare, IntConst, Var
from preguss.specs.render import render_clause
from preguss.specs.utils import (
    conj, disj, expr_to_pred, expr_to_term, free_vars, implies, negate, simplify, substitute,
)
from preguss.synthesis.models import GeneratorRequest, GeneratorResponse, Phase
from preguss.verifier.normalize import Decision, IntervalSet, decide_exact, one_point, solution_set, split
from preguss.verifier.vcgen import obligation_vc

logger = logging.getLogger("preguss")

MAX_PATHS = 8


def bound_pred(name, lo: Optional[int], hi: Optional[int], width: IntWidth):
    """lo <= name <= hi, leaving out bounds the width already implies."""
    parts = []
    if lo is not None and lo == hi:
        return Compare("==", name, IntConst(lo))
    if lo is not None and lo > width.min_value:
        parts.append(Compare("<=", IntConst(lo), name))
    if hi is not None and hi < width.max_value:
        parts.append(Compare("<=", name, IntConst(hi)))
    return conj(parts)


def _interval_set_pred(values: IntervalSet, name: str, width: IntWidth):
    return disj(bound_pred(Var(name), lo, hi, width) for lo, hi in values.ranges)


def tighten(pred, width: IntWidth):
    """Single-variable predicates become explicit ranges."""
    names = free_vars(pred)
    if len(names) == 1:
        name = next(iter(names))
        values = solution_set(pred, name, IntervalSet.span(width.min_value, width.max_value))
        if values is not None and not values.is_empty:
            return _interval_set_pred(values, name, width)
    return simplify(pred)


# ---------- symbolic runs of callee bodies ----------

def _step(stmt, env, pc):
    if isinstance(stmt, (DeclStmt, AssignStmt)):
        value = stmt.init if isinstance(stmt, DeclStmt) else stmt.value
        if isinstance(value, CallExpr):
            return None
        return [], [({**env, stmt.name: substitute(expr_to_term(value), env)}, pc)]
    if isinstance(stmt, ExprStmt):
        return [], [(env, pc)]
    if isinstance(stmt, ReturnStmt):
        if stmt.value is None or isinstance(stmt.value, CallExpr):
            return None
        return [(pc, substitute(expr_to_term(stmt.value), env))], []
    if isinstance(stmt, Block):
        return _paths(stmt.stmts, [(env, pc)])
    if isinstance(stmt, IfStmt):
        cond = substitute(expr_to_pred(stmt.cond), env)
        then = _paths(stmt.then.stmts, [(env, conj([pc, cond]))])
        orelse = ([], [(env, conj([pc, negate(cond)]))]) if stmt.orelse is None else \
            _paths(stmt.orelse.stmts, [(env, conj([pc, negate(cond)]))])
        if then is None or orelse is None:
            return None
        return then[0] + orelse[0], then[1] + orelse[1]
    # loops and call statements end the symbolic run
    return None


def _paths(stmts, states):
    returned = []
    for stmt in stmts:
        live = []
        for env, pc in states:
            outcome = _step(stmt, env, pc)
            if outcome is None:
                return None
            returned += outcome[0]
            live += outcome[1]
        states = live
        if len(returned) + len(states) > MAX_PATHS:
            return None
    return returned, states


def return_paths(func: FunctionDef) -> Optional[List[Tuple[object, object]]]:
    """(path condition, returned term) over the entry values of the parameters, None when out of reach."""
    env: Dict[str, object] = {param: Var(param) for param in func.params}
    outcome = _paths(func.body.stmts, [(env, TRUE)])
    if outcome is None:
        return None
    returned, fall_through = outcome
    return returned + [(pc, IntConst(0)) for _, pc in fall_through]


def postcondition(func: FunctionDef):
    paths = return_paths(func)
    if not paths:
        return None
    terms = {term for _, term in paths}
    if len(terms) == 1:
        return Compare("==", RESULT, paths[0][1])
    return simplify(conj(implies(pc, Compare("==", RESULT, term)) for pc, term in paths))


class OracleGenerator:
    name = "oracle"

    def __call__(self, request: GeneratorRequest) -> GeneratorResponse:
        if request.phase == Phase.HOST:
            clauses = self.host_clauses(request)
        else:
            clauses = self.callee_clauses(request)

        rejected = request.rejected()
        clauses = [clause for clause in clauses if clause not in rejected]
        if not clauses or request.proposed_before(clauses):
            raise TemplateExhausted(f"no new {request.phase.value} candidate for {request.unit.target.id}")
        raw = "\n".join(render_clause(clause) for clause in clauses)
        logger.debug(f"Oracle proposes {len(clauses)} {request.phase.value} clauses for {request.unit.target.id}")
        return GeneratorResponse(clauses, raw=raw)

    def loop_invariants(self, request: GeneratorRequest, func: FunctionDef) -> List[Clause]:
        analysis, width = request.analysis, request.program.width
        if analysis is None:
            return []
        clauses = []
        for loop in (node for node in walk(func) if isinstance(node, WhileStmt)):
            env = analysis.envs.get(loop.node_id)
            if env is None or env.is_bottom:
                continue
            parts = []
            for name in dict.fromkeys(assigned_names(loop.body)):
                if name in env:
                    interval: Interval = env.get(name)
                    parts.append(bound_pred(Var(name), interval.lo, interval.hi, width))
            body = conj(parts)
            if body != TRUE:
                clauses.append(Clause(ClauseKind.LOOP_INVARIANT, body, loop.node_id))
        return clauses

    def host_clauses(self, request: GeneratorRequest) -> List[Clause]:
        program, unit = request.program, request.unit
        host = program.function(unit.host)
        invariants = self.loop_invariants(request, host)
        anchors = {func.node_id: func.name for func in program.functions}
        contracts = request.contracts.with_clauses(invariants, anchors)

        vc = obligation_vc(program, contracts, unit.host, unit.target.id)
        requires = []
        for sequent in split(vc.goal):
            if decide_exact(one_point(sequent, program.width), program.width)[0] == Decision.VALID:
                continue
            if not set(sequent.free_vars()) <= set(host.params):
                continue
            clause = Clause(ClauseKind.REQUIRES, tighten(sequent.formula, program.width), host.node_id)
            if clause not in requires:
                requires.append(clause)
        return invariants + requires

    def callee_clauses(self, request: GeneratorRequest) -> List[Clause]:
        program, analysis = request.program, request.analysis
        clauses = []
        for name in request.callees:
            func = program.function(name)
            if func.returns != "int":
                continue
            post = postcondition(func)
            if post is not None:
                clauses.append(Clause(ClauseKind.ENSURES, post, func.node_id))
            if analysis is not None and name in analysis.returns:
                interval = analysis.returns[name]
                if not interval.is_bottom:
                    body = bound_pred(RESULT, interval.lo, interval.hi, program.width)
                    if body != TRUE:
                        clauses.append(Clause(ClauseKind.ENSURES, body, func.node_id))
            clauses.extend(self.loop_invariants(request, func))
        return clauses
