"""
Weakest preconditions over MiniC function bodies.

Guards, call-site preconditions, asserts, loop invariants and ensures clauses met
on the way are obligations. A context either asserts all of them or activates
exactly one, in which case every other obligation is assumed.
"""

from typing import Dict, List, Mapping, Optional, Sequence

from preguss.absint.guards import instrument
from preguss.absint.models import AssertionKind, RteAssertion, assertion_id
from preguss.errors import MissingLoopInvariant
from preguss.frontend.models import (
    AssignStmt, Block, CallExpr, CallStmt, DeclStmt, ExprStmt, FunctionDef, IfStmt, LogicExpr, Node, ReturnStmt,
    TypedProgram, VarExpr, WhileStmt, assigned_names, children, walk,
)
from preguss.specs.models import RESULT, TRUE, Clause, ClauseKind, ContractEnv, IntConst, Old, Pred, Var
from preguss.specs.utils import conj, expr_to_pred, expr_to_term, implies, mentions_result, negate, substitute
from preguss.verifier.models import Obligation, ObligationKind

ALL = None


def ensures_id(function: str, index: int) -> str:
    return f"ensures@{function}#{index}"


def invariant_id(kind: ObligationKind, loop_id: int, index: int) -> str:
    prefix = "invariant_established" if kind == ObligationKind.INVARIANT_ESTABLISHED else "invariant_preserved"
    return f"{prefix}@{loop_id}#{index}"


def assert_id(anchor: int, index: int) -> str:
    return f"assert@{anchor}#{index}"


class WPContext:

    def __init__(
        self,
        program: TypedProgram,
        contracts: ContractEnv,
        active: Optional[str] = ALL,
        guards: Optional[Sequence[RteAssertion]] = None,
        asserts: Optional[Mapping[int, Sequence[Pred]]] = None,
        require_invariants: bool = False,
    ):
        self.program = program
        self.contracts = contracts
        self.active = active
        self.guards: Dict[int, List[RteAssertion]] = {}
        for assertion in instrument(program) if guards is None else guards:
            self.guards.setdefault(assertion.node_id, []).append(assertion)
        self.asserts = dict(asserts or {})
        self.require_invariants = require_invariants

        self.function: Optional[FunctionDef] = None
        self.return_post: Pred = TRUE
        self.symbols: Dict[str, str] = {}
        self.call_results: Dict[str, str] = {}
        self.missing_invariants: List[int] = []
        self.obligations: Dict[str, Obligation] = {}
        self._taken = {n.name for n in walk(program.program) if isinstance(n, (VarExpr, DeclStmt, AssignStmt))}
        for func in program.functions:
            self._taken.update(func.params)
        self._taken.update(program.constants)

    # ---------- obligations and symbols ----------
    def obligation(self, obligation: Obligation, pred: Pred, post: Pred) -> Pred:
        self.obligations.setdefault(obligation.id, obligation)
        if self.active is ALL or obligation.id == self.active:
            return conj([pred, post])
        return implies(pred, post)

    def fresh(self, base: str, description: str) -> str:
        name = base
        while name in self._taken:
            name += "_"
        self._taken.add(name)
        self.symbols[name] = description
        return name

    # ---------- functions ----------
    def wp_function(self, func: FunctionDef, ensures: Sequence[Pred] = ()) -> Pred:
        """WP of the body against ensures; formals in ensures denote their entry values."""
        self.function = func
        entry = {param: Old(param) for param in func.params}
        post = TRUE
        for index in reversed(range(len(ensures))):
            clause = Clause(ClauseKind.ENSURES, ensures[index], func.node_id)
            obligation = Obligation(ensures_id(func.name, index), ObligationKind.ENSURES, func.name, func.node_id,
                                    f"postcondition of {func.name}", clause)
            post = self.obligation(obligation, substitute(ensures[index], entry), post)
        self.return_post = post
        fall_through = substitute(post, {RESULT: IntConst(0)}) if func.returns == "int" else post
        body = self.wp_block(func.body, fall_through)
        return substitute(body, {Old(param): Var(param) for param in func.params})

    # ---------- statements ----------
    def wp_block(self, block: Block, post: Pred) -> Pred:
        for stmt in reversed(block.stmts):
            post = self.wp_stmt(stmt, post)
        return post

    def wp_stmt(self, stmt: Node, post: Pred) -> Pred:
        pre = self._stmt(stmt, post)
        asserts = self.asserts.get(stmt.node_id, ())
        for index in reversed(range(len(asserts))):
            clause = Clause(ClauseKind.ASSERT, asserts[index], stmt.node_id)
            obligation = Obligation(assert_id(stmt.node_id, index), ObligationKind.ASSERT, self._host(),
                                    stmt.node_id, f"assertion before statement {stmt.node_id}", clause)
            pre = self.obligation(obligation, asserts[index], pre)
        return pre

    def _stmt(self, stmt: Node, post: Pred) -> Pred:
        if isinstance(stmt, Block):
            return self.wp_block(stmt, post)
        if isinstance(stmt, (DeclStmt, AssignStmt)):
            value = stmt.init if isinstance(stmt, DeclStmt) else stmt.value
            if isinstance(value, CallExpr):
                return self.wp_call(value, lambda result: substitute(post, {stmt.name: result}))
            return self.wp_expr(value, substitute(post, {stmt.name: expr_to_term(value)}))
        if isinstance(stmt, IfStmt):
            cond = expr_to_pred(stmt.cond)
            then = self.wp_block(stmt.then, post)
            orelse = post if stmt.orelse is None else self.wp_block(stmt.orelse, post)
            return self.wp_expr(stmt.cond, conj([implies(cond, then), implies(negate(cond), orelse)]))
        if isinstance(stmt, WhileStmt):
            return self.wp_loop(stmt, post)
        if isinstance(stmt, ReturnStmt):
            if stmt.value is None:
                return self.return_post
            if isinstance(stmt.value, CallExpr):
                return self.wp_call(stmt.value, lambda result: substitute(self.return_post, {RESULT: result}))
            return self.wp_expr(stmt.value, substitute(self.return_post, {RESULT: expr_to_term(stmt.value)}))
        if isinstance(stmt, CallStmt):
            return self.wp_call(stmt.call, lambda result: post)
        if isinstance(stmt, ExprStmt):
            return self.wp_expr(stmt.expr, post)
        raise TypeError(f"no weakest precondition for {type(stmt).__name__}")

    def wp_loop(self, loop: WhileStmt, post: Pred) -> Pred:
        annotation = self.contracts.loop(loop.node_id)
        invariants = list(annotation.invariants)
        if not invariants:
            if self.require_invariants:
                raise MissingLoopInvariant(loop.node_id, loop.location)
            self.missing_invariants.append(loop.node_id)

        def obligation(kind, index):
            clause = Clause(ClauseKind.LOOP_INVARIANT, invariants[index], loop.node_id)
            text = "established" if kind == ObligationKind.INVARIANT_ESTABLISHED else "preserved"
            return Obligation(invariant_id(kind, loop.node_id, index), kind, self._host(), loop.node_id,
                              f"loop invariant of loop {loop.node_id} {text}", clause)

        havoc = {
            name: Var(self.fresh(f"{name}_loop{loop.node_id}", f"{name} at the head of loop {loop.node_id}"))
            for name in assigned_names(loop.body)
        }

        end_of_body = TRUE
        for index in reversed(range(len(invariants))):
            end_of_body = self.obligation(
                obligation(ObligationKind.INVARIANT_PRESERVED, index), invariants[index], end_of_body)
        cond = expr_to_pred(loop.cond)
        body = self.wp_block(loop.body, end_of_body)
        head = self.wp_expr(loop.cond, conj([implies(cond, body), implies(negate(cond), post)]))
        pre = substitute(implies(conj(invariants), head), havoc)

        for index in reversed(range(len(invariants))):
            pre = self.obligation(obligation(ObligationKind.INVARIANT_ESTABLISHED, index), invariants[index], pre)
        return pre

    def wp_call(self, call: CallExpr, continuation) -> Pred:
        """Asserts the callee requires on the actual arguments, then assumes its ensures."""
        callee = self.program.function(call.name)
        contract = self.contracts.contract(call.name)
        args = [expr_to_term(arg) for arg in call.args]
        bindings = {}
        for param, arg in zip(callee.params, args):
            bindings[param] = arg
            bindings[Old(param)] = arg

        ensures = conj(contract.ensures)
        result = None
        if callee.returns == "int" or mentions_result(ensures):
            result = Var(self.fresh(f"{call.name}_result{call.node_id}", f"value returned by {call.name} at node {call.node_id}"))
            bindings[RESULT] = result
            self.call_results[result.name] = call.name
        post = implies(substitute(ensures, bindings), continuation(result))

        requires = substitute(conj(contract.requires), {k: v for k, v in bindings.items() if k != RESULT})
        obligation = Obligation(
            assertion_id(AssertionKind.CALLSITE, call.node_id), ObligationKind.CALLSITE, self._host(), call.node_id,
            f"call-site precondition of {call.name}",
        )
        post = self.obligation(obligation, requires, post)
        for arg in reversed(call.args):
            post = self.wp_expr(arg, post)
        return post

    # ---------- expressions ----------
    def wp_expr(self, expr: Node, post: Pred) -> Pred:
        """Guards of every operation in expr, in evaluation order, before post."""
        if isinstance(expr, LogicExpr):
            right = self.wp_expr(expr.right, post)
            if right != post:
                left = expr_to_pred(expr.left)
                if expr.op == "&&":
                    post = conj([implies(left, right), implies(negate(left), post)])
                else:
                    post = conj([implies(negate(left), right), implies(left, post)])
            return self.wp_expr(expr.left, post)

        for assertion in reversed(self.guards.get(expr.node_id, [])):
            obligation = Obligation(assertion.id, ObligationKind.GUARD, self._host(), expr.node_id,
                                    f"{assertion.label} guard")
            post = self.obligation(obligation, assertion.predicate, post)
        for child in reversed(children(expr)):
            post = self.wp_expr(child, post)
        return post

    def _host(self) -> str:
        return self.function.name if self.function is not None else ""


def wp(s: Node, post: Pred, contracts: ContractEnv, program: TypedProgram, returns: Pred = TRUE) -> Pred:
    """WP of a statement with every obligation on the way asserted. Loops need invariants."""
    context = WPContext(program, contracts, require_invariants=True)
    context.function = program.function(program.host_of(s.node_id)) if s.node_id in program.owners else None
    context.return_post = returns
    return context.wp_stmt(s, post)
