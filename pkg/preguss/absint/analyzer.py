"""
Interval analysis of a resolved MiniC program.

Every function without callers is analysed with full-width parameters; callees
are analysed inline at each call site. A guard assertion is Proven when every
abstract state reaching its operation entails it, otherwise it is an Alarm.
"""

import logging
from typing import Dict, List, Mapping, Optional

from preguss.absint.domain import (
    BOOL, BOTTOM, AbstractEnv, Interval, add, check_pred, compare, const, div, fit, full, join, mod, mul, neg,
    refine_compare, sub,
)
from preguss.absint.guards import instrument
from preguss.absint.models import AnalysisConfig, AnalysisResult, AssertionStatus, RteAssertion
from preguss.errors import AnalysisBudgetExceeded, MutualRecursion
from preguss.frontend.models import (
    ArithExpr, AssignStmt, Block, CallExpr, CallStmt, CompareExpr, DeclStmt, ExprStmt, FunctionDef, IfStmt,
    IntLiteral, IntWidth, LogicExpr, NegExpr, NotExpr, ReturnStmt, TypedProgram, VarExpr, WhileStmt, call_sites,
    children,
)
from preguss.specs.utils import NEGATED_COMPARISON

logger = logging.getLogger("preguss")

ARITHMETIC = {"+": add, "-": sub, "*": mul, "/": div, "%": mod}


def _truth(value: Interval) -> Optional[bool]:
    if value.is_bottom:
        return None
    if not value.contains(0):
        return True
    if value.is_const:
        return False
    return None


def eval_expr(env: AbstractEnv, expr, width: IntWidth, constants: Optional[Mapping[str, int]] = None) -> Interval:
    """Interval of a call-free expression. Results that may wrap are widened to the full width."""
    if env.is_bottom:
        return BOTTOM
    if isinstance(expr, IntLiteral):
        return const(expr.value)
    if isinstance(expr, VarExpr):
        if expr.name in env:
            return env.get(expr.name)
        scope = {"INT_MIN": width.min_value, "INT_MAX": width.max_value}
        scope.update(constants or {})
        return const(scope[expr.name])
    if isinstance(expr, NegExpr):
        return fit(neg(eval_expr(env, expr.operand, width, constants)), width)
    if isinstance(expr, ArithExpr):
        left = eval_expr(env, expr.left, width, constants)
        right = eval_expr(env, expr.right, width, constants)
        return fit(ARITHMETIC[expr.op](left, right), width)
    if isinstance(expr, CompareExpr):
        left = eval_expr(env, expr.left, width, constants)
        right = eval_expr(env, expr.right, width, constants)
        if left.is_bottom or right.is_bottom:
            return BOTTOM
        verdict = compare(expr.op, left, right)
        return BOOL if verdict is None else const(int(verdict))
    if isinstance(expr, NotExpr):
        value = eval_expr(env, expr.operand, width, constants)
        if value.is_bottom:
            return BOTTOM
        truth = _truth(value)
        return BOOL if truth is None else const(int(not truth))
    if isinstance(expr, LogicExpr):
        return _logic(env, expr, width, constants)
    raise TypeError(f"cannot evaluate {type(expr).__name__} without the analyzer")


def _logic(env, expr, width, constants) -> Interval:
    left = eval_expr(env, expr.left, width, constants)
    if left.is_bottom:
        return BOTTOM
    short = expr.op == "||"  # value the left operand short-circuits on
    left_truth = _truth(left)
    if left_truth is short:
        return const(int(short))
    right = eval_expr(env, expr.right, width, constants)
    if right.is_bottom:
        return BOTTOM if left_truth is not None else const(int(short))
    right_truth = _truth(right)
    if right_truth is short:
        return const(int(short))
    if left_truth is not None and right_truth is not None:
        return const(int(not short))
    return BOOL


class _Frame:
    def __init__(self):
        self.value = BOTTOM


class Analyzer:

    def __init__(self, program: TypedProgram, config: Optional[AnalysisConfig] = None):
        self.program = program
        self.width = program.width
        self.config = config or AnalysisConfig()
        self.assertions: List[RteAssertion] = instrument(program)
        self.guards: Dict[int, List[RteAssertion]] = {}
        for assertion in self.assertions:
            self.guards.setdefault(assertion.node_id, []).append(assertion)
        self.proven: Dict[str, bool] = {}
        self.envs: Dict[int, AbstractEnv] = {}
        self.returns: Dict[str, Interval] = {}
        self.entries: Dict[str, AbstractEnv] = {}
        self._stack: List[str] = []

    def roots(self) -> List[FunctionDef]:
        called = {call.name for func in self.program.functions for call in call_sites(func)}
        return [func for func in self.program.functions if func.name not in called]

    def run(self) -> AnalysisResult:
        for root in self.roots():
            self._function(root, [full(self.width)] * len(root.params), 0, True)

        for assertion in self.assertions:
            proven = self.proven.get(assertion.id, True)
            assertion.status = AssertionStatus.PROVEN if proven else AssertionStatus.ALARM

        alarms = sum(1 for a in self.assertions if a.status == AssertionStatus.ALARM)
        logger.info(f"Interval analysis: {len(self.assertions)} guard assertions, {alarms} alarms")
        return AnalysisResult(self.assertions, self.envs, self.returns, self.entries)

    # ---------- functions ----------
    def _function(self, func: FunctionDef, args: List[Interval], depth: int, recording: bool) -> Interval:
        if func.name in self._stack:
            cycle = self._stack[self._stack.index(func.name):]
            raise MutualRecursion(cycle)
        self._stack.append(func.name)

        env = AbstractEnv({param: fit(arg, self.width) for param, arg in zip(func.params, args)})
        if recording:
            self.entries[func.name] = self.entries.get(func.name, AbstractEnv.unreachable()).join(env)
        frame = _Frame()
        out = self._block(func.body, env, frame, depth, recording)
        if not out.is_bottom:
            # falling off the end returns 0 from an int function
            frame.value = join(frame.value, const(0))

        self._stack.pop()
        if recording:
            self.returns[func.name] = join(self.returns.get(func.name, BOTTOM), frame.value)
        return frame.value

    def _call(self, call: CallExpr, env: AbstractEnv, depth: int, recording: bool) -> Interval:
        if recording:
            for arg in call.args:
                self._check(arg, env)
        args = [eval_expr(env, arg, self.width, self.program.constants) for arg in call.args]
        if any(arg.is_bottom for arg in args):
            return BOTTOM
        if depth >= self.config.max_inline_depth:
            args = [full(self.width)] * len(args)
        value = self._function(self.program.function(call.name), args, depth + 1, recording)
        if value.is_bottom or self.config.propagate_returns:
            return value
        # callers only learn that the call returns, the value itself is left to callee postconditions
        return full(self.width)

    # ---------- statements ----------
    def _block(self, block: Block, env: AbstractEnv, frame: _Frame, depth: int, recording: bool) -> AbstractEnv:
        declared = []
        for stmt in block.stmts:
            env = self._stmt(stmt, env, frame, depth, recording)
            if isinstance(stmt, DeclStmt):
                declared.append(stmt.name)
        return env.drop(declared)

    def _stmt(self, stmt, env: AbstractEnv, frame: _Frame, depth: int, recording: bool) -> AbstractEnv:
        if recording:
            self.envs[stmt.node_id] = self.envs.get(stmt.node_id, AbstractEnv.unreachable()).join(env)
        if env.is_bottom:
            return env

        if isinstance(stmt, Block):
            return self._block(stmt, env, frame, depth, recording)
        if isinstance(stmt, DeclStmt):
            return env.set(stmt.name, self._value(stmt.init, env, depth, recording))
        if isinstance(stmt, AssignStmt):
            return env.set(stmt.name, self._value(stmt.value, env, depth, recording))
        if isinstance(stmt, IfStmt):
            if recording:
                self._check(stmt.cond, env)
            if eval_expr(env, stmt.cond, self.width, self.program.constants).is_bottom:
                return AbstractEnv.unreachable()
            then = self._block(stmt.then, self._assume(env, stmt.cond, True), frame, depth, recording)
            orelse = self._assume(env, stmt.cond, False)
            if stmt.orelse is not None:
                orelse = self._block(stmt.orelse, orelse, frame, depth, recording)
            return then.join(orelse)
        if isinstance(stmt, WhileStmt):
            return self._loop(stmt, env, frame, depth, recording)
        if isinstance(stmt, ReturnStmt):
            value = const(0) if stmt.value is None else self._value(stmt.value, env, depth, recording)
            frame.value = join(frame.value, value)
            return AbstractEnv.unreachable()
        if isinstance(stmt, CallStmt):
            value = self._call(stmt.call, env, depth, recording)
            return AbstractEnv.unreachable() if value.is_bottom else env
        if isinstance(stmt, ExprStmt):
            value = self._value(stmt.expr, env, depth, recording)
            return AbstractEnv.unreachable() if value.is_bottom else env
        raise TypeError(f"cannot analyse {stmt!r}")

    def _loop(self, stmt: WhileStmt, entry: AbstractEnv, frame: _Frame, depth: int, recording: bool) -> AbstractEnv:
        head = entry
        iteration = 0
        while True:
            iteration += 1
            if iteration > self.config.max_iterations:
                raise AnalysisBudgetExceeded(
                    f"loop {stmt.node_id} did not stabilize after {self.config.max_iterations} iterations",
                    stmt.location,
                )
            body = self._block(stmt.body, self._assume(head, stmt.cond, True), frame, depth, False)
            following = entry.join(body)
            if iteration > self.config.widening_threshold:
                following = head.widen(following, self.width)
            if following.leq(head):
                break
            head = following

        # one narrowing pass from the post-fixpoint
        body = self._block(stmt.body, self._assume(head, stmt.cond, True), frame, depth, False)
        head = head.narrow(entry.join(body), self.width)
        logger.debug(f"Loop {stmt.node_id} stabilized after {iteration} iterations: {head}")

        if recording:
            self.envs[stmt.node_id] = self.envs.get(stmt.node_id, AbstractEnv.unreachable()).join(head)
            self._check(stmt.cond, head)
            self._block(stmt.body, self._assume(head, stmt.cond, True), frame, depth, True)
        return self._assume(head, stmt.cond, False)

    # ---------- expressions ----------
    def _value(self, expr, env: AbstractEnv, depth: int, recording: bool) -> Interval:
        if isinstance(expr, CallExpr):
            return self._call(expr, env, depth, recording)
        if recording:
            self._check(expr, env)
        return eval_expr(env, expr, self.width, self.program.constants)

    def _check(self, expr, env: AbstractEnv):
        """Records whether env entails the guards of every operation in expr."""
        if env.is_bottom:
            return
        if isinstance(expr, LogicExpr):
            self._check(expr.left, env)
            self._check(expr.right, self._assume(env, expr.left, expr.op == "&&"))
            return
        for assertion in self.guards.get(expr.node_id, []):
            verdict = check_pred(env, assertion.predicate, self.program.constants)
            if verdict is not True:
                self.proven[assertion.id] = False
                logger.debug(f"Alarm {assertion.id} under {env}")
            else:
                self.proven.setdefault(assertion.id, True)
        for child in children(expr):
            self._check(child, env)

    def _assume(self, env: AbstractEnv, expr, truth: bool) -> AbstractEnv:
        """Narrows env to the states where expr evaluates to truth."""
        if env.is_bottom:
            return env
        if isinstance(expr, NotExpr):
            return self._assume(env, expr.operand, not truth)
        if isinstance(expr, LogicExpr):
            if (expr.op == "&&") == truth:
                return self._assume(self._assume(env, expr.left, truth), expr.right, truth)
            shortcut = self._assume(env, expr.left, truth)
            return shortcut.join(self._assume(self._assume(env, expr.left, not truth), expr.right, truth))
        if isinstance(expr, CompareExpr):
            op = expr.op if truth else NEGATED_COMPARISON[expr.op]
            return self._refine(env, op, expr.left, expr.right)
        return self._refine(env, "!=" if truth else "==", expr, IntLiteral(0))

    def _refine(self, env: AbstractEnv, op: str, left_expr, right_expr) -> AbstractEnv:
        left = eval_expr(env, left_expr, self.width, self.program.constants)
        right = eval_expr(env, right_expr, self.width, self.program.constants)
        left, right = refine_compare(op, left, right)
        if left.is_bottom or right.is_bottom:
            return AbstractEnv.unreachable()
        for expr, value in ((left_expr, left), (right_expr, right)):
            if isinstance(expr, VarExpr) and expr.name in env:
                env = env.set(expr.name, value)
        return env


def analyze(program: TypedProgram, width: Optional[IntWidth] = None, config: Optional[AnalysisConfig] = None) -> AnalysisResult:
    if width is not None and width != program.width:
        raise ValueError(f"program was resolved at width {program.width.bits}, not {width.bits}")
    return Analyzer(program, config).run()
