"""
Concrete reference semantics for MiniC.

Integers are unbounded; every runtime error (division by zero, signed overflow at
the program width) halts execution with an Event. With a ContractEnv the
interpreter also checks contracts at run time: callee requires at each call,
ensures on return and loop invariants at every loop head.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional

from preguss.frontend.models import (
    ArithExpr, AssignStmt, Block, CallExpr, CallStmt, CompareExpr, DeclStmt, ExprStmt, IfStmt, IntLiteral,
    LogicExpr, NegExpr, NotExpr, ReturnStmt, TypedProgram, VarExpr, WhileStmt,
)
from preguss.frontend.resolver import truncating_div, truncating_mod
from preguss.specs.utils import COMPARISON, compile_pred, conj, substitute
from preguss.specs.models import RESULT, IntConst, Old

logger = logging.getLogger("preguss")

OVERFLOW = "overflow"
DIVISION_BY_ZERO = "division_by_0"
CALLSITE = "callsite"
ENSURES = "ensures"
LOOP_INVARIANT = "loop_invariant"


@dataclass(frozen=True)
class Event:
    kind: str
    node_id: int
    function: str


class Halt(Exception):
    def __init__(self, event: Event):
        super().__init__(f"{event.kind} at node {event.node_id} in {event.function}")
        self.event = event


class OutOfFuel(Exception):
    pass


class _Return(Exception):
    def __init__(self, value: Optional[int]):
        self.value = value


@dataclass
class ExecutionResult:
    value: Optional[int]
    event: Optional[Event]
    steps: int


class Interpreter:

    def __init__(
        self,
        program: TypedProgram,
        contracts=None,
        fuel: int = 20000,
        havoc: Optional[Mapping[str, Callable[[List[int]], int]]] = None,
        on_guard: Optional[Callable[[int, str, bool, Dict[str, int]], None]] = None,
    ):
        self.program = program
        self.width = program.width
        self.contracts = contracts
        self.fuel = fuel
        self.havoc = dict(havoc or {})
        self.on_guard = on_guard
        self.steps = 0
        self._stack: List[str] = []
        self._compiled = {}

    def run(self, function: Optional[str] = None, args: Optional[List[int]] = None) -> ExecutionResult:
        function = function or self.program.entry
        self.steps = 0
        self._stack = []
        try:
            value = self._call_function(function, list(args or []))
        except Halt as halt:
            return ExecutionResult(None, halt.event, self.steps)
        return ExecutionResult(value, None, self.steps)

    # ---------- helpers ----------
    def _tick(self):
        self.steps += 1
        if self.steps > self.fuel:
            raise OutOfFuel(f"fuel of {self.fuel} steps exhausted")

    def _halt(self, kind: str, node_id: int):
        raise Halt(Event(kind, node_id, self._stack[-1]))

    def _guard(self, node_id: int, kind: str, holds: bool, env: Dict[str, int]):
        if self.on_guard is not None:
            self.on_guard(node_id, kind, holds, env)
        if not holds:
            self._halt(kind, node_id)

    def _holds(self, pred, env: Mapping[str, int]) -> bool:
        if pred not in self._compiled:
            self._compiled[pred] = compile_pred(pred)
        scope = dict(self.program.constants)
        scope.update(env)
        return self._compiled[pred](scope)

    # ---------- functions ----------
    def _call_function(self, name: str, args: List[int]) -> Optional[int]:
        func = self.program.function(name)
        self._stack.append(name)
        env = dict(zip(func.params, args))
        try:
            self._block(func.body, env)
            value = 0 if func.returns == "int" else None
        except _Return as ret:
            value = ret.value
        if self.contracts is not None:
            ensures = conj(self.contracts.contract(name).ensures)
            bindings = {param: IntConst(arg) for param, arg in zip(func.params, args)}
            bindings.update({Old(param): IntConst(arg) for param, arg in zip(func.params, args)})
            if value is not None:
                bindings[RESULT] = IntConst(value)
            if not self._holds(substitute(ensures, bindings), {}):
                self._halt(ENSURES, func.node_id)
        self._stack.pop()
        return value

    def _invoke(self, call: CallExpr, env: Dict[str, int]) -> Optional[int]:
        args = [self._eval(arg, env) for arg in call.args]
        if call.name in self.havoc:
            return self.havoc[call.name](args)
        if self.contracts is not None:
            callee = self.program.function(call.name)
            requires = conj(self.contracts.contract(call.name).requires)
            bindings = {param: IntConst(arg) for param, arg in zip(callee.params, args)}
            if not self._holds(substitute(requires, bindings), {}):
                self._halt(CALLSITE, call.node_id)
        return self._call_function(call.name, args)

    # ---------- statements ----------
    def _block(self, block: Block, env: Dict[str, int]):
        declared = []
        for stmt in block.stmts:
            self._stmt(stmt, env, declared)
        for name in declared:
            env.pop(name, None)

    def _stmt(self, stmt, env: Dict[str, int], declared: List[str]):
        self._tick()
        if isinstance(stmt, Block):
            self._block(stmt, env)
        elif isinstance(stmt, DeclStmt):
            env[stmt.name] = self._value(stmt.init, env)
            declared.append(stmt.name)
        elif isinstance(stmt, AssignStmt):
            env[stmt.name] = self._value(stmt.value, env)
        elif isinstance(stmt, IfStmt):
            if self._truth(stmt.cond, env):
                self._block(stmt.then, env)
            elif stmt.orelse is not None:
                self._block(stmt.orelse, env)
        elif isinstance(stmt, WhileStmt):
            while True:
                self._tick()
                self._check_invariants(stmt.node_id, env)
                if not self._truth(stmt.cond, env):
                    break
                self._block(stmt.body, env)
        elif isinstance(stmt, ReturnStmt):
            raise _Return(None if stmt.value is None else self._value(stmt.value, env))
        elif isinstance(stmt, CallStmt):
            self._invoke(stmt.call, env)
        elif isinstance(stmt, ExprStmt):
            self._eval(stmt.expr, env)

    def _check_invariants(self, loop_id: int, env: Dict[str, int]):
        if self.contracts is None:
            return
        invariant = conj(self.contracts.loop(loop_id).invariants)
        if not self._holds(invariant, env):
            self._halt(LOOP_INVARIANT, loop_id)

    # ---------- expressions ----------
    def _value(self, expr, env: Dict[str, int]) -> int:
        if isinstance(expr, CallExpr):
            return self._invoke(expr, env)
        return self._eval(expr, env)

    def _truth(self, expr, env: Dict[str, int]) -> bool:
        if isinstance(expr, (CompareExpr, LogicExpr, NotExpr)):
            return bool(self._eval(expr, env))
        return self._eval(expr, env) != 0

    def _lookup(self, name: str, env: Dict[str, int]) -> int:
        if name in env:
            return env[name]
        return self.program.constants[name]

    def _eval(self, expr, env: Dict[str, int]) -> int:
        if isinstance(expr, IntLiteral):
            return expr.value
        if isinstance(expr, VarExpr):
            return self._lookup(expr.name, env)
        if isinstance(expr, NegExpr):
            value = self._eval(expr.operand, env)
            self._guard(expr.node_id, OVERFLOW, self.width.contains(-value), env)
            return -value
        if isinstance(expr, NotExpr):
            return int(not self._truth(expr.operand, env))
        if isinstance(expr, LogicExpr):
            left = self._truth(expr.left, env)
            if expr.op == "&&":
                return int(left and self._truth(expr.right, env))
            return int(left or self._truth(expr.right, env))
        if isinstance(expr, CompareExpr):
            return int(COMPARISON[expr.op](self._eval(expr.left, env), self._eval(expr.right, env)))
        if isinstance(expr, ArithExpr):
            left = self._eval(expr.left, env)
            right = self._eval(expr.right, env)
            if expr.op in "/%":
                self._guard(expr.node_id, DIVISION_BY_ZERO, right != 0, env)
                self._guard(expr.node_id, OVERFLOW, not (left == self.width.min_value and right == -1), env)
                if expr.op == "/":
                    return truncating_div(left, right)
                return truncating_mod(left, right)
            value = {"+": left + right, "-": left - right, "*": left * right}[expr.op]
            self._guard(expr.node_id, OVERFLOW, self.width.contains(value), env)
            return value
        raise TypeError(f"cannot evaluate {expr!r}")
