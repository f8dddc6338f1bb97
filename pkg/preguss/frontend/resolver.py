import logging
from typing import Dict, List, Optional

from preguss.errors import ConstantEvaluationError, ResolveError
from preguss.frontend.models import (
    ArithExpr, AssignStmt, Block, CallExpr, CallStmt, CompareExpr, DeclStmt,
    ExprStmt, FunctionDef, IfStmt, IntLiteral, IntWidth, LogicExpr, NegExpr, Node, NotExpr, Program,
    ReturnStmt, TypedProgram, VarExpr, WhileStmt, children, walk,
)

logger = logging.getLogger("preguss")


def truncating_div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def truncating_mod(a: int, b: int) -> int:
    return a - b * truncating_div(a, b)


class Resolver:

    def __init__(self, program: Program, width: IntWidth):
        self.program = program
        self.width = width
        self.constants: Dict[str, int] = {
            "INT_MIN": width.min_value,
            "INT_MAX": width.max_value,
        }
        self.types: Dict[int, str] = {}
        self.functions: Dict[str, FunctionDef] = {}
        self.scopes: List[set] = []
        self.current: Optional[FunctionDef] = None

    def resolve(self) -> TypedProgram:
        for const in self.program.constants:
            if const.name in self.constants:
                raise ResolveError("duplicate-definition", f"'{const.name}' is already defined", const.location)
            self.constants[const.name] = self._evaluate_constant(const.value)
            self.types[const.value.node_id] = "int"

        for func in self.program.functions:
            if func.name in self.functions or func.name in self.constants:
                raise ResolveError("duplicate-definition", f"'{func.name}' is already defined", func.location)
            if len(set(func.params)) != len(func.params):
                raise ResolveError("duplicate-definition", f"repeated parameter in '{func.name}'", func.location)
            self.functions[func.name] = func

        if self.program.functions and self.program.entry not in self.functions:
            raise ResolveError(
                "unknown-identifier", f"entry function '{self.program.entry}' is not defined", self.program.location
            )

        for func in self.program.functions:
            self._function(func)

        nodes, owners, parents = {}, {}, {}
        for func in self.program.functions:
            for node in walk(func):
                nodes[node.node_id] = node
                owners[node.node_id] = func.name
                for child in children(node):
                    parents[child.node_id] = node.node_id
        for const in self.program.constants:
            for node in walk(const):
                nodes[node.node_id] = node

        logger.debug(f"Resolved {len(self.functions)} functions at width {self.width.bits}")
        return TypedProgram(
            program=self.program,
            width=self.width,
            constants=self.constants,
            types=self.types,
            nodes=nodes,
            owners=owners,
            parents=parents,
        )

    # ---------- constants ----------
    def _evaluate_constant(self, expr: Node) -> int:
        if isinstance(expr, IntLiteral):
            value = expr.value
        elif isinstance(expr, VarExpr):
            if expr.name not in self.constants:
                raise ResolveError("unknown-identifier", f"'{expr.name}' is not a constant", expr.location)
            value = self.constants[expr.name]
        elif isinstance(expr, NegExpr):
            value = -self._evaluate_constant(expr.operand)
        elif isinstance(expr, ArithExpr):
            left = self._evaluate_constant(expr.left)
            right = self._evaluate_constant(expr.right)
            if expr.op in "/%" and right == 0:
                raise ConstantEvaluationError("division by zero in constant", expr.location)
            value = {
                "+": lambda: left + right,
                "-": lambda: left - right,
                "*": lambda: left * right,
                "/": lambda: truncating_div(left, right),
                "%": lambda: truncating_mod(left, right),
            }[expr.op]()
        else:
            raise ResolveError("type-mismatch", "constant initializers must be integer expressions", expr.location)

        if not self.width.contains(value):
            raise ConstantEvaluationError(f"constant value {value} is out of range", expr.location)
        self.types[expr.node_id] = "int"
        return value

    # ---------- scopes ----------
    def _lookup(self, name: str) -> bool:
        return any(name in scope for scope in self.scopes) or name in self.constants

    def _declare(self, name: str, node: Node):
        if self._lookup(name) or name in self.functions:
            raise ResolveError("duplicate-definition", f"'{name}' shadows an existing name", node.location)
        self.scopes[-1].add(name)

    # ---------- functions and statements ----------
    def _function(self, func: FunctionDef):
        self.current = func
        self.scopes = [set()]
        for param in func.params:
            if param in self.constants or param in self.functions:
                raise ResolveError("duplicate-definition", f"parameter '{param}' shadows a global", func.location)
            self.scopes[-1].add(param)
        self._block(func.body, new_scope=False)
        self.current = None

    def _block(self, block: Block, new_scope: bool = True):
        if new_scope:
            self.scopes.append(set())
        for stmt in block.stmts:
            self._stmt(stmt)
        if new_scope:
            self.scopes.pop()

    def _stmt(self, stmt: Node):
        if isinstance(stmt, Block):
            self._block(stmt)
        elif isinstance(stmt, DeclStmt):
            self._value(stmt.init, allow_call=True)
            self._declare(stmt.name, stmt)
        elif isinstance(stmt, AssignStmt):
            if stmt.name in self.constants and not any(stmt.name in scope for scope in self.scopes):
                raise ResolveError("type-mismatch", f"cannot assign to constant '{stmt.name}'", stmt.location)
            if not self._lookup(stmt.name):
                raise ResolveError("unknown-identifier", f"'{stmt.name}' is not declared", stmt.location)
            self._value(stmt.value, allow_call=True)
        elif isinstance(stmt, IfStmt):
            self._condition(stmt.cond)
            self._block(stmt.then)
            if stmt.orelse is not None:
                self._block(stmt.orelse)
        elif isinstance(stmt, WhileStmt):
            self._condition(stmt.cond)
            self._block(stmt.body)
        elif isinstance(stmt, ReturnStmt):
            if self.current.returns == "void":
                if stmt.value is not None:
                    raise ResolveError(
                        "type-mismatch", f"void function '{self.current.name}' returns a value", stmt.location
                    )
            else:
                if stmt.value is None:
                    raise ResolveError(
                        "type-mismatch", f"function '{self.current.name}' must return an int", stmt.location
                    )
                self._value(stmt.value, allow_call=True)
        elif isinstance(stmt, CallStmt):
            self._call(stmt.call, as_value=False)
        elif isinstance(stmt, ExprStmt):
            self._expr(stmt.expr)

    def _condition(self, expr: Node):
        self._expr(expr)

    def _value(self, expr: Node, allow_call: bool = False):
        if isinstance(expr, CallExpr):
            if not allow_call:
                raise ResolveError("unsupported-call-position", f"call to '{expr.name}' inside an expression",
                                   expr.location)
            self._call(expr, as_value=True)
            return
        if self._expr(expr) != "int":
            raise ResolveError("type-mismatch", "expected an int expression", expr.location)

    def _call(self, call: CallExpr, as_value: bool):
        callee = self.functions.get(call.name)
        if callee is None:
            raise ResolveError("unknown-identifier", f"function '{call.name}' is not defined", call.location)
        if len(call.args) != len(callee.params):
            raise ResolveError(
                "arity-mismatch",
                f"'{call.name}' expects {len(callee.params)} arguments, got {len(call.args)}",
                call.location,
            )
        if as_value and callee.returns == "void":
            raise ResolveError("type-mismatch", f"void function '{call.name}' used as a value", call.location)
        for arg in call.args:
            self._value(arg)
        self.types[call.node_id] = "int" if callee.returns == "int" else "void"

    def _expr(self, expr: Node) -> str:
        if isinstance(expr, IntLiteral):
            if not self.width.contains(expr.value):
                raise ResolveError("type-mismatch", f"literal {expr.value} is out of range", expr.location)
            ty = "int"
        elif isinstance(expr, VarExpr):
            if not self._lookup(expr.name):
                raise ResolveError("unknown-identifier", f"'{expr.name}' is not declared", expr.location)
            ty = "int"
        elif isinstance(expr, NegExpr):
            self._int_operand(expr.operand)
            ty = "int"
        elif isinstance(expr, NotExpr):
            self._expr(expr.operand)
            ty = "bool"
        elif isinstance(expr, ArithExpr):
            self._int_operand(expr.left)
            self._int_operand(expr.right)
            ty = "int"
        elif isinstance(expr, CompareExpr):
            self._int_operand(expr.left)
            self._int_operand(expr.right)
            ty = "bool"
        elif isinstance(expr, LogicExpr):
            self._expr(expr.left)
            self._expr(expr.right)
            ty = "bool"
        elif isinstance(expr, CallExpr):
            raise ResolveError("unsupported-call-position", f"call to '{expr.name}' inside an expression",
                               expr.location)
        else:
            raise ResolveError("type-mismatch", "unsupported expression", expr.location)
        self.types[expr.node_id] = ty
        return ty

    def _int_operand(self, expr: Node):
        if self._expr(expr) != "int":
            raise ResolveError("type-mismatch", "expected an int operand", expr.location)


def resolve(program: Program, width: IntWidth = IntWidth(32)) -> TypedProgram:
    return Resolver(program, width).resolve()
