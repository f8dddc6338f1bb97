import logging
from pathlib import Path

from lark import Lark, Transformer, v_args
from lark.exceptions import UnexpectedEOF, UnexpectedInput, VisitError

from preguss.errors import MiniCSyntaxError, PregussError
from preguss.frontend.models import (
    ArithExpr, AssignStmt, Block, CallExpr, CallStmt, CompareExpr, ConstDef, DeclStmt, ExprStmt,
    FunctionDef, IfStmt, IntLiteral, Location, LogicExpr, NegExpr, NotExpr, Program, ReturnStmt,
    VarExpr, WhileStmt, number_nodes,
)

logger = logging.getLogger("preguss")

GRAMMAR_PATH = Path(__file__).resolve().parent / "minic.lark"

_parser = Lark(
    GRAMMAR_PATH.read_text(),
    parser="lalr",
    propagate_positions=True,
    maybe_placeholders=False,
)


@v_args(meta=True)
class MiniCBuilder(Transformer):
    """Bottom-up conversion from the lark parse tree to the MiniC AST."""

    def __init__(self, filename: str):
        super().__init__()
        self.filename = filename
        self._parenthesized = set()

    def _loc(self, meta):
        if getattr(meta, "empty", True):
            return None
        return Location(self.filename, meta.line, meta.column)

    # ---------- definitions ----------
    def start(self, meta, items):
        functions = [item for item in items if isinstance(item, FunctionDef)]
        constants = [item for item in items if isinstance(item, ConstDef)]
        return Program(functions=functions, constants=constants, location=self._loc(meta))

    def const_def(self, meta, items):
        name, value = items
        return ConstDef(str(name), value, location=self._loc(meta))

    def _function(self, meta, items, returns):
        name, *rest = items
        params = rest[0] if len(rest) == 2 else []
        return FunctionDef(str(name), params, returns, rest[-1], location=self._loc(meta))

    def int_function(self, meta, items):
        return self._function(meta, items, "int")

    def void_function(self, meta, items):
        return self._function(meta, items, "void")

    def params(self, meta, items):
        return items

    def void_params(self, meta, items):
        return []

    def param(self, meta, items):
        return str(items[0])

    # ---------- statements ----------
    def _as_block(self, stmt):
        if isinstance(stmt, Block):
            return stmt
        return Block([stmt], location=stmt.location)

    def block(self, meta, items):
        return Block(list(items), location=self._loc(meta))

    def decl(self, meta, items):
        name, init = items
        return DeclStmt(str(name), init, location=self._loc(meta))

    def assign(self, meta, items):
        name, value = items
        return AssignStmt(str(name), value, location=self._loc(meta))

    def if_stmt(self, meta, items):
        cond, then, *orelse = items
        other = self._as_block(orelse[0]) if orelse else None
        return IfStmt(cond, self._as_block(then), other, location=self._loc(meta))

    def while_stmt(self, meta, items):
        cond, body = items
        return WhileStmt(cond, self._as_block(body), location=self._loc(meta))

    def return_stmt(self, meta, items):
        return ReturnStmt(items[0] if items else None, location=self._loc(meta))

    def expr_stmt(self, meta, items):
        (expr,) = items
        if isinstance(expr, CallExpr):
            return CallStmt(expr, location=self._loc(meta))
        return ExprStmt(expr, location=self._loc(meta))

    # ---------- expressions ----------
    def _binary(self, cls, op, meta, items):
        left, right = items
        return cls(op, left, right, location=self._loc(meta))

    def logic_or(self, meta, items):
        return self._binary(LogicExpr, "||", meta, items)

    def logic_and(self, meta, items):
        return self._binary(LogicExpr, "&&", meta, items)

    def eq(self, meta, items):
        return self._binary(CompareExpr, "==", meta, items)

    def ne(self, meta, items):
        return self._binary(CompareExpr, "!=", meta, items)

    def lt(self, meta, items):
        return self._binary(CompareExpr, "<", meta, items)

    def le(self, meta, items):
        return self._binary(CompareExpr, "<=", meta, items)

    def gt(self, meta, items):
        return self._binary(CompareExpr, ">", meta, items)

    def ge(self, meta, items):
        return self._binary(CompareExpr, ">=", meta, items)

    def add(self, meta, items):
        return self._binary(ArithExpr, "+", meta, items)

    def sub(self, meta, items):
        return self._binary(ArithExpr, "-", meta, items)

    def mul(self, meta, items):
        return self._binary(ArithExpr, "*", meta, items)

    def div(self, meta, items):
        return self._binary(ArithExpr, "/", meta, items)

    def mod(self, meta, items):
        return self._binary(ArithExpr, "%", meta, items)

    def neg(self, meta, items):
        (operand,) = items
        # a bare literal folds: "-5" is the literal -5, "-(5)" stays a negation
        if isinstance(operand, IntLiteral) and operand.value >= 0 and id(operand) not in self._parenthesized:
            return IntLiteral(-operand.value, location=self._loc(meta))
        return NegExpr(operand, location=self._loc(meta))

    def not_(self, meta, items):
        (operand,) = items
        return NotExpr(operand, location=self._loc(meta))

    def literal(self, meta, items):
        return IntLiteral(int(items[0]), location=self._loc(meta))

    def var(self, meta, items):
        return VarExpr(str(items[0]), location=self._loc(meta))

    def call(self, meta, items):
        name, *rest = items
        args = rest[0] if rest else []
        return CallExpr(str(name), args, location=self._loc(meta))

    def arglist(self, meta, items):
        return list(items)

    def paren(self, meta, items):
        (inner,) = items
        self._parenthesized.add(id(inner))
        return inner


def _end_location(source: str, filename: str) -> Location:
    lines = source.split("\n")
    return Location(filename, len(lines), max(1, len(lines[-1])))


def parse(source: str, filename: str = "<input>") -> Program:
    try:
        tree = _parser.parse(source)
    except UnexpectedEOF as e:
        expected = [str(t) for t in (e.expected or [])]
        raise MiniCSyntaxError("unexpected end of input", _end_location(source, filename), expected)
    except UnexpectedInput as e:
        expected = getattr(e, "expected", None) or getattr(e, "allowed", None) or []
        location = Location(filename, e.line, e.column) if e.line > 0 else _end_location(source, filename)
        token = getattr(e, "token", None)
        pos = getattr(e, "pos_in_stream", 0) or 0
        found = repr(str(token)) if token is not None else repr(source[pos:pos + 1])
        raise MiniCSyntaxError(f"unexpected {found}", location, [str(t) for t in expected])

    try:
        program = MiniCBuilder(filename).transform(tree)
    except VisitError as e:
        if isinstance(e.orig_exc, PregussError):
            raise e.orig_exc
        raise

    logger.debug(f"Parsed {filename}: {len(program.functions)} functions")
    return number_nodes(program)


def parse_file(path) -> Program:
    path = Path(path)
    return parse(path.read_text(), filename=str(path))
