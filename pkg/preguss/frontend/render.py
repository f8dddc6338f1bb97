from collections import defaultdict
from typing import Dict, Iterable, List, Tuple

from preguss.errors import UnknownNodeId
from preguss.frontend.models import (
    ArithExpr, AssignStmt, Block, CallExpr, CallStmt, CompareExpr, DeclStmt, ExprStmt, FunctionDef, IfStmt,
    IntLiteral, LogicExpr, NegExpr, NotExpr, Program, ReturnStmt, TypedProgram, VarExpr, WhileStmt, children,
    is_expr, walk,
)
from preguss.specs.render import render_clause

INDENT = "    "

PRECEDENCE = {
    "||": 1, "&&": 2,
    "==": 3, "!=": 3,
    "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5,
    "*": 6, "/": 6, "%": 6,
}
UNARY = 7
ATOM = 8


def _expr(node) -> Tuple[str, int]:
    if isinstance(node, IntLiteral):
        return str(node.value), (UNARY if node.value < 0 else ATOM)
    if isinstance(node, VarExpr):
        return node.name, ATOM
    if isinstance(node, CallExpr):
        return f"{node.name}({', '.join(render_expr(arg) for arg in node.args)})", ATOM
    if isinstance(node, NegExpr):
        text, _ = _expr(node.operand)
        if not isinstance(node.operand, (VarExpr, CallExpr)):
            text = f"({text})"
        return f"-{text}", UNARY
    if isinstance(node, NotExpr):
        text, prec = _expr(node.operand)
        if prec < UNARY:
            text = f"({text})"
        return f"!{text}", UNARY
    if isinstance(node, (ArithExpr, CompareExpr, LogicExpr)):
        prec = PRECEDENCE[node.op]
        left, left_prec = _expr(node.left)
        right, right_prec = _expr(node.right)
        if left_prec < prec:
            left = f"({left})"
        if right_prec <= prec:
            right = f"({right})"
        return f"{left} {node.op} {right}", prec
    raise TypeError(f"cannot render {node!r}")


def render_expr(node) -> str:
    return _expr(node)[0]


class SourceRenderer:

    def __init__(self, program: Program, annotations: Iterable, loop_labels: bool = False):
        self.program = program
        self.loop_labels = loop_labels
        self.lines: List[str] = []
        self.comments: Dict[int, List[str]] = defaultdict(list)

        index = {node.node_id: node for node in walk(program)}
        parents = {}
        for node in index.values():
            for child in children(node):
                parents[child.node_id] = node.node_id

        for node_id, clause in annotations:
            if node_id not in index:
                raise UnknownNodeId(node_id)
            target = node_id
            # clauses on expressions are shown above the statement holding them
            while is_expr(index[target]) and target in parents:
                target = parents[target]
            self.comments[target].append(render_clause(clause))

    def render(self) -> str:
        for const in self.program.constants:
            self._comments(const.node_id, 0)
            self.lines.append(f"int {const.name} = {render_expr(const.value)};")
        if self.program.constants and self.program.functions:
            self.lines.append("")
        for position, func in enumerate(self.program.functions):
            if position:
                self.lines.append("")
            self._function(func)
        return "\n".join(self.lines) + ("\n" if self.lines else "")

    def _comments(self, node_id: int, depth: int):
        for text in self.comments.get(node_id, []):
            self.lines.append(f"{INDENT * depth}/*@ {text} */")

    def _function(self, func: FunctionDef):
        self._comments(func.node_id, 0)
        params = ", ".join(f"int {name}" for name in func.params)
        self.lines.append(f"{func.returns} {func.name}({params}) {{")
        for stmt in func.body.stmts:
            self._stmt(stmt, 1)
        self.lines.append("}")

    def _body(self, block: Block, depth: int):
        for stmt in block.stmts:
            self._stmt(stmt, depth)

    def _stmt(self, stmt, depth: int):
        pad = INDENT * depth
        self._comments(stmt.node_id, depth)
        if isinstance(stmt, Block):
            self.lines.append(f"{pad}{{")
            self._body(stmt, depth + 1)
            self.lines.append(f"{pad}}}")
        elif isinstance(stmt, DeclStmt):
            self.lines.append(f"{pad}int {stmt.name} = {render_expr(stmt.init)};")
        elif isinstance(stmt, AssignStmt):
            self.lines.append(f"{pad}{stmt.name} = {render_expr(stmt.value)};")
        elif isinstance(stmt, IfStmt):
            self.lines.append(f"{pad}if ({render_expr(stmt.cond)}) {{")
            self._body(stmt.then, depth + 1)
            if stmt.orelse is not None:
                self.lines.append(f"{pad}}} else {{")
                self._body(stmt.orelse, depth + 1)
            self.lines.append(f"{pad}}}")
        elif isinstance(stmt, WhileStmt):
            if self.loop_labels:
                self.lines.append(f"{pad}/* loop {stmt.node_id} */")
            self.lines.append(f"{pad}while ({render_expr(stmt.cond)}) {{")
            self._body(stmt.body, depth + 1)
            self.lines.append(f"{pad}}}")
        elif isinstance(stmt, ReturnStmt):
            if stmt.value is None:
                self.lines.append(f"{pad}return;")
            else:
                self.lines.append(f"{pad}return {render_expr(stmt.value)};")
        elif isinstance(stmt, CallStmt):
            self.lines.append(f"{pad}{render_expr(stmt.call)};")
        elif isinstance(stmt, ExprStmt):
            self.lines.append(f"{pad}{render_expr(stmt.expr)};")
        else:
            raise TypeError(f"cannot render {stmt!r}")


def render(program, annotations: Iterable = (), loop_labels: bool = False) -> str:
    """Pretty prints program with each clause as an ACSL comment right above its anchor."""
    if isinstance(program, TypedProgram):
        program = program.program
    return SourceRenderer(program, annotations, loop_labels).render()


def render_functions(program, names: Iterable[str], annotations: Iterable = (), loop_labels: bool = True) -> str:
    """Renders only the named functions, in source order. Used for prompts."""
    if isinstance(program, TypedProgram):
        program = program.program
    wanted = set(names)
    subset = Program(
        functions=[func for func in program.functions if func.name in wanted],
        constants=program.constants,
        entry=program.entry,
        node_id=program.node_id,
    )
    return SourceRenderer(subset, annotations, loop_labels).render()
