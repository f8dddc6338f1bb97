from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Union

from preguss.errors import UnknownNodeId


SUPPORTED_WIDTHS = (8, 16, 32)


@dataclass(frozen=True)
class Location:
    file: str
    line: int
    column: int

    def __str__(self):
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class IntWidth:
    """Two's complement integer width. All overflow thresholds derive from here."""

    bits: int = 32

    def __post_init__(self):
        if self.bits not in SUPPORTED_WIDTHS:
            raise ValueError(f"unsupported integer width {self.bits}")

    @property
    def min_value(self) -> int:
        return -(1 << (self.bits - 1))

    @property
    def max_value(self) -> int:
        return (1 << (self.bits - 1)) - 1

    def contains(self, value: int) -> bool:
        return self.min_value <= value <= self.max_value


@dataclass
class Node:
    node_id: int = field(default=-1, compare=False, repr=False, kw_only=True)
    location: Optional[Location] = field(default=None, compare=False, repr=False, kw_only=True)


# Expressions

@dataclass
class IntLiteral(Node):
    value: int


@dataclass
class VarExpr(Node):
    name: str


@dataclass
class NegExpr(Node):
    operand: "Expr"


@dataclass
class NotExpr(Node):
    operand: "Expr"


@dataclass
class ArithExpr(Node):
    op: str  # one of + - * / %
    left: "Expr"
    right: "Expr"


@dataclass
class CompareExpr(Node):
    op: str  # one of == != < <= > >=
    left: "Expr"
    right: "Expr"


@dataclass
class LogicExpr(Node):
    op: str  # && or ||
    left: "Expr"
    right: "Expr"


@dataclass
class CallExpr(Node):
    name: str
    args: List["Expr"]


Expr = Union[IntLiteral, VarExpr, NegExpr, NotExpr, ArithExpr, CompareExpr, LogicExpr, CallExpr]


# Statements

@dataclass
class Block(Node):
    stmts: List["Stmt"]


@dataclass
class DeclStmt(Node):
    name: str
    init: Expr


@dataclass
class AssignStmt(Node):
    name: str
    value: Expr


@dataclass
class IfStmt(Node):
    cond: Expr
    then: Block
    orelse: Optional[Block] = None


@dataclass
class WhileStmt(Node):
    cond: Expr
    body: Block


@dataclass
class ReturnStmt(Node):
    value: Optional[Expr] = None


@dataclass
class CallStmt(Node):
    call: CallExpr


@dataclass
class ExprStmt(Node):
    expr: Expr


Stmt = Union[Block, DeclStmt, AssignStmt, IfStmt, WhileStmt, ReturnStmt, CallStmt, ExprStmt]


# Definitions

@dataclass
class ConstDef(Node):
    name: str
    value: Expr


@dataclass
class FunctionDef(Node):
    name: str
    params: List[str]
    returns: str  # "int" or "void"
    body: Block


@dataclass
class Program(Node):
    functions: List[FunctionDef] = field(default_factory=list)
    constants: List[ConstDef] = field(default_factory=list)
    entry: str = "main"

    def function(self, name: str) -> Optional[FunctionDef]:
        for func in self.functions:
            if func.name == name:
                return func
        return None


def children(node: Node) -> List[Node]:
    if isinstance(node, Program):
        return [*node.constants, *node.functions]
    if isinstance(node, FunctionDef):
        return [node.body]
    if isinstance(node, ConstDef):
        return [node.value]
    if isinstance(node, Block):
        return list(node.stmts)
    if isinstance(node, DeclStmt):
        return [node.init]
    if isinstance(node, AssignStmt):
        return [node.value]
    if isinstance(node, IfStmt):
        return [node.cond, node.then] + ([node.orelse] if node.orelse is not None else [])
    if isinstance(node, WhileStmt):
        return [node.cond, node.body]
    if isinstance(node, ReturnStmt):
        return [node.value] if node.value is not None else []
    if isinstance(node, CallStmt):
        return [node.call]
    if isinstance(node, ExprStmt):
        return [node.expr]
    if isinstance(node, (NegExpr, NotExpr)):
        return [node.operand]
    if isinstance(node, (ArithExpr, CompareExpr, LogicExpr)):
        return [node.left, node.right]
    if isinstance(node, CallExpr):
        return list(node.args)
    return []


def walk(node: Node) -> Iterator[Node]:
    """Pre-order traversal."""
    stack = [node]
    while stack:
        current = stack.pop()
        yield current
        stack.extend(reversed(children(current)))


def number_nodes(program: Program) -> Program:
    for index, node in enumerate(walk(program)):
        node.node_id = index
    return program


def assigned_names(node: Node) -> List[str]:
    """Variables assigned in node, excluding locals declared inside it. Source order, no repeats."""
    declared = {n.name for n in walk(node) if isinstance(n, DeclStmt)}
    names: List[str] = []
    for n in walk(node):
        if isinstance(n, AssignStmt) and n.name not in declared and n.name not in names:
            names.append(n.name)
    return names


def expr_names(expr: Node) -> List[str]:
    names: List[str] = []
    for n in walk(expr):
        if isinstance(n, VarExpr) and n.name not in names:
            names.append(n.name)
    return names


def call_sites(node: Node) -> List[CallExpr]:
    return [n for n in walk(node) if isinstance(n, CallExpr)]


BUILTIN_CONSTANTS = ("INT_MIN", "INT_MAX")


@dataclass
class TypedProgram:
    """A resolved program: every name bound and every expression typed "int" or "bool"."""

    program: Program
    width: IntWidth
    constants: Dict[str, int]
    types: Dict[int, str]
    nodes: Dict[int, Node]
    owners: Dict[int, str]
    parents: Dict[int, int]

    @property
    def functions(self) -> List[FunctionDef]:
        return self.program.functions

    @property
    def entry(self) -> str:
        return self.program.entry

    def function(self, name: str) -> FunctionDef:
        func = self.program.function(name)
        if func is None:
            raise KeyError(name)
        return func

    def node(self, node_id: int) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNodeId(node_id)

    def host_of(self, node_id: int) -> str:
        return self.owners[node_id]

    def ancestors(self, node_id: int) -> List[Node]:
        """Enclosing nodes, innermost first."""
        chain = []
        current = self.parents.get(node_id)
        while current is not None:
            chain.append(self.nodes[current])
            current = self.parents.get(current)
        return chain

    def enclosing_statement(self, node_id: int) -> Node:
        node = self.node(node_id)
        if not is_expr(node):
            return node
        for ancestor in self.ancestors(node_id):
            if not is_expr(ancestor):
                return ancestor
        return node

    def source_index(self, name: str) -> int:
        for index, func in enumerate(self.program.functions):
            if func.name == name:
                return index
        raise KeyError(name)


def is_expr(node: Node) -> bool:
    return isinstance(node, (IntLiteral, VarExpr, NegExpr, NotExpr, ArithExpr, CompareExpr, LogicExpr, CallExpr))
