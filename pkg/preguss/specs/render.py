from typing import Tuple

from preguss.specs.models import (
    And, BinOp, BoolConst, Clause, ClauseKind, Compare, Implies, IntConst, Neg, Not, Old, Or, Result, Var,
)

ATOM = 8
UNARY = 7
BINARY_PRECEDENCE = {"*": 6, "/": 6, "%": 6, "+": 5, "-": 5}
COMPARE = 4
AND = 3
OR = 2
IMPLIES = 1


def _render(node) -> Tuple[str, int]:
    if isinstance(node, IntConst):
        return str(node.value), (UNARY if node.value < 0 else ATOM)
    if isinstance(node, Var):
        return node.name, ATOM
    if isinstance(node, Result):
        return "\\result", ATOM
    if isinstance(node, Old):
        return f"\\old({node.name})", ATOM
    if isinstance(node, BoolConst):
        return ("\\true" if node.value else "\\false"), ATOM
    if isinstance(node, Neg):
        text, _ = _render(node.operand)
        if not isinstance(node.operand, (Var, Result, Old)):
            text = f"({text})"
        return f"-{text}", UNARY
    if isinstance(node, Not):
        text, prec = _render(node.operand)
        if prec < UNARY:
            text = f"({text})"
        return f"!{text}", UNARY
    if isinstance(node, BinOp):
        prec = BINARY_PRECEDENCE[node.op]
        return f"{_side(node.left, prec, False)} {node.op} {_side(node.right, prec, True)}", prec
    if isinstance(node, Compare):
        return f"{_side(node.left, COMPARE, True)} {node.op} {_side(node.right, COMPARE, True)}", COMPARE
    if isinstance(node, And):
        return f"{_side(node.left, AND, False)} && {_side(node.right, AND, True)}", AND
    if isinstance(node, Or):
        return f"{_side(node.left, OR, False)} || {_side(node.right, OR, True)}", OR
    if isinstance(node, Implies):
        return f"{_side(node.left, IMPLIES, True)} ==> {_side(node.right, IMPLIES, False)}", IMPLIES
    raise TypeError(f"cannot render {node!r}")


def _side(node, parent: int, strict: bool) -> str:
    text, prec = _render(node)
    if prec < parent or (strict and prec == parent):
        return f"({text})"
    return text


def render_pred(pred) -> str:
    return _render(pred)[0]


def render_clause(clause: Clause) -> str:
    if clause.kind == ClauseKind.LOOP_ASSIGNS:
        targets = ", ".join(clause.variables) if clause.variables else "\\nothing"
        return f"loop assigns {targets};"
    body = render_pred(clause.body)
    if clause.kind == ClauseKind.ASSERT and clause.label:
        return f"assert {clause.label}: {body};"
    return f"{clause.kind.value} {body};"
