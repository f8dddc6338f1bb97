"""Guard predicates for RTE-susceptible operations, phrased on the operands."""

from typing import List, Optional, Tuple

from preguss.absint.models import AssertionKind, RteAssertion, assertion_id
from preguss.frontend.models import ArithExpr, IntLiteral, NegExpr, Node, TypedProgram, VarExpr, walk
from preguss.frontend.resolver import truncating_div, truncating_mod
from preguss.specs.models import And, BinOp, Compare, IntConst, Or, Pred
from preguss.specs.utils import expr_to_term, fold_constants


def constant_value(expr: Node, program: TypedProgram) -> Optional[int]:
    """Wrap-free value of a variable-free expression, or None."""
    if isinstance(expr, IntLiteral):
        return expr.value
    if isinstance(expr, VarExpr):
        return program.constants.get(expr.name)
    if isinstance(expr, NegExpr):
        value = constant_value(expr.operand, program)
        return None if value is None else -value
    if isinstance(expr, ArithExpr):
        left = constant_value(expr.left, program)
        right = constant_value(expr.right, program)
        if left is None or right is None:
            return None
        if expr.op in "/%":
            if right == 0:
                return None
            return truncating_div(left, right) if expr.op == "/" else truncating_mod(left, right)
        return {"+": left + right, "-": left - right, "*": left * right}[expr.op]
    return None


def overflow_capable(node: Node, program: TypedProgram) -> bool:
    width = program.width
    if isinstance(node, NegExpr):
        value = constant_value(node.operand, program)
        return value is None or not width.contains(-value)
    if not isinstance(node, ArithExpr):
        return False
    left = constant_value(node.left, program)
    right = constant_value(node.right, program)
    if node.op in "/%":
        return not ((left is not None and left != width.min_value) or (right is not None and right != -1))
    if left is None or right is None:
        return True
    return not width.contains({"+": left + right, "-": left - right, "*": left * right}[node.op])


def _term(expr: Node, program: TypedProgram):
    return fold_constants(expr_to_term(expr), program.constants)


def node_guards(node: Node, program: TypedProgram) -> List[Tuple[AssertionKind, Pred]]:
    width = program.width
    if isinstance(node, NegExpr):
        if not overflow_capable(node, program):
            return []
        return [(AssertionKind.SIGNED_OVERFLOW, Compare("<=", IntConst(-width.max_value), _term(node.operand, program)))]
    if not isinstance(node, ArithExpr):
        return []

    left, right = _term(node.left, program), _term(node.right, program)
    guards = []
    if node.op in "/%":
        guards.append((AssertionKind.DIV_BY_ZERO, Compare("!=", right, IntConst(0))))
        if overflow_capable(node, program):
            guards.append((
                AssertionKind.SIGNED_OVERFLOW,
                Or(Compare("!=", left, IntConst(width.min_value)), Compare("!=", right, IntConst(-1))),
            ))
    elif overflow_capable(node, program):
        result = BinOp(node.op, left, right)
        guards.append((
            AssertionKind.SIGNED_OVERFLOW,
            And(Compare("<=", IntConst(width.min_value), result), Compare("<=", result, IntConst(width.max_value))),
        ))
    return guards


def instrument(program: TypedProgram) -> List[RteAssertion]:
    """One assertion per guard, functions in source order, nodes in pre-order."""
    assertions = []
    for func in program.functions:
        for node in walk(func):
            for kind, predicate in node_guards(node, program):
                assertions.append(RteAssertion(
                    id=assertion_id(kind, node.node_id),
                    kind=kind,
                    predicate=predicate,
                    node_id=node.node_id,
                    function=func.name,
                    location=node.location,
                ))
    return assertions
