from typing import Callable, Dict, Iterable, List, Mapping, Optional, Set, Tuple

from preguss.frontend.models import (
    ArithExpr, CompareExpr, IntLiteral, LogicExpr, NegExpr, NotExpr, VarExpr,
)
from preguss.frontend.resolver import truncating_div, truncating_mod
from preguss.specs.models import (
    FALSE, TRUE, And, BinOp, BoolConst, Compare, Implies, IntConst, Neg, Not, Old, Or, Result, Var,
)

NEGATED_COMPARISON = {"==": "!=", "!=": "==", "<": ">=", "<=": ">", ">": "<=", ">=": "<"}
SWAPPED_COMPARISON = {"==": "==", "!=": "!=", "<": ">", "<=": ">=", ">": "<", ">=": "<="}


def pred_div(a: int, b: int) -> int:
    # division inside predicates is total: x / 0 == 0
    return 0 if b == 0 else truncating_div(a, b)


def pred_mod(a: int, b: int) -> int:
    return 0 if b == 0 else truncating_mod(a, b)


ARITH = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": pred_div,
    "%": pred_mod,
}

COMPARISON = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


# ---------- traversal ----------

def _leaves(node) -> Iterable:
    stack = [node]
    while stack:
        current = stack.pop()
        if isinstance(current, (Neg, Not)):
            stack.append(current.operand)
        elif isinstance(current, (BinOp, Compare, And, Or, Implies)):
            stack.append(current.right)
            stack.append(current.left)
        else:
            yield current


def free_vars(node) -> Set[str]:
    return {leaf.name for leaf in _leaves(node) if isinstance(leaf, Var)}


def ordered_vars(node) -> List[str]:
    names: List[str] = []
    for leaf in _leaves(node):
        if isinstance(leaf, Var) and leaf.name not in names:
            names.append(leaf.name)
    return names


def mentions_result(node) -> bool:
    return any(isinstance(leaf, Result) for leaf in _leaves(node))


def mentions_old(node) -> bool:
    return any(isinstance(leaf, Old) for leaf in _leaves(node))


def is_nonlinear(node) -> bool:
    stack = [node]
    while stack:
        current = stack.pop()
        if isinstance(current, BinOp):
            if current.op == "*" and free_vars(current.left) and free_vars(current.right):
                return True
            if current.op in "/%" and free_vars(current.right):
                return True
            stack.extend([current.left, current.right])
        elif isinstance(current, (Compare, And, Or, Implies)):
            stack.extend([current.left, current.right])
        elif isinstance(current, (Neg, Not)):
            stack.append(current.operand)
    return False


def uses_division(node) -> bool:
    stack = [node]
    while stack:
        current = stack.pop()
        if isinstance(current, BinOp):
            if current.op in "/%":
                return True
            stack.extend([current.left, current.right])
        elif isinstance(current, (Compare, And, Or, Implies)):
            stack.extend([current.left, current.right])
        elif isinstance(current, (Neg, Not)):
            stack.append(current.operand)
    return False


# ---------- substitution ----------

def _key(key):
    return Var(key) if isinstance(key, str) else key


def substitute(node, bindings: Mapping):
    """Simultaneous substitution. Keys are variable names, Var, Result or Old values."""
    table = {_key(k): v for k, v in bindings.items()}
    if not table:
        return node
    return _substitute(node, table)


def _substitute(node, table):
    if isinstance(node, (Var, Result, Old)):
        return table.get(node, node)
    if isinstance(node, (IntConst, BoolConst)):
        return node
    if isinstance(node, Neg):
        return Neg(_substitute(node.operand, table))
    if isinstance(node, Not):
        return Not(_substitute(node.operand, table))
    if isinstance(node, BinOp):
        return BinOp(node.op, _substitute(node.left, table), _substitute(node.right, table))
    if isinstance(node, Compare):
        return Compare(node.op, _substitute(node.left, table), _substitute(node.right, table))
    return type(node)(_substitute(node.left, table), _substitute(node.right, table))


# ---------- construction ----------

def conj(preds: Iterable) -> object:
    result = None
    for pred in preds:
        if pred == TRUE:
            continue
        if pred == FALSE:
            return FALSE
        result = pred if result is None else And(result, pred)
    return TRUE if result is None else result


def disj(preds: Iterable) -> object:
    result = None
    for pred in preds:
        if pred == FALSE:
            continue
        if pred == TRUE:
            return TRUE
        result = pred if result is None else Or(result, pred)
    return FALSE if result is None else result


def implies(hypothesis, goal):
    if hypothesis == TRUE:
        return goal
    if hypothesis == FALSE or goal == TRUE:
        return TRUE
    return Implies(hypothesis, goal)


def negate(pred):
    if isinstance(pred, BoolConst):
        return BoolConst(not pred.value)
    if isinstance(pred, Compare):
        return Compare(NEGATED_COMPARISON[pred.op], pred.left, pred.right)
    if isinstance(pred, Not):
        return pred.operand
    return Not(pred)


def conjuncts(pred) -> List:
    if isinstance(pred, And):
        return conjuncts(pred.left) + conjuncts(pred.right)
    if pred == TRUE:
        return []
    return [pred]


# ---------- simplification ----------

def simplify(node):
    """Constant folding and trivial boolean identities."""
    if isinstance(node, Neg):
        operand = simplify(node.operand)
        if isinstance(operand, IntConst):
            return IntConst(-operand.value)
        return Neg(operand)
    if isinstance(node, BinOp):
        left, right = simplify(node.left), simplify(node.right)
        if isinstance(left, IntConst) and isinstance(right, IntConst):
            return IntConst(ARITH[node.op](left.value, right.value))
        if node.op in "+-" and right == IntConst(0):
            return left
        if node.op == "+" and left == IntConst(0):
            return right
        if node.op == "*" and (left == IntConst(1) or right == IntConst(1)):
            return right if left == IntConst(1) else left
        return BinOp(node.op, left, right)
    if isinstance(node, Compare):
        left, right = simplify(node.left), simplify(node.right)
        if isinstance(left, IntConst) and isinstance(right, IntConst):
            return BoolConst(COMPARISON[node.op](left.value, right.value))
        if left == right:
            return BoolConst(node.op in ("==", "<=", ">="))
        return Compare(node.op, left, right)
    if isinstance(node, Not):
        operand = simplify(node.operand)
        if isinstance(operand, (BoolConst, Compare, Not)):
            return negate(operand)
        return Not(operand)
    if isinstance(node, And):
        return conj([simplify(node.left), simplify(node.right)])
    if isinstance(node, Or):
        return disj([simplify(node.left), simplify(node.right)])
    if isinstance(node, Implies):
        return implies(simplify(node.left), simplify(node.right))
    return node


# ---------- evaluation ----------

def compile_term(term) -> Callable[[Mapping[str, int]], int]:
    if isinstance(term, IntConst):
        value = term.value
        return lambda env: value
    if isinstance(term, Var):
        name = term.name
        return lambda env: env[name]
    if isinstance(term, Result):
        return lambda env: env["\\result"]
    if isinstance(term, Old):
        key = f"\\old({term.name})"
        return lambda env: env[key]
    if isinstance(term, Neg):
        operand = compile_term(term.operand)
        return lambda env: -operand(env)
    if isinstance(term, BinOp):
        left, right, op = compile_term(term.left), compile_term(term.right), ARITH[term.op]
        return lambda env: op(left(env), right(env))
    raise TypeError(f"not a term: {term!r}")


def compile_pred(pred) -> Callable[[Mapping[str, int]], bool]:
    if isinstance(pred, BoolConst):
        value = pred.value
        return lambda env: value
    if isinstance(pred, Compare):
        left, right, op = compile_term(pred.left), compile_term(pred.right), COMPARISON[pred.op]
        return lambda env: op(left(env), right(env))
    if isinstance(pred, Not):
        operand = compile_pred(pred.operand)
        return lambda env: not operand(env)
    if isinstance(pred, And):
        left, right = compile_pred(pred.left), compile_pred(pred.right)
        return lambda env: left(env) and right(env)
    if isinstance(pred, Or):
        left, right = compile_pred(pred.left), compile_pred(pred.right)
        return lambda env: left(env) or right(env)
    if isinstance(pred, Implies):
        left, right = compile_pred(pred.left), compile_pred(pred.right)
        return lambda env: (not left(env)) or right(env)
    raise TypeError(f"not a predicate: {pred!r}")


def eval_term(term, env: Mapping[str, int]) -> int:
    return compile_term(term)(env)


def eval_pred(pred, env: Mapping[str, int]) -> bool:
    return compile_pred(pred)(env)


# ---------- linear forms ----------

def linear_form(term) -> Optional[Tuple[Dict[str, int], int]]:
    """term as (coefficients, constant), or None when it is not linear."""
    if isinstance(term, IntConst):
        return {}, term.value
    if isinstance(term, Var):
        return {term.name: 1}, 0
    if isinstance(term, Neg):
        inner = linear_form(term.operand)
        if inner is None:
            return None
        coeffs, const = inner
        return {k: -v for k, v in coeffs.items()}, -const
    if isinstance(term, BinOp):
        left, right = linear_form(term.left), linear_form(term.right)
        if left is None or right is None:
            return None
        if term.op in "+-":
            sign = 1 if term.op == "+" else -1
            coeffs = dict(left[0])
            for name, coeff in right[0].items():
                coeffs[name] = coeffs.get(name, 0) + sign * coeff
            return {k: v for k, v in coeffs.items() if v != 0}, left[1] + sign * right[1]
        if term.op == "*":
            if not left[0]:
                return {k: left[1] * v for k, v in right[0].items() if left[1] * v != 0}, left[1] * right[1]
            if not right[0]:
                return {k: right[1] * v for k, v in left[0].items() if right[1] * v != 0}, left[1] * right[1]
            return None
        if not left[0] and not right[0]:
            return {}, ARITH[term.op](left[1], right[1])
        return None
    return None


# ---------- MiniC expressions ----------

def expr_to_term(expr):
    if isinstance(expr, IntLiteral):
        return IntConst(expr.value)
    if isinstance(expr, VarExpr):
        return Var(expr.name)
    if isinstance(expr, NegExpr):
        return Neg(expr_to_term(expr.operand))
    if isinstance(expr, ArithExpr):
        return BinOp(expr.op, expr_to_term(expr.left), expr_to_term(expr.right))
    if isinstance(expr, (CompareExpr, LogicExpr, NotExpr)):
        raise TypeError("boolean expression used as a term")
    raise TypeError(f"cannot convert {type(expr).__name__} to a term")


def expr_to_pred(expr):
    if isinstance(expr, CompareExpr):
        return Compare(expr.op, expr_to_term(expr.left), expr_to_term(expr.right))
    if isinstance(expr, LogicExpr):
        left, right = expr_to_pred(expr.left), expr_to_pred(expr.right)
        return And(left, right) if expr.op == "&&" else Or(left, right)
    if isinstance(expr, NotExpr):
        return negate(expr_to_pred(expr.operand))
    return Compare("!=", expr_to_term(expr), IntConst(0))


def fold_constants(node, constants: Mapping[str, int]):
    return substitute(node, {name: IntConst(value) for name, value in constants.items()})
