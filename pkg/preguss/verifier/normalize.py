"""Sequent normalization and the exact tier of discharge."""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from preguss.absint.domain import AbstractEnv, Interval, check_pred, full
from preguss.frontend.models import IntWidth
from preguss.specs.models import FALSE, TRUE, And, BinOp, BoolConst, Compare, Implies, IntConst, Not, Or, Pred, Var
from preguss.specs.utils import (
    conj, conjuncts, free_vars, implies, linear_form, negate, ordered_vars, simplify, substitute,
)


def nnf(pred: Pred) -> Pred:
    """Pushes negations down to comparisons."""
    if isinstance(pred, Not):
        inner = pred.operand
        if isinstance(inner, (BoolConst, Compare)):
            return negate(inner)
        if isinstance(inner, Not):
            return nnf(inner.operand)
        if isinstance(inner, And):
            return Or(nnf(Not(inner.left)), nnf(Not(inner.right)))
        if isinstance(inner, Or):
            return And(nnf(Not(inner.left)), nnf(Not(inner.right)))
        if isinstance(inner, Implies):
            return And(nnf(inner.left), nnf(Not(inner.right)))
    if isinstance(pred, (And, Or)):
        return type(pred)(nnf(pred.left), nnf(pred.right))
    if isinstance(pred, Implies):
        return Or(nnf(Not(pred.left)), nnf(pred.right))
    return pred


@dataclass
class Sequent:
    hypotheses: List[Pred]
    goal: Pred
    # one-point eliminations in the order they were applied
    eliminated: List[Tuple[str, object]] = field(default_factory=list)

    @property
    def formula(self) -> Pred:
        return implies(conj(self.hypotheses), self.goal)

    def free_vars(self) -> List[str]:
        return ordered_vars(conj(self.hypotheses + [self.goal]))

    def residual(self) -> Tuple[str, ...]:
        return tuple(self.free_vars() + [name for name, _ in self.eliminated])


def _hypotheses(pred: Pred) -> List[Pred]:
    parts = []
    for part in conjuncts(nnf(pred)):
        if isinstance(part, And):
            parts.extend(_hypotheses(part))
        else:
            parts.append(part)
    return parts


def split(pred: Pred, hypotheses: Sequence[Pred] = ()) -> List[Sequent]:
    """One sequent per path: conjunctions split the goal, implications move to the hypotheses."""
    pred = simplify(pred)
    if pred == TRUE:
        return []
    if isinstance(pred, And):
        return split(pred.left, hypotheses) + split(pred.right, hypotheses)
    if isinstance(pred, Implies):
        return split(pred.right, list(hypotheses) + _hypotheses(pred.left))
    if isinstance(pred, Or):
        return split(pred.right, list(hypotheses) + _hypotheses(Not(pred.left)))
    if isinstance(pred, Not) and not isinstance(pred.operand, Compare):
        return split(nnf(pred), hypotheses)
    return [Sequent(list(hypotheses), pred)]


def _definition(hypothesis: Pred) -> Optional[Tuple[str, object]]:
    if not isinstance(hypothesis, Compare) or hypothesis.op != "==":
        return None
    for var, term in ((hypothesis.left, hypothesis.right), (hypothesis.right, hypothesis.left)):
        if isinstance(var, Var) and var.name not in free_vars(term):
            return var.name, term
    return None


def one_point(sequent: Sequent, width: IntWidth) -> Sequent:
    """Eliminates every variable defined by an equality hypothesis. Range hypotheses move to its definition."""
    hypotheses = [simplify(h) for h in sequent.hypotheses]
    goal = simplify(sequent.goal)
    eliminated = list(sequent.eliminated)
    while True:
        for index, hypothesis in enumerate(hypotheses):
            definition = _definition(hypothesis)
            if definition is not None:
                break
        else:
            return Sequent([h for h in hypotheses if h != TRUE], goal, eliminated)
        name, term = definition
        rest = hypotheses[:index] + hypotheses[index + 1:]
        if not isinstance(term, IntConst):
            rest += [Compare("<=", IntConst(width.min_value), term), Compare("<=", term, IntConst(width.max_value))]
        elif not width.contains(term.value):
            rest.append(FALSE)
        hypotheses = [simplify(substitute(h, {name: term})) for h in rest]
        goal = simplify(substitute(goal, {name: term}))
        eliminated.append((name, term))


# ---------- integer interval sets ----------

@dataclass(frozen=True)
class IntervalSet:
    """Finite union of disjoint, sorted, closed integer ranges."""

    ranges: Tuple[Tuple[int, int], ...] = ()

    @classmethod
    def span(cls, lo: int, hi: int) -> "IntervalSet":
        return cls(((lo, hi),)) if lo <= hi else cls()

    @property
    def is_empty(self) -> bool:
        return not self.ranges

    def intersect(self, other: "IntervalSet") -> "IntervalSet":
        result = []
        for lo, hi in self.ranges:
            for olo, ohi in other.ranges:
                low, high = max(lo, olo), min(hi, ohi)
                if low <= high:
                    result.append((low, high))
        return IntervalSet(tuple(sorted(result)))

    def union(self, other: "IntervalSet") -> "IntervalSet":
        merged: List[List[int]] = []
        for lo, hi in sorted(self.ranges + other.ranges):
            if merged and lo <= merged[-1][1] + 1:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        return IntervalSet(tuple((lo, hi) for lo, hi in merged))

    def complement(self, domain: "IntervalSet") -> "IntervalSet":
        result = domain
        for lo, hi in self.ranges:
            result = result.intersect(IntervalSet(((domain.lo, lo - 1), (hi + 1, domain.hi))).normalized())
        return result

    def normalized(self) -> "IntervalSet":
        return IntervalSet(tuple((lo, hi) for lo, hi in self.ranges if lo <= hi))

    @property
    def lo(self) -> int:
        return self.ranges[0][0]

    @property
    def hi(self) -> int:
        return self.ranges[-1][1]

    def closest_to_zero(self) -> int:
        candidates = []
        for lo, hi in self.ranges:
            candidates.append(min(max(0, lo), hi))
        return min(candidates, key=lambda value: (abs(value), value))


# a * x op c  <=>  (-a) * x mirrored-op (-c)
MIRRORED = {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "==": "==", "!=": "!="}


def _solve(op: str, a: int, c: int, domain: IntervalSet) -> IntervalSet:
    """Values of x in domain with `a * x op c`, a != 0."""
    if a < 0:
        a, c, op = -a, -c, MIRRORED[op]
    if op == "<":
        op, c = "<=", c - 1
    elif op == ">":
        op, c = ">=", c + 1
    if op in ("==", "!="):
        exact = IntervalSet.span(c // a, c // a) if c % a == 0 else IntervalSet()
        exact = exact.intersect(domain)
        return exact if op == "==" else exact.complement(domain)
    # a > 0 here: upper bounds round down, lower bounds round up
    if op == "<=":
        return domain.intersect(IntervalSet.span(domain.lo, c // a))
    return domain.intersect(IntervalSet.span(-((-c) // a), domain.hi))


def solution_set(pred: Pred, var: str, domain: IntervalSet) -> Optional[IntervalSet]:
    """Values of var in domain satisfying pred, or None when pred is not linear in var alone."""
    if isinstance(pred, BoolConst):
        return domain if pred.value else IntervalSet()
    if isinstance(pred, Compare):
        form = linear_form(BinOp("-", pred.left, pred.right))
        if form is None or set(form[0]) - {var}:
            return None
        coeff, constant = form[0].get(var, 0), form[1]
        if coeff == 0:
            return solution_set(simplify(Compare(pred.op, IntConst(constant), IntConst(0))), var, domain)
        return _solve(pred.op, coeff, -constant, domain)
    if isinstance(pred, Not):
        inner = solution_set(pred.operand, var, domain)
        return None if inner is None else inner.complement(domain)
    left = solution_set(pred.left, var, domain)
    right = solution_set(pred.right, var, domain)
    if left is None or right is None:
        return None
    if isinstance(pred, And):
        return left.intersect(right)
    if isinstance(pred, Or):
        return left.union(right)
    return left.complement(domain).union(right)


def bounds(sequent: Sequent, width: IntWidth) -> Dict[str, Interval]:
    """Per-variable hull of the single-variable hypotheses, within the width."""
    domain = IntervalSet.span(width.min_value, width.max_value)
    result = {name: full(width) for name in sequent.free_vars()}
    for hypothesis in sequent.hypotheses:
        names = free_vars(hypothesis)
        if len(names) != 1:
            continue
        name = next(iter(names))
        values = solution_set(hypothesis, name, domain)
        if values is None:
            continue
        if values.is_empty:
            return {}
        current = result[name]
        lo, hi = max(current.lo, values.lo), min(current.hi, values.hi)
        if lo > hi:
            return {}
        result[name] = Interval(lo, hi)
    return result


class Decision:
    VALID = "valid"
    INVALID = "invalid"


def decide_exact(sequent: Sequent, width: IntWidth) -> Tuple[Optional[str], Optional[Dict[str, int]]]:
    """Tier 1: closed and single-variable linear sequents exactly, interval bounds otherwise."""
    formula = simplify(sequent.formula)
    if formula == TRUE:
        return Decision.VALID, None
    if FALSE in sequent.hypotheses:
        return Decision.VALID, None

    names = sequent.free_vars()
    if not names:
        if formula == FALSE:
            return Decision.INVALID, {}
        return None, None
    if len(names) == 1:
        domain = IntervalSet.span(width.min_value, width.max_value)
        counterexamples = solution_set(Not(formula), names[0], domain)
        if counterexamples is not None:
            if counterexamples.is_empty:
                return Decision.VALID, None
            return Decision.INVALID, {names[0]: counterexamples.closest_to_zero()}

    ranges = bounds(sequent, width)
    if not ranges:
        return Decision.VALID, None
    env = AbstractEnv(ranges)
    if check_pred(env, sequent.goal) is True:
        return Decision.VALID, None
    if any(check_pred(env, hypothesis) is False for hypothesis in sequent.hypotheses):
        return Decision.VALID, None
    return None, None
