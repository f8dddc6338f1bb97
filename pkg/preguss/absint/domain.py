"""Integer interval abstract domain. A bound of None is unbounded (-inf for lo, +inf for hi)."""

from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Tuple

from preguss.frontend.models import IntWidth
from preguss.frontend.resolver import truncating_div
from preguss.specs.models import And, BinOp, BoolConst, Compare, Implies, IntConst, Neg, Not, Old, Or, Result, Var

Bound = Optional[int]

INF = float("inf")


def _low(bound: Bound) -> float:
    return -INF if bound is None else bound


def _high(bound: Bound) -> float:
    return INF if bound is None else bound


@dataclass(frozen=True)
class Interval:
    """[lo, hi] with lo <= hi. BOTTOM, the empty interval, is the only value with lo > hi."""

    lo: Bound = None
    hi: Bound = None

    def __post_init__(self):
        if self.lo is not None and self.hi is not None and self.lo > self.hi:
            raise ValueError(f"Invalid interval: lo={self.lo} > hi={self.hi}")

    @property
    def is_bottom(self) -> bool:
        return self.lo is not None and self.hi is not None and self.lo > self.hi

    @property
    def is_const(self) -> bool:
        return not self.is_bottom and self.lo is not None and self.lo == self.hi

    def contains(self, value: int) -> bool:
        return not self.is_bottom and _low(self.lo) <= value <= _high(self.hi)

    def __str__(self):
        if self.is_bottom:
            return "bottom"
        lo = "-inf" if self.lo is None else str(self.lo)
        hi = "+inf" if self.hi is None else str(self.hi)
        return f"[{lo}, {hi}]"


def _make_bottom() -> Interval:
    bottom = object.__new__(Interval)
    object.__setattr__(bottom, "lo", 1)
    object.__setattr__(bottom, "hi", 0)
    return bottom


BOTTOM = _make_bottom()
TOP = Interval(None, None)
BOOL = Interval(0, 1)


def const(value: int) -> Interval:
    return Interval(value, value)


def full(width: IntWidth) -> Interval:
    return Interval(width.min_value, width.max_value)


def _interval(lo: float, hi: float) -> Interval:
    if lo > hi:
        return BOTTOM
    return Interval(None if lo == -INF else int(lo), None if hi == INF else int(hi))


# ---------- lattice ----------

def join(a: Interval, b: Interval) -> Interval:
    """Convex hull of two intervals (lattice join)."""
    if a.is_bottom:
        return b
    if b.is_bottom:
        return a
    return _interval(min(_low(a.lo), _low(b.lo)), max(_high(a.hi), _high(b.hi)))


def meet(a: Interval, b: Interval) -> Interval:
    if a.is_bottom or b.is_bottom:
        return BOTTOM
    return _interval(max(_low(a.lo), _low(b.lo)), min(_high(a.hi), _high(b.hi)))


def leq(a: Interval, b: Interval) -> bool:
    if a.is_bottom:
        return True
    if b.is_bottom:
        return False
    return _low(b.lo) <= _low(a.lo) and _high(a.hi) <= _high(b.hi)


def widen(prev: Interval, next: Interval, width: IntWidth = IntWidth(32)) -> Interval:
    """Unstable bounds jump to MIN/MAX, or to infinity when next already lies outside the width."""
    if prev.is_bottom:
        return next
    if next.is_bottom:
        return prev
    lo = prev.lo
    if _low(next.lo) < _low(prev.lo):
        lo = width.min_value if _low(next.lo) >= width.min_value else None
    hi = prev.hi
    if _high(next.hi) > _high(prev.hi):
        hi = width.max_value if _high(next.hi) <= width.max_value else None
    return Interval(lo, hi)


def narrow(prev: Interval, next: Interval, width: IntWidth = IntWidth(32)) -> Interval:
    """Refines the bounds widening pushed to the width limits (or infinity)."""
    if prev.is_bottom or next.is_bottom:
        return next if prev.is_bottom else BOTTOM
    lo = next.lo if prev.lo is None or prev.lo == width.min_value else prev.lo
    hi = next.hi if prev.hi is None or prev.hi == width.max_value else prev.hi
    return meet(prev, _interval(_low(lo), _high(hi)))


# ---------- arithmetic ----------

def neg(a: Interval) -> Interval:
    if a.is_bottom:
        return BOTTOM
    return _interval(-_high(a.hi), -_low(a.lo))


def add(a: Interval, b: Interval) -> Interval:
    if a.is_bottom or b.is_bottom:
        return BOTTOM
    return _interval(_low(a.lo) + _low(b.lo), _high(a.hi) + _high(b.hi))


def sub(a: Interval, b: Interval) -> Interval:
    return add(a, neg(b))


def _bounded(*intervals: Interval) -> bool:
    return all(i.lo is not None and i.hi is not None for i in intervals)


def mul(a: Interval, b: Interval) -> Interval:
    if a.is_bottom or b.is_bottom:
        return BOTTOM
    if not _bounded(a, b):
        return TOP
    corners = [a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi]
    return Interval(min(corners), max(corners))


def _nonzero_parts(b: Interval) -> Tuple[Interval, ...]:
    return tuple(part for part in (meet(b, Interval(None, -1)), meet(b, Interval(1, None))) if not part.is_bottom)


def div(a: Interval, b: Interval) -> Interval:
    """Truncating division over the non-zero part of the divisor."""
    if a.is_bottom or b.is_bottom:
        return BOTTOM
    result = BOTTOM
    for part in _nonzero_parts(b):
        if not _bounded(a, part):
            return TOP
        corners = [truncating_div(x, y) for x in (a.lo, a.hi) for y in (part.lo, part.hi)]
        result = join(result, Interval(min(corners), max(corners)))
    return result


def mod(a: Interval, b: Interval) -> Interval:
    """Truncating remainder: the sign follows the dividend, magnitude below the divisor's."""
    if a.is_bottom or b.is_bottom:
        return BOTTOM
    parts = _nonzero_parts(b)
    if not parts:
        return BOTTOM
    magnitude = max(max(abs(_low(p.lo)), abs(_high(p.hi))) for p in parts) - 1
    lo = max(_low(a.lo), -magnitude) if _low(a.lo) < 0 else 0
    hi = min(_high(a.hi), magnitude) if _high(a.hi) > 0 else 0
    return _interval(lo, hi)


def fit(value: Interval, width: IntWidth) -> Interval:
    """A result that may leave the width becomes the full-width interval."""
    if value.is_bottom or leq(value, full(width)):
        return value
    return full(width)


# ---------- comparisons ----------

def refine_compare(op: str, a: Interval, b: Interval) -> Tuple[Interval, Interval]:
    """Narrows a and b assuming `a op b` holds."""
    if op == "<":
        return meet(a, _interval(-INF, _high(b.hi) - 1)), meet(b, _interval(_low(a.lo) + 1, INF))
    if op == "<=":
        return meet(a, _interval(-INF, _high(b.hi))), meet(b, _interval(_low(a.lo), INF))
    if op == ">":
        b2, a2 = refine_compare("<", b, a)
        return a2, b2
    if op == ">=":
        b2, a2 = refine_compare("<=", b, a)
        return a2, b2
    if op == "==":
        both = meet(a, b)
        return both, both
    # !=: only a singleton on one side can cut a bound of the other
    return _cut(a, b), _cut(b, a)


def _cut(a: Interval, b: Interval) -> Interval:
    if not b.is_const or a.is_bottom:
        return a
    if a.is_const and a.lo == b.lo:
        return BOTTOM
    if a.lo == b.lo:
        return Interval(a.lo + 1, a.hi)
    if a.hi == b.lo:
        return Interval(a.lo, a.hi - 1)
    return a


def compare(op: str, a: Interval, b: Interval) -> Optional[bool]:
    """Three-valued comparison: True when it holds for every pair of values, False when for none."""
    if a.is_bottom or b.is_bottom:
        return True
    if op == ">":
        return compare("<", b, a)
    if op == ">=":
        return compare("<=", b, a)
    if op == "<":
        if _high(a.hi) < _low(b.lo):
            return True
        if _low(a.lo) >= _high(b.hi):
            return False
        return None
    if op == "<=":
        if _high(a.hi) <= _low(b.lo):
            return True
        if _low(a.lo) > _high(b.hi):
            return False
        return None
    equal = True if a.is_const and b.is_const and a.lo == b.lo else (False if meet(a, b).is_bottom else None)
    if op == "==":
        return equal
    return None if equal is None else not equal


# ---------- environments ----------

@dataclass(frozen=True)
class AbstractEnv:
    """Maps every in-scope variable to an interval. A bottom env is unreachable."""

    values: Mapping[str, Interval] = field(default_factory=dict)
    bottom: bool = False

    @classmethod
    def unreachable(cls) -> "AbstractEnv":
        return cls({}, True)

    @property
    def is_bottom(self) -> bool:
        return self.bottom

    def get(self, name: str) -> Interval:
        if self.bottom:
            return BOTTOM
        return self.values[name]

    def __contains__(self, name: str) -> bool:
        return name in self.values

    def set(self, name: str, value: Interval) -> "AbstractEnv":
        if self.bottom:
            return self
        if value.is_bottom:
            return AbstractEnv.unreachable()
        values = dict(self.values)
        values[name] = value
        return AbstractEnv(values)

    def drop(self, names: Iterable[str]) -> "AbstractEnv":
        if self.bottom:
            return self
        names = set(names)
        return AbstractEnv({k: v for k, v in self.values.items() if k not in names})

    def _pointwise(self, other: "AbstractEnv", op) -> "AbstractEnv":
        values: Dict[str, Interval] = {}
        for name in list(self.values) + [n for n in other.values if n not in self.values]:
            if name in self.values and name in other.values:
                values[name] = op(self.values[name], other.values[name])
            else:
                values[name] = self.values.get(name, other.values.get(name))
        return AbstractEnv(values)

    def join(self, other: "AbstractEnv") -> "AbstractEnv":
        if self.bottom:
            return other
        if other.bottom:
            return self
        return self._pointwise(other, join)

    def widen(self, other: "AbstractEnv", width: IntWidth) -> "AbstractEnv":
        if self.bottom:
            return other
        if other.bottom:
            return self
        return self._pointwise(other, lambda a, b: widen(a, b, width))

    def narrow(self, other: "AbstractEnv", width: IntWidth) -> "AbstractEnv":
        if self.bottom or other.bottom:
            return other
        env = self._pointwise(other, lambda a, b: narrow(a, b, width))
        if any(value.is_bottom for value in env.values.values()):
            return AbstractEnv.unreachable()
        return env

    def leq(self, other: "AbstractEnv") -> bool:
        if self.bottom:
            return True
        if other.bottom:
            return False
        return all(name in other.values and leq(value, other.values[name]) for name, value in self.values.items())

    def __str__(self):
        if self.bottom:
            return "bottom"
        return "{" + ", ".join(f"{name}: {value}" for name, value in self.values.items()) + "}"


# ---------- predicates ----------

def eval_term(env: AbstractEnv, term, constants: Mapping[str, int]) -> Interval:
    """Interval of a wrap-free predicate term. Division by zero is 0 inside predicates."""
    if isinstance(term, IntConst):
        return const(term.value)
    if isinstance(term, Var):
        if term.name in env:
            return env.get(term.name)
        if term.name in constants:
            return const(constants[term.name])
        return TOP
    if isinstance(term, (Result, Old)):
        return TOP
    if isinstance(term, Neg):
        return neg(eval_term(env, term.operand, constants))
    if isinstance(term, BinOp):
        left = eval_term(env, term.left, constants)
        right = eval_term(env, term.right, constants)
        if term.op in "/%":
            value = div(left, right) if term.op == "/" else mod(left, right)
            return join(value, const(0)) if right.contains(0) else value
        return {"+": add, "-": sub, "*": mul}[term.op](left, right)
    raise TypeError(f"not a term: {term!r}")


def check_pred(env: AbstractEnv, pred, constants: Mapping[str, int] = None) -> Optional[bool]:
    """Three-valued truth of pred over env: True (entailed), False (violated everywhere) or None."""
    constants = constants or {}
    if env.is_bottom:
        return True
    if isinstance(pred, BoolConst):
        return pred.value
    if isinstance(pred, Compare):
        return compare(pred.op, eval_term(env, pred.left, constants), eval_term(env, pred.right, constants))
    if isinstance(pred, Not):
        value = check_pred(env, pred.operand, constants)
        return None if value is None else not value
    if isinstance(pred, Implies):
        return check_pred(env, Or(Not(pred.left), pred.right), constants)
    left = check_pred(env, pred.left, constants)
    right = check_pred(env, pred.right, constants)
    if isinstance(pred, And):
        if left is False or right is False:
            return False
        return True if left and right else None
    if isinstance(pred, Or):
        if left or right:
            return True
        return False if left is False and right is False else None
    raise TypeError(f"not a predicate: {pred!r}")
