import re
from pathlib import Path
from typing import Optional

from lark import Lark, Transformer
from lark.exceptions import UnexpectedEOF, UnexpectedInput, VisitError

from preguss.errors import PregussError, SpecSyntaxError, UnknownConstruct
from preguss.specs.models import (
    FALSE, PRED_TYPES, RESULT, TERM_TYPES, TRUE, And, BinOp, Clause, ClauseKind, Compare, Implies, IntConst,
    Neg, Not, Old, Or, Var,
)
from preguss.specs.utils import mentions_old, mentions_result

GRAMMAR_PATH = Path(__file__).resolve().parent / "acsl.lark"

KNOWN_BUILTINS = {"\\true", "\\false", "\\result", "\\old", "\\nothing"}
BUILTIN_PATTERN = re.compile(r"\\[A-Za-z_]+")

_parser = Lark(GRAMMAR_PATH.read_text(), parser="lalr", maybe_placeholders=False)


def _pred(value):
    if not isinstance(value, PRED_TYPES):
        raise SpecSyntaxError("expected a predicate, found a term")
    return value


def _term(value):
    if not isinstance(value, TERM_TYPES):
        raise SpecSyntaxError("expected a term, found a predicate")
    return value


class ClauseBuilder(Transformer):
    """Builds Clause values, checking that terms and predicates are used where expected."""

    def __init__(self):
        super().__init__()
        self._parenthesized = set()

    def start(self, items):
        return items[0]

    # ---------- clauses ----------
    def requires(self, items):
        return Clause(ClauseKind.REQUIRES, _pred(items[0]))

    def ensures(self, items):
        return Clause(ClauseKind.ENSURES, _pred(items[0]))

    def assert_(self, items):
        return Clause(ClauseKind.ASSERT, _pred(items[0]))

    def labelled_assert(self, items):
        label, body = items
        return Clause(ClauseKind.ASSERT, _pred(body), label=str(label))

    def loop_invariant(self, items):
        return Clause(ClauseKind.LOOP_INVARIANT, _pred(items[0]))

    def loop_assigns_nothing(self, items):
        return Clause(ClauseKind.LOOP_ASSIGNS)

    def loop_assigns(self, items):
        return Clause(ClauseKind.LOOP_ASSIGNS, variables=tuple(str(name) for name in items))

    # ---------- predicates ----------
    def implies(self, items):
        return Implies(_pred(items[0]), _pred(items[1]))

    def or_(self, items):
        return Or(_pred(items[0]), _pred(items[1]))

    def and_(self, items):
        return And(_pred(items[0]), _pred(items[1]))

    def not_(self, items):
        return Not(_pred(items[0]))

    def compare(self, items):
        left, op, right = items
        return Compare(str(op), _term(left), _term(right))

    def true(self, items):
        return TRUE

    def false(self, items):
        return FALSE

    # ---------- terms ----------
    def _binary(self, op, items):
        return BinOp(op, _term(items[0]), _term(items[1]))

    def add(self, items):
        return self._binary("+", items)

    def sub(self, items):
        return self._binary("-", items)

    def mul(self, items):
        return self._binary("*", items)

    def div(self, items):
        return self._binary("/", items)

    def mod(self, items):
        return self._binary("%", items)

    def neg(self, items):
        (operand,) = items
        operand = _term(operand)
        if isinstance(operand, IntConst) and operand.value >= 0 and id(operand) not in self._parenthesized:
            return IntConst(-operand.value)
        return Neg(operand)

    def literal(self, items):
        return IntConst(int(items[0]))

    def var(self, items):
        return Var(str(items[0]))

    def result(self, items):
        return RESULT

    def old(self, items):
        return Old(str(items[-1]))

    def paren(self, items):
        (inner,) = items
        self._parenthesized.add(id(inner))
        return inner


def parse_clause(text: str, anchor: Optional[int] = None) -> Clause:
    for match in BUILTIN_PATTERN.finditer(text):
        if match.group(0) not in KNOWN_BUILTINS:
            raise UnknownConstruct(f"'{match.group(0)}' is outside the supported ACSL subset", match.start())

    try:
        tree = _parser.parse(text)
    except UnexpectedEOF:
        raise SpecSyntaxError("unexpected end of clause", len(text))
    except UnexpectedInput as e:
        raise SpecSyntaxError(f"unexpected input at line {e.line} column {e.column}", getattr(e, "pos_in_stream", None))

    try:
        clause = ClauseBuilder().transform(tree)
    except VisitError as e:
        if isinstance(e.orig_exc, PregussError):
            raise e.orig_exc
        raise

    if clause.body is not None and clause.kind != ClauseKind.ENSURES:
        if mentions_result(clause.body) or mentions_old(clause.body):
            raise SpecSyntaxError("\\result and \\old may only appear in ensures clauses")
    return clause.anchored(anchor)


def parse_predicate(text: str):
    """Parses a bare predicate, e.g. an assertion body."""
    return parse_clause(f"assert {text};").body
