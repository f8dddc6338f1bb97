import random
from unittest import TestCase

from preguss.errors import SpecSyntaxError, UnknownConstruct
from preguss.frontend.parser import parse
from preguss.frontend.resolver import resolve
from preguss.specs.models import (
    FALSE, RESULT, TRUE, And, BinOp, Clause, ClauseKind, Compare, ContractEnv, Implies, IntConst, Neg, Not, Old,
    Or, Var,
)
from preguss.specs.parser import parse_clause, parse_predicate
from preguss.specs.render import render_clause, render_pred
from preguss.specs.utils import (
    conj, conjuncts, eval_pred, expr_to_pred, free_vars, implies, is_nonlinear, linear_form, negate, simplify,
    substitute,
)

NAMES = ["x", "y", "n", "INT_MIN"]


def random_term(rng, depth, allow_result=False):
    roll = rng.random()
    if depth <= 0 or roll < 0.3:
        choice = rng.randint(0, 3)
        if choice == 0:
            return IntConst(rng.randint(-9, 99))
        if allow_result and choice == 1:
            return rng.choice([RESULT, Old("x")])
        return Var(rng.choice(NAMES))
    if roll < 0.4:
        return Neg(random_term(rng, depth - 1, allow_result))
    op = rng.choice(["+", "-", "*", "/", "%"])
    return BinOp(op, random_term(rng, depth - 1, allow_result), random_term(rng, depth - 1, allow_result))


def random_pred(rng, depth, allow_result=False):
    roll = rng.random()
    if depth <= 0 or roll < 0.35:
        if rng.random() < 0.1:
            return rng.choice([TRUE, FALSE])
        op = rng.choice(["==", "!=", "<", "<=", ">", ">="])
        return Compare(op, random_term(rng, 2, allow_result), random_term(rng, 2, allow_result))
    if roll < 0.45:
        return Not(random_pred(rng, depth - 1, allow_result))
    cls = rng.choice([And, Or, Implies])
    return cls(random_pred(rng, depth - 1, allow_result), random_pred(rng, depth - 1, allow_result))


def random_clause(rng):
    kind = rng.choice(list(ClauseKind))
    if kind == ClauseKind.LOOP_ASSIGNS:
        return Clause(kind, variables=tuple(rng.sample(["i", "s", "n"], rng.randint(0, 2))))
    label = "overflow" if kind == ClauseKind.ASSERT and rng.random() < 0.5 else None
    return Clause(kind, random_pred(rng, 3, allow_result=kind == ClauseKind.ENSURES), label=label)


class ParseClauseTestCase(TestCase):

    def test_requires(self):
        clause = parse_clause("requires INT_MIN < x;")
        self.assertEqual(clause.kind, ClauseKind.REQUIRES)
        self.assertEqual(clause.body, Compare("<", Var("INT_MIN"), Var("x")))

    def test_ensures_result(self):
        clause = parse_clause("ensures \\result == x;")
        self.assertEqual(clause.body, Compare("==", RESULT, Var("x")))

    def test_ensures_old(self):
        clause = parse_clause("ensures \\result >= \\old(n);")
        self.assertEqual(clause.body.right, Old("n"))

    def test_unknown_construct(self):
        with self.assertRaises(UnknownConstruct) as ctx:
            parse_clause("requires \\valid(p);")
        self.assertEqual(ctx.exception.position, 9)

    def test_syntax_error(self):
        with self.assertRaises(SpecSyntaxError):
            parse_clause("requires x <;")
        with self.assertRaises(SpecSyntaxError):
            parse_clause("requires x < 1")

    def test_term_used_as_predicate(self):
        with self.assertRaises(SpecSyntaxError):
            parse_clause("requires x + 1;")

    def test_result_outside_ensures(self):
        with self.assertRaises(SpecSyntaxError):
            parse_clause("requires \\result == 1;")

    def test_labelled_assert(self):
        clause = parse_clause("assert division_by_0: x != 0;")
        self.assertEqual(clause.label, "division_by_0")
        self.assertEqual(clause.body, Compare("!=", Var("x"), IntConst(0)))

    def test_loop_clauses(self):
        invariant = parse_clause("loop invariant 0 <= i && i <= n;", anchor=7)
        self.assertEqual(invariant.anchor, 7)
        self.assertEqual(invariant.kind, ClauseKind.LOOP_INVARIANT)
        self.assertEqual(parse_clause("loop assigns i, s;").variables, ("i", "s"))
        self.assertEqual(parse_clause("loop assigns \\nothing;").variables, ())

    def test_implication_is_right_associative(self):
        pred = parse_predicate("a < 1 ==> b < 1 ==> c < 1")
        self.assertIsInstance(pred.right, Implies)

    def test_negative_literal(self):
        self.assertEqual(parse_predicate("-2147483647 <= x").left, IntConst(-2147483647))


class RenderClauseTestCase(TestCase):

    def test_examples(self):
        self.assertEqual(render_clause(Clause(ClauseKind.REQUIRES, Compare("!=", Var("x"), IntConst(0)))),
                         "requires x != 0;")
        self.assertEqual(render_clause(Clause(ClauseKind.ENSURES, TRUE)), "ensures \\true;")
        invariant = And(Compare("<=", IntConst(0), Var("i")), Compare("<=", Var("i"), Var("n")))
        self.assertEqual(render_clause(Clause(ClauseKind.LOOP_INVARIANT, invariant)),
                         "loop invariant 0 <= i && i <= n;")
        self.assertEqual(render_clause(Clause(ClauseKind.LOOP_ASSIGNS)), "loop assigns \\nothing;")

    def test_parenthesization(self):
        pred = Not(Compare("<", BinOp("*", BinOp("+", Var("x"), IntConst(1)), Var("y")), IntConst(3)))
        self.assertEqual(render_pred(pred), "!((x + 1) * y < 3)")
        self.assertEqual(render_pred(Compare("==", Neg(IntConst(5)), IntConst(-5))), "-(5) == -5")

    def test_round_trip_random_clauses(self):
        rng = random.Random(7)
        for _ in range(500):
            clause = random_clause(rng)
            text = render_clause(clause)
            self.assertEqual(parse_clause(text), clause, msg=text)


class SubstituteTestCase(TestCase):

    def test_callsite_instantiation(self):
        pred = parse_predicate("INT_MIN < x")
        self.assertEqual(substitute(pred, {"x": Var("INT_MIN")}), Compare("<", Var("INT_MIN"), Var("INT_MIN")))

    def test_identity(self):
        pred = parse_predicate("x < y")
        self.assertIs(substitute(pred, {}), pred)

    def test_result_binding(self):
        pred = parse_clause("ensures \\result == x;").body
        self.assertEqual(substitute(pred, {RESULT: Var("r1"), "x": IntConst(1)}),
                         Compare("==", Var("r1"), IntConst(1)))

    def test_simultaneous(self):
        pred = parse_predicate("x < y")
        self.assertEqual(substitute(pred, {"x": Var("y"), "y": Var("x")}), parse_predicate("y < x"))

    def test_composition(self):
        rng = random.Random(3)
        for _ in range(200):
            pred = random_pred(rng, 3)
            first = {"x": BinOp("+", Var("a"), IntConst(1))}
            second = {"y": BinOp("*", Var("b"), IntConst(2))}
            composed = dict(first)
            composed.update(second)
            self.assertEqual(substitute(substitute(pred, first), second), substitute(pred, composed))


class UtilsTestCase(TestCase):

    def test_simplify_closed(self):
        self.assertEqual(simplify(parse_predicate("INT_MIN < INT_MIN")), FALSE)
        self.assertEqual(simplify(parse_predicate("1 + 2 == 3")), TRUE)
        self.assertEqual(simplify(parse_predicate("\\true ==> x < 1")), parse_predicate("x < 1"))

    def test_conj_and_conjuncts(self):
        a, b = parse_predicate("x < 1"), parse_predicate("y < 1")
        self.assertEqual(conj([]), TRUE)
        self.assertEqual(conj([a, TRUE, b]), And(a, b))
        self.assertEqual(conj([a, FALSE]), FALSE)
        self.assertEqual(conjuncts(And(a, And(b, a))), [a, b, a])
        self.assertEqual(implies(TRUE, a), a)

    def test_negate(self):
        self.assertEqual(negate(parse_predicate("x < 1")), parse_predicate("x >= 1"))
        self.assertEqual(negate(Not(TRUE)), TRUE)

    def test_eval(self):
        pred = parse_predicate("x / 0 == 0 && -7 % 2 == -1 && 7 / -2 == -3")
        self.assertTrue(eval_pred(pred, {"x": 5}))
        self.assertFalse(eval_pred(parse_clause("ensures \\result == \\old(x);").body, {"\\result": 1, "\\old(x)": 2}))

    def test_linear_form(self):
        self.assertEqual(linear_form(parse_predicate("2 * x - (y - 3) == 0").left), ({"x": 2, "y": -1}, 3))
        self.assertIsNone(linear_form(parse_predicate("x * y == 0").left))

    def test_nonlinear_flag(self):
        self.assertTrue(is_nonlinear(parse_predicate("x * y <= 127")))
        self.assertFalse(is_nonlinear(parse_predicate("2 * y <= 127")))
        self.assertTrue(is_nonlinear(parse_predicate("10 / y == 1")))

    def test_free_vars(self):
        self.assertEqual(free_vars(parse_predicate("x < y + INT_MAX")), {"x", "y", "INT_MAX"})

    def test_expr_to_pred(self):
        typed = resolve(parse("int main(int x) { if (x && !(x > 2)) { return 1; } return 0; }"))
        cond = typed.function("main").body.stmts[0].cond
        self.assertEqual(expr_to_pred(cond), parse_predicate("x != 0 && x <= 2"))


class ContractEnvTestCase(TestCase):

    def test_with_clauses(self):
        env = ContractEnv()
        self.assertEqual(env.contract("abs").requires, ())
        clauses = [
            parse_clause("requires INT_MIN < x;", anchor=1),
            parse_clause("ensures \\result >= 0;", anchor=1),
            parse_clause("requires INT_MIN < x;", anchor=1),
            parse_clause("loop invariant 0 <= i;", anchor=12),
            parse_clause("loop assigns i;", anchor=12),
        ]
        updated = env.with_clauses(clauses, {1: "abs"})
        self.assertEqual(len(updated.contract("abs").requires), 1)
        self.assertEqual(len(updated.contract("abs").ensures), 1)
        self.assertEqual(updated.loop(12).assigns, ("i",))
        self.assertEqual(len(updated.loop(12).invariants), 1)
        self.assertEqual(env.contract("abs").requires, ())
