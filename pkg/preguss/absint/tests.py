import random
from itertools import product
from unittest import TestCase

from preguss import settings
from preguss.absint.analyzer import analyze, eval_expr
from preguss.absint.domain import (
    BOTTOM, AbstractEnv, Interval, check_pred, const, div, join, leq, meet, mod, narrow, widen,
)
from preguss.absint.guards import instrument, overflow_capable
from preguss.absint.models import AnalysisConfig, AssertionKind, AssertionStatus
from preguss.errors import MutualRecursion, UnknownAssertion
from preguss.frontend.corpus import ProgramGenerator
from preguss.frontend.interpreter import Interpreter, OutOfFuel
from preguss.frontend.models import ArithExpr, IntWidth, NegExpr, WhileStmt, walk
from preguss.frontend.parser import parse
from preguss.frontend.resolver import resolve
from preguss.frontend.tests import ABS_SOURCE, ID_SOURCE
from preguss.specs.parser import parse_predicate
from preguss.specs.render import render_pred

W8 = IntWidth(8)
W32 = IntWidth(32)

counting_loop = """
int main() {
    int i = 0;
    while (i < 10) {
        i = i + 1;
    }
    return i;
}
"""


def _expr(source_expr, params="int x"):
    typed = resolve(parse(f"int main({params}) {{ return {source_expr}; }}"), W8)
    return typed.function("main").body.stmts[0].value


def _cond(source_cond, params="int x, int y"):
    typed = resolve(parse(f"int main({params}) {{ if ({source_cond}) {{ return 1; }} return 0; }}"), W8)
    return typed.function("main").body.stmts[0].cond


def random_expr(rng, depth):
    if depth <= 0 or rng.random() < 0.3:
        return rng.choice(["x", "y", str(rng.randint(-3, 5))])
    op = rng.choice(["+", "-", "*", "/", "%", "neg"])
    if op == "neg":
        return f"-({random_expr(rng, depth - 1)})"
    return f"({random_expr(rng, depth - 1)} {op} {random_expr(rng, depth - 1)})"


def random_cond(rng, depth):
    op = rng.choice(["<", "<=", "==", "!="])
    comparison = f"{random_expr(rng, depth)} {op} {random_expr(rng, depth)}"
    if rng.random() < 0.5:
        return comparison
    logic = rng.choice(["&&", "||"])
    return f"({comparison}) {logic} (x != 0)"


def random_interval(rng, lo=-128, hi=127):
    a, b = rng.randint(lo, hi), rng.randint(lo, hi)
    return Interval(min(a, b), max(a, b))


class IntervalTestCase(TestCase):

    def test_bottom_is_designated(self):
        self.assertTrue(BOTTOM.is_bottom)
        self.assertFalse(Interval(0, 0).is_bottom)
        with self.assertRaises(ValueError):
            Interval(2, 1)
        self.assertEqual(meet(Interval(0, 1), Interval(3, 4)), BOTTOM)
        self.assertEqual(join(BOTTOM, Interval(3, 4)), Interval(3, 4))

    def test_widen(self):
        self.assertEqual(widen(Interval(0, 1), Interval(0, 2), W32), Interval(0, W32.max_value))
        self.assertEqual(widen(Interval(0, 5), Interval(0, 5), W32), Interval(0, 5))
        self.assertEqual(widen(Interval(0, 5), Interval(-1, 5), W8), Interval(-128, 5))

    def test_widen_contains_both(self):
        rng = random.Random(1)
        for _ in range(500):
            a, b = random_interval(rng), random_interval(rng)
            result = widen(a, b, W8)
            self.assertTrue(leq(a, result) and leq(b, result))

    def test_narrow(self):
        self.assertEqual(narrow(Interval(0, 127), Interval(0, 10), W8), Interval(0, 10))
        self.assertEqual(narrow(Interval(0, 50), Interval(0, 10), W8), Interval(0, 50))

    def test_division(self):
        self.assertEqual(div(Interval(-7, 7), Interval(2, 2)), Interval(-3, 3))
        self.assertEqual(div(Interval(10, 10), Interval(-1, 1)), Interval(-10, 10))
        self.assertEqual(div(Interval(10, 10), Interval(0, 0)), BOTTOM)
        self.assertEqual(mod(Interval(-7, 7), Interval(3, 3)), Interval(-2, 2))
        self.assertEqual(mod(Interval(0, 1), Interval(5, 9)), Interval(0, 1))

    def test_division_is_sound(self):
        rng = random.Random(2)
        for _ in range(300):
            a, b = random_interval(rng, -20, 20), random_interval(rng, -5, 5)
            quotient, remainder = div(a, b), mod(a, b)
            for x, y in product(range(a.lo, a.hi + 1), range(b.lo, b.hi + 1)):
                if y == 0:
                    continue
                q = abs(x) // abs(y) * (1 if (x >= 0) == (y >= 0) else -1)
                self.assertTrue(quotient.contains(q))
                self.assertTrue(remainder.contains(x - y * q))

    def test_check_pred_three_valued(self):
        env = AbstractEnv({"x": Interval(-3, 3)})
        self.assertIs(check_pred(env, parse_predicate("-2147483647 <= x")), True)
        self.assertIs(check_pred(env, parse_predicate("x > 5")), False)
        self.assertIsNone(check_pred(env, parse_predicate("x != 0")))
        self.assertIs(check_pred(env, parse_predicate("x != 0 || x < 10")), True)
        self.assertIs(check_pred(AbstractEnv.unreachable(), parse_predicate("x > 5")), True)
        self.assertIs(check_pred(AbstractEnv(), parse_predicate("INT_MIN < 0"), {"INT_MIN": -128}), True)


class EvalExprTestCase(TestCase):

    def test_symmetric_negation(self):
        env = AbstractEnv({"x": Interval(-3, 3)})
        self.assertEqual(eval_expr(env, _expr("-x"), W32), Interval(-3, 3))

    def test_identity(self):
        env = AbstractEnv({"x": Interval(5, 5)})
        self.assertEqual(eval_expr(env, _expr("x"), W8), Interval(5, 5))

    def test_wrapping_negation(self):
        env = AbstractEnv({"x": Interval(-128, -128)})
        value = eval_expr(env, _expr("-x"), W8)
        self.assertTrue(value.contains(-128))
        self.assertEqual(value, Interval(-128, 127))

    def test_comparisons_and_logic(self):
        env = AbstractEnv({"x": Interval(1, 4), "y": Interval(-2, 0)})
        self.assertEqual(eval_expr(env, _cond("x > y"), W8), const(1))
        self.assertEqual(eval_expr(env, _cond("x < 2 && y < 0"), W8), Interval(0, 1))
        self.assertEqual(eval_expr(env, _cond("y > 0 && x / y > 1"), W8), const(0))

    def test_monotonicity(self):
        rng = random.Random(5)
        for _ in range(300):
            if rng.random() < 0.7:
                expr = _expr(random_expr(rng, 3), "int x, int y")
            else:
                expr = _cond(random_cond(rng, 2))
            small = {"x": random_interval(rng, -10, 10), "y": random_interval(rng, -10, 10)}
            large = {name: join(value, random_interval(rng, -10, 10)) for name, value in small.items()}
            inner = eval_expr(AbstractEnv(small), expr, W8)
            outer = eval_expr(AbstractEnv(large), expr, W8)
            self.assertTrue(leq(inner, outer), msg=f"{inner} not within {outer}")


class AnalyzeTestCase(TestCase):

    @classmethod
    def setUpClass(cls):
        cls.abs_program = resolve(parse(ABS_SOURCE))
        cls.id_program = resolve(parse(ID_SOURCE))

    def test_abs_overflow_alarm(self):
        result = analyze(self.abs_program, W32)
        self.assertEqual(len(result.assertions), 1)
        assertion = result.assertions[0]
        self.assertEqual(assertion.kind, AssertionKind.SIGNED_OVERFLOW)
        self.assertEqual(render_pred(assertion.predicate), "-2147483647 <= x")
        self.assertIsInstance(self.abs_program.node(assertion.node_id), NegExpr)
        self.assertEqual(assertion.function, "abs")
        self.assertEqual(assertion.status, AssertionStatus.ALARM)
        self.assertEqual(result.summary(), {"overflow": {"alarm": 1}})

    def test_abs_proven_without_int_min(self):
        program = resolve(parse(ABS_SOURCE.replace("abs(INT_MIN)", "abs(-7)")))
        self.assertEqual(analyze(program).assertions[0].status, AssertionStatus.PROVEN)

    def test_id_division_alarm(self):
        result = analyze(self.id_program)
        self.assertEqual([a.id for a in result.assertions], ["division_by_0@11"])
        assertion = result.assertion("division_by_0@11")
        self.assertEqual(render_pred(assertion.predicate), "x != 0")
        self.assertEqual(assertion.function, "one")
        self.assertEqual(assertion.status, AssertionStatus.ALARM)
        self.assertEqual(result.returns["id"], Interval(0, 1))

    def test_id_with_return_propagation(self):
        result = analyze(self.id_program, config=AnalysisConfig(propagate_returns=True))
        self.assertEqual(result.assertions[0].status, AssertionStatus.PROVEN)

    def test_constant_divisor(self):
        result = analyze(resolve(parse("int main() { return 1 / 2; }")))
        self.assertEqual(len(result.assertions), 1)
        self.assertEqual(render_pred(result.assertions[0].predicate), "2 != 0")
        self.assertEqual(result.assertions[0].status, AssertionStatus.PROVEN)

    def test_min_div_minus_one(self):
        program = resolve(parse("int main(int x, int y) { return x / y; }"), W8)
        result = analyze(program)
        kinds = [a.kind for a in result.assertions]
        self.assertEqual(kinds, [AssertionKind.DIV_BY_ZERO, AssertionKind.SIGNED_OVERFLOW])
        self.assertEqual(render_pred(result.assertions[1].predicate), "x != -128 || y != -1")

    def test_addition_guard_text(self):
        program = resolve(parse("int main(int x) { return x + 1; }"), W8)
        self.assertEqual(render_pred(analyze(program).assertions[0].predicate), "-128 <= x + 1 && x + 1 <= 127")

    def test_unknown_assertion(self):
        with self.assertRaises(UnknownAssertion):
            analyze(self.abs_program).assertion("overflow@999")

    def test_loop_fixpoint_and_narrowing(self):
        program = resolve(parse(counting_loop), W8)
        result = analyze(program)
        loop = next(node for node in walk(program.program) if isinstance(node, WhileStmt))
        head = result.envs[loop.node_id].get("i")
        self.assertTrue(leq(head, Interval(0, 127)))
        self.assertTrue(head.contains(0) and head.contains(10))
        self.assertEqual(result.returns["main"], Interval(10, 10))
        self.assertEqual(result.assertions[0].status, AssertionStatus.PROVEN)
        self.assertEqual(Interpreter(program).run().value, 10)

    def test_recursion_is_rejected(self):
        program = resolve(parse("int f(int x) { int y = f(x); return y; }\nint main() { int r = f(1); return r; }"))
        with self.assertRaises(MutualRecursion):
            analyze(program)

    def test_instrumentation_completeness(self):
        for seed in range(100):
            program = resolve(parse(ProgramGenerator(seed).program()), W8)
            divisions = [n for f in program.functions for n in walk(f) if isinstance(n, ArithExpr) and n.op in "/%"]
            capable = [n for f in program.functions for n in walk(f) if overflow_capable(n, program)]
            self.assertEqual(len(instrument(program)), len(divisions) + len(capable))
            ids = [a.id for a in instrument(program)]
            self.assertEqual(len(ids), len(set(ids)))


class AnalyzerSoundnessTestCase(TestCase):
    """Bounded-exhaustive check at 8 bits: every concrete RTE lands on an Alarm."""

    def test_no_missed_rte(self):
        checked = 0
        for seed in range(settings.CORPUS_SIZE):
            program = resolve(parse(ProgramGenerator(seed).program()), W8)
            result = analyze(program)
            status = {a.id: a.status for a in result.assertions}
            entry = program.function(program.entry)
            inputs = product(range(W8.min_value, W8.max_value + 1), repeat=len(entry.params))

            def observe(node_id, kind, holds, env):
                if not holds:
                    self.assertEqual(status[f"{kind}@{node_id}"], AssertionStatus.ALARM, msg=f"seed {seed}")

            for args in inputs:
                try:
                    Interpreter(program, on_guard=observe).run(args=list(args))
                except OutOfFuel:
                    continue
                checked += 1
        self.assertGreater(checked, 0)
