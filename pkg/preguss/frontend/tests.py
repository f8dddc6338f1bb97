from pathlib import Path
from unittest import TestCase

from preguss.errors import MiniCSyntaxError, ResolveError, UnknownNodeId
from preguss.frontend.corpus import ProgramGenerator
from preguss.frontend.interpreter import DIVISION_BY_ZERO, OVERFLOW, Interpreter, OutOfFuel
from preguss.frontend.models import (
    ArithExpr, CallStmt, ExprStmt, FunctionDef, IfStmt, IntLiteral, IntWidth, NegExpr, ReturnStmt, WhileStmt, walk,
)
from preguss.frontend.parser import parse, parse_file
from preguss.frontend.render import render, render_functions
from preguss.frontend.resolver import resolve, truncating_div, truncating_mod
from preguss.specs.models import ContractEnv, Contract
from preguss.specs.parser import parse_clause, parse_predicate

STATIC = Path(__file__).resolve().parent / "static"

ABS_SOURCE = (STATIC / "abs.mc").read_text()
ID_SOURCE = (STATIC / "id.mc").read_text()

division_source = """
int half(int x) {
    return x / 2;
}

int main(int n) {
    int total = 0;
    int i = 0;
    while (i < n) {
        total = total + half(i);
        i = i + 1;
    }
    return total;
}
"""


class ParseTestCase(TestCase):

    def test_parse_abs(self):
        program = parse(ABS_SOURCE, "abs.mc")
        self.assertEqual([func.name for func in program.functions], ["abs", "main"])
        self.assertEqual(program.functions[0].params, ["x"])
        self.assertEqual(program.functions[1].returns, "void")

    def test_parse_id_verbatim(self):
        program = parse(ID_SOURCE)
        self.assertEqual([func.name for func in program.functions], ["id", "one", "zero", "main"])
        one = program.function("one")
        self.assertIsInstance(one.body.stmts[1], ExprStmt)
        self.assertIsInstance(program.function("zero").body.stmts[0], CallStmt)

    def test_empty_file(self):
        program = parse("")
        self.assertEqual(program.functions, [])

    def test_comments_and_directives_ignored(self):
        program = parse("#include <limits.h>\n// line\n/* block\n comment */ int f() { return 1; }")
        self.assertEqual(len(program.functions), 1)

    def test_syntax_error_location(self):
        source = "int f( { }"
        with self.assertRaises(MiniCSyntaxError) as ctx:
            parse(source, "bad.mc")
        error = ctx.exception
        self.assertEqual(error.location.line, 1)
        self.assertEqual(error.location.file, "bad.mc")
        self.assertTrue(error.expected)
        self.assertIn("bad.mc:1:", error.diagnostic())

    def test_unexpected_end_of_input(self):
        source = "int f() {\n  return 1;\n"
        with self.assertRaises(MiniCSyntaxError) as ctx:
            parse(source)
        location = ctx.exception.location
        self.assertLessEqual(location.line, source.count("\n") + 1)

    def test_locations_inside_source(self):
        program = parse(ABS_SOURCE)
        lines = ABS_SOURCE.split("\n")
        for node in walk(program):
            if node.location is None:
                continue
            self.assertLessEqual(node.location.line, len(lines))
            self.assertLessEqual(node.location.column, len(lines[node.location.line - 1]) + 1)

    def test_node_ids_deterministic(self):
        first = [(node.node_id, type(node).__name__) for node in walk(parse(ID_SOURCE))]
        second = [(node.node_id, type(node).__name__) for node in walk(parse(ID_SOURCE))]
        self.assertEqual(first, second)
        self.assertEqual([node_id for node_id, _ in first], list(range(len(first))))

    def test_negative_literals_fold(self):
        program = parse("int f() { return -5 - -(3); }")
        value = program.functions[0].body.stmts[0].value
        self.assertEqual(value.left, IntLiteral(-5))
        self.assertIsInstance(value.right, NegExpr)

    def test_unbraced_branches_become_blocks(self):
        func = parse(ABS_SOURCE).functions[0]
        branch = func.body.stmts[0]
        self.assertIsInstance(branch, IfStmt)
        self.assertIsInstance(branch.then.stmts[0], ReturnStmt)
        self.assertIsInstance(branch.orelse.stmts[0], ReturnStmt)

    def test_parse_file(self):
        program = parse_file(STATIC / "abs.mc")
        self.assertTrue(str(program.functions[0].location).endswith("abs.mc:2:1"))


class ResolveTestCase(TestCase):

    def test_resolve_abs(self):
        typed = resolve(parse(ABS_SOURCE))
        self.assertEqual(typed.entry, "main")
        self.assertEqual(typed.constants["INT_MIN"], -2147483648)
        abs_fn = typed.function("abs")
        self.assertEqual(abs_fn.returns, "int")
        neg = next(node for node in walk(abs_fn) if isinstance(node, NegExpr))
        self.assertEqual(typed.types[neg.node_id], "int")
        self.assertEqual(typed.host_of(neg.node_id), "abs")

    def test_width_scales_builtin_constants(self):
        typed = resolve(parse(ABS_SOURCE), IntWidth(8))
        self.assertEqual(typed.constants["INT_MIN"], -128)
        self.assertEqual(typed.constants["INT_MAX"], 127)

    def test_unsupported_width(self):
        with self.assertRaises(ValueError):
            IntWidth(12)

    def assertResolveError(self, source, kind):
        with self.assertRaises(ResolveError) as ctx:
            resolve(parse(source))
        self.assertEqual(ctx.exception.kind, kind)
        self.assertIsNotNone(ctx.exception.location)
        return ctx.exception

    def test_arity_mismatch(self):
        source = ABS_SOURCE.replace("abs(42)", "abs(1, 2)")
        error = self.assertResolveError(source, "arity-mismatch")
        self.assertEqual(error.location.line, 9)

    def test_unknown_identifier(self):
        self.assertResolveError("int main() { return y; }", "unknown-identifier")

    def test_unknown_function(self):
        self.assertResolveError("int main() { return g(1); }", "unknown-identifier")

    def test_duplicate_definition(self):
        self.assertResolveError("int f() { return 1; }\nint f() { return 2; }\nvoid main() { }", "duplicate-definition")

    def test_no_shadowing(self):
        self.assertResolveError("int main(int x) { int x = 1; return x; }", "duplicate-definition")

    def test_type_mismatch_void_value(self):
        self.assertResolveError("void g() { }\nint main() { int a = g(); return a; }", "type-mismatch")

    def test_type_mismatch_bool_as_int(self):
        self.assertResolveError("int main(int x) { return x < 1; }", "type-mismatch")

    def test_assign_to_constant(self):
        self.assertResolveError("int K = 3;\nint main() { K = 4; return K; }", "type-mismatch")

    def test_call_inside_expression(self):
        self.assertResolveError("int g() { return 1; }\nint main() { return g() + 1; }", "unsupported-call-position")

    def test_missing_entry(self):
        self.assertResolveError("int f() { return 1; }", "unknown-identifier")

    def test_constants_evaluated(self):
        typed = resolve(parse("int K = INT_MAX / 2;\nint main() { return K; }"), IntWidth(8))
        self.assertEqual(typed.constants["K"], 63)

    def test_truncating_division(self):
        self.assertEqual(truncating_div(-7, 2), -3)
        self.assertEqual(truncating_mod(-7, 2), -1)
        self.assertEqual(truncating_div(7, -2), -3)
        self.assertEqual(truncating_mod(7, -2), 1)


class RenderTestCase(TestCase):

    def test_requires_above_function(self):
        typed = resolve(parse(ABS_SOURCE))
        abs_fn = typed.function("abs")
        clause = parse_clause("requires INT_MIN < x;", abs_fn.node_id)
        lines = render(typed, [(abs_fn.node_id, clause)]).split("\n")
        index = lines.index("/*@ requires INT_MIN < x; */")
        self.assertEqual(lines[index + 1], "int abs(int x) {")

    def test_fig2_layout(self):
        typed = resolve(parse(ID_SOURCE))
        id_fn = typed.function("id")
        clause = parse_clause("ensures \\result == x;", id_fn.node_id)
        text = render(typed, [(id_fn.node_id, clause)])
        self.assertTrue(text.startswith("/*@ ensures \\result == x; */\nint id(int x) {\n    return x;\n}\n"))

    def test_expression_anchor_moves_to_statement(self):
        typed = resolve(parse(ABS_SOURCE))
        neg = next(node for node in walk(typed.program) if isinstance(node, NegExpr))
        clause = parse_clause("assert overflow: -2147483647 <= x;")
        lines = render(typed, [(neg.node_id, clause)]).split("\n")
        index = lines.index("        /*@ assert overflow: -2147483647 <= x; */")
        self.assertEqual(lines[index + 1], "        return -x;")

    def test_unknown_node_id(self):
        typed = resolve(parse(ABS_SOURCE))
        with self.assertRaises(UnknownNodeId):
            render(typed, [(999, parse_clause("requires \\true;"))])

    def test_identity_round_trip(self):
        program = parse(ABS_SOURCE)
        text = render(program)
        self.assertEqual(parse(text), program)
        self.assertEqual(render(parse(text)), text)

    def test_generated_round_trip(self):
        for seed in range(200):
            source = ProgramGenerator(seed, functions=4, depth=3).program()
            program = parse(source)
            self.assertEqual(parse(render(program)), program, msg=source)

    def test_render_functions_subset(self):
        typed = resolve(parse(ID_SOURCE))
        text = render_functions(typed, ["one", "id"])
        self.assertIn("int id(int x)", text)
        self.assertIn("void one()", text)
        self.assertNotIn("void main()", text)

    def test_loop_labels(self):
        typed = resolve(parse(division_source))
        loop = next(node for node in walk(typed.program) if isinstance(node, WhileStmt))
        self.assertIn(f"/* loop {loop.node_id} */", render(typed, loop_labels=True))
        self.assertNotIn("/* loop", render(typed))


class InterpreterTestCase(TestCase):

    def test_abs_overflow_at_int_min(self):
        typed = resolve(parse(ABS_SOURCE))
        result = Interpreter(typed).run()
        self.assertEqual(result.event.kind, OVERFLOW)
        self.assertEqual(result.event.function, "abs")
        self.assertIsInstance(typed.node(result.event.node_id), NegExpr)

    def test_abs_direct_call(self):
        typed = resolve(parse(ABS_SOURCE), IntWidth(8))
        self.assertEqual(Interpreter(typed).run("abs", [-5]).value, 5)
        self.assertEqual(Interpreter(typed).run("abs", [-128]).event.kind, OVERFLOW)

    def test_id_runs_clean(self):
        typed = resolve(parse(ID_SOURCE))
        result = Interpreter(typed).run()
        self.assertIsNone(result.event)
        self.assertIsNone(result.value)

    def test_division_by_zero(self):
        typed = resolve(parse("int main(int x) { return 10 / x; }"), IntWidth(8))
        result = Interpreter(typed).run(args=[0])
        self.assertEqual(result.event.kind, DIVISION_BY_ZERO)
        self.assertIsInstance(typed.node(result.event.node_id), ArithExpr)

    def test_min_div_minus_one_overflows(self):
        typed = resolve(parse("int main(int x) { return x / -1; }"), IntWidth(8))
        self.assertEqual(Interpreter(typed).run(args=[-128]).event.kind, OVERFLOW)
        self.assertEqual(Interpreter(typed).run(args=[-127]).value, 127)

    def test_loop(self):
        typed = resolve(parse(division_source), IntWidth(16))
        self.assertEqual(Interpreter(typed).run(args=[5]).value, 0 + 0 + 1 + 1 + 2)

    def test_fuel(self):
        typed = resolve(parse("void main() { while (1) { } }"))
        with self.assertRaises(OutOfFuel):
            Interpreter(typed, fuel=100).run()

    def test_runtime_contract_check(self):
        typed = resolve(parse(ABS_SOURCE))
        contracts = ContractEnv({"abs": Contract("abs", requires=(parse_predicate("INT_MIN < x"),))})
        result = Interpreter(typed, contracts=contracts).run()
        self.assertEqual(result.event.kind, "callsite")
        self.assertEqual(result.event.function, "main")

    def test_havoc(self):
        typed = resolve(parse(ID_SOURCE), IntWidth(8))
        result = Interpreter(typed, havoc={"id": lambda args: 0}).run("one")
        self.assertEqual(result.event.kind, DIVISION_BY_ZERO)

    def test_generated_programs_resolve(self):
        for seed in range(100):
            source = ProgramGenerator(seed).program()
            typed = resolve(parse(source), IntWidth(8))
            self.assertIsInstance(typed.function(typed.entry), FunctionDef)
            params = typed.function(typed.entry).params
            Interpreter(typed).run(args=[3] * len(params))
