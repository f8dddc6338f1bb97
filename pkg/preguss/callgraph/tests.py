import json
import random
from itertools import product
from unittest import TestCase

from preguss import settings
from preguss.absint.analyzer import analyze
from preguss.absint.models import AnalysisResult, AssertionKind, AssertionStatus
from preguss.callgraph.graph import build_call_graph, collect_assertions, post_order
from preguss.callgraph.models import CallGraph
from preguss.callgraph.queue import dump_queue, enqueue
from preguss.callgraph.slicing import build_vunit, filter_callees_by_dependency, relevant_variables
from preguss.errors import MutualRecursion
from preguss.frontend.corpus import ProgramGenerator
from preguss.frontend.interpreter import Interpreter, OutOfFuel
from preguss.frontend.models import IntWidth
from preguss.frontend.parser import parse
from preguss.frontend.resolver import resolve
from preguss.frontend.tests import ABS_SOURCE, ID_SOURCE
from preguss.specs.models import TRUE, Contract, ContractEnv

W8 = IntWidth(8)

independent_call = """
int f(int x) { return x + 1; }
int main(int p) {
    int a = f(p);
    int t = 10 / p;
    return t;
}
"""

both_calls = """
int f(int x) { return x + 1; }
int g(int x) { return x - 1; }
int main(int p) {
    int a = f(p);
    int b = g(p);
    int t = 10 / (a + b);
    return t;
}
"""

control_dependent = """
int f(int x) { return x + 1; }
int g(int x) { return x - 1; }
int main(int p) {
    int a = f(p);
    int b = g(p);
    int r = 1;
    if (a > 0) {
        r = 0;
    }
    int t = 10 / r;
    return t;
}
"""

early_return = """
int f(int x) { return x + 1; }
int g(int x) { return x - 1; }
int main(int p) {
    int a = f(p);
    int b = g(p);
    if (a > 0) {
        return 0;
    }
    int t = 10 / p;
    return t;
}
"""

three_levels = """
int leaf(int x) { return x; }
int middle(int x) { int y = leaf(x); return y; }
int main(int p) {
    int a = middle(p);
    int t = 10 / a;
    return t;
}
"""


def _pipeline(source, width=IntWidth(32)):
    program = resolve(parse(source), width)
    cg = build_call_graph(program)
    return program, cg, collect_assertions(analyze(program), cg, program)


def first_truth(program, function, args, target, havoc=None):
    """Truth of the target guard the first time it is evaluated, None when never reached."""
    seen = []

    def observe(node_id, kind, holds, env):
        if f"{kind}@{node_id}" == target and not seen:
            seen.append(holds)

    try:
        Interpreter(program, havoc=havoc, on_guard=observe).run(function, list(args))
    except OutOfFuel:
        return None
    return seen[0] if seen else None


class CallGraphTestCase(TestCase):

    def test_id_edges(self):
        cg = build_call_graph(resolve(parse(ID_SOURCE)))
        self.assertEqual(
            [(edge.caller, edge.callee) for edge in cg.edges],
            [("one", "id"), ("zero", "id"), ("main", "one"), ("main", "zero")],
        )
        self.assertEqual(cg.edges[0].node_id, 8)
        self.assertEqual(cg.callers("id"), ["one", "zero"])
        self.assertEqual(cg.transitive_callees("main"), {"one", "zero", "id"})
        self.assertTrue(cg.is_root("main"))

    def test_no_calls(self):
        cg = build_call_graph(resolve(parse("int main() { return 0; }")))
        self.assertEqual(cg.edges, [])
        self.assertEqual(post_order(cg), ["main"])

    def test_mutual_recursion(self):
        program = resolve(parse(
            "int f(int x) { int y = g(x); return y; }\n"
            "int g(int x) { int y = f(x); return y; }\n"
            "int main() { int r = f(1); return r; }\n"
        ))
        with self.assertRaises(MutualRecursion) as caught:
            build_call_graph(program)
        self.assertEqual(caught.exception.cycle, ["f", "g"])
        self.assertIn("f -> g -> f", str(caught.exception))

    def test_self_recursion(self):
        program = resolve(parse("int f(int x) { int y = f(x); return y; }\nint main() { int r = f(1); return r; }"))
        with self.assertLogs("preguss", level="ERROR"):
            with self.assertRaises(MutualRecursion) as caught:
                build_call_graph(program)
        self.assertEqual(caught.exception.cycle, ["f"])

    def test_post_order(self):
        self.assertEqual(post_order(build_call_graph(resolve(parse(ID_SOURCE)))), ["id", "one", "zero", "main"])
        self.assertEqual(post_order(build_call_graph(resolve(parse(ABS_SOURCE)))), ["abs", "main"])

    def test_post_order_puts_callees_first(self):
        for seed in range(100):
            cg = build_call_graph(resolve(parse(ProgramGenerator(seed).program()), W8))
            order = post_order(cg)
            self.assertEqual(sorted(order), sorted(cg.functions))
            for edge in cg.edges:
                self.assertLess(order.index(edge.callee), order.index(edge.caller))


class CollectAssertionsTestCase(TestCase):

    def test_id(self):
        _, _, assertions = _pipeline(ID_SOURCE)
        kinds = [a.kind for a in assertions]
        self.assertEqual(kinds.count(AssertionKind.DIV_BY_ZERO), 1)
        self.assertEqual(kinds.count(AssertionKind.CALLSITE), 4)
        callsite = next(a for a in assertions if a.kind == AssertionKind.CALLSITE)
        self.assertEqual(callsite.predicate, TRUE)
        self.assertEqual(callsite.status, AssertionStatus.PENDING)
        self.assertEqual((callsite.function, callsite.callee), ("one", "id"))
        self.assertEqual(callsite.label, "preconditions_of_id")
        self.assertIsNotNone(callsite.location)

    def test_abs(self):
        _, _, assertions = _pipeline(ABS_SOURCE)
        self.assertEqual(
            [a.kind for a in assertions],
            [AssertionKind.SIGNED_OVERFLOW, AssertionKind.CALLSITE, AssertionKind.CALLSITE],
        )

    def test_empty(self):
        self.assertEqual(collect_assertions(AnalysisResult([]), CallGraph([])), [])


class VUnitTestCase(TestCase):

    @classmethod
    def setUpClass(cls):
        cls.id_program, cls.id_cg, cls.id_assertions = _pipeline(ID_SOURCE)

    def test_division_in_one(self):
        target = next(a for a in self.id_assertions if a.kind == AssertionKind.DIV_BY_ZERO)
        unit = build_vunit(target, self.id_program, self.id_cg, ContractEnv())
        self.assertEqual(unit.host, "one")
        self.assertEqual(unit.slice, ["one", "id"])
        self.assertEqual(unit.callees, ["id"])
        self.assertEqual(unit.contracts, ContractEnv())

    def test_contract_snapshot_is_restricted(self):
        target = next(a for a in self.id_assertions if a.kind == AssertionKind.DIV_BY_ZERO)
        contracts = ContractEnv({name: Contract(name) for name in ("id", "one", "zero", "main")})
        unit = build_vunit(target, self.id_program, self.id_cg, contracts)
        self.assertEqual(set(unit.contracts.contracts), {"one", "id"})

    def test_leaf_host(self):
        program, cg, assertions = _pipeline(ABS_SOURCE)
        unit = build_vunit(assertions[0], program, cg, ContractEnv())
        self.assertEqual(unit.slice, ["abs"])

    def test_star_keeps_dependent_callee(self):
        for dependent in (0, 3, 9):
            program, cg, assertions = _pipeline(ProgramGenerator(dependent).star(dependent=dependent), W8)
            target = next(a for a in assertions if a.kind == AssertionKind.DIV_BY_ZERO)
            unit = build_vunit(target, program, cg, ContractEnv())
            self.assertEqual(unit.slice, ["main", f"c{dependent}"])
            self.assertEqual(len(unit.dropped), 9)

            plain = build_vunit(target, program, cg, ContractEnv(), filter_dependencies=False)
            self.assertEqual(len(plain.callees), 10)

    def test_independent_call(self):
        program, cg, assertions = _pipeline(independent_call)
        target = next(a for a in assertions if a.kind == AssertionKind.DIV_BY_ZERO)
        self.assertEqual(build_vunit(target, program, cg, ContractEnv()).slice, ["main"])

    def test_all_callees_feed_target(self):
        program, cg, assertions = _pipeline(both_calls)
        target = next(a for a in assertions if a.kind == AssertionKind.DIV_BY_ZERO)
        plain = build_vunit(target, program, cg, ContractEnv(), filter_dependencies=False)
        self.assertEqual(filter_callees_by_dependency(plain, program).slice, plain.slice)

    def test_control_dependence(self):
        program, cg, assertions = _pipeline(control_dependent)
        target = next(a for a in assertions if a.kind == AssertionKind.DIV_BY_ZERO)
        self.assertEqual(relevant_variables(target, program), {"r", "a", "p"})
        self.assertEqual(build_vunit(target, program, cg, ContractEnv()).slice, ["main", "f"])

    def test_earlier_return_guards_the_target(self):
        program, cg, assertions = _pipeline(early_return)
        target = next(a for a in assertions if a.kind == AssertionKind.DIV_BY_ZERO)
        self.assertEqual(relevant_variables(target, program), {"p", "a"})
        unit = build_vunit(target, program, cg, ContractEnv())
        self.assertEqual(unit.slice, ["main", "f"])
        self.assertEqual(unit.dropped, ["g"])

    def test_callsite_target_keeps_its_callee(self):
        program, cg, assertions = _pipeline(independent_call)
        target = next(a for a in assertions if a.kind == AssertionKind.CALLSITE)
        self.assertEqual(build_vunit(target, program, cg, ContractEnv()).slice, ["main", "f"])

    def test_two_layers(self):
        program, cg, assertions = _pipeline(three_levels)
        target = next(a for a in assertions if a.kind == AssertionKind.DIV_BY_ZERO)
        unit = build_vunit(target, program, cg, ContractEnv({"leaf": Contract("leaf", (), (TRUE,))}))
        self.assertEqual(unit.slice, ["main", "middle"])
        self.assertIn("leaf", unit.contracts.contracts)


class DependencyFilterSoundnessTestCase(TestCase):
    """Replacing a filtered-out callee by an arbitrary value never changes the target's truth."""

    havoc_values = (0, 1, -1, 7, W8.max_value, W8.min_value)

    def _check(self, program, unit, inputs):
        for args in inputs:
            expected = first_truth(program, unit.host, args, unit.target.id)
            if expected is None:
                continue
            for value in self.havoc_values:
                havoc = {name: (lambda _, value=value: value) for name in unit.dropped}
                actual = first_truth(program, unit.host, args, unit.target.id, havoc)
                if actual is not None:
                    self.assertEqual(actual, expected, msg=f"{unit.target.id} with {args} and {value}")

    def test_star(self):
        program, cg, assertions = _pipeline(ProgramGenerator(1).star(dependent=4), W8)
        target = next(a for a in assertions if a.kind == AssertionKind.DIV_BY_ZERO)
        unit = build_vunit(target, program, cg, ContractEnv())
        self._check(program, unit, [(p,) for p in range(W8.min_value, W8.max_value + 1)])

    def test_early_return(self):
        program, cg, assertions = _pipeline(early_return, W8)
        target = next(a for a in assertions if a.kind == AssertionKind.DIV_BY_ZERO)
        unit = build_vunit(target, program, cg, ContractEnv())
        self._check(program, unit, [(p,) for p in range(W8.min_value, W8.max_value + 1)])

    def test_generated_programs(self):
        rng = random.Random(0)
        checked = 0
        for seed in range(settings.CORPUS_SIZE // 5):
            program, cg, assertions = _pipeline(ProgramGenerator(seed, functions=4).program(), W8)
            for assertion in assertions:
                if assertion.kind == AssertionKind.CALLSITE:
                    continue
                unit = build_vunit(assertion, program, cg, ContractEnv())
                if not unit.dropped or any(cg.callers(name) != [unit.host] for name in unit.dropped):
                    continue
                params = len(program.function(unit.host).params)
                domain = range(W8.min_value, W8.max_value + 1)
                if params <= 1:
                    inputs = list(product(domain, repeat=params))
                else:
                    inputs = [tuple(rng.choice(domain) for _ in range(params)) for _ in range(200)]
                self._check(program, unit, inputs)
                checked += 1
        self.assertGreater(checked, 0)


class QueueTestCase(TestCase):

    def test_id_order(self):
        program, cg, assertions = _pipeline(ID_SOURCE)
        queue = enqueue(assertions, cg, program)
        self.assertEqual(
            [unit.target.id for unit in queue][:3],
            ["callsite_precondition@8", "division_by_0@11", "callsite_precondition@17"],
        )
        self.assertEqual([unit.host for unit in queue], ["one", "one", "zero", "main", "main"])
        self.assertEqual([unit.priority for unit in queue], list(range(5)))

    def test_abs_order(self):
        program, cg, assertions = _pipeline(ABS_SOURCE)
        queue = enqueue(assertions, cg, program)
        self.assertEqual(
            [unit.target.kind for unit in queue],
            [AssertionKind.SIGNED_OVERFLOW, AssertionKind.CALLSITE, AssertionKind.CALLSITE],
        )
        self.assertEqual([unit.target.callee for unit in queue][1:], ["abs", "abs"])

    def test_empty_queue(self):
        program, cg, _ = _pipeline("int main() { return 0; }")
        self.assertEqual(len(enqueue([], cg, program)), 0)

    def test_queue_order_and_two_layers(self):
        for seed in range(100):
            program, cg, assertions = _pipeline(ProgramGenerator(seed).program(), W8)
            queue = enqueue(assertions, cg, program)
            self.assertEqual(len(queue), len(assertions))
            for later, unit in enumerate(queue):
                allowed = {unit.host, *cg.callees(unit.host)}
                self.assertTrue(set(unit.slice) <= allowed)
                for earlier in range(later):
                    self.assertNotIn(unit.host, cg.transitive_callees(queue[earlier].host))

    def test_dump(self):
        program, cg, assertions = _pipeline(ID_SOURCE)
        dumped = json.loads(dump_queue(enqueue(assertions, cg, program)))
        first = dumped["units"][1]
        self.assertEqual(first["assertion"], "division_by_0@11")
        self.assertEqual(first["slice"], ["one", "id"])
        self.assertEqual(first["kind"], "division_by_0")
