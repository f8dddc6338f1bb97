from itertools import product
from unittest import TestCase, skipIf

from preguss import settings
from preguss.absint.analyzer import analyze
from preguss.absint.guards import instrument
from preguss.absint.models import AssertionKind
from preguss.callgraph.graph import build_call_graph, collect_assertions
from preguss.callgraph.slicing import build_vunit
from preguss.errors import MissingLoopInvariant, SmtIOError, UnknownAssertion
from preguss.frontend.corpus import ProgramGenerator
from preguss.frontend.interpreter import Interpreter, OutOfFuel
from preguss.frontend.models import IntWidth, WhileStmt, call_sites, walk
from preguss.frontend.parser import parse
from preguss.frontend.resolver import resolve
from preguss.frontend.tests import ABS_SOURCE, ID_SOURCE
from preguss.specs.models import FALSE, ContractEnv
from preguss.specs.parser import parse_clause, parse_predicate
from preguss.specs.utils import eval_pred, free_vars
from preguss.verifier import smt
from preguss.verifier.discharge import check_callsite, confirms, discharge, discharge_all
from preguss.verifier.models import (
    DischargeConfig, ObligationKind, UnitVerification, VCStatus, VerificationCondition,
)
from preguss.verifier.normalize import Decision, IntervalSet, Sequent, bounds, decide_exact, one_point, solution_set, split
from preguss.verifier.vcgen import gen_vcs, obligation_vc
from preguss.verifier.wp import wp

W8 = IntWidth(8)
W32 = IntWidth(32)
NO_SMT = DischargeConfig(use_smt=False)

counting_loop = """
int main() {
    int i = 0;
    while (i < 10) {
        i = i + 1;
    }
    return i;
}
"""


def _program(source, width=W32):
    return resolve(parse(source), width)


def _contracts(program, *clauses):
    """Clauses as (text, function) pairs, anchored at the named function."""
    anchors = {func.node_id: func.name for func in program.functions}
    parsed = [parse_clause(text, program.function(name).node_id) for text, name in clauses]
    return ContractEnv().with_clauses(parsed, anchors)


def _vc(hypothesis, goal, width=W8):
    return VerificationCondition(
        id="target", hypothesis=parse_predicate(hypothesis), goal=parse_predicate(goal), origin=0,
        description="", kind=ObligationKind.TARGET, function="main", width=width,
    )


def _loop_id(program):
    return next(node.node_id for node in walk(program.program) if isinstance(node, WhileStmt))


class WPTestCase(TestCase):

    def test_empty_block_is_identity(self):
        program = _program("void main() { }")
        post = parse_predicate("x > 0")
        self.assertEqual(wp(program.function("main").body, post, ContractEnv(), program), post)

    def test_declaration_with_guard(self):
        program = _program("int main(int x) { int y = x + 1; return y; }")
        pre = wp(program.function("main").body.stmts[0], parse_predicate("y > 0"), ContractEnv(), program)
        self.assertTrue(eval_pred(pre, {"x": 5}))
        self.assertFalse(eval_pred(pre, {"x": -1}))
        self.assertFalse(eval_pred(pre, {"x": W32.max_value}))

    def test_loop_without_invariant(self):
        program = _program(counting_loop)
        loop = program.node(_loop_id(program))
        with self.assertRaises(MissingLoopInvariant):
            wp(loop, parse_predicate("i == 10"), ContractEnv(), program)

    def test_call_asserts_requires(self):
        program = _program(ABS_SOURCE)
        contracts = _contracts(program, ("requires INT_MIN < x;", "abs"))
        pre = wp(program.function("main").body, parse_predicate("\\true"), contracts, program)
        self.assertFalse(eval_pred(pre, dict(program.constants)))


class ObligationVCTestCase(TestCase):

    @classmethod
    def setUpClass(cls):
        cls.abs_program = _program(ABS_SOURCE)
        cls.abs_target = next(a for a in instrument(cls.abs_program) if a.kind == AssertionKind.SIGNED_OVERFLOW)
        cls.id_program = _program(ID_SOURCE)

    def test_abs_overflow_without_requires(self):
        vc = obligation_vc(self.abs_program, ContractEnv(), "abs", self.abs_target.id)
        self.assertEqual(vc.kind, ObligationKind.GUARD)
        outcome = discharge(vc, NO_SMT)
        self.assertEqual(outcome.status, VCStatus.INVALID)
        self.assertEqual(outcome.witness, {"x": W32.min_value})
        self.assertEqual(outcome.tier, "exact")

    def test_abs_overflow_with_requires(self):
        contracts = _contracts(self.abs_program, ("requires INT_MIN < x;", "abs"))
        vc = obligation_vc(self.abs_program, contracts, "abs", self.abs_target.id)
        self.assertEqual(discharge(vc, NO_SMT).status, VCStatus.VALID)

    def test_abs_callsites(self):
        contracts = _contracts(self.abs_program, ("requires INT_MIN < x;", "abs"))
        forty_two, minimum = call_sites(self.abs_program.function("main"))
        valid = discharge(obligation_vc(self.abs_program, contracts, "main", f"callsite_precondition@{forty_two.node_id}"))
        self.assertEqual(valid.status, VCStatus.VALID)
        invalid = discharge(obligation_vc(self.abs_program, contracts, "main", f"callsite_precondition@{minimum.node_id}"))
        self.assertEqual(invalid.status, VCStatus.INVALID)
        self.assertEqual(invalid.witness, {})

    def test_check_callsite(self):
        cg = build_call_graph(self.abs_program)
        assertions = collect_assertions(analyze(self.abs_program), cg, self.abs_program)
        callsites = [a for a in assertions if a.kind == AssertionKind.CALLSITE]
        contracts = _contracts(self.abs_program, ("requires INT_MIN < x;", "abs"))
        self.assertEqual(
            [check_callsite(a, contracts, self.abs_program, NO_SMT).status for a in callsites],
            [VCStatus.VALID, VCStatus.INVALID],
        )

    def test_id_division_needs_ensures(self):
        without = obligation_vc(self.id_program, ContractEnv(), "one", "division_by_0@11")
        outcome = discharge(without, NO_SMT)
        self.assertEqual(outcome.status, VCStatus.INVALID)
        self.assertEqual(outcome.abstracted, ("id_result8",))
        self.assertEqual(without.call_results, (("id_result8", "id"),))
        self.assertIn("id_result8", without.abstraction_symbols)

        contracts = _contracts(self.id_program, ("ensures \\result == x;", "id"))
        self.assertEqual(discharge(obligation_vc(self.id_program, contracts, "one", "division_by_0@11")).status,
                         VCStatus.VALID)

    def test_id_callsite_requires(self):
        contracts = _contracts(self.id_program, ("requires x != 0;", "id"))
        cg = build_call_graph(self.id_program)
        callsites = [a for a in collect_assertions(analyze(self.id_program), cg, self.id_program)
                     if a.kind == AssertionKind.CALLSITE and a.callee == "id"]
        status = {a.function: check_callsite(a, contracts, self.id_program, NO_SMT).status for a in callsites}
        self.assertEqual(status, {"one": VCStatus.VALID, "zero": VCStatus.INVALID})

    def test_ensures_establishment(self):
        holds = _contracts(self.id_program, ("ensures \\result == x;", "id"))
        self.assertTrue(discharge(obligation_vc(self.id_program, holds, "id", "ensures@id#0")).valid)

        wrong = _contracts(self.id_program, ("ensures \\result == x + 1;", "id"))
        outcome = discharge(obligation_vc(self.id_program, wrong, "id", "ensures@id#0"), NO_SMT)
        self.assertEqual(outcome.status, VCStatus.INVALID)
        self.assertEqual(outcome.witness, {"x": 0})

    def test_unknown_obligation(self):
        with self.assertRaises(UnknownAssertion):
            obligation_vc(self.id_program, ContractEnv(), "one", "division_by_0@999")

    def test_constants_are_folded(self):
        contracts = _contracts(self.abs_program, ("requires INT_MIN < x;", "abs"))
        vc = obligation_vc(self.abs_program, contracts, "abs", self.abs_target.id)
        self.assertNotIn("INT_MIN", free_vars(vc.formula))


class GenVCsTestCase(TestCase):

    @classmethod
    def setUpClass(cls):
        cls.program = _program(counting_loop)
        cls.loop_id = _loop_id(cls.program)
        cg = build_call_graph(cls.program)
        assertions = collect_assertions(analyze(cls.program), cg, cls.program)
        target = next(a for a in assertions if a.kind == AssertionKind.SIGNED_OVERFLOW)
        cls.unit = build_vunit(target, cls.program, cg, ContractEnv())
        cls.main = cls.program.function("main").node_id

    def test_target_only(self):
        vcs = gen_vcs(self.unit, [], self.program)
        self.assertEqual([vc.id for vc in vcs], [self.unit.target.id])
        self.assertEqual(vcs[0].kind, ObligationKind.TARGET)
        self.assertEqual(vcs[0].loops_without_invariant, (self.loop_id,))

    def test_invariant_and_ensures(self):
        candidate = [
            parse_clause("loop invariant 0 <= i && i <= 10;", self.loop_id),
            parse_clause("ensures \\result == 10;", self.main),
        ]
        vcs = gen_vcs(self.unit, candidate, self.program)
        self.assertEqual(
            [vc.id for vc in vcs],
            [self.unit.target.id, f"invariant_established@{self.loop_id}#0",
             f"invariant_preserved@{self.loop_id}#0", "ensures@main#0"],
        )
        outcomes = discharge_all(vcs, NO_SMT)
        self.assertTrue(all(outcome.valid for outcome in outcomes.values()), outcomes)
        self.assertEqual(vcs[1].clause, candidate[0])

    def test_weak_invariant_is_not_preserved(self):
        candidate = [parse_clause("loop invariant i <= 5;", self.loop_id)]
        vcs = gen_vcs(self.unit, candidate, self.program)
        outcomes = discharge_all(vcs, NO_SMT)
        self.assertTrue(outcomes[f"invariant_established@{self.loop_id}#0"].valid)
        self.assertTrue(outcomes[f"invariant_preserved@{self.loop_id}#0"].invalid)
        verification = UnitVerification(vcs, outcomes)
        self.assertEqual(verification.failing_clauses(), candidate)
        self.assertTrue(verification.target_outcome.valid)

    def test_loop_assigns(self):
        exact = parse_clause("loop assigns i;", self.loop_id)
        nothing = parse_clause("loop assigns \\nothing;", self.loop_id)
        vcs = gen_vcs(self.unit, [exact, nothing], self.program)
        outcomes = discharge_all(vcs, NO_SMT)
        self.assertEqual(len(vcs), 2)
        self.assertTrue(outcomes[f"loop_assigns@{self.loop_id}"].valid)

        vcs = gen_vcs(self.unit, [nothing], self.program)
        outcomes = discharge_all(vcs, NO_SMT)
        self.assertTrue(outcomes[f"loop_assigns@{self.loop_id}"].invalid)
        self.assertIn("misses i", vcs[1].description)

    def test_callsite_vcs_for_callees_with_requires(self):
        program = _program(ID_SOURCE)
        cg = build_call_graph(program)
        target = next(a for a in collect_assertions(analyze(program), cg, program)
                      if a.kind == AssertionKind.DIV_BY_ZERO)
        unit = build_vunit(target, program, cg, _contracts(program, ("requires x != 0;", "id")))
        vcs = gen_vcs(unit, [parse_clause("ensures \\result == x;", program.function("id").node_id)], program)
        self.assertEqual([vc.id for vc in vcs], ["division_by_0@11", "ensures@id#0", "callsite_precondition@8"])
        self.assertTrue(all(outcome.valid for outcome in discharge_all(vcs, NO_SMT).values()))


class NormalizeTestCase(TestCase):

    def test_split_conjunction_under_implication(self):
        sequents = split(parse_predicate("a > 0 ==> b > 0 && c > 0"))
        self.assertEqual([s.goal for s in sequents], [parse_predicate("b > 0"), parse_predicate("c > 0")])
        self.assertTrue(all(s.hypotheses == [parse_predicate("a > 0")] for s in sequents))

    def test_split_disjunction(self):
        (sequent,) = split(parse_predicate("a > 0 || b > 0"))
        self.assertEqual(sequent.goal, parse_predicate("b > 0"))
        self.assertEqual(len(sequent.hypotheses), 1)

    def test_split_true(self):
        self.assertEqual(split(parse_predicate("\\true")), [])

    def test_one_point(self):
        sequent = one_point(Sequent([parse_predicate("x == y + 1"), parse_predicate("y > 0")],
                                    parse_predicate("x > 1")), W8)
        self.assertEqual([name for name, _ in sequent.eliminated], ["x"])
        self.assertNotIn("x", sequent.free_vars())
        self.assertEqual(sequent.residual(), ("y", "x"))

    def test_one_point_out_of_range(self):
        sequent = one_point(Sequent([parse_predicate("x == 300")], parse_predicate("x < 0")), W8)
        self.assertIn(FALSE, sequent.hypotheses)
        self.assertEqual(decide_exact(sequent, W8), (Decision.VALID, None))

    def test_interval_sets(self):
        domain = IntervalSet.span(-128, 127)
        self.assertEqual(IntervalSet.span(0, 10).complement(domain), IntervalSet(((-128, -1), (11, 127))))
        self.assertEqual(IntervalSet.span(0, 3).union(IntervalSet.span(4, 6)), IntervalSet.span(0, 6))
        self.assertTrue(IntervalSet.span(5, 1).is_empty)
        self.assertEqual(IntervalSet(((-5, -2), (3, 9))).closest_to_zero(), -2)

    def test_solution_set(self):
        domain = IntervalSet.span(-8, 8)
        self.assertEqual(solution_set(parse_predicate("2 * x != 4"), "x", domain), IntervalSet(((-8, 1), (3, 8))))
        self.assertEqual(solution_set(parse_predicate("3 * x <= 7"), "x", domain), IntervalSet.span(-8, 2))
        self.assertEqual(solution_set(parse_predicate("-x > 2"), "x", domain), IntervalSet.span(-8, -3))
        self.assertIsNone(solution_set(parse_predicate("x * y > 0"), "x", domain))

    def test_solution_set_rounds_toward_the_constraint(self):
        domain = IntervalSet.span(-128, 127)
        self.assertEqual(solution_set(parse_predicate("-128 <= 3 * x"), "x", domain), IntervalSet.span(-42, 127))
        self.assertEqual(solution_set(parse_predicate("-3 * x <= 128"), "x", domain), IntervalSet.span(-42, 127))
        self.assertEqual(solution_set(parse_predicate("-3 * x >= 128"), "x", domain), IntervalSet.span(-128, -43))
        self.assertEqual(solution_set(parse_predicate("-3 * x < 7"), "x", domain), IntervalSet.span(-2, 127))
        self.assertEqual(solution_set(parse_predicate("-3 * x > 7"), "x", domain), IntervalSet.span(-128, -3))
        self.assertEqual(solution_set(parse_predicate("-3 * x == 7"), "x", domain), IntervalSet())
        for text in ("-3 * x <= 128", "-3 * x >= 128", "-5 * x < -7", "-5 * x > -7", "3 * x >= -128",
                     "5 * x < -7", "-2 * x != 6", "7 - 4 * x <= 0"):
            pred = parse_predicate(text)
            expected = [value for value in range(-128, 128) if eval_pred(pred, {"x": value})]
            values = solution_set(pred, "x", domain)
            self.assertEqual([v for lo, hi in values.ranges for v in range(lo, hi + 1)], expected, text)

    def test_bounds(self):
        sequent = Sequent([parse_predicate("x >= 3"), parse_predicate("x < 5"), parse_predicate("y > 100")],
                          parse_predicate("x + y > 0"))
        ranges = bounds(sequent, W8)
        self.assertEqual((ranges["x"].lo, ranges["x"].hi), (3, 4))
        self.assertEqual((ranges["y"].lo, ranges["y"].hi), (101, 127))

        infeasible = Sequent([parse_predicate("x > 5"), parse_predicate("x < 3")], parse_predicate("x == y"))
        self.assertEqual(bounds(infeasible, W8), {})
        self.assertEqual(decide_exact(infeasible, W8)[0], Decision.VALID)


class DischargeTestCase(TestCase):

    def test_eight_bit_range(self):
        self.assertTrue(discharge(_vc("x < 0 && -128 < x", "-127 <= x")).valid)
        outcome = discharge(_vc("x < 0 && -128 < x", "-126 <= x"))
        self.assertEqual(outcome.witness, {"x": -127})

    def test_negative_coefficient_boundaries(self):
        outcome = discharge(_vc("-43 <= x && x <= 42", "-128 <= 3 * x"), NO_SMT)
        self.assertEqual(outcome.status, VCStatus.INVALID)
        self.assertEqual(outcome.witness, {"x": -43})
        self.assertTrue(discharge(_vc("-42 <= x && x <= 42", "-128 <= 3 * x && 3 * x <= 127"), NO_SMT).valid)
        outcome = discharge(_vc("x <= 43", "-3 * x >= -128"), NO_SMT)
        self.assertEqual(outcome.witness, {"x": 43})
        self.assertTrue(discharge(_vc("x <= 42", "-3 * x >= -128"), NO_SMT).valid)

    def test_guard_at_the_rounding_boundary(self):
        program = _program(
            "int main(int x) { if (x >= -43) { if (x <= 42) { return 3 * x; } } return 0; }", W8,
        )
        target = next(a for a in instrument(program) if a.kind == AssertionKind.SIGNED_OVERFLOW)
        outcome = discharge(obligation_vc(program, ContractEnv(), "main", target.id), NO_SMT)
        self.assertEqual(outcome.status, VCStatus.INVALID)
        self.assertEqual(outcome.witness, {"x": -43})

    def test_enumeration_witness(self):
        vc = _vc("\\true", "x * y != 6")
        outcome = discharge(vc, NO_SMT)
        self.assertEqual(outcome.status, VCStatus.INVALID)
        self.assertEqual(outcome.tier, "enumeration")
        self.assertEqual(outcome.witness["x"] * outcome.witness["y"], 6)
        self.assertTrue(confirms(vc, outcome.witness))

    def test_interval_bounds_prove(self):
        outcome = discharge(_vc("x > 0 && y > 0", "x * y != -1"), NO_SMT)
        self.assertTrue(outcome.valid)

    def test_unknown_without_solver(self):
        outcome = discharge(_vc("\\true", "x * y != 6"), DischargeConfig(max_enumeration=1, use_smt=False))
        self.assertEqual(outcome.status, VCStatus.UNKNOWN)
        self.assertTrue(outcome.reason.startswith("undecided"))
        self.assertEqual(set(outcome.residual), {"x", "y"})

    def test_solver_failure_is_unknown(self):
        strategy = DischargeConfig(max_enumeration=1, solver_command=["/nonexistent/smt-solver"])
        vc = _vc("\\true", "x * y != 6")
        with self.assertRaises(SmtIOError):
            discharge(vc, strategy)
        outcomes = discharge_all([vc], strategy)
        self.assertEqual(outcomes["target"].status, VCStatus.UNKNOWN)

    def test_confirms_rejects_out_of_range(self):
        vc = _vc("\\true", "x < 100")
        self.assertFalse(confirms(vc, {"x": 300}))
        self.assertTrue(confirms(vc, {"x": 100}))


class SmtTestCase(TestCase):

    def test_linear_script(self):
        script = smt.smtlib_script(parse_predicate("x + 1 > y"), W8, comment="overflow@3")
        self.assertIn("; overflow@3", script)
        self.assertIn("(set-logic QF_LIA)", script)
        self.assertIn("(declare-const |x| Int)", script)
        self.assertIn("(assert (and (<= (- 128) |x|) (<= |x| 127)))", script)
        self.assertIn("(assert (not (> (+ |x| 1) |y|)))", script)
        self.assertTrue(script.endswith("(check-sat)\n(get-value (|x| |y|))\n"))

    def test_division_script(self):
        script = smt.smtlib_script(parse_predicate("x / y == 2 ==> x >= 0"), W8)
        self.assertIn("(set-logic QF_NIA)", script)
        self.assertIn("(define-fun tdiv", script)
        self.assertIn("(tdiv |x| |y|)", script)

    def test_parse_values(self):
        self.assertEqual(smt._parse_values("((|x| (- 3))\n (|y| 4))"), {"x": -3, "y": 4})

    def test_unavailable_solver(self):
        with self.assertRaises(SmtIOError):
            smt.check_validity(parse_predicate("x > 0"), W8, command=["/nonexistent/smt-solver"])

    @skipIf(smt.z3 is None, "z3 is not installed")
    def test_in_process_solver(self):
        answer, model = smt.check_validity(parse_predicate("x * y != 6"), W8)
        self.assertEqual(answer, "sat")
        self.assertEqual(model["x"] * model["y"], 6)
        self.assertEqual(smt.check_validity(parse_predicate("x * x >= 0"), W32), ("unsat", None))

    @skipIf(smt.z3 is None, "z3 is not installed")
    def test_smt_tier(self):
        outcome = discharge(_vc("\\true", "x * y != 6", W32), DischargeConfig(max_enumeration=1))
        self.assertEqual(outcome.status, VCStatus.INVALID)
        self.assertEqual(outcome.tier, "smt")


class DischargeSoundnessTestCase(TestCase):
    """Bounded-exhaustive check at 8 bits against the interpreter."""

    def test_no_valid_vc_falsified(self):
        for seed in range(settings.CORPUS_SIZE // 5):
            program = resolve(parse(ProgramGenerator(seed).program()), W8)
            guards = instrument(program)
            outcomes = {}
            for assertion in guards:
                vc = obligation_vc(program, ContractEnv(), assertion.function, assertion.id, guards=guards)
                outcome = discharge(vc, NO_SMT)
                if outcome.invalid:
                    self.assertTrue(confirms(vc, outcome.witness), msg=f"seed {seed}: {assertion.id}")
                outcomes[assertion.id] = outcome

            failing = set()

            def observe(node_id, kind, holds, env):
                if not holds:
                    failing.add(f"{kind}@{node_id}")

            entry = program.function(program.entry)
            for args in product(range(W8.min_value, W8.max_value + 1), repeat=len(entry.params)):
                try:
                    Interpreter(program, on_guard=observe).run(args=list(args))
                except OutOfFuel:
                    continue
            for guard_id in failing:
                self.assertFalse(outcomes[guard_id].valid, msg=f"seed {seed}: {guard_id}")

    def test_callee_ensures_only_add_proofs(self):
        for seed in range(settings.CORPUS_SIZE // 10):
            program = resolve(parse(ProgramGenerator(seed).program()), W8)
            stronger = ContractEnv().with_clauses(
                [parse_clause("ensures \\result >= 0;", func.node_id) for func in program.functions
                 if func.returns == "int"],
                {func.node_id: func.name for func in program.functions},
            )
            guards = instrument(program)
            for assertion in guards:
                weak = discharge(obligation_vc(program, ContractEnv(), assertion.function, assertion.id, guards=guards), NO_SMT)
                strong = discharge(obligation_vc(program, stronger, assertion.function, assertion.id, guards=guards), NO_SMT)
                self.assertFalse(weak.valid and strong.invalid, msg=f"seed {seed}: {assertion.id}")
