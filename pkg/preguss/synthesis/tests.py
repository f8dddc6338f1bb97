import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer
from unittest import TestCase
from unittest.mock import patch

from langchain_core.messages import AIMessage

from preguss import settings
from preguss.absint.analyzer import analyze
from preguss.absint.models import AssertionKind
from preguss.callgraph.graph import build_call_graph, collect_assertions
from preguss.callgraph.queue import enqueue
from preguss.errors import GeneratorUnavailable, ProhibitionViolation, ResponseParseEmpty, TemplateExhausted
from preguss.frontend.corpus import ProgramGenerator
from preguss.frontend.models import IntWidth
from preguss.frontend.parser import parse
from preguss.frontend.render import render
from preguss.frontend.resolver import resolve
from preguss.frontend.tests import ABS_SOURCE, ID_SOURCE
from preguss.specs.models import RESULT, Clause, ClauseKind, Compare, ContractEnv, IntConst, Var
from preguss.specs.parser import parse_clause, parse_predicate
from preguss.specs.utils import eval_pred
from preguss.synthesis.llm_integration import LLMGenerator, parse_response, render_prompt
from preguss.synthesis.models import (
    EndpointConfig, FeedbackEntry, GeneratorResponse, Phase, PhaseStatus, SynthesisConfig, Verdict,
)
from preguss.synthesis.oracle import OracleGenerator, bound_pred, postcondition, return_paths, tighten
from preguss.synthesis.pipeline import Synthesizer, process_queue, synthesize
from preguss.synthesis.store import ContractStore
from preguss.verifier.models import DischargeConfig
from preguss.verifier.unit import UnitVerifier

W8 = IntWidth(8)
W32 = IntWidth(32)
NO_SMT = DischargeConfig(use_smt=False)
ORACLE = SynthesisConfig(discharge=NO_SMT)


def _program(source, width=W32):
    return resolve(parse(source), width)


def _synthesizer(program, generator=None, config=ORACLE):
    analysis = analyze(program)
    cg = build_call_graph(program)
    queue = enqueue(collect_assertions(analysis, cg, program), cg, program)
    return Synthesizer(program, cg, generator, config, analysis), queue


def _unit(queue, kind):
    return next(v for v in queue if v.target.kind == kind)


class ScriptedGenerator:
    """Replays one clause list per call, written as (text, function) pairs."""

    name = "scripted"

    def __init__(self, program, *script):
        self.program = program
        self.script = list(script)
        self.requests = []

    def __call__(self, request):
        self.requests.append(request)
        if not self.script:
            raise TemplateExhausted("script finished")
        entry = self.script.pop(0)
        clauses = [parse_clause(text, self.program.function(name).node_id) for text, name in entry]
        return GeneratorResponse(clauses, raw="\n".join(text for text, _ in entry))


class OracleTestCase(TestCase):

    @classmethod
    def setUpClass(cls):
        cls.abs_program = _program(ABS_SOURCE)
        cls.id_program = _program(ID_SOURCE)

    def test_bound_pred_leaves_out_width_bounds(self):
        self.assertEqual(bound_pred(Var("x"), W32.min_value + 1, W32.max_value, W32),
                         Compare("<=", IntConst(-2147483647), Var("x")))
        self.assertEqual(bound_pred(Var("x"), 3, 3, W32), Compare("==", Var("x"), IntConst(3)))

    def test_tighten_single_variable(self):
        pred = tighten(parse_predicate("x < 0 ==> -2147483647 <= x"), W32)
        self.assertTrue(eval_pred(pred, {"x": W32.min_value + 1}))
        self.assertFalse(eval_pred(pred, {"x": W32.min_value}))
        self.assertTrue(eval_pred(pred, {"x": W32.max_value}))

    def test_tighten_keeps_meaning_with_negative_coefficients(self):
        for text in ("-128 <= 3 * x", "-3 * x <= 127", "5 - 3 * x > 2"):
            original = parse_predicate(text)
            tightened = tighten(original, W8)
            for value in range(W8.min_value, W8.max_value + 1):
                self.assertEqual(eval_pred(tightened, {"x": value}), eval_pred(original, {"x": value}), (text, value))

    def test_postcondition_of_id(self):
        self.assertEqual(postcondition(self.id_program.function("id")), Compare("==", RESULT, Var("x")))

    def test_postcondition_of_branches(self):
        program = _program("int clamp(int x) { if (x < 0) { return 0; } return x; }")
        paths = return_paths(program.function("clamp"))
        self.assertEqual(len(paths), 2)
        self.assertIsNotNone(postcondition(program.function("clamp")))

    def test_loops_stop_symbolic_runs(self):
        program = _program("int f(int n) { int i = 0; while (i < n) { i = i + 1; } return i; }")
        self.assertIsNone(return_paths(program.function("f")))

    def test_abs_host_requires(self):
        synthesizer, queue = _synthesizer(self.abs_program)
        v = synthesizer.refresh(_unit(queue, AssertionKind.SIGNED_OVERFLOW))
        response = OracleGenerator()(synthesizer.request(Phase.HOST, v, []))
        self.assertEqual(len(response.clauses), 1)
        clause = response.clauses[0]
        self.assertEqual(clause.kind, ClauseKind.REQUIRES)
        self.assertEqual(clause.anchor, self.abs_program.function("abs").node_id)
        self.assertFalse(eval_pred(clause.body, {"x": W32.min_value}))
        self.assertTrue(eval_pred(clause.body, {"x": W32.min_value + 1}))

    def test_id_callee_ensures(self):
        synthesizer, queue = _synthesizer(self.id_program)
        v = synthesizer.refresh(_unit(queue, AssertionKind.DIV_BY_ZERO))
        response = OracleGenerator()(synthesizer.request(Phase.CALLEES, v, []))
        self.assertIn(Clause(ClauseKind.ENSURES, Compare("==", RESULT, Var("x")), self.id_program.function("id").node_id),
                      response.clauses)
        self.assertFalse(any(clause.kind == ClauseKind.REQUIRES for clause in response.clauses))

    def test_guard_implied_by_true(self):
        program = _program("int half(int x) { return x / 2; } void main() { half(3); }")
        synthesizer, queue = _synthesizer(program)
        v = synthesizer.refresh(_unit(queue, AssertionKind.DIV_BY_ZERO))
        self.assertEqual(OracleGenerator().host_clauses(synthesizer.request(Phase.HOST, v, [])), [])
        with self.assertRaises(TemplateExhausted):
            OracleGenerator()(synthesizer.request(Phase.HOST, v, []))

    def test_rejected_clauses_are_not_proposed_again(self):
        synthesizer, queue = _synthesizer(self.abs_program)
        v = synthesizer.refresh(_unit(queue, AssertionKind.SIGNED_OVERFLOW))
        first = OracleGenerator()(synthesizer.request(Phase.HOST, v, []))
        feedback = [FeedbackEntry(first.clauses, rejected=first.clauses)]
        with self.assertRaises(TemplateExhausted):
            OracleGenerator()(synthesizer.request(Phase.HOST, v, feedback))


class ContractStoreTestCase(TestCase):

    @classmethod
    def setUpClass(cls):
        cls.program = _program(ID_SOURCE)
        cls.id_anchor = cls.program.function("id").node_id

    def test_add_and_group(self):
        store = ContractStore(self.program)
        ensures = parse_clause("ensures \\result == x;", self.id_anchor)
        with self.assertLogs("preguss", level="INFO") as logs:
            self.assertEqual(store.add([ensures, ensures]), [ensures])
        self.assertIn("id gains ensures", logs.output[0])
        self.assertEqual(store.by_function(), {"id": ["ensures \\result == x;"]})
        self.assertEqual(store.env.contract("id").ensures, (ensures.body,))

    def test_assertions_are_not_kept(self):
        store = ContractStore(self.program)
        statement = self.program.function("one").body.stmts[1].node_id
        self.assertEqual(store.add([parse_clause("assert x != 0;", statement)]), [])
        self.assertEqual(store.clauses, [])

    def test_requires_prohibited_during_callee_phase(self):
        store = ContractStore(self.program)
        requires = parse_clause("requires x != 0;", self.id_anchor)
        with store.callee_phase(["id"]):
            with self.assertRaises(ProhibitionViolation):
                store.add([requires])
            store.add([parse_clause("ensures \\result == x;", self.id_anchor)])
        self.assertEqual(store.add([requires]), [requires])


class PhaseTestCase(TestCase):

    @classmethod
    def setUpClass(cls):
        cls.abs_program = _program(ABS_SOURCE)
        cls.id_program = _program(ID_SOURCE)

    def test_valid_target_needs_no_call(self):
        program = _program("int half(int x) { return x / 2; } void main() { half(3); }")
        synthesizer, queue = _synthesizer(program, ScriptedGenerator(program))
        result = synthesizer.run_phase_host(_unit(queue, AssertionKind.DIV_BY_ZERO), 5)
        self.assertEqual(result.status, PhaseStatus.SUCCESS)
        self.assertEqual((result.iterations, result.accepted), (0, []))
        self.assertEqual(synthesizer.report.generator_calls, 0)

    def test_host_phase_hands_over_to_callees(self):
        generator = ScriptedGenerator(self.id_program)
        synthesizer, queue = _synthesizer(self.id_program, generator)
        result = synthesizer.run_phase_host(_unit(queue, AssertionKind.DIV_BY_ZERO), 5)
        self.assertEqual(result.status, PhaseStatus.NEEDS_CALLEES)
        self.assertEqual(generator.requests, [])

    def test_callee_phase_strips_requires(self):
        generator = ScriptedGenerator(self.id_program, [("requires x != 0;", "id"), ("ensures \\result == x;", "id")])
        synthesizer, queue = _synthesizer(self.id_program, generator)
        with self.assertLogs("preguss", level="WARNING") as logs:
            result = synthesizer.run_phase_callees(_unit(queue, AssertionKind.DIV_BY_ZERO), 5)
        self.assertIn("Requires-prohibition: stripped `requires x != 0;` for id", logs.output[0])
        self.assertEqual(result.status, PhaseStatus.SUCCESS)
        self.assertEqual(synthesizer.store.by_function(), {"id": ["ensures \\result == x;"]})

    def test_failed_establishment_is_fed_back(self):
        generator = ScriptedGenerator(
            self.id_program, [("ensures \\result == x + 1;", "id")], [("ensures \\result == x;", "id")])
        synthesizer, queue = _synthesizer(self.id_program, generator)
        result = synthesizer.run_phase_callees(_unit(queue, AssertionKind.DIV_BY_ZERO), 5)
        self.assertEqual((result.status, result.iterations), (PhaseStatus.SUCCESS, 2))
        self.assertEqual(len(result.feedback), 1)
        self.assertIn("postcondition of id", result.feedback[0].render())
        self.assertEqual(generator.requests[1].feedback[0].messages, result.feedback[0].messages)

    def test_admission_of_host_clauses(self):
        synthesizer, queue = _synthesizer(self.abs_program)
        v = _unit(queue, AssertionKind.SIGNED_OVERFLOW)
        anchor = self.abs_program.function("abs").node_id
        clauses = [parse_clause(text, anchor) for text in (
            "requires -2147483647 <= x;", "requires x < x;", "requires y > 0;", "ensures \\result >= 0;")]
        admitted, rejected, notes = synthesizer.admit_host(v, clauses)
        self.assertEqual(admitted, clauses[:1])
        self.assertEqual(rejected, clauses[1:])
        self.assertEqual(len(notes), 3)

    def test_root_host_requires_are_stripped(self):
        program = _program("int main(int x) { return x + 1; }")
        synthesizer, queue = _synthesizer(program)
        clause = parse_clause("requires x < 100;", program.function("main").node_id)
        admitted, rejected, notes = synthesizer.admit_host(_unit(queue, AssertionKind.SIGNED_OVERFLOW), [clause])
        self.assertEqual((admitted, rejected), ([], [clause]))
        self.assertIn("no caller", notes[0])

    def test_retention_drops_unneeded_requires(self):
        generator = ScriptedGenerator(self.abs_program, [("requires -2147483647 <= x;", "abs"), ("requires x <= 100;", "abs")])
        synthesizer, queue = _synthesizer(self.abs_program, generator)
        with self.assertLogs("preguss", level="INFO") as logs:
            result = synthesizer.run_phase_host(_unit(queue, AssertionKind.SIGNED_OVERFLOW), 5)
        self.assertEqual(result.status, PhaseStatus.SUCCESS)
        self.assertEqual(len(result.accepted), 1)
        self.assertTrue(any("requires x <= 100; is not needed" in line for line in logs.output))
        self.assertEqual(synthesizer.store.by_function(), {"abs": ["requires -2147483647 <= x;"]})


class PipelineTestCase(TestCase):

    @classmethod
    def setUpClass(cls):
        cls.abs_program = _program(ABS_SOURCE)
        cls.id_program = _program(ID_SOURCE)

    def test_abs_end_to_end(self):
        report, queue, _ = synthesize(self.abs_program, ORACLE)
        self.assertEqual([verdict.verdict for verdict in report.verdicts],
                         [Verdict.CERTIFIED, Verdict.CERTIFIED, Verdict.DEFINITIVE_RTE])
        overflow, fine, hazard = report.verdicts
        self.assertEqual(overflow.kind, "overflow")
        self.assertEqual(overflow.iterations, 1)
        self.assertIn(overflow.assertion, overflow.certificate)
        self.assertEqual(hazard.witness, {})
        self.assertEqual(overflow.provisional_callsites, [fine.assertion, hazard.assertion])

        requires = parse_predicate(report.contracts["abs"][0][len("requires "):-1])
        self.assertFalse(eval_pred(requires, {"x": W32.min_value}))
        self.assertTrue(eval_pred(requires, {"x": W32.min_value + 1}))
        self.assertEqual(len(report.contracts["abs"]), 1)
        self.assertIn("/*@ requires", report.annotated)
        self.assertFalse(report.stopped)

    def test_callsite_predicates_follow_accepted_requires(self):
        _, queue, _ = synthesize(self.abs_program, ORACLE)
        fine, hazard = [v.target for v in queue if v.target.kind == AssertionKind.CALLSITE]
        self.assertTrue(eval_pred(fine.predicate, {}))
        self.assertFalse(eval_pred(hazard.predicate, {}))

    def test_id_end_to_end(self):
        report, queue, _ = synthesize(self.id_program, ORACLE)
        self.assertEqual(len(report.verdicts), len(queue))
        self.assertTrue(report.all_certified)
        self.assertEqual(report.contracts, {"id": ["ensures \\result == x;"]})
        self.assertIn("/*@ ensures \\result == x; */\nint id(int x)", report.annotated)

    def test_zero_assertions(self):
        program = _program("int main() { return 0; }")
        report, queue, _ = synthesize(program, ORACLE)
        self.assertEqual((len(queue), report.verdicts), (0, []))
        self.assertEqual(report.annotated, render(program))

    def test_high_risk_alert_stops_the_run(self):
        generator = ScriptedGenerator(self.abs_program)
        report, _, _ = synthesize(self.abs_program, ORACLE, generator)
        self.assertTrue(report.stopped)
        self.assertEqual([verdict.verdict for verdict in report.verdicts], [Verdict.HIGH_RISK_ALERT])
        self.assertEqual(report.generator_calls, 1)
        self.assertIsNotNone(report.verdicts[0].feedback)

    def test_continue_on_alert(self):
        config = SynthesisConfig(discharge=NO_SMT, continue_on_alert=True)
        report, queue, _ = synthesize(self.abs_program, config, ScriptedGenerator(self.abs_program))
        self.assertFalse(report.stopped)
        self.assertEqual(len(report.verdicts), len(queue))
        self.assertEqual(report.verdicts[0].verdict, Verdict.HIGH_RISK_ALERT)

    def test_process_queue_with_initial_contracts(self):
        program = self.id_program
        analysis = analyze(program)
        cg = build_call_graph(program)
        queue = enqueue(collect_assertions(analysis, cg, program), cg, program)
        anchors = {func.node_id: func.name for func in program.functions}
        contracts = ContractEnv().with_clauses(
            [parse_clause("ensures \\result == x;", program.function("id").node_id)], anchors)
        report = process_queue(queue, OracleGenerator(), UnitVerifier(program, NO_SMT), ORACLE, cg, analysis, contracts)
        self.assertTrue(report.all_certified)
        self.assertEqual(report.generator_calls, 0)

    def test_oracle_runs_are_deterministic(self):
        for source in (ABS_SOURCE, ID_SOURCE):
            first, _, _ = synthesize(_program(source), ORACLE)
            second, _, _ = synthesize(_program(source), ORACLE)
            self.assertEqual([v.to_dict() for v in first.verdicts], [v.to_dict() for v in second.verdicts])
            self.assertEqual([t.digest for t in first.transcripts], [t.digest for t in second.transcripts])
            self.assertEqual(first.annotated, second.annotated)

    def test_generator_calls_are_bounded(self):
        config = SynthesisConfig(discharge=NO_SMT, continue_on_alert=True, max_iters=2)
        for seed in range(settings.CORPUS_SIZE // 25):
            program = resolve(parse(ProgramGenerator(seed).program()), W8)
            with self.subTest(seed=seed):
                report, queue, _ = synthesize(program, config)
                self.assertLessEqual(report.generator_calls, len(queue) * 2 * config.max_iters)
                self.assertEqual(len(report.verdicts), len(queue))


class LLMParseTestCase(TestCase):

    @classmethod
    def setUpClass(cls):
        cls.program = _program(ID_SOURCE)
        synthesizer, queue = _synthesizer(cls.program)
        v = synthesizer.refresh(_unit(queue, AssertionKind.DIV_BY_ZERO))
        cls.request = synthesizer.request(Phase.CALLEES, v, [])
        cls.host_request = synthesizer.request(Phase.HOST, v, [FeedbackEntry([], messages=["division guard is invalid"])])

    def test_single_ensures(self):
        clauses, notes = parse_response("Here you go:\n```acsl id\nensures \\result == x;\n```\n", self.request)
        self.assertEqual(clauses, [Clause(ClauseKind.ENSURES, Compare("==", RESULT, Var("x")),
                                          self.program.function("id").node_id)])
        self.assertEqual(notes, [])

    def test_prose_only(self):
        with self.assertRaises(ResponseParseEmpty):
            parse_response("The function returns its argument.", self.request)

    def test_bad_clauses_are_noted(self):
        text = "```acsl id\nensures \\result == ;\nensures \\result == x;\n```\n```acsl nosuch\nensures \\true;\n```"
        clauses, notes = parse_response(text, self.request)
        self.assertEqual(len(clauses), 1)
        self.assertEqual(len(notes), 2)

    def test_loop_blocks_need_a_loop(self):
        text = "```acsl loop 999\nloop invariant x > 0;\n```\n```acsl id\nloop invariant x > 0;\n```"
        with self.assertRaises(ResponseParseEmpty):
            parse_response(text, self.request)

    def test_host_assert_is_anchored_at_target(self):
        clauses, _ = parse_response("```acsl one\nassert x != 0;\n```", self.request)
        statement = self.program.enclosing_statement(self.request.unit.target.node_id).node_id
        self.assertEqual(clauses[0].anchor, statement)

    def test_prompts(self):
        callees = render_prompt(self.request)
        self.assertIn("Do not write any requires clause for id", callees)
        self.assertIn("int id(int x)", callees)
        self.assertIn("assert division_by_0", callees)
        host = render_prompt(self.host_request)
        self.assertIn("Infer the precondition of one", host)
        self.assertIn("division guard is invalid", host)

    def test_missing_api_key(self):
        with self.assertRaises(GeneratorUnavailable):
            LLMGenerator(EndpointConfig(api_key=""))

    def test_empty_answer_counts_as_parse_failure(self):
        generator = LLMGenerator(EndpointConfig(api_key="test"))
        with patch.object(LLMGenerator, "invoke", return_value=AIMessage(content="I cannot help with that.")):
            with self.assertRaises(ResponseParseEmpty):
                generator(self.request)


class StubCompletionsHandler(BaseHTTPRequestHandler):

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        self.server.requests.append({"path": self.path, "body": body})
        status = self.server.statuses.pop(0) if self.server.statuses else 200
        if status == 200:
            payload = {
                "id": "chatcmpl-stub",
                "object": "chat.completion",
                "created": 0,
                "model": body["model"],
                "choices": [{
                    "index": 0,
                    "message": {"role": "assistant", "content": self.server.content},
                    "finish_reason": "stop",
                }],
                "usage": {"prompt_tokens": 120, "completion_tokens": 12, "total_tokens": 132},
            }
        else:
            payload = {"error": {"message": "stub failure", "type": "server_error"}}
        data = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, format, *args):
        pass


class LLMTransportTestCase(TestCase):

    @classmethod
    def setUpClass(cls):
        cls.server = HTTPServer(("127.0.0.1", 0), StubCompletionsHandler)
        cls.server.requests, cls.server.statuses = [], []
        cls.server.content = "```acsl id\nrequires x != 0;\nensures \\result == x;\n```"
        cls.thread = threading.Thread(target=cls.server.serve_forever, daemon=True)
        cls.thread.start()
        cls.endpoint = EndpointConfig(
            base_url=f"http://127.0.0.1:{cls.server.server_port}/v1", model="stub-model", api_key="test",
            timeout=5, max_retries=3, backoff_seconds=0,
        )
        cls.program = _program(ID_SOURCE)

    @classmethod
    def tearDownClass(cls):
        cls.server.shutdown()
        cls.server.server_close()

    def setUp(self):
        self.server.requests.clear()
        self.server.statuses.clear()

    def test_id_through_the_endpoint(self):
        config = SynthesisConfig(generator="llm", discharge=NO_SMT)
        with self.assertLogs("preguss", level="WARNING") as logs:
            report, _, _ = synthesize(self.program, config, LLMGenerator(self.endpoint))
        self.assertTrue(report.all_certified)
        self.assertEqual(report.contracts, {"id": ["ensures \\result == x;"]})
        self.assertTrue(any("Requires-prohibition" in line for line in logs.output))

        self.assertEqual(len(self.server.requests), 1)
        request = self.server.requests[0]
        self.assertEqual(request["path"], "/v1/chat/completions")
        self.assertEqual(request["body"]["model"], "stub-model")
        self.assertEqual([m["role"] for m in request["body"]["messages"]], ["system", "user"])
        self.assertIn("```acsl <function name>", request["body"]["messages"][0]["content"])

        digest = report.transcripts[0].digest
        self.assertEqual((digest.prompt_tokens, digest.response_tokens), (120, 12))

    def test_server_errors_are_retried(self):
        self.server.statuses.extend([500, 500])
        synthesizer, queue = _synthesizer(self.program, LLMGenerator(self.endpoint))
        with self.assertLogs("preguss", level="WARNING") as logs:
            result = synthesizer.run_phase_callees(_unit(queue, AssertionKind.DIV_BY_ZERO), 1)
        self.assertEqual(result.status, PhaseStatus.SUCCESS)
        self.assertEqual(len(self.server.requests), 3)
        self.assertEqual(sum("retrying" in line for line in logs.output), 2)

    def test_unavailable_after_retries(self):
        self.server.statuses.extend([500, 500, 500])
        synthesizer, queue = _synthesizer(self.program, LLMGenerator(self.endpoint))
        with self.assertLogs("preguss", level="WARNING"):
            with self.assertRaises(GeneratorUnavailable):
                synthesizer.run_phase_callees(_unit(queue, AssertionKind.DIV_BY_ZERO), 1)
        self.assertEqual(len(self.server.requests), 3)
