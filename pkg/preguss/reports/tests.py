import json
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from unittest import TestCase, skipIf
from unittest.mock import patch

from pydantic import ValidationError
from typer.testing import CliRunner

from preguss import configure_logging, settings
from preguss.absint.analyzer import analyze
from preguss.absint.models import AssertionKind
from preguss.callgraph.graph import build_call_graph, collect_assertions
from preguss.callgraph.queue import enqueue
from preguss.cli import app
from preguss.frontend.models import IntWidth
from preguss.frontend.parser import parse
from preguss.frontend.resolver import resolve
from preguss.frontend.tests import ABS_SOURCE, ID_SOURCE
from preguss.reports.models import ReportDocument, RunConfig, VerdictEntry
from preguss.reports.utils import (
    build_analysis_report, build_run_report, export_smt, instrumented_source, report_json, report_schema,
    write_report, write_transcripts,
)
from preguss.reports.validators import validate_verdict_order
from preguss.synthesis.models import EndpointConfig
from preguss.synthesis.pipeline import Synthesizer
from preguss.verifier import smt

SAFE_SOURCE = "int main() {\n  int a = 6;\n  return a / 3;\n}\n"
MALFORMED_SOURCE = "int main( {\n  return 0;\n}\n"
RECURSIVE_SOURCE = (
    "int f(int x) { int y = g(x); return y; }\n"
    "int g(int x) { int y = f(x); return y; }\n"
    "int main() { int r = f(1); return r; }\n"
)

STARTED = datetime(2026, 1, 1, tzinfo=timezone.utc)


def _pipeline(source, config=None):
    config = config or RunConfig()
    program = resolve(parse(source), IntWidth(config.width))
    analysis = analyze(program)
    cg = build_call_graph(program)
    queue = enqueue(collect_assertions(analysis, cg, program), cg, program)
    synthesizer = Synthesizer(program, cg, None, config.synthesis_config(), analysis)
    return program, analysis, queue, synthesizer


def _solve_file(path):
    """z3 verdict on an exported script, without its trailing commands."""
    text = "\n".join(line for line in Path(path).read_text().splitlines()
                     if not line.startswith(("(check-sat", "(get-value")))
    solver = smt.z3.Solver()
    solver.from_string(text)
    return str(solver.check())


class RunConfigTestCase(TestCase):

    def test_defaults(self):
        config = RunConfig()
        self.assertEqual(config.width, 32)
        self.assertEqual(config.generator, "oracle")
        self.assertTrue(config.filter_dependencies)

    def test_width_must_be_supported(self):
        for width in (8, 16, 32):
            self.assertEqual(RunConfig(width=width).width, width)
        with self.assertRaises(ValidationError):
            RunConfig(width=12)

    def test_backend_and_iterations(self):
        with self.assertRaises(ValidationError):
            RunConfig(generator="gpt")
        with self.assertRaises(ValidationError):
            RunConfig(max_iters=0)

    def test_synthesis_config(self):
        config = RunConfig(max_iters=2, continue_on_alert=True, filter_dependencies=False)
        synthesis = config.synthesis_config()
        self.assertEqual(synthesis.max_iters, 2)
        self.assertTrue(synthesis.continue_on_alert)
        self.assertFalse(synthesis.filter_dependencies)

    def test_echo_leaves_paths_out(self):
        echo = RunConfig(inputs=[Path("abs.mc")], report=Path("out.json"), annotated=Path("out.c")).echo()
        self.assertNotIn("inputs", echo)
        self.assertNotIn("report", echo)
        self.assertNotIn("annotated", echo)
        self.assertEqual(echo["width"], 32)


class ReportValidationTestCase(TestCase):

    def test_verdict_evidence(self):
        base = {"assertion": "overflow@4", "kind": "overflow", "function": "abs"}
        with self.assertRaises(ValidationError):
            VerdictEntry(**base, verdict="certified")
        with self.assertRaises(ValidationError):
            VerdictEntry(**base, verdict="definitive_rte")
        with self.assertRaises(ValidationError):
            VerdictEntry(**base, verdict="high_risk_alert")
        self.assertEqual(VerdictEntry(**base, verdict="definitive_rte", witness={}).witness, {})

    def test_verdict_order(self):
        validate_verdict_order(["a", "b", "c"], ["a", "b"], complete=False)
        validate_verdict_order(["a", "b"], ["a", "b"], complete=True)
        with self.assertRaises(ValueError):
            validate_verdict_order(["a", "b"], ["b"], complete=False)
        with self.assertLogs("preguss", level="ERROR"):
            with self.assertRaises(ValueError):
                validate_verdict_order(["a", "b"], ["a"], complete=True)

    def test_schema_names_every_section(self):
        schema = json.loads(report_schema())
        for key in ("version", "program_sha256", "analysis", "queue", "verdicts", "contracts", "timing"):
            self.assertIn(key, schema["properties"])

    def test_shipped_schema_matches_model(self):
        shipped = json.loads((settings.BASE_DIR / "docs" / "report.schema.json").read_text())
        generated = json.loads(report_schema())
        self.assertEqual(set(shipped["properties"]), set(generated["properties"]))
        self.assertEqual(sorted(shipped["required"]), sorted(generated["required"]))
        self.assertEqual(set(shipped["$defs"]), set(generated["$defs"]))
        for name, definition in generated["$defs"].items():
            self.assertEqual(set(shipped["$defs"][name]["properties"]), set(definition["properties"]), name)


class ReportBuildTestCase(TestCase):

    def test_analysis_report_for_abs(self):
        config = RunConfig()
        program, analysis, _, _ = _pipeline(ABS_SOURCE, config)
        document = build_analysis_report("abs.mc", ABS_SOURCE, program, analysis, config, STARTED)
        self.assertEqual(document.command, "analyze")
        self.assertEqual(document.exit_code, 1)
        self.assertEqual(document.analysis.alarms, 1)
        alarms = [a for a in document.assertions if a.status == "alarm"]
        self.assertEqual([a.kind for a in alarms], ["overflow"])
        self.assertEqual(alarms[0].function, "abs")
        self.assertEqual(len(document.program_sha256), 64)

    def test_instrumented_source(self):
        program, analysis, _, _ = _pipeline(ABS_SOURCE)
        annotated = instrumented_source(program, analysis.assertions)
        self.assertIn("/*@ assert overflow: -2147483647 <= x; */", annotated)

    def test_run_report_for_abs(self):
        config = RunConfig()
        program, analysis, queue, synthesizer = _pipeline(ABS_SOURCE, config)
        report = synthesizer.process_queue(queue)
        document = build_run_report("abs.mc", ABS_SOURCE, program, analysis, queue, report, config, STARTED)
        self.assertEqual(document.exit_code, 1)
        self.assertEqual([v.assertion for v in document.verdicts], [q.assertion for q in document.queue])
        self.assertEqual(document.verdicts[-1].verdict, "definitive_rte")
        self.assertIn("abs", document.contracts)
        self.assertEqual(document.generator.backend, "oracle")

    def test_run_report_for_id(self):
        config = RunConfig()
        program, analysis, queue, synthesizer = _pipeline(ID_SOURCE, config)
        report = synthesizer.process_queue(queue)
        document = build_run_report("id.mc", ID_SOURCE, program, analysis, queue, report, config, STARTED)
        self.assertEqual(document.exit_code, 0)
        self.assertEqual(document.contracts, {"id": ["ensures \\result == x;"]})
        self.assertTrue(all(v.verdict == "certified" for v in document.verdicts))

    def test_written_report_validates(self):
        config = RunConfig()
        program, analysis, queue, synthesizer = _pipeline(ID_SOURCE, config)
        report = synthesizer.process_queue(queue)
        document = build_run_report("id.mc", ID_SOURCE, program, analysis, queue, report, config, STARTED)
        with tempfile.TemporaryDirectory() as directory:
            path = write_report(document, Path(directory) / "nested" / "id.json")
            reloaded = ReportDocument.model_validate_json(path.read_text())
        self.assertEqual(reloaded, document)

    def test_reports_are_deterministic(self):
        documents = []
        for _ in range(2):
            config = RunConfig()
            program, analysis, queue, synthesizer = _pipeline(ABS_SOURCE, config)
            report = synthesizer.process_queue(queue)
            document = build_run_report("abs.mc", ABS_SOURCE, program, analysis, queue, report, config, STARTED)
            documents.append(json.loads(report_json(document)))
        for document in documents:
            del document["timing"]
        self.assertEqual(documents[0], documents[1])

    def test_stopped_run_lists_a_prefix(self):
        config = RunConfig()
        program, analysis, queue, synthesizer = _pipeline(ABS_SOURCE, config)
        report = synthesizer.process_queue(queue)
        report.verdicts = report.verdicts[:1]
        with self.assertRaises(ValidationError):
            build_run_report("abs.mc", ABS_SOURCE, program, analysis, queue, report, config, STARTED)
        report.stopped = True
        document = build_run_report("abs.mc", ABS_SOURCE, program, analysis, queue, report, config, STARTED)
        self.assertEqual(len(document.verdicts), 1)
        self.assertEqual(document.exit_code, 1)

    def test_write_transcripts(self):
        _, _, queue, synthesizer = _pipeline(ABS_SOURCE)
        report = synthesizer.process_queue(queue)
        with tempfile.TemporaryDirectory() as directory:
            written = write_transcripts(report, directory)
            self.assertEqual(len(written), len(report.transcripts))
            for path in written:
                self.assertIn("# Prompt", path.read_text())


class SmtExportTestCase(TestCase):

    @classmethod
    def setUpClass(cls):
        cls.program, _, cls.queue, cls.synthesizer = _pipeline(ABS_SOURCE)
        cls.synthesizer.process_queue(cls.queue)
        cls.target = next(v for v in cls.queue if v.target.kind == AssertionKind.SIGNED_OVERFLOW)
        cls.bad_call = [v for v in cls.queue if v.target.kind == AssertionKind.CALLSITE][-1]

    def test_files_named_after_vcs(self):
        with tempfile.TemporaryDirectory() as directory:
            written = export_smt(self.synthesizer.refresh(self.target), self.program, None, directory)
            names = [path.name for path in written]
            self.assertIn(f"{self.target.target.id}.smt2", names)
            script = (Path(directory) / f"{self.target.target.id}.smt2").read_text()
        self.assertIn("(set-logic QF_LIA)", script)
        self.assertIn("(check-sat)", script)

    @skipIf(smt.z3 is None, "z3 is not installed")
    def test_target_vc_is_unsat(self):
        with tempfile.TemporaryDirectory() as directory:
            export_smt(self.synthesizer.refresh(self.target), self.program, None, directory)
            self.assertEqual(_solve_file(Path(directory) / f"{self.target.target.id}.smt2"), "unsat")

    @skipIf(smt.z3 is None, "z3 is not installed")
    def test_violated_call_site_vc_is_sat(self):
        with tempfile.TemporaryDirectory() as directory:
            export_smt(self.synthesizer.refresh(self.bad_call), self.program, None, directory)
            self.assertEqual(_solve_file(Path(directory) / f"{self.bad_call.target.id}.smt2"), "sat")


class CommandLineTestCase(TestCase):

    def setUp(self):
        self.runner = CliRunner(mix_stderr=False)
        self.directory = tempfile.TemporaryDirectory()
        self.addCleanup(self.directory.cleanup)
        # the CLI binds the console handler to the runner's stream
        self.addCleanup(configure_logging)

    def write(self, name, source):
        path = Path(self.directory.name) / name
        path.write_text(source)
        return str(path)

    def invoke(self, *args):
        return self.runner.invoke(app, list(args))

    def test_analyze_abs(self):
        result = self.invoke("analyze", self.write("abs.mc", ABS_SOURCE))
        self.assertEqual(result.exit_code, 1)
        document = json.loads(result.stdout)
        self.assertEqual(document["analysis"]["alarms"], 1)
        self.assertIn("alarm overflow@", result.stderr)

    def test_analyze_constant_safe(self):
        result = self.invoke("analyze", self.write("safe.mc", SAFE_SOURCE))
        self.assertEqual(result.exit_code, 0)
        self.assertEqual(json.loads(result.stdout)["analysis"]["alarms"], 0)

    def test_analyze_malformed(self):
        result = self.invoke("analyze", self.write("bad.mc", MALFORMED_SOURCE))
        self.assertEqual(result.exit_code, 2)
        self.assertIn("syntax", result.stderr)

    def test_analyze_writes_report_and_source(self):
        report = Path(self.directory.name) / "abs.json"
        result = self.invoke("analyze", self.write("abs.mc", ABS_SOURCE), "--report", str(report))
        self.assertEqual(result.exit_code, 1)
        ReportDocument.model_validate_json(report.read_text())
        self.assertIn("/*@ assert", report.with_suffix(".c").read_text())

    def test_bad_width(self):
        result = self.invoke("analyze", self.write("abs.mc", ABS_SOURCE), "--width", "12")
        self.assertEqual(result.exit_code, 2)
        self.assertIn("width", result.stderr)

    def test_run_id(self):
        report = Path(self.directory.name) / "id.json"
        result = self.invoke("run", self.write("id.mc", ID_SOURCE), "--report", str(report))
        self.assertEqual(result.exit_code, 0)
        document = json.loads(report.read_text())
        self.assertEqual(document["contracts"], {"id": ["ensures \\result == x;"]})
        annotated = report.with_suffix(".c").read_text()
        self.assertIn("ensures \\result == x;", annotated)
        self.assertNotIn("requires", annotated)

    def test_run_annotated_without_report(self):
        annotated = Path(self.directory.name) / "out" / "id.c"
        result = self.invoke("run", self.write("id.mc", ID_SOURCE), "--annotated", str(annotated))
        self.assertEqual(result.exit_code, 0)
        self.assertEqual(json.loads(result.stdout)["contracts"], {"id": ["ensures \\result == x;"]})
        self.assertIn("ensures \\result == x;", annotated.read_text())

    def test_analyze_annotated_directory(self):
        output = Path(self.directory.name) / "annotated"
        report = Path(self.directory.name) / "reports"
        inputs = [self.write("abs.mc", ABS_SOURCE), self.write("safe.mc", SAFE_SOURCE)]
        result = self.invoke("analyze", *inputs, "--report", str(report), "--annotated", str(output))
        self.assertEqual(result.exit_code, 1)
        self.assertIn("/*@ assert", (output / "abs.c").read_text())
        self.assertTrue((output / "safe.c").exists())
        self.assertFalse((report / "abs.c").exists())
        self.assertTrue((report / "abs.json").exists())

    def test_run_abs(self):
        result = self.invoke("run", self.write("abs.mc", ABS_SOURCE))
        self.assertEqual(result.exit_code, 1)
        document = json.loads(result.stdout)
        self.assertEqual(document["verdicts"][-1]["verdict"], "definitive_rte")
        self.assertIn("definitive_rte", result.stderr)

    def test_run_mutual_recursion(self):
        result = self.invoke("run", self.write("rec.mc", RECURSIVE_SOURCE))
        self.assertEqual(result.exit_code, 2)
        self.assertIn("mutual-recursion", result.stderr)

    def test_run_llm_without_key(self):
        with patch("preguss.cli.EndpointConfig", lambda: EndpointConfig(api_key="")):
            result = self.invoke("run", self.write("id.mc", ID_SOURCE), "--generator", "llm")
        self.assertEqual(result.exit_code, 2)

    def test_dump_queue(self):
        result = self.invoke("run", self.write("abs.mc", ABS_SOURCE), "--dump-queue")
        self.assertEqual(result.exit_code, 0)
        units = json.loads(result.stdout)["units"]
        self.assertEqual(len(units), 3)
        self.assertEqual(units[0]["kind"], "overflow")

    def test_multiple_inputs_take_the_highest_code(self):
        reports = Path(self.directory.name) / "reports"
        result = self.invoke(
            "run", self.write("id.mc", ID_SOURCE), self.write("abs.mc", ABS_SOURCE), "--report", str(reports),
        )
        self.assertEqual(result.exit_code, 1)
        self.assertTrue((reports / "id.json").exists())
        self.assertTrue((reports / "abs.json").exists())
        self.assertTrue((reports / "abs.c").exists())

    def test_save_transcripts(self):
        report = Path(self.directory.name) / "abs.json"
        self.invoke("run", self.write("abs.mc", ABS_SOURCE), "--report", str(report), "--save-transcripts")
        self.assertTrue(list((Path(self.directory.name) / "abs.transcripts").glob("*.md")))

    def test_export_smt(self):
        source = self.write("abs.mc", ABS_SOURCE)
        units = json.loads(self.invoke("run", source, "--dump-queue").stdout)["units"]
        target = next(entry["assertion"] for entry in units if entry["kind"] == "overflow")
        output = Path(self.directory.name) / "smt"
        result = self.invoke("export-smt", source, "--assertion", target, "--output", str(output))
        self.assertEqual(result.exit_code, 0)
        self.assertTrue((output / f"{target}.smt2").exists())

    def test_export_smt_empty_selection(self):
        output = Path(self.directory.name) / "smt"
        result = self.invoke("export-smt", self.write("abs.mc", ABS_SOURCE), "--output", str(output))
        self.assertEqual(result.exit_code, 0)
        self.assertFalse(output.exists())

    def test_export_smt_unknown_assertion(self):
        result = self.invoke("export-smt", self.write("abs.mc", ABS_SOURCE), "--assertion", "overflow@999")
        self.assertEqual(result.exit_code, 2)
        self.assertIn("overflow@999", result.stderr)

    def test_schema(self):
        result = self.invoke("schema")
        self.assertEqual(result.exit_code, 0)
        self.assertEqual(json.loads(result.stdout)["title"], "ReportDocument")
