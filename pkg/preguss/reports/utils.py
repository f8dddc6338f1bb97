import hashlib
import json
import logging
import re
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, List, Optional

from preguss.absint.models import AnalysisResult, RteAssertion
from preguss.callgraph.models import VUnit, VUnitQueue
from preguss.frontend.models import TypedProgram
from preguss.frontend.render import render
from preguss.reports.models import (
    AnalysisSummary, AssertionEntry, GeneratorSummary, QueueEntry, ReportDocument, RunConfig, Timing, TranscriptEntry,
    VerdictEntry,
)
from preguss.specs.models import ContractEnv
from preguss.specs.render import render_pred
from preguss.synthesis.models import PipelineReport, Verdict
from preguss.verifier import smt
from preguss.verifier.vcgen import gen_vcs

logger = logging.getLogger("preguss")


def program_digest(source: str) -> str:
    return hashlib.sha256(source.encode()).hexdigest()


def timing(started: datetime) -> Timing:
    elapsed = (datetime.now(timezone.utc) - started).total_seconds()
    return Timing(started_at=started.isoformat(), elapsed_seconds=round(elapsed, 6))


def assertion_entries(assertions: Iterable[RteAssertion]) -> List[AssertionEntry]:
    return [
        AssertionEntry(
            id=a.id,
            kind=a.kind.value,
            function=a.function,
            location=str(a.location) if a.location else None,
            status=a.status.value,
            predicate=render_pred(a.predicate),
            callee=a.callee,
        )
        for a in assertions
    ]


def analysis_summary(analysis: AnalysisResult) -> AnalysisSummary:
    return AnalysisSummary(
        assertions=len(analysis.assertions),
        alarms=len(analysis.alarms()),
        by_kind=analysis.summary(),
    )


def instrumented_source(program: TypedProgram, assertions: Iterable[RteAssertion]) -> str:
    """The program with every guard assertion as an ACSL comment above the statement it guards."""
    return render(program, [(a.node_id, a.as_clause()) for a in assertions])


def analysis_exit_code(analysis: AnalysisResult) -> int:
    return 1 if analysis.alarms() else 0


def run_exit_code(report: PipelineReport) -> int:
    return 0 if report.all_certified and not report.stopped else 1


def build_analysis_report(
    path: str, source: str, program: TypedProgram, analysis: AnalysisResult, config: RunConfig, started: datetime,
) -> ReportDocument:
    return ReportDocument(
        command="analyze",
        input=path,
        program_sha256=program_digest(source),
        width=program.width.bits,
        config=config.echo(),
        analysis=analysis_summary(analysis),
        assertions=assertion_entries(analysis.assertions),
        exit_code=analysis_exit_code(analysis),
        timing=timing(started),
    )


def build_run_report(
    path: str,
    source: str,
    program: TypedProgram,
    analysis: AnalysisResult,
    queue: VUnitQueue,
    report: PipelineReport,
    config: RunConfig,
    started: datetime,
) -> ReportDocument:
    queue_entries = [
        QueueEntry(priority=v.priority, assertion=v.target.id, kind=v.target.kind.value, host=v.host,
                   slice=list(v.slice), dropped=list(v.dropped))
        for v in queue
    ]
    transcripts = [
        TranscriptEntry(
            unit=t.digest.unit,
            phase=t.digest.phase.value,
            attempt=t.digest.attempt,
            prompt_sha256=t.digest.prompt_sha256,
            response_sha256=t.digest.response_sha256,
            prompt_tokens=t.digest.prompt_tokens,
            response_tokens=t.digest.response_tokens,
        )
        for t in report.transcripts
    ]
    return ReportDocument(
        command="run",
        input=path,
        program_sha256=program_digest(source),
        width=program.width.bits,
        config=config.echo(),
        analysis=analysis_summary(analysis),
        assertions=assertion_entries(v.target for v in queue),
        queue=queue_entries,
        verdicts=[VerdictEntry(**verdict.to_dict()) for verdict in report.verdicts],
        contracts=report.contracts,
        generator=GeneratorSummary(backend=config.generator, calls=report.generator_calls, transcripts=transcripts),
        stopped=report.stopped,
        exit_code=run_exit_code(report),
        timing=timing(started),
    )


def report_json(document: ReportDocument) -> str:
    # round trip through the model so what is written has passed validation
    validated = ReportDocument.model_validate(document.model_dump(mode="json"))
    return validated.model_dump_json(indent=2) + "\n"


def write_report(document: ReportDocument, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report_json(document))
    logger.info(f"Report written to {path}")
    return path


def report_schema() -> str:
    return json.dumps(ReportDocument.model_json_schema(), indent=2) + "\n"


def verdict_summary(report: PipelineReport) -> dict:
    counts = {verdict.value: 0 for verdict in Verdict}
    for verdict in report.verdicts:
        counts[verdict.verdict.value] += 1
    return counts


def write_transcripts(report: PipelineReport, directory: Path) -> List[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for index, transcript in enumerate(report.transcripts, 1):
        digest = transcript.digest
        path = directory / f"{index:03d}_{safe_name(digest.unit)}_{digest.phase.value}_{digest.attempt}.md"
        path.write_text(f"# Prompt\n\n{transcript.prompt}\n\n# Response\n\n{transcript.response}\n")
        written.append(path)
    return written


def safe_name(text: str) -> str:
    return re.sub(r"[^\w@.-]", "_", text)


def export_smt(v: VUnit, program: TypedProgram, contracts: Optional[ContractEnv], directory: Path) -> List[Path]:
    """One SMT-LIB file per VC of the unit. unsat means the VC holds."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if contracts is not None:
        v = v.with_contracts(contracts)
    written = []
    for vc in gen_vcs(v, (), program):
        comment = f"{vc.id}: {vc.description} in {vc.function}, {program.width.bits}-bit"
        path = directory / f"{safe_name(vc.id)}.smt2"
        path.write_text(smt.smtlib_script(vc.formula, vc.width, comment=comment))
        written.append(path)
    logger.info(f"{v.target.id}: {len(written)} SMT-LIB files written to {directory}")
    return written

