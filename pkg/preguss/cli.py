"""
Command-line entry points.

    preguss analyze FILE...      guard assertions and their analysis status
    preguss run FILE...          the full synthesis pipeline
    preguss export-smt FILE      SMT-LIB files for the VCs of selected units
    preguss schema               JSON schema of the report document

Exit codes: 0 when everything is proven or certified, 1 when alarms or unverified
assertions remain, 2 on errors. With several inputs the highest code wins.
"""

import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional

import typer
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table
from typing_extensions import Annotated

from preguss import configure_logging, settings
from preguss.absint.analyzer import analyze
from preguss.callgraph.graph import build_call_graph, collect_assertions
from preguss.callgraph.queue import dump_queue, enqueue
from preguss.errors import PregussError, UnknownAssertion
from preguss.frontend.models import IntWidth
from preguss.frontend.parser import parse
from preguss.frontend.resolver import resolve
from preguss.reports.models import ReportDocument, RunConfig
from preguss.reports.utils import (
    build_analysis_report, build_run_report, export_smt, instrumented_source, report_json, report_schema,
    verdict_summary, write_report, write_transcripts,
)
from preguss.synthesis.models import EndpointConfig
from preguss.synthesis.pipeline import Synthesizer, make_generator

logger = logging.getLogger("preguss")

app = typer.Typer(help="Runtime-error guard verification by interprocedural specification synthesis.",
                  add_completion=False, no_args_is_help=True)
console = Console(stderr=True)

EXIT_OK, EXIT_ERROR = 0, 2

Inputs = Annotated[List[Path], typer.Argument(help="MiniC source files.", exists=True, dir_okay=False)]
WidthOption = Annotated[int, typer.Option("--width", "-w", help="Integer width in bits: 8, 16 or 32.")]
ReportOption = Annotated[Optional[Path], typer.Option(
    "--report", help="Report file, or a directory when several inputs are given. Defaults to stdout.")]
AnnotatedOption = Annotated[Optional[Path], typer.Option(
    "--annotated", help="Annotated source file, or a directory for several inputs. Defaults to beside the report.")]
GeneratorOption = Annotated[str, typer.Option("--generator", "-g", help="Specification generator: oracle or llm.")]
MaxItersOption = Annotated[int, typer.Option("--max-iters", help="Generator calls per phase and unit.")]


@app.callback()
def main_callback(
    log_level: Annotated[str, typer.Option("--log-level", help="Logging level of the preguss logger.")] = settings.LOG_LEVEL,
):
    configure_logging(log_level.upper())


def _outputs(path: Path, config: RunConfig, suffix: str) -> Optional[Path]:
    """Where the output with the given suffix goes for one input, None for stdout."""
    several = len(config.inputs) > 1
    if suffix == ".c" and config.annotated is not None:
        return config.annotated / f"{path.stem}{suffix}" if several else config.annotated
    if config.report is None:
        return None
    if several:
        return config.report / f"{path.stem}{suffix}"
    return config.report if suffix == ".json" else config.report.with_suffix(suffix)


def _emit(document: ReportDocument, source: str, path: Path, config: RunConfig):
    report_path = _outputs(path, config, ".json")
    if report_path is None:
        typer.echo(report_json(document), nl=False)
    else:
        write_report(document, report_path)
    annotated = _outputs(path, config, ".c")
    if annotated is None:
        return
    annotated.parent.mkdir(parents=True, exist_ok=True)
    annotated.write_text(source)
    logger.info(f"Annotated source written to {annotated}")


def _load(path: Path, width: int):
    source = path.read_text()
    return source, resolve(parse(source, str(path)), IntWidth(width))


def _guarded(path: Path, action) -> int:
    """Runs action for one input and turns failures into exit code 2."""
    try:
        return action()
    except PregussError as error:
        console.print(f"[red]{path}[/red]: {error.diagnostic()}", highlight=False)
        return EXIT_ERROR
    except ValidationError as error:
        console.print(f"[red]{path}[/red]: invalid configuration: {error}", highlight=False)
        return EXIT_ERROR
    except Exception:
        logger.exception(f"Unexpected failure on {path}")
        return EXIT_ERROR


def _config(**values) -> Optional[RunConfig]:
    try:
        return RunConfig(**values)
    except ValidationError as error:
        for problem in error.errors():
            console.print(f"invalid option {'.'.join(map(str, problem['loc']))}: {problem['msg']}", highlight=False)
        return None


def _print_verdicts(path: Path, document: ReportDocument):
    table = Table(title=str(path))
    for column in ("assertion", "function", "verdict", "iterations"):
        table.add_column(column)
    for entry in document.verdicts:
        style = {"certified": "green", "definitive_rte": "red"}.get(entry.verdict, "yellow")
        table.add_row(entry.assertion, entry.function, f"[{style}]{entry.verdict}[/{style}]", str(entry.iterations))
    console.print(table)


@app.command("analyze")
def cmd_analyze(
    inputs: Inputs,
    width: WidthOption = settings.DEFAULT_WIDTH,
    report: ReportOption = None,
    annotated: AnnotatedOption = None,
):
    """Instruments every RTE-susceptible operation with its guard and classifies it."""
    config = _config(inputs=inputs, width=width, report=report, annotated=annotated)
    if config is None:
        raise typer.Exit(EXIT_ERROR)

    def analyze_one(path: Path) -> int:
        started = datetime.now(timezone.utc)
        source, program = _load(path, config.width)
        analysis = analyze(program)
        document = build_analysis_report(str(path), source, program, analysis, config, started)
        _emit(document, instrumented_source(program, analysis.assertions), path, config)
        for alarm in analysis.alarms():
            console.print(f"{alarm.location or alarm.function}: alarm {alarm.id}", highlight=False)
        return document.exit_code

    raise typer.Exit(max(_guarded(path, lambda: analyze_one(path)) for path in config.inputs))


@app.command("run")
def cmd_run(
    inputs: Inputs,
    width: WidthOption = settings.DEFAULT_WIDTH,
    generator: GeneratorOption = "oracle",
    max_iters: MaxItersOption = settings.DEFAULT_MAX_ITERS,
    report: ReportOption = None,
    annotated: AnnotatedOption = None,
    dump_queue_only: Annotated[bool, typer.Option(
        "--dump-queue", help="Print the V-Unit queue as JSON and stop.")] = False,
    continue_on_alert: Annotated[bool, typer.Option(
        "--continue-on-alert", help="Keep going after a high-risk alert.")] = False,
    no_dependency_filter: Annotated[bool, typer.Option(
        "--no-dependency-filter", help="Keep every direct callee body in the slices.")] = False,
    save_transcripts: Annotated[bool, typer.Option(
        "--save-transcripts", help="Write full prompts and responses next to the report.")] = False,
):
    """Synthesizes contracts unit by unit and reports a verdict for every assertion."""
    config = _config(
        inputs=inputs, width=width, generator=generator, max_iters=max_iters, report=report, annotated=annotated,
        dump_queue=dump_queue_only, continue_on_alert=continue_on_alert,
        filter_dependencies=not no_dependency_filter, save_transcripts=save_transcripts,
    )
    if config is None:
        raise typer.Exit(EXIT_ERROR)

    backend = None

    def run_one(path: Path) -> int:
        nonlocal backend
        started = datetime.now(timezone.utc)
        source, program = _load(path, config.width)
        cg = build_call_graph(program)
        analysis = analyze(program)
        queue = enqueue(collect_assertions(analysis, cg, program), cg, program,
                        filter_dependencies=config.filter_dependencies)
        if config.dump_queue:
            typer.echo(dump_queue(queue))
            return EXIT_OK

        synthesis = config.synthesis_config()
        if backend is None:
            backend = make_generator(synthesis, EndpointConfig())
        synthesizer = Synthesizer(program, cg, backend, synthesis, analysis)
        outcome = synthesizer.process_queue(queue)
        document = build_run_report(str(path), source, program, analysis, queue, outcome, config, started)
        _emit(document, outcome.annotated, path, config)

        if config.save_transcripts:
            report_path = _outputs(path, config, ".json")
            directory = (report_path.parent if report_path else Path.cwd()) / f"{path.stem}.transcripts"
            write_transcripts(outcome, directory)
        _print_verdicts(path, document)
        logger.info(f"{path}: {verdict_summary(outcome)}, {outcome.generator_calls} generator calls")
        return document.exit_code

    raise typer.Exit(max(_guarded(path, lambda: run_one(path)) for path in config.inputs))


@app.command("export-smt")
def cmd_export_smt(
    input: Annotated[Path, typer.Argument(help="MiniC source file.", exists=True, dir_okay=False)],
    assertion: Annotated[List[str], typer.Option(
        "--assertion", "-a", help="Assertion id of a unit to export, may be repeated.")] = [],
    output: Annotated[Path, typer.Option("--output", "-o", help="Directory for the .smt2 files.")] = Path("smt"),
    width: WidthOption = settings.DEFAULT_WIDTH,
    generator: GeneratorOption = "oracle",
    max_iters: MaxItersOption = settings.DEFAULT_MAX_ITERS,
    synthesis: Annotated[bool, typer.Option(
        "--synthesis/--no-synthesis", help="Export under the contracts a full run accepts.")] = True,
):
    """Writes one SMT-LIB v2 file per verification condition of the selected units."""
    config = _config(inputs=[input], width=width, generator=generator, max_iters=max_iters, continue_on_alert=True)
    if config is None:
        raise typer.Exit(EXIT_ERROR)

    def export() -> int:
        source, program = _load(input, config.width)
        cg = build_call_graph(program)
        analysis = analyze(program)
        queue = enqueue(collect_assertions(analysis, cg, program), cg, program,
                        filter_dependencies=config.filter_dependencies)
        units = {v.target.id: v for v in queue}
        unknown = [name for name in assertion if name not in units]
        if unknown:
            raise UnknownAssertion(f"no assertion with id '{unknown[0]}'")
        if not assertion:
            return EXIT_OK

        synthesis_config = config.synthesis_config()
        synthesizer = Synthesizer(program, cg, make_generator(synthesis_config, EndpointConfig()) if synthesis else None,
                                  synthesis_config, analysis)
        if synthesis:
            synthesizer.process_queue(queue)
        for name in assertion:
            v = synthesizer.refresh(units[name])
            for path in export_smt(v, program, None, output):
                typer.echo(str(path))
        return EXIT_OK

    raise typer.Exit(_guarded(input, export))


@app.command("schema")
def cmd_schema(
    output: Annotated[Optional[Path], typer.Option("--output", "-o", help="Write the schema to a file.")] = None,
):
    """Prints the JSON schema every report validates against."""
    schema = report_schema()
    if output is None:
        typer.echo(schema, nl=False)
    else:
        output.write_text(schema)


def main():
    app(prog_name="preguss")
