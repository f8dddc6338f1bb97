from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from preguss import settings
from preguss.reports.validators import validate_verdict_order, validate_width
from preguss.synthesis.models import SynthesisConfig
from preguss.verifier.models import DischargeConfig

REPORT_VERSION = "1.0"


class RunConfig(BaseModel):
    """Everything one invocation was asked to do. CLI flags land here."""

    inputs: List[Path] = Field(default_factory=list)
    width: int = settings.DEFAULT_WIDTH
    generator: Literal["oracle", "llm"] = "oracle"
    max_iters: int = Field(default=settings.DEFAULT_MAX_ITERS, ge=1)
    report: Optional[Path] = None
    annotated: Optional[Path] = None
    dump_queue: bool = False
    continue_on_alert: bool = False
    filter_dependencies: bool = True
    save_transcripts: bool = False
    solver_command: Optional[List[str]] = None

    check_width = field_validator("width")(validate_width)

    def synthesis_config(self) -> SynthesisConfig:
        return SynthesisConfig(
            max_iters=self.max_iters,
            generator=self.generator,
            continue_on_alert=self.continue_on_alert,
            filter_dependencies=self.filter_dependencies,
            discharge=DischargeConfig(solver_command=self.solver_command),
        )

    def echo(self) -> Dict[str, Any]:
        """The settings that shape the result. Paths are left out so reports of one input compare equal."""
        return self.model_dump(exclude={"inputs", "report", "annotated"}, mode="json")


class AssertionEntry(BaseModel):
    id: str
    kind: str
    function: str
    location: Optional[str] = None
    status: str
    predicate: str
    callee: Optional[str] = None


class AnalysisSummary(BaseModel):
    assertions: int
    alarms: int
    # assertion counts by kind, then by status
    by_kind: Dict[str, Dict[str, int]] = Field(default_factory=dict)


class QueueEntry(BaseModel):
    priority: int
    assertion: str
    kind: str
    host: str
    slice: List[str]
    dropped: List[str] = Field(default_factory=list)


class VerdictEntry(BaseModel):
    assertion: str
    kind: str
    function: str
    location: Optional[str] = None
    verdict: Literal["certified", "definitive_rte", "high_risk_alert"]
    certificate: List[str] = Field(default_factory=list)
    witness: Optional[Dict[str, int]] = None
    feedback: Optional[str] = None
    iterations: int = 0
    provisional_callsites: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_evidence(self):
        if self.verdict == "certified" and not self.certificate:
            raise ValueError(f"{self.assertion}: a certified verdict needs its valid verification conditions")
        if self.verdict == "definitive_rte" and self.witness is None:
            raise ValueError(f"{self.assertion}: a definitive RTE needs a witness")
        if self.verdict == "high_risk_alert" and not self.feedback:
            raise ValueError(f"{self.assertion}: a high-risk alert needs the last feedback")
        return self


class TranscriptEntry(BaseModel):
    unit: str
    phase: Literal["host", "callees"]
    attempt: int
    prompt_sha256: str
    response_sha256: str
    prompt_tokens: int
    response_tokens: int


class GeneratorSummary(BaseModel):
    backend: str
    calls: int = 0
    transcripts: List[TranscriptEntry] = Field(default_factory=list)


class Timing(BaseModel):
    started_at: str
    elapsed_seconds: float


class ReportDocument(BaseModel):
    version: str = REPORT_VERSION
    command: Literal["analyze", "run"]
    input: str
    program_sha256: str
    width: int
    config: Dict[str, Any] = Field(default_factory=dict)
    analysis: AnalysisSummary
    assertions: List[AssertionEntry] = Field(default_factory=list)
    queue: List[QueueEntry] = Field(default_factory=list)
    verdicts: List[VerdictEntry] = Field(default_factory=list)
    contracts: Dict[str, List[str]] = Field(default_factory=dict)
    generator: Optional[GeneratorSummary] = None
    stopped: bool = False
    exit_code: int = Field(ge=0, le=2)
    timing: Timing

    check_width = field_validator("width")(validate_width)

    @model_validator(mode="after")
    def check_verdicts(self):
        validate_verdict_order(
            [entry.assertion for entry in self.queue],
            [entry.assertion for entry in self.verdicts],
            complete=not self.stopped and self.command == "run",
        )
        return self
