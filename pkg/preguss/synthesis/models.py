import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field

from preguss import settings
from preguss.absint.models import AnalysisResult
from preguss.callgraph.models import VUnit
from preguss.frontend.models import TypedProgram
from preguss.specs.models import Clause, ContractEnv
from preguss.specs.render import render_clause, render_pred
from preguss.verifier.models import DischargeConfig, UnitVerification, VCStatus


class Phase(str, Enum):
    HOST = "host"
    CALLEES = "callees"


class PhaseStatus(str, Enum):
    SUCCESS = "success"
    NEEDS_CALLEES = "needs-callees"
    # callee ensures were verified but the target still fails
    RESUME_HOST = "resume-host"
    FAILED = "failed"


class Verdict(str, Enum):
    CERTIFIED = "certified"
    DEFINITIVE_RTE = "definitive_rte"
    HIGH_RISK_ALERT = "high_risk_alert"


@dataclass
class FeedbackEntry:
    """One refinement round: what was proposed and what the verifier said about it."""

    clauses: List[Clause]
    outcomes: Dict[str, VCStatus] = field(default_factory=dict)
    messages: List[str] = field(default_factory=list)
    # clauses whose own VCs failed
    rejected: List[Clause] = field(default_factory=list)

    @classmethod
    def from_verification(
        cls, clauses: List[Clause], verification: UnitVerification, rejected=(), notes=(),
    ) -> "FeedbackEntry":
        messages = list(notes)
        for vc in verification.failed():
            outcome = verification.outcomes[vc.id]
            message = f"{vc.description} (node {vc.origin}) is {outcome.status.value}: {render_pred(vc.formula)}"
            if outcome.witness:
                values = ", ".join(f"{name} = {value}" for name, value in sorted(outcome.witness.items()))
                message += f"; counterexample {values}"
            messages.append(message)
        return cls(
            clauses=list(clauses),
            outcomes={vc_id: outcome.status for vc_id, outcome in verification.outcomes.items()},
            messages=messages,
            rejected=list(rejected),
        )

    def render(self) -> str:
        proposed = "\n".join(f"  {render_clause(clause)}" for clause in self.clauses) or "  (nothing)"
        verdicts = "\n".join(f"  - {message}" for message in self.messages) or "  - all verification conditions hold"
        return f"Proposed:\n{proposed}\nVerifier:\n{verdicts}"


@dataclass
class GeneratorRequest:
    phase: Phase
    unit: VUnit
    program: TypedProgram
    contracts: ContractEnv
    source: str
    feedback: List[FeedbackEntry] = field(default_factory=list)
    attempt: int = 1
    analysis: Optional[AnalysisResult] = None

    @property
    def callees(self) -> List[str]:
        return list(self.unit.callees)

    def rejected(self) -> List[Clause]:
        clauses = []
        for entry in self.feedback:
            clauses.extend(clause for clause in entry.rejected if clause not in clauses)
        return clauses

    def proposed_before(self, clauses: List[Clause]) -> bool:
        return any(set(entry.clauses) == set(clauses) for entry in self.feedback)


@dataclass
class GeneratorResponse:
    clauses: List[Clause]
    raw: str = ""
    notes: List[str] = field(default_factory=list)
    prompt: str = ""
    prompt_tokens: Optional[int] = None
    response_tokens: Optional[int] = None


@dataclass(frozen=True)
class TranscriptDigest:
    unit: str
    phase: Phase
    attempt: int
    prompt_sha256: str
    response_sha256: str
    prompt_tokens: int
    response_tokens: int

    @classmethod
    def of(cls, unit: str, phase: Phase, attempt: int, prompt: str, response: str,
           prompt_tokens: Optional[int] = None, response_tokens: Optional[int] = None) -> "TranscriptDigest":
        return cls(
            unit=unit,
            phase=phase,
            attempt=attempt,
            prompt_sha256=hashlib.sha256(prompt.encode()).hexdigest(),
            response_sha256=hashlib.sha256(response.encode()).hexdigest(),
            prompt_tokens=len(prompt.split()) if prompt_tokens is None else prompt_tokens,
            response_tokens=len(response.split()) if response_tokens is None else response_tokens,
        )


@dataclass
class Transcript:
    digest: TranscriptDigest
    prompt: str
    response: str


class SynthesisConfig(BaseModel):
    max_iters: int = Field(default=settings.DEFAULT_MAX_ITERS, ge=1)
    generator: Literal["oracle", "llm"] = "oracle"
    continue_on_alert: bool = False
    filter_dependencies: bool = True
    discharge: DischargeConfig = Field(default_factory=DischargeConfig)


class EndpointConfig(BaseModel):
    base_url: str = settings.LLM_BASE_URL
    model: str = settings.LLM_MODEL
    api_key: str = settings.LLM_API_KEY
    timeout: float = Field(default=settings.LLM_TIMEOUT, gt=0)
    max_retries: int = Field(default=settings.LLM_MAX_RETRIES, ge=1)
    backoff_seconds: float = Field(default=settings.LLM_BACKOFF_SECONDS, ge=0)
    temperature: float = 0.0


@dataclass
class PhaseResult:
    status: PhaseStatus
    accepted: List[Clause] = field(default_factory=list)
    verification: Optional[UnitVerification] = None
    iterations: int = 0
    feedback: List[FeedbackEntry] = field(default_factory=list)


@dataclass
class AssertionVerdict:
    assertion: str
    kind: str
    function: str
    verdict: Verdict
    location: Optional[str] = None
    # ids of the valid VCs a certificate rests on
    certificate: List[str] = field(default_factory=list)
    witness: Optional[Dict[str, int]] = None
    feedback: Optional[str] = None
    iterations: int = 0
    # call-site assertions whose predicate came from requires accepted for this unit
    provisional_callsites: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            "assertion": self.assertion,
            "kind": self.kind,
            "function": self.function,
            "location": self.location,
            "verdict": self.verdict.value,
            "certificate": list(self.certificate),
            "witness": self.witness,
            "feedback": self.feedback,
            "iterations": self.iterations,
            "provisional_callsites": list(self.provisional_callsites),
        }


@dataclass
class PipelineReport:
    verdicts: List[AssertionVerdict] = field(default_factory=list)
    contracts: Dict[str, List[str]] = field(default_factory=dict)
    iterations: Dict[str, int] = field(default_factory=dict)
    transcripts: List[Transcript] = field(default_factory=list)
    generator_calls: int = 0
    stopped: bool = False
    annotated: str = ""

    def verdict(self, assertion_id: str) -> AssertionVerdict:
        for verdict in self.verdicts:
            if verdict.assertion == assertion_id:
                return verdict
        raise KeyError(assertion_id)

    @property
    def all_certified(self) -> bool:
        return all(verdict.verdict == Verdict.CERTIFIED for verdict in self.verdicts)
