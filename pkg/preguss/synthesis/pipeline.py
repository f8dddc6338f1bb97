"""
Two-phase synthesis over the V-Unit queue.

Units are taken in queue order. The host phase asks the generator for host
preconditions and loop clauses; when the target keeps failing on a value returned
by a sliced callee, the callee phase asks for callee postconditions instead, with
callee preconditions prohibited. Accepted clauses go to the contract store and are
visible to every later unit.
"""

import logging
from typing import Dict, List, Optional, Tuple

from preguss.absint.analyzer import analyze
from preguss.absint.models import AnalysisConfig, AnalysisResult, AssertionKind, AssertionStatus, RteAssertion
from preguss.callgraph.graph import build_call_graph, collect_assertions
from preguss.callgraph.models import CallGraph, VUnit, VUnitQueue
from preguss.callgraph.queue import enqueue
from preguss.callgraph.slicing import restrict_contracts
from preguss.errors import ResponseParseEmpty, TemplateExhausted
from preguss.frontend.models import CallExpr, TypedProgram
from preguss.frontend.render import render
from preguss.specs.models import TRUE, Clause, ClauseKind, ContractEnv
from preguss.specs.render import render_clause
from preguss.specs.utils import (
    conj, expr_to_term, fold_constants, free_vars, mentions_old, mentions_result, negate, simplify, substitute,
)
from preguss.synthesis.llm_integration import LLMGenerator, render_prompt, unit_source
from preguss.synthesis.models import (
    AssertionVerdict, FeedbackEntry, GeneratorRequest, GeneratorResponse, Phase, PhaseResult, PhaseStatus,
    PipelineReport, SynthesisConfig, Transcript, TranscriptDigest, Verdict,
)
from preguss.synthesis.oracle import OracleGenerator
from preguss.synthesis.store import ContractStore
from preguss.verifier.discharge import check_callsite, discharge_all
from preguss.verifier.models import ObligationKind, UnitVerification, VerificationCondition, VerificationOutcome
from preguss.verifier.unit import UnitVerifier

logger = logging.getLogger("preguss")


def make_generator(config: SynthesisConfig, endpoint=None):
    if config.generator == "llm":
        return LLMGenerator(endpoint)
    return OracleGenerator()


class Synthesizer:

    def __init__(
        self,
        program: TypedProgram,
        cg: CallGraph,
        generator=None,
        config: Optional[SynthesisConfig] = None,
        analysis: Optional[AnalysisResult] = None,
        contracts: ContractEnv = ContractEnv(),
        verifier: Optional[UnitVerifier] = None,
    ):
        self.program = program
        self.cg = cg
        self.config = config or SynthesisConfig()
        self.generator = generator or make_generator(self.config)
        self.analysis = analysis
        self.store = ContractStore(program, contracts)
        self.verifier = verifier or UnitVerifier(program, self.config.discharge)
        self.report = PipelineReport()
        self.anchors = {func.node_id: func.name for func in program.functions}
        # queued call-site assertions by callee
        self.callsites: Dict[str, List[RteAssertion]] = {}
        self.provisional: Dict[str, List[str]] = {}

    # ---------- helpers ----------
    def refresh(self, v: VUnit) -> VUnit:
        """The unit seen through the current store."""
        reachable = [v.host] + sorted(self.cg.transitive_callees(v.host))
        return v.with_contracts(restrict_contracts(self.store.env, reachable, self.program))

    def request(self, phase: Phase, v: VUnit, feedback: List[FeedbackEntry]) -> GeneratorRequest:
        return GeneratorRequest(
            phase=phase,
            unit=v,
            program=self.program,
            contracts=v.contracts,
            source=unit_source(self.program, v, v.contracts),
            feedback=list(feedback),
            attempt=len(feedback) + 1,
            analysis=self.analysis,
        )

    def generate(self, request: GeneratorRequest) -> GeneratorResponse:
        """One generator call, recorded in the transcripts whatever its outcome."""
        self.report.generator_calls += 1
        prompt = render_prompt(request)
        try:
            response = self.generator(request)
        except (TemplateExhausted, ResponseParseEmpty) as error:
            self.record(request, prompt, f"{type(error).__name__}: {error.message}")
            raise
        self.record(request, response.prompt or prompt, response.raw, response.prompt_tokens, response.response_tokens)
        return response

    def record(self, request: GeneratorRequest, prompt: str, response: str, prompt_tokens=None, response_tokens=None):
        digest = TranscriptDigest.of(request.unit.target.id, request.phase, request.attempt, prompt, response,
                                     prompt_tokens, response_tokens)
        self.report.transcripts.append(Transcript(digest, prompt, response))

    def depends_on_callees(self, v: VUnit, verification: UnitVerification) -> bool:
        """True when the failing target mentions a value returned by a sliced callee."""
        target, outcome = verification.target, verification.target_outcome
        if target is None or outcome.valid:
            return False
        results = dict(target.call_results)
        names = outcome.residual or tuple(free_vars(target.formula))
        return any(results.get(name) in v.callees for name in names)

    def satisfiable(self, clause: Clause, function: str) -> bool:
        body = fold_constants(clause.body, self.program.constants)
        vc = VerificationCondition(
            id=f"requires_satisfiable@{clause.anchor}",
            hypothesis=TRUE,
            goal=negate(body),
            origin=clause.anchor,
            description=f"satisfiability of a requires of {function}",
            kind=ObligationKind.ASSERT,
            function=function,
            width=self.program.width,
        )
        return not discharge_all([vc], self.config.discharge)[vc.id].valid

    # ---------- admission ----------
    def admit_host(self, v: VUnit, clauses: List[Clause]) -> Tuple[List[Clause], List[Clause], List[str]]:
        """Splits a host-phase answer into (admitted, rejected, notes)."""
        host = self.program.function(v.host)
        allowed_names = set(host.params) | set(self.program.constants)
        admitted, rejected, notes = [], [], []
        for clause in clauses:
            reason = None
            if clause.kind == ClauseKind.REQUIRES:
                if self.anchors.get(clause.anchor) != v.host:
                    reason = f"only requires of {v.host} are taken in this step"
                elif not free_vars(clause.body) <= allowed_names or mentions_result(clause.body) \
                        or mentions_old(clause.body):
                    reason = f"a requires of {v.host} may only mention its parameters"
                elif self.cg.is_root(v.host):
                    reason = f"{v.host} has no caller, its requires could never be established"
                elif not self.satisfiable(clause, v.host):
                    reason = "the requires is unsatisfiable"
            elif clause.kind.is_loop or clause.kind == ClauseKind.ASSERT:
                if self.program.host_of(clause.anchor) != v.host:
                    reason = f"only loops and assertions of {v.host} are taken in this step"
            else:
                reason = f"{clause.kind.value} clauses are not taken in this step"

            if reason is None:
                admitted.append(clause)
            else:
                rejected.append(clause)
                notes.append(f"`{render_clause(clause)}` was discarded: {reason}")
        return admitted, rejected, notes

    def admit_callees(self, v: VUnit, clauses: List[Clause]) -> Tuple[List[Clause], List[Clause], List[str]]:
        admitted, rejected, notes = [], [], []
        for clause in clauses:
            if clause.kind == ClauseKind.REQUIRES:
                function = self.anchors.get(clause.anchor, "?")
                logger.warning(f"Requires-prohibition: stripped `{render_clause(clause)}` for {function} "
                               f"while proving {v.target.id}")
                rejected.append(clause)
                notes.append(f"`{render_clause(clause)}` was stripped: callee preconditions are prohibited")
                continue
            if clause.kind == ClauseKind.ENSURES:
                allowed = self.anchors.get(clause.anchor) in v.callees
            else:
                allowed = clause.kind.is_loop and self.program.host_of(clause.anchor) in v.callees
            if allowed:
                admitted.append(clause)
            else:
                rejected.append(clause)
                notes.append(f"`{render_clause(clause)}` was discarded: only callee ensures and callee loop "
                             f"clauses are taken in this step")
        return admitted, rejected, notes

    # ---------- phases ----------
    def run_phase_host(self, v: VUnit, budget: int, feedback: Optional[List[FeedbackEntry]] = None) -> PhaseResult:
        feedback = [] if feedback is None else feedback
        v = self.refresh(v)
        verification = self.verifier.verify(v)
        if self.verifier.succeeded(verification):
            return PhaseResult(PhaseStatus.SUCCESS, [], verification, 0, feedback)
        if self.depends_on_callees(v, verification):
            return PhaseResult(PhaseStatus.NEEDS_CALLEES, [], verification, 0, feedback)

        iterations = 0
        while iterations < budget:
            iterations += 1
            try:
                response = self.generate(self.request(Phase.HOST, v, feedback))
            except TemplateExhausted:
                break
            except ResponseParseEmpty as error:
                feedback.append(FeedbackEntry([], messages=[f"no clause could be read from the answer: {error.message}"]))
                continue

            candidate, rejected, notes = self.admit_host(v, response.clauses)
            kept, verification = self.verifier.houdini(v, candidate)
            rejected += [clause for clause in candidate if clause not in kept]
            if self.verifier.succeeded(verification):
                kept, verification = self.verifier.retain(v, kept)
                self.accept_host(v, kept)
                return PhaseResult(PhaseStatus.SUCCESS, kept, verification, iterations, feedback)

            feedback.append(FeedbackEntry.from_verification(
                response.clauses, verification, rejected, notes + list(response.notes)))
            if self.depends_on_callees(v, verification):
                return PhaseResult(PhaseStatus.NEEDS_CALLEES, [], verification, iterations, feedback)

        status = PhaseStatus.NEEDS_CALLEES if self.depends_on_callees(v, verification) else PhaseStatus.FAILED
        return PhaseResult(status, [], verification, iterations, feedback)

    def run_phase_callees(self, v: VUnit, budget: int, feedback: Optional[List[FeedbackEntry]] = None) -> PhaseResult:
        feedback = [] if feedback is None else feedback
        v = self.refresh(v)
        verification = None
        iterations = 0
        with self.store.callee_phase(v.callees):
            while iterations < budget:
                iterations += 1
                try:
                    response = self.generate(self.request(Phase.CALLEES, v, feedback))
                except TemplateExhausted:
                    break
                except ResponseParseEmpty as error:
                    feedback.append(FeedbackEntry([], messages=[f"no clause could be read from the answer: {error.message}"]))
                    continue

                candidate, rejected, notes = self.admit_callees(v, response.clauses)
                kept, verification = self.verifier.houdini(v, candidate)
                rejected += [clause for clause in candidate if clause not in kept]
                if self.verifier.succeeded(verification):
                    kept, verification = self.verifier.retain(v, kept)
                    self.store.add(kept)
                    return PhaseResult(PhaseStatus.SUCCESS, kept, verification, iterations, feedback)

                feedback.append(FeedbackEntry.from_verification(
                    response.clauses, verification, rejected, notes + list(response.notes)))
                # verified callee ensures are kept, the host gets another go with them
                if any(clause.kind == ClauseKind.ENSURES for clause in self.store.add(kept)):
                    return PhaseResult(PhaseStatus.RESUME_HOST, kept, verification, iterations, feedback)

        return PhaseResult(PhaseStatus.FAILED, [], verification, iterations, feedback)

    # ---------- acceptance ----------
    def accept_host(self, v: VUnit, clauses: List[Clause]):
        added = self.store.add(clauses)
        if any(clause.kind == ClauseKind.REQUIRES for clause in added):
            self.provisional.setdefault(v.target.id, []).extend(self.instantiate_requires(v.host))

    def instantiate_requires(self, function: str) -> List[str]:
        """Rewrites the predicates of the queued call-site assertions of function. Returns their ids."""
        func = self.program.function(function)
        requires = conj(self.store.env.contract(function).requires)
        updated = []
        for assertion in self.callsites.get(function, []):
            call: CallExpr = self.program.node(assertion.node_id)
            bindings = {param: expr_to_term(arg) for param, arg in zip(func.params, call.args)}
            assertion.predicate = simplify(fold_constants(substitute(requires, bindings), self.program.constants))
            assertion.status = AssertionStatus.PENDING
            updated.append(assertion.id)
        return updated

    # ---------- verdicts ----------
    def classify(self, v: VUnit, vc: Optional[VerificationCondition], outcome: VerificationOutcome,
                 verification: Optional[UnitVerification] = None, feedback: Optional[List[FeedbackEntry]] = None,
                 iterations: int = 0) -> AssertionVerdict:
        target = v.target
        verdict = AssertionVerdict(
            assertion=target.id,
            kind=target.kind.value,
            function=target.function,
            verdict=Verdict.HIGH_RISK_ALERT,
            location=str(target.location) if target.location else None,
            iterations=iterations,
            provisional_callsites=list(self.provisional.get(target.id, [])),
        )
        if outcome.valid:
            verdict.verdict = Verdict.CERTIFIED
            if verification is not None:
                verdict.certificate = [item.id for item in verification.vcs if verification.outcomes[item.id].valid]
            else:
                verdict.certificate = [outcome.vc_id]
        elif outcome.invalid and not outcome.abstracted and (not outcome.residual or self.cg.is_root(target.function)):
            verdict.verdict = Verdict.DEFINITIVE_RTE
            verdict.witness = dict(outcome.witness or {})
        else:
            if feedback:
                verdict.feedback = feedback[-1].render()
            else:
                reason = outcome.reason or f"the verification condition is {outcome.status.value}"
                verdict.feedback = f"{vc.description if vc else target.id}: {reason}"
        return verdict

    def process_unit(self, v: VUnit) -> AssertionVerdict:
        v = self.refresh(v)
        if v.target.kind == AssertionKind.CALLSITE:
            outcome = check_callsite(v.target, self.store.env, self.program, self.config.discharge)
            verdict = self.classify(v, None, outcome)
        else:
            verification = self.verifier.verify(v)
            verdict = self.classify(v, verification.target, verification.target_outcome, verification)
        if verdict.verdict != Verdict.HIGH_RISK_ALERT:
            return verdict

        left = {Phase.HOST: self.config.max_iters, Phase.CALLEES: self.config.max_iters}
        feedback: Dict[Phase, List[FeedbackEntry]] = {Phase.HOST: [], Phase.CALLEES: []}
        iterations = 0
        phase = Phase.HOST
        while True:
            if phase == Phase.HOST:
                result = self.run_phase_host(v, left[phase], feedback[phase])
            else:
                result = self.run_phase_callees(v, left[phase], feedback[phase])
            left[phase] -= result.iterations
            iterations += result.iterations
            logger.debug(f"{v.target.id}: {phase.value} phase ended {result.status.value} after {result.iterations} iterations")

            if result.status == PhaseStatus.NEEDS_CALLEES and v.callees and left[Phase.CALLEES] > 0:
                phase = Phase.CALLEES
            elif result.status == PhaseStatus.RESUME_HOST:
                phase = Phase.HOST
            else:
                break

        if result.status == PhaseStatus.SUCCESS:
            verification = result.verification
        else:
            verification = self.verifier.verify(self.refresh(v))
        history = feedback[Phase.HOST] + feedback[Phase.CALLEES]
        return self.classify(v, verification.target, verification.target_outcome, verification, history, iterations)

    def process_queue(self, queue: VUnitQueue) -> PipelineReport:
        for v in queue:
            if v.target.kind == AssertionKind.CALLSITE:
                self.callsites.setdefault(v.target.callee, []).append(v.target)

        for v in queue:
            verdict = self.process_unit(v)
            self.report.verdicts.append(verdict)
            self.report.iterations[v.target.id] = verdict.iterations
            if verdict.verdict == Verdict.DEFINITIVE_RTE:
                logger.warning(f"Definitive RTE: {v.target.id} in {v.target.function} fails on {verdict.witness}")
            elif verdict.verdict == Verdict.HIGH_RISK_ALERT:
                logger.warning(f"High-risk RTE alert: {v.target.id} in {v.target.function} could not be verified")
                if not self.config.continue_on_alert:
                    self.report.stopped = True
                    break

        self.report.contracts = self.store.by_function()
        self.report.annotated = render(self.program, self.store.annotations())
        return self.report


def process_queue(
    queue: VUnitQueue,
    generator,
    verifier: UnitVerifier,
    config: SynthesisConfig,
    cg: CallGraph,
    analysis: Optional[AnalysisResult] = None,
    contracts: ContractEnv = ContractEnv(),
) -> PipelineReport:
    synthesizer = Synthesizer(verifier.program, cg, generator, config, analysis, contracts, verifier)
    return synthesizer.process_queue(queue)


def synthesize(
    program: TypedProgram,
    config: Optional[SynthesisConfig] = None,
    generator=None,
    analysis_config: Optional[AnalysisConfig] = None,
) -> Tuple[PipelineReport, VUnitQueue, AnalysisResult]:
    """Analysis, queue construction and synthesis in one go."""
    config = config or SynthesisConfig()
    analysis = analyze(program, config=analysis_config)
    cg = build_call_graph(program)
    queue = enqueue(collect_assertions(analysis, cg, program), cg, program,
                    filter_dependencies=config.filter_dependencies)
    synthesizer = Synthesizer(program, cg, generator, config, analysis)
    return synthesizer.process_queue(queue), queue, analysis
