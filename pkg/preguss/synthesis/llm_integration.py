import logging
import re
from typing import List, Tuple

from langchain_core.prompts import ChatPromptTemplate
from langchain_openai import ChatOpenAI

from preguss.callgraph.models import VUnit
from preguss.errors import GeneratorUnavailable, PregussError, ResponseParseEmpty
from preguss.frontend.models import WhileStmt
from preguss.frontend.render import render_functions
from preguss.specs.models import Clause, ClauseKind, ContractEnv
from preguss.specs.parser import parse_clause
from preguss.specs.render import render_clause, render_pred
from preguss.synthesis.decorators import retry_transport
from preguss.synthesis.models import EndpointConfig, GeneratorRequest, GeneratorResponse, Phase

logger = logging.getLogger("preguss")


system_template = """
    You are an expert in deductive verification of C programs with ACSL specifications.
    You write function contracts and loop annotations that let a weakest precondition
    verifier prove that a runtime-error guard assertion always holds.

    Only use this subset of ACSL:
      requires P;  ensures P;  loop invariant P;  loop assigns x, y;  loop assigns \\nothing;  assert P;
    P is built from integer literals, variable names, \\result and \\old(x) (ensures only),
    + - * / %, comparisons == != < <= > >=, !, &&, || and ==>. Arithmetic in P never wraps.

    Answer with fenced blocks only. Put the clauses of a function in a block opened by
    ```acsl <function name>
    and the clauses of a loop in a block opened by
    ```acsl loop <loop id>
    using the loop ids shown in the source as /* loop <id> */ comments. One clause per line.
"""

host_template = """
    Verification unit for the assertion {assertion}.

    Source (the host function {host} first, then the callees it depends on):
    {source}
    Contracts of other functions called from this unit:
    {contracts}

    Infer the precondition of {host} and any loop annotations of {host} needed to prove the
    assertion, reasoning backwards from the assertion. Preconditions may only mention the
    parameters of {host}. Keep them as weak as possible: every call site of {host} will have to
    establish them.
    {feedback}
"""

callees_template = """
    Verification unit for the assertion {assertion}.

    Source (the host function {host} first, then the callees it depends on):
    {source}
    Contracts of other functions called from this unit:
    {contracts}

    The assertion depends on values returned by {callees}. Write postconditions (ensures) and
    loop annotations for these callees that describe what they compute.
    Do not write any requires clause for {callees}: preconditions of callees are prohibited in
    this step and will be discarded.
    {feedback}
"""

feedback_template = """
    Earlier attempts and what the verifier reported:
    {entries}
    Fix the clauses that failed. Clauses that held may be kept.
"""

FENCE_PATTERN = re.compile(r"```acsl[ \t]+(?:loop[ \t]+(\d+)|([A-Za-z_][A-Za-z0-9_]*))[ \t]*\n(.*?)```", re.S)


def contract_annotations(contracts: ContractEnv, program) -> List[Tuple[int, Clause]]:
    annotations = []
    for name, contract in contracts.contracts.items():
        anchor = program.function(name).node_id
        annotations += [(anchor, Clause(ClauseKind.REQUIRES, body, anchor)) for body in contract.requires]
        annotations += [(anchor, Clause(ClauseKind.ENSURES, body, anchor)) for body in contract.ensures]
    for loop_id, annotation in contracts.loops.items():
        annotations += [(loop_id, Clause(ClauseKind.LOOP_INVARIANT, body, loop_id)) for body in annotation.invariants]
        if annotation.assigns is not None:
            annotations.append((loop_id, Clause(ClauseKind.LOOP_ASSIGNS, None, loop_id, variables=annotation.assigns)))
    return annotations


def unit_source(program, unit: VUnit, contracts: ContractEnv) -> str:
    """The slice bodies with known clauses and the target assertion as ACSL comments."""
    in_slice = [(anchor, clause) for anchor, clause in contract_annotations(contracts, program)
                if program.host_of(anchor) in unit.slice]
    target = unit.target
    return render_functions(program, unit.slice, in_slice + [(target.node_id, target.as_clause())])


def prompt_variables(request: GeneratorRequest) -> dict:
    unit = request.unit
    target = unit.target
    source = request.source or unit_source(request.program, unit, request.contracts)

    others = []
    for name, contract in request.contracts.contracts.items():
        if name in unit.slice:
            continue
        anchor = request.program.function(name).node_id
        clauses = [Clause(ClauseKind.REQUIRES, body, anchor) for body in contract.requires]
        clauses += [Clause(ClauseKind.ENSURES, body, anchor) for body in contract.ensures]
        others += [f"{name}: {render_clause(clause)}" for clause in clauses]

    feedback = ""
    if request.feedback:
        entries = "\n".join(f"Attempt {index}:\n{entry.render()}" for index, entry in enumerate(request.feedback, 1))
        feedback = feedback_template.format(entries=entries)

    return {
        "assertion": f"{target.label} in {unit.host}: {render_pred(target.predicate)}",
        "host": unit.host,
        "callees": ", ".join(unit.callees),
        "source": source,
        "contracts": "\n".join(others) or "(none)",
        "feedback": feedback,
    }


def chat_prompt(phase: Phase) -> ChatPromptTemplate:
    user_template = host_template if phase == Phase.HOST else callees_template
    return ChatPromptTemplate.from_messages([("system", system_template), ("human", user_template)])


def render_prompt(request: GeneratorRequest) -> str:
    messages = chat_prompt(request.phase).format_messages(**prompt_variables(request))
    return "\n\n".join(f"[{message.type}]\n{message.content}" for message in messages)


def parse_response(text: str, request: GeneratorRequest) -> Tuple[List[Clause], List[str]]:
    """Clauses of every fenced block. Anything unparseable or misplaced is dropped with a note."""
    program = request.program
    loops = {node.node_id for node in program.nodes.values() if isinstance(node, WhileStmt)}
    target_statement = program.enclosing_statement(request.unit.target.node_id).node_id
    clauses, notes = [], []

    for loop_id, function, body in FENCE_PATTERN.findall(text):
        for line in (part.strip() for part in body.split(";")):
            if not line or line.startswith("//"):
                continue
            try:
                clause = parse_clause(f"{line};")
            except PregussError as error:
                notes.append(f"could not parse `{line};`: {error.diagnostic()}")
                continue

            if loop_id:
                if not clause.kind.is_loop or int(loop_id) not in loops:
                    notes.append(f"`{render_clause(clause)}` does not belong to loop {loop_id}")
                    continue
                anchor = int(loop_id)
            else:
                try:
                    func = program.function(function)
                except KeyError:
                    notes.append(f"no function named {function}")
                    continue
                if clause.kind.is_loop:
                    notes.append(f"`{render_clause(clause)}` needs an ```acsl loop <id>``` block")
                    continue
                if clause.kind == ClauseKind.ASSERT:
                    if function != request.unit.host:
                        notes.append(f"assertions are only taken in {request.unit.host}")
                        continue
                    anchor = target_statement
                else:
                    anchor = func.node_id
            clause = clause.anchored(anchor)
            if clause not in clauses:
                clauses.append(clause)

    if not clauses:
        raise ResponseParseEmpty("the response contains no ACSL clause")
    return clauses, notes


class LLMGenerator:
    name = "llm"

    def __init__(self, endpoint: EndpointConfig = None):
        self.endpoint = endpoint or EndpointConfig()
        if not self.endpoint.api_key:
            raise GeneratorUnavailable("no API key configured, set PREGUSS_LLM_API_KEY")
        self.model = ChatOpenAI(
            model=self.endpoint.model,
            api_key=self.endpoint.api_key,
            base_url=self.endpoint.base_url,
            timeout=self.endpoint.timeout,
            temperature=self.endpoint.temperature,
            max_retries=0,
        )

    @retry_transport
    def invoke(self, phase: Phase, variables: dict):
        chain = chat_prompt(phase) | self.model
        return chain.invoke(variables)

    def __call__(self, request: GeneratorRequest) -> GeneratorResponse:
        message = self.invoke(request.phase, prompt_variables(request))
        clauses, notes = parse_response(message.content, request)
        for note in notes:
            logger.info(f"LLM response for {request.unit.target.id}: {note}")
        usage = getattr(message, "usage_metadata", None) or {}
        return GeneratorResponse(
            clauses,
            raw=message.content,
            notes=notes,
            prompt=render_prompt(request),
            prompt_tokens=usage.get("input_tokens"),
            response_tokens=usage.get("output_tokens"),
        )
