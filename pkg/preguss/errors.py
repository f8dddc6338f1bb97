"""Errors raised by the pipeline. The CLI maps every PregussError to exit code 2."""

from typing import List, Optional


class PregussError(Exception):
    kind = "error"

    def __init__(self, message: str, location=None):
        super().__init__(message)
        self.message = message
        self.location = location

    def diagnostic(self) -> str:
        if self.location is not None:
            return f"{self.location}: {self.kind}: {self.message}"
        return f"{self.kind}: {self.message}"


class MiniCSyntaxError(PregussError):
    kind = "syntax-error"

    def __init__(self, message: str, location=None, expected: Optional[List[str]] = None):
        super().__init__(message, location)
        self.expected = sorted(expected or [])


class ResolveError(PregussError):
    """kind is one of unknown-identifier, arity-mismatch, type-mismatch,
    duplicate-definition or unsupported-call-position."""

    def __init__(self, kind: str, message: str, location=None):
        super().__init__(message, location)
        self.kind = kind


class ConstantEvaluationError(PregussError):
    kind = "constant-evaluation"


class UnknownNodeId(PregussError):
    kind = "unknown-node-id"

    def __init__(self, node_id: int):
        super().__init__(f"no node with id {node_id}")
        self.node_id = node_id


class MutualRecursion(PregussError):
    kind = "mutual-recursion"

    def __init__(self, cycle: List[str]):
        path = " -> ".join(cycle + cycle[:1])
        super().__init__(f"recursive call cycle {path}")
        self.cycle = cycle


class AnalysisBudgetExceeded(PregussError):
    kind = "analysis-budget-exceeded"


class SpecSyntaxError(PregussError):
    kind = "spec-syntax-error"

    def __init__(self, message: str, position: Optional[int] = None):
        super().__init__(message)
        self.position = position

    def diagnostic(self) -> str:
        if self.position is not None:
            return f"{self.kind} at offset {self.position}: {self.message}"
        return super().diagnostic()


class UnknownConstruct(SpecSyntaxError):
    kind = "unknown-construct"


class MissingLoopInvariant(PregussError):
    kind = "missing-loop-invariant"

    def __init__(self, node_id: int, location=None):
        super().__init__(f"loop {node_id} has no loop invariant", location)
        self.node_id = node_id


class SmtIOError(PregussError):
    kind = "smt-io-error"


class UnknownAssertion(PregussError):
    kind = "unknown-assertion"


class GeneratorUnavailable(PregussError):
    kind = "generator-unavailable"


class ResponseParseEmpty(PregussError):
    kind = "response-parse-empty"


class TemplateExhausted(PregussError):
    kind = "template-exhausted"


class ProhibitionViolation(PregussError):
    kind = "prohibition-violation"
