from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from preguss.absint.domain import AbstractEnv, Interval
from preguss.errors import UnknownAssertion
from preguss.frontend.models import Location
from preguss.specs.models import Clause, ClauseKind, Pred


class AssertionKind(str, Enum):
    DIV_BY_ZERO = "division_by_0"
    SIGNED_OVERFLOW = "overflow"
    CALLSITE = "callsite_precondition"


class AssertionStatus(str, Enum):
    PROVEN = "proven"
    ALARM = "alarm"
    PENDING = "pending"


@dataclass
class RteAssertion:
    """A guard predicate placed before one RTE-susceptible operation, or before a call."""

    id: str
    kind: AssertionKind
    predicate: Pred
    node_id: int
    function: str
    location: Optional[Location] = None
    status: AssertionStatus = AssertionStatus.PENDING
    callee: Optional[str] = None

    @property
    def label(self) -> str:
        if self.kind == AssertionKind.CALLSITE:
            return f"preconditions_of_{self.callee}"
        return self.kind.value

    def as_clause(self) -> Clause:
        return Clause(ClauseKind.ASSERT, self.predicate, self.node_id, self.label)


def assertion_id(kind: AssertionKind, node_id: int) -> str:
    return f"{kind.value}@{node_id}"


class AnalysisConfig(BaseModel):
    widening_threshold: int = Field(default=3, ge=1)
    max_inline_depth: int = Field(default=8, ge=0)
    max_iterations: int = Field(default=1000, ge=1)
    propagate_returns: bool = False


@dataclass
class AnalysisResult:
    assertions: List[RteAssertion]
    envs: Dict[int, AbstractEnv] = field(default_factory=dict)
    returns: Dict[str, Interval] = field(default_factory=dict)
    entries: Dict[str, AbstractEnv] = field(default_factory=dict)

    def assertion(self, assertion_id: str) -> RteAssertion:
        for assertion in self.assertions:
            if assertion.id == assertion_id:
                return assertion
        raise UnknownAssertion(f"no assertion with id '{assertion_id}'")

    def alarms(self) -> List[RteAssertion]:
        return [a for a in self.assertions if a.status == AssertionStatus.ALARM]

    def summary(self) -> Dict[str, Dict[str, int]]:
        """Assertion counts by kind, then by status."""
        counts: Dict[str, Counter] = {}
        for assertion in self.assertions:
            counts.setdefault(assertion.kind.value, Counter())[assertion.status.value] += 1
        return {kind: dict(counter) for kind, counter in counts.items()}
