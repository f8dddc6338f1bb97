import logging
from contextlib import contextmanager
from typing import Dict, Iterable, List, Set, Tuple

from preguss.errors import ProhibitionViolation
from preguss.frontend.models import TypedProgram
from preguss.specs.models import Clause, ClauseKind, ContractEnv
from preguss.specs.render import render_clause

logger = logging.getLogger("preguss")


class ContractStore:
    """
    Clauses accepted during a run. Only grows: nothing is removed once written.
    While a callee phase is open, a requires write for one of its callees is refused.
    """

    def __init__(self, program: TypedProgram, initial: ContractEnv = ContractEnv()):
        self.program = program
        self.anchors = {func.node_id: func.name for func in program.functions}
        self._env = initial
        self._clauses: List[Clause] = []
        self._prohibited: Set[str] = set()

    @property
    def env(self) -> ContractEnv:
        return self._env

    @contextmanager
    def callee_phase(self, callees: Iterable[str]):
        previous = self._prohibited
        self._prohibited = previous | set(callees)
        try:
            yield self
        finally:
            self._prohibited = previous

    def owner(self, clause: Clause) -> str:
        if clause.kind.is_contract:
            return self.anchors[clause.anchor]
        return self.program.host_of(clause.anchor)

    def add(self, clauses: Iterable[Clause]) -> List[Clause]:
        """Writes clauses. Returns the ones that were new."""
        added = []
        for clause in clauses:
            function = self.owner(clause)
            if clause.kind == ClauseKind.REQUIRES and function in self._prohibited:
                raise ProhibitionViolation(f"requires for callee {function} during its callee phase")
            if clause.kind == ClauseKind.ASSERT or clause in self._clauses:
                continue
            self._clauses.append(clause)
            self._env = self._env.with_clauses([clause], self.anchors)
            logger.info(f"Contract store: {function} gains {render_clause(clause)}")
            added.append(clause)
        return added

    @property
    def clauses(self) -> List[Clause]:
        return list(self._clauses)

    def annotations(self) -> List[Tuple[int, Clause]]:
        return [(clause.anchor, clause) for clause in self._clauses]

    def by_function(self) -> Dict[str, List[str]]:
        grouped: Dict[str, List[str]] = {}
        for clause in self._clauses:
            grouped.setdefault(self.owner(clause), []).append(render_clause(clause))
        return grouped
