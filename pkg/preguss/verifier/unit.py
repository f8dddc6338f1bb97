import logging
from typing import List, Optional, Sequence, Tuple

from preguss.callgraph.models import VUnit
from preguss.frontend.models import TypedProgram
from preguss.specs.models import Clause
from preguss.specs.render import render_clause
from preguss.verifier.discharge import discharge_all
from preguss.verifier.models import DischargeConfig, UnitVerification
from preguss.verifier.vcgen import gen_vcs

logger = logging.getLogger("preguss")


class UnitVerifier:
    """Checks a V-Unit under candidate clauses."""

    def __init__(self, program: TypedProgram, strategy: Optional[DischargeConfig] = None):
        self.program = program
        self.strategy = strategy or DischargeConfig()

    def verify(self, v: VUnit, candidate: Sequence[Clause] = ()) -> UnitVerification:
        vcs = gen_vcs(v, candidate, self.program)
        return UnitVerification(vcs, discharge_all(vcs, self.strategy))

    @staticmethod
    def succeeded(verification: UnitVerification) -> bool:
        outcome = verification.target_outcome
        return outcome is not None and outcome.valid and not verification.failing_clauses()

    def houdini(self, v: VUnit, candidate: Sequence[Clause]) -> Tuple[List[Clause], UnitVerification]:
        """Drops clauses whose own VCs fail until the remaining set is stable."""
        kept = list(candidate)
        while True:
            verification = self.verify(v, kept)
            failing = [clause for clause in verification.failing_clauses() if clause in kept]
            if not failing:
                return kept, verification
            for clause in failing:
                logger.debug(f"{v.target.id}: candidate {render_clause(clause)} does not hold, dropped")
                kept.remove(clause)

    def retain(self, v: VUnit, kept: Sequence[Clause]) -> Tuple[List[Clause], UnitVerification]:
        """Greedy pass dropping every clause the target does not need."""
        kept = list(kept)
        verification = self.verify(v, kept)
        for clause in list(kept):
            trial = [other for other in kept if other is not clause]
            attempt = self.verify(v, trial)
            if self.succeeded(attempt):
                logger.info(f"{v.target.id}: {render_clause(clause)} is not needed, not retained")
                kept, verification = trial, attempt
        return kept, verification
