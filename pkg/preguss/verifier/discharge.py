"""
Three-tier discharge of verification conditions.

Tier 1 splits the VC into sequents and decides them exactly where it can, tier 2
enumerates small variable domains, tier 3 hands what is left to an SMT solver.
A counterexample is only reported after it falsified the VC by evaluation.
"""

import logging
from itertools import product
from math import prod
from typing import Dict, List, Optional, Tuple

from preguss.absint.models import RteAssertion
from preguss.errors import SmtIOError
from preguss.frontend.models import IntWidth, TypedProgram
from preguss.specs.models import ContractEnv
from preguss.specs.utils import compile_pred, conj, eval_pred, eval_term, ordered_vars
from preguss.verifier import smt
from preguss.verifier.models import DischargeConfig, VCStatus, VerificationCondition, VerificationOutcome
from preguss.verifier.normalize import Decision, Sequent, bounds, decide_exact, one_point, split
from preguss.verifier.vcgen import obligation_vc

logger = logging.getLogger("preguss")


def complete_witness(vc: VerificationCondition, sequent: Sequent, values: Dict[str, int]) -> Dict[str, int]:
    """Extends a sequent counterexample to every variable of the VC."""
    witness = {name: 0 for name in ordered_vars(vc.formula)}
    witness.update(values)
    for name, term in reversed(sequent.eliminated):
        witness[name] = eval_term(term, witness)
    return witness


def confirms(vc: VerificationCondition, witness: Dict[str, int]) -> bool:
    if not all(vc.width.contains(value) for value in witness.values()):
        return False
    try:
        return not eval_pred(vc.formula, witness)
    except KeyError:
        return False


def _enumerate(sequent: Sequent, width: IntWidth, config: DischargeConfig):
    """Tier 2. Returns (decided, counterexample)."""
    ranges = bounds(sequent, width)
    if not ranges:
        return True, None
    names = sequent.free_vars()
    sizes = [ranges[name].hi - ranges[name].lo + 1 for name in names]
    if len(names) > config.max_variables and width.bits > 16:
        return False, None
    if prod(sizes) > config.max_enumeration:
        return False, None

    hypotheses = compile_pred(conj(sequent.hypotheses))
    goal = compile_pred(sequent.goal)
    domains = [range(ranges[name].lo, ranges[name].hi + 1) for name in names]
    for values in product(*domains):
        env = dict(zip(names, values))
        if hypotheses(env) and not goal(env):
            return True, env
    return True, None


def discharge(vc: VerificationCondition, strategy: Optional[DischargeConfig] = None) -> VerificationOutcome:
    config = strategy or DischargeConfig()
    width = vc.width
    sequents = [one_point(sequent, width) for sequent in split(vc.formula)]

    undecided: List[Sequent] = []
    for sequent in sequents:
        decision, values = decide_exact(sequent, width)
        if decision == Decision.INVALID:
            outcome = _invalid(vc, sequent, values, "exact")
            if outcome is not None:
                return outcome
            undecided.append(sequent)
        elif decision is None:
            undecided.append(sequent)

    remaining: List[Sequent] = []
    for sequent in undecided:
        decided, values = _enumerate(sequent, width, config)
        if not decided:
            remaining.append(sequent)
        elif values is not None:
            outcome = _invalid(vc, sequent, values, "enumeration")
            if outcome is not None:
                return outcome
            remaining.append(sequent)

    unresolved: List[Sequent] = []
    for sequent in remaining:
        if not config.use_smt or not smt.solver_available(config.solver_command):
            unresolved.append(sequent)
            continue
        answer, model = smt.check_validity(sequent.formula, width, config.solver_command, config.smt_timeout)
        if answer == "sat":
            outcome = _invalid(vc, sequent, model or {}, "smt")
            if outcome is not None:
                return outcome
        if answer != "unsat":
            unresolved.append(sequent)

    if unresolved:
        sequent = unresolved[0]
        reason = f"undecided: {len(unresolved)} of {len(sequents)} sequents, first over {', '.join(sequent.free_vars())}"
        if vc.loops_without_invariant:
            reason += f"; loops without invariant: {', '.join(map(str, vc.loops_without_invariant))}"
        return VerificationOutcome(vc.id, VCStatus.UNKNOWN, reason=reason, residual=sequent.residual(),
                                   abstracted=_abstracted(vc, sequent))
    return VerificationOutcome(vc.id, VCStatus.VALID, tier=_tier(sequents, undecided, remaining))


def _tier(sequents, undecided, remaining) -> str:
    if remaining:
        return "smt"
    if undecided:
        return "enumeration"
    return "exact"


def _invalid(vc, sequent, values, tier) -> Optional[VerificationOutcome]:
    witness = complete_witness(vc, sequent, values)
    if not confirms(vc, witness):
        logger.debug(f"{vc.id}: {tier} counterexample {values} not confirmed by evaluation")
        return None
    return VerificationOutcome(vc.id, VCStatus.INVALID, witness=witness, tier=tier, residual=sequent.residual(),
                               abstracted=_abstracted(vc, sequent))


def _abstracted(vc: VerificationCondition, sequent: Sequent) -> Tuple[str, ...]:
    symbols = vc.abstraction_symbols
    return tuple(name for name in sequent.residual() if name in symbols)


def discharge_all(vcs, strategy: Optional[DischargeConfig] = None) -> Dict[str, VerificationOutcome]:
    outcomes = {}
    for vc in vcs:
        try:
            outcomes[vc.id] = discharge(vc, strategy)
        except SmtIOError as error:
            logger.warning(f"{vc.id}: {error.message}")
            outcomes[vc.id] = VerificationOutcome(vc.id, VCStatus.UNKNOWN, reason=error.message)
    return outcomes


def check_callsite(
    a: RteAssertion,
    contracts: ContractEnv,
    program: TypedProgram,
    strategy: Optional[DischargeConfig] = None,
) -> VerificationOutcome:
    """Callee requires instantiated on the actual arguments, in the caller's WP context."""
    vc = obligation_vc(program, contracts, a.function, a.id)
    return discharge(vc, strategy)
