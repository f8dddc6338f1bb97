"""SMT-LIB v2 encoding of verification conditions and the solver bridge."""

import logging
import re
import subprocess
from typing import Dict, List, Optional, Sequence, Tuple

from preguss.errors import SmtIOError
from preguss.frontend.models import IntWidth
from preguss.specs.models import And, BinOp, BoolConst, Compare, Implies, IntConst, Neg, Not, Or, Var
from preguss.specs.utils import is_nonlinear, ordered_vars, uses_division

try:
    import z3
except ImportError:
    z3 = None

logger = logging.getLogger("preguss")

# truncating division and remainder, total with x / 0 == 0
DIVISION_DEFINITIONS = """(define-fun tdiv ((a Int) (b Int)) Int
  (ite (= b 0) 0
    (ite (>= a 0)
      (ite (> b 0) (div a b) (- (div a (- b))))
      (ite (> b 0) (- (div (- a) b)) (div (- a) (- b))))))
(define-fun tmod ((a Int) (b Int)) Int
  (ite (= b 0) 0 (- a (* b (tdiv a b)))))"""

OPERATORS = {"+": "+", "-": "-", "*": "*", "/": "tdiv", "%": "tmod"}
COMPARISONS = {"==": "=", "<": "<", "<=": "<=", ">": ">", ">=": ">="}


def _symbol(name: str) -> str:
    return f"|{name}|"


def _int(value: int) -> str:
    return str(value) if value >= 0 else f"(- {-value})"


def encode(node) -> str:
    if isinstance(node, IntConst):
        return _int(node.value)
    if isinstance(node, Var):
        return _symbol(node.name)
    if isinstance(node, Neg):
        return f"(- {encode(node.operand)})"
    if isinstance(node, BinOp):
        return f"({OPERATORS[node.op]} {encode(node.left)} {encode(node.right)})"
    if isinstance(node, BoolConst):
        return "true" if node.value else "false"
    if isinstance(node, Compare):
        if node.op == "!=":
            return f"(not (= {encode(node.left)} {encode(node.right)}))"
        return f"({COMPARISONS[node.op]} {encode(node.left)} {encode(node.right)})"
    if isinstance(node, Not):
        return f"(not {encode(node.operand)})"
    if isinstance(node, And):
        return f"(and {encode(node.left)} {encode(node.right)})"
    if isinstance(node, Or):
        return f"(or {encode(node.left)} {encode(node.right)})"
    if isinstance(node, Implies):
        return f"(=> {encode(node.left)} {encode(node.right)})"
    raise TypeError(f"cannot encode {node!r} in SMT-LIB")


def logic_of(formula) -> str:
    return "QF_NIA" if is_nonlinear(formula) or uses_division(formula) else "QF_LIA"


def smtlib_script(formula, width: IntWidth, comment: Optional[str] = None, commands: bool = True) -> str:
    """Declarations, width ranges and the negated formula. unsat means the formula is valid."""
    names = ordered_vars(formula)
    lines = []
    if comment:
        lines.extend(f"; {line}" for line in comment.splitlines())
    if commands:
        lines.append(f"(set-logic {logic_of(formula)})")
    if uses_division(formula):
        lines.append(DIVISION_DEFINITIONS)
    for name in names:
        lines.append(f"(declare-const {_symbol(name)} Int)")
    for name in names:
        lines.append(f"(assert (and (<= {_int(width.min_value)} {_symbol(name)}) (<= {_symbol(name)} {_int(width.max_value)})))")
    lines.append(f"(assert (not {encode(formula)}))")
    if commands:
        lines.append("(check-sat)")
        if names:
            lines.append(f"(get-value ({' '.join(_symbol(name) for name in names)}))")
    return "\n".join(lines) + "\n"


def solver_available(command: Optional[Sequence[str]] = None) -> bool:
    return z3 is not None or bool(command)


def _solve_in_process(formula, width: IntWidth, timeout: int) -> Tuple[str, Optional[Dict[str, int]]]:
    solver = z3.Solver()
    solver.set("timeout", timeout * 1000)
    solver.from_string(smtlib_script(formula, width, commands=False))
    answer = solver.check()
    if answer == z3.unsat:
        return "unsat", None
    if answer == z3.sat:
        model = solver.model()
        return "sat", {decl.name(): model[decl].as_long() for decl in model.decls() if decl.arity() == 0}
    return "unknown", None


VALUE_PATTERN = re.compile(r"\(\s*\|?([A-Za-z_][A-Za-z0-9_]*)\|?\s+(\(\s*-\s*\d+\s*\)|-?\d+)\s*\)")


def _parse_values(text: str) -> Dict[str, int]:
    values = {}
    for name, raw in VALUE_PATTERN.findall(text):
        values[name] = -int(raw.strip("() -")) if raw.startswith("(") else int(raw)
    return values


def _solve_external(formula, width: IntWidth, command: List[str], timeout: int) -> Tuple[str, Optional[Dict[str, int]]]:
    script = smtlib_script(formula, width)
    try:
        completed = subprocess.run(command, input=script, capture_output=True, text=True, timeout=timeout)
    except (OSError, subprocess.TimeoutExpired) as error:
        raise SmtIOError(f"solver {' '.join(command)} failed: {error}")
    lines = completed.stdout.strip().splitlines()
    if not lines:
        raise SmtIOError(f"solver {' '.join(command)} produced no answer: {completed.stderr.strip()}")
    answer = lines[0].strip()
    if answer == "sat":
        return "sat", _parse_values("\n".join(lines[1:]))
    if answer in ("unsat", "unknown"):
        return answer, None
    raise SmtIOError(f"unexpected solver answer '{answer}'")


def check_validity(
    formula, width: IntWidth, command: Optional[List[str]] = None, timeout: int = 10,
) -> Tuple[str, Optional[Dict[str, int]]]:
    """("unsat", None) when valid, ("sat", model) with a counterexample, or ("unknown", None)."""
    if command:
        return _solve_external(formula, width, command, timeout)
    if z3 is None:
        return "unknown", None
    return _solve_in_process(formula, width, timeout)
