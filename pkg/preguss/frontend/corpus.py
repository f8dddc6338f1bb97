"""
Seeded random MiniC programs for the property suites.

Every generated program resolves, has an acyclic call graph (a function only
calls functions defined before it) and terminates: loops are counted with a
counter the body never assigns.
"""

import random
from typing import List, Optional, Tuple

from preguss.frontend.models import IntWidth

Signature = Tuple[str, int, str]


class ProgramGenerator:

    def __init__(
        self,
        seed: int,
        width: IntWidth = IntWidth(8),
        functions: int = 3,
        statements: int = 4,
        depth: int = 2,
        entry_params: int = 1,
    ):
        self.rng = random.Random(seed)
        self.width = width
        self.functions = functions
        self.statements = statements
        self.depth = depth
        self.entry_params = entry_params
        self._counter = 0
        self._vars: List[str] = []
        self._frozen: set = set()
        self._constants: List[str] = []

    def _fresh(self, prefix: str) -> str:
        self._counter += 1
        return f"{prefix}{self._counter}"

    # ---------- programs ----------
    def program(self) -> str:
        self._counter = 0
        self._constants = []
        lines = []
        if self.rng.random() < 0.3:
            name = f"K{len(self._constants)}"
            lines.append(f"int {name} = {self.rng.choice([2, 3, 7, -5])};")
            lines.append("")
            self._constants.append(name)

        signatures: List[Signature] = []
        count = self.rng.randint(1, self.functions)
        for index in range(count):
            last = index == count - 1
            name = "main" if last else f"f{index}"
            if last:
                params = self.rng.randint(0, self.entry_params)
                returns = "int" if self.rng.random() < 0.6 else "void"
            else:
                params = self.rng.randint(1, 2)
                returns = "int" if self.rng.random() < 0.8 else "void"
            lines.extend(self._function(name, params, returns, signatures))
            lines.append("")
            signatures.append((name, params, returns))
        return "\n".join(lines)

    def star(self, callees: int = 10, dependent: Optional[int] = None) -> str:
        """One host calling every callee once; only the result of callee `dependent` reaches the division."""
        if dependent is None:
            dependent = self.rng.randrange(callees)
        lines = []
        for index in range(callees):
            op = self.rng.choice(["+", "-"])
            lines.append(f"int c{index}(int x) {{")
            lines.append(f"    return x {op} {self.rng.randint(1, 3)};")
            lines.append("}")
            lines.append("")
        lines.append("int main(int p) {")
        for index in range(callees):
            lines.append(f"    int r{index} = c{index}(p);")
        lines.append(f"    int t = 10 / r{dependent};")
        lines.append("    return t;")
        lines.append("}")
        return "\n".join(lines) + "\n"

    # ---------- functions and statements ----------
    def _function(self, name: str, params: int, returns: str, callees: List[Signature]) -> List[str]:
        names = [f"p{index}" for index in range(params)]
        self._vars = list(names)
        self._frozen = set()
        self._callees = callees
        self._returns = returns
        header = ", ".join(f"int {param}" for param in names)
        lines = [f"{returns} {name}({header}) {{"]
        lines.extend(self._stmts(1, self.depth))
        if returns == "int":
            lines.append(f"    return {self._value()};")
        lines.append("}")
        return lines

    def _stmts(self, indent: int, depth: int) -> List[str]:
        lines = []
        for _ in range(self.rng.randint(1, self.statements)):
            lines.extend(self._stmt(indent, depth))
        return lines

    def _block(self, indent: int, depth: int) -> List[str]:
        visible = len(self._vars)
        lines = self._stmts(indent, depth)
        del self._vars[visible:]
        return lines

    def _stmt(self, indent: int, depth: int) -> List[str]:
        pad = "    " * indent
        choices = ["decl", "decl", "assign", "expr", "call"]
        if depth > 0:
            choices += ["if", "while"]
        if indent > 1:
            choices.append("return")
        kind = self.rng.choice(choices)

        if kind == "assign":
            targets = [name for name in self._vars if name not in self._frozen]
            if targets:
                return [f"{pad}{self.rng.choice(targets)} = {self._value()};"]
            kind = "decl"
        if kind == "decl":
            value = self._value()
            name = self._fresh("v")
            self._vars.append(name)
            return [f"{pad}int {name} = {value};"]
        if kind == "expr":
            return [f"{pad}{self._expr(self.depth)};"]
        if kind == "call":
            if not self._callees:
                return [f"{pad}{self._expr(1)};"]
            name, params, _ = self.rng.choice(self._callees)
            return [f"{pad}{name}({self._args(params)});"]
        if kind == "return":
            if self._returns == "void":
                return [f"{pad}return;"]
            return [f"{pad}return {self._expr(1)};"]
        if kind == "if":
            lines = [f"{pad}if ({self._cond()}) {{"]
            lines.extend(self._block(indent + 1, depth - 1))
            if self.rng.random() < 0.5:
                lines.append(f"{pad}}} else {{")
                lines.extend(self._block(indent + 1, depth - 1))
            lines.append(f"{pad}}}")
            return lines
        # counted loop
        counter = self._fresh("i")
        bound = self.rng.randint(1, 3)
        self._vars.append(counter)
        self._frozen.add(counter)
        lines = [f"{pad}int {counter} = 0;", f"{pad}while ({counter} < {bound}) {{"]
        lines.extend(self._block(indent + 1, depth - 1))
        lines.append(f"{pad}    {counter} = {counter} + 1;")
        lines.append(f"{pad}}}")
        return lines

    # ---------- expressions ----------
    def _value(self) -> str:
        int_callees = [sig for sig in self._callees if sig[2] == "int"]
        if int_callees and self.rng.random() < 0.3:
            name, params, _ = self.rng.choice(int_callees)
            return f"{name}({self._args(params)})"
        return self._expr(self.depth)

    def _args(self, count: int) -> str:
        return ", ".join(self._expr(1) for _ in range(count))

    def _atom(self) -> str:
        names = self._vars + self._constants
        if names and self.rng.random() < 0.6:
            return self.rng.choice(names)
        if self.rng.random() < 0.1:
            return self.rng.choice(["INT_MIN", "INT_MAX"])
        return str(self.rng.randint(-4, 9))

    def _expr(self, depth: int) -> str:
        if depth <= 0 or self.rng.random() < 0.3:
            return self._atom()
        op = self.rng.choice(["+", "-", "*", "/", "%", "neg"])
        if op == "neg":
            return f"-({self._expr(depth - 1)})"
        return f"({self._expr(depth - 1)} {op} {self._expr(depth - 1)})"

    def _cond(self) -> str:
        roll = self.rng.random()
        if roll < 0.1:
            return self._atom()
        cmp = f"{self._expr(1)} {self.rng.choice(['==', '!=', '<', '<=', '>', '>='])} {self._expr(1)}"
        if roll < 0.25:
            other = f"{self._atom()} {self.rng.choice(['<', '>', '!='])} {self._atom()}"
            return f"{cmp} {self.rng.choice(['&&', '||'])} {other}"
        if roll < 0.3:
            return f"!({cmp})"
        return cmp


def corpus(size: int, seed: int = 0, **options) -> List[str]:
    return [ProgramGenerator(seed + index, **options).program() for index in range(size)]
