"""Theory data model: fact schemas, rules, lemmas, trace formulas.

Facts are ``(name, args)`` tuples (args a tuple of terms); their kind and
arity live on the theory's schemas, keyed by name.  Rules are stored with
let-bindings already expanded into the fact patterns, so structural
equality is equality of meaning.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from spthylite import terms as T
from spthylite.builtins import BUILTIN_EQUATIONS, BUILTIN_FUNCTIONS
from spthylite.kernel import compile_equations

LINEAR = "linear"
PERSISTENT = "persistent"

Fact = tuple  # (name, args)


def fact(name: str, *args) -> Fact:
    return (name, tuple(args))


def fact_vars(f: Fact) -> set:
    out: set = set()
    for a in f[1]:
        out |= T.variables(a)
    return out


def pretty_fact(f: Fact, persistent: bool = False) -> str:
    bang = "!" if persistent else ""
    return f"{bang}{f[0]}(" + ", ".join(T.pretty(a) for a in f[1]) + ")"


@dataclass(frozen=True)
class FactSchema:
    name: str
    arity: int
    kind: str  # LINEAR | PERSISTENT
    reserved: bool = False


RESERVED_SCHEMAS = {
    "Fr": FactSchema("Fr", 1, LINEAR, reserved=True),
    "In": FactSchema("In", 1, LINEAR, reserved=True),
    "Out": FactSchema("Out", 1, LINEAR, reserved=True),
    "K": FactSchema("K", 1, PERSISTENT, reserved=True),
}


@dataclass(frozen=True)
class Premise:
    fact: Fact
    negated: bool = False


@dataclass(frozen=True)
class Rule:
    name: str
    premises: tuple  # tuple[Premise, ...]
    actions: tuple   # tuple[Fact, ...]
    conclusions: tuple  # tuple[Fact, ...]


# --- trace formulas -------------------------------------------------------

ALL = "All"
EX = "Ex"

# Body nodes are tagged tuples, mirroring the term idiom:
#   ("atom", fact, tpvar)      action atom  F(args) @ #tp
#   ("less", tp1, tp2)         #i < #j
#   ("eqtime", tp1, tp2)       #i = #j
#   ("eqterm", t1, t2)         t1 = t2
#   ("not", f) ("and", a, b) ("or", a, b) ("imp", a, b)


@dataclass(frozen=True)
class Formula:
    prefix: tuple  # tuple[(ALL|EX, name, "msg"|"timepoint"), ...]
    body: tuple

    def msg_vars(self) -> tuple:
        return tuple(name for _, name, sort in self.prefix if sort == "msg")

    def timepoint_vars(self) -> tuple:
        return tuple(name for _, name, sort in self.prefix if sort == "timepoint")


ALL_TRACES = "all-traces"
EXISTS_TRACE = "exists-trace"


@dataclass(frozen=True)
class Lemma:
    name: str
    mode: str  # ALL_TRACES | EXISTS_TRACE
    formula: Formula


@dataclass(frozen=True)
class Theory:
    name: str
    functions: dict  # name -> arity (includes builtins)
    equations: tuple  # ((lhs, rhs), ...) user + builtin
    schemas: dict  # fact name -> FactSchema (includes reserved)
    rules: tuple  # tuple[Rule, ...]
    lemmas: tuple  # tuple[Lemma, ...]
    spans: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def eq_index(self) -> dict:
        idx = self.__dict__.get("_eq_index")
        if idx is None:
            idx = compile_equations(self.equations)
            self.__dict__["_eq_index"] = idx
        return idx

    def string_constants(self) -> frozenset:
        """All string constants appearing anywhere in the theory."""
        found = set()

        def scan(t):
            for s in T.subterms(t):
                if s[0] == T.STR:
                    found.add(s)

        for rule in self.rules:
            for p in rule.premises:
                for a in p.fact[1]:
                    scan(a)
            for f in rule.actions + rule.conclusions:
                for a in f[1]:
                    scan(a)
        for lem in self.lemmas:
            for node in _formula_nodes(lem.formula.body):
                if node[0] == "atom":
                    for a in node[1][1]:
                        scan(a)
                elif node[0] == "eqterm":
                    scan(node[1])
                    scan(node[2])
        return frozenset(found)

    def rule(self, name: str) -> Rule:
        for r in self.rules:
            if r.name == name:
                return r
        raise KeyError(name)

    def lemma(self, name: str) -> Lemma:
        for l in self.lemmas:
            if l.name == name:
                return l
        raise KeyError(name)


def _formula_nodes(body):
    yield body
    head = body[0]
    if head == "not":
        yield from _formula_nodes(body[1])
    elif head in ("and", "or", "imp"):
        yield from _formula_nodes(body[1])
        yield from _formula_nodes(body[2])


def formula_nodes(body):
    """Preorder iterator over formula body nodes."""
    return _formula_nodes(body)


def empty_theory(name: str = "Empty") -> Theory:
    return Theory(
        name=name,
        functions=dict(BUILTIN_FUNCTIONS),
        equations=tuple(BUILTIN_EQUATIONS),
        schemas=dict(RESERVED_SCHEMAS),
        rules=(),
        lemmas=(),
    )
