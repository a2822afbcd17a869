"""Frontend for the protocol-theory DSL (an ``.spthy`` subset).

Grammar sketch::

    theory   := "theory" ident "begin" {decl} "end"
    decl     := "functions:" sig {"," sig} | "equations:" eq {"," eq}
              | rule | lemma
    sig      := ident "/" int
    eq       := term "=" term
    rule     := "rule" ident ":" {letblock | factlist} arrow factlist
    arrow    := "-->" | "--[" facts "]->"
    factlist := "[" [fact {"," fact}] "]"
    fact     := ["!"] ident "(" [terms] ")" | "not" "(" fact ")"
    term     := "~"ident | "$"ident | "'"chars"'" | ident ["(" terms ")"]
              | "<" terms ">"
    lemma    := "lemma" ident ":" [mode] '"' formula '"'

Normalizations: a ``let`` block may sit before the premise list or between
premise lists (both occur in published scripts); consecutive premise lists
merge; bindings are expanded into the stored rule.  ``//`` and ``/* */``
comments.  Parse errors recover at the next declaration keyword so one run
reports every diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass

from spthylite import diagnostics as D
from spthylite import terms as T
from spthylite.builtins import BUILTIN_EQUATIONS, BUILTIN_FUNCTIONS, RESERVED_FACTS, is_subterm_convergent
from spthylite.kernel import substitute
from spthylite.theory import (
    ALL,
    ALL_TRACES,
    EX,
    EXISTS_TRACE,
    LINEAR,
    PERSISTENT,
    FactSchema,
    Formula,
    Lemma,
    Premise,
    RESERVED_SCHEMAS,
    Rule,
    Theory,
    formula_nodes,
)

KEYWORDS = {"theory", "begin", "end", "functions", "equations", "rule", "lemma",
            "let", "in", "not", "All", "Ex"}


@dataclass(frozen=True)
class Token:
    kind: str
    value: str
    line: int
    column: int


class _LexError(Exception):
    def __init__(self, message, line, column):
        super().__init__(message)
        self.line = line
        self.column = column


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)

    def push(kind, value, l, c):
        toks.append(Token(kind, value, l, c))

    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            j = text.find("\n", i)
            i = n if j < 0 else j
            continue
        if text.startswith("/*", i):
            j = text.find("*/", i + 2)
            if j < 0:
                raise _LexError("unterminated block comment", line, col)
            skipped = text[i:j + 2]
            i = j + 2
            nl = skipped.count("\n")
            if nl:
                line += nl
                col = len(skipped) - skipped.rfind("\n")
            else:
                col += len(skipped)
            continue
        l0, c0 = line, col
        if text.startswith("--[", i):
            push("ARROW_ACT", "--[", l0, c0)
            i += 3
            col += 3
            continue
        if text.startswith("-->", i):
            push("ARROW", "-->", l0, c0)
            i += 3
            col += 3
            continue
        if text.startswith("]->", i):
            push("ARROW_END", "]->", l0, c0)
            i += 3
            col += 3
            continue
        if text.startswith("==>", i):
            push("IMPLIES", "==>", l0, c0)
            i += 3
            col += 3
            continue
        if ch == "'":
            j = i + 1
            while j < n and text[j] not in "'\n":
                j += 1
            if j >= n or text[j] != "'":
                raise _LexError("unterminated string constant", l0, c0)
            push("STRING", text[i + 1:j], l0, c0)
            col += j + 1 - i
            i = j + 1
            continue
        if ch == "#":
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            if j == i + 1:
                raise _LexError("expected name after '#'", l0, c0)
            push("TPVAR", text[i + 1:j], l0, c0)
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            # lemma mode annotations carry a hyphen
            if word == "exists" and text.startswith("-trace", j):
                word += "-trace"
                j += 6
            elif word == "all" and text.startswith("-traces", j):
                word += "-traces"
                j += 7
            push("IDENT", word, l0, c0)
            col += j - i
            i = j
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            push("INT", text[i:j], l0, c0)
            col += j - i
            i = j
            continue
        single = {"(": "LPAREN", ")": "RPAREN", "[": "LBRACK", "]": "RBRACK",
                  "<": "LT", ">": "GT", ",": "COMMA", ":": "COLON", ".": "DOT",
                  "=": "EQ", "!": "BANG", "~": "TILDE", "$": "DOLLAR",
                  "@": "AT", "&": "AND", "|": "OR", "/": "SLASH", '"': "QUOTE"}
        if ch in single:
            push(single[ch], ch, l0, c0)
            i += 1
            col += 1
            continue
        raise _LexError(f"unexpected character {ch!r}", l0, c0)
    toks.append(Token("EOF", "", line, col))
    return toks


class _ParseError(Exception):
    def __init__(self, message, token):
        super().__init__(message)
        self.token = token


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.pos = 0
        self.diags: list[D.Diagnostic] = []
        self.functions: dict[str, int] = dict(BUILTIN_FUNCTIONS)
        self.declared_functions: list[str] = []
        self.equations: list = []
        self.schemas: dict[str, FactSchema] = dict(RESERVED_SCHEMAS)
        self.rules: list[Rule] = []
        self.lemmas: list[Lemma] = []
        self.spans: dict = {}
        self.theory_name = ""

    # -- token plumbing ---------------------------------------------------

    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.peek()
        if t.kind != "EOF":
            self.pos += 1
        return t

    def expect(self, kind: str, what: str) -> Token:
        t = self.peek()
        if t.kind != kind:
            raise _ParseError(f"expected {what}", t)
        return self.next()

    def expect_word(self, word: str) -> Token:
        t = self.peek()
        if t.kind != "IDENT" or t.value != word:
            raise _ParseError(f"expected '{word}'", t)
        return self.next()

    def at_word(self, word: str) -> bool:
        t = self.peek()
        return t.kind == "IDENT" and t.value == word

    def err(self, code: str, message: str, tok: Token, hint: str | None = None):
        self.diags.append(D.error(code, message, tok.line, tok.column, hint))

    def sync_decl(self):
        """Recover: skip to the next declaration boundary."""
        while True:
            t = self.peek()
            if t.kind == "EOF":
                return
            if t.kind == "IDENT" and t.value in ("rule", "lemma", "functions", "equations", "end"):
                return
            self.next()

    # -- grammar ------------------------------------------------------------

    def parse_theory(self):
        try:
            self.expect_word("theory")
            name_tok = self.expect("IDENT", "theory name")
            self.theory_name = name_tok.value
            self.expect_word("begin")
        except _ParseError as e:
            self.err(D.SYNTAX_ERROR, str(e), e.token)
            return
        while True:
            t = self.peek()
            if t.kind == "EOF":
                self.err(D.SYNTAX_ERROR, "missing 'end'", t)
                return
            if self.at_word("end"):
                self.next()
                return
            try:
                if self.at_word("functions"):
                    self.parse_functions()
                elif self.at_word("equations"):
                    self.parse_equations()
                elif self.at_word("rule"):
                    self.parse_rule()
                elif self.at_word("lemma"):
                    self.parse_lemma()
                else:
                    raise _ParseError("expected a declaration (functions, equations, rule or lemma)", t)
            except _ParseError as e:
                self.err(D.SYNTAX_ERROR, str(e), e.token)
                self.sync_decl()

    def parse_functions(self):
        self.expect_word("functions")
        self.expect("COLON", "':'")
        while True:
            name_tok = self.expect("IDENT", "function name")
            self.expect("SLASH", "'/'")
            arity_tok = self.expect("INT", "arity")
            name, arity = name_tok.value, int(arity_tok.value)
            if name in RESERVED_FACTS:
                self.err(D.RESERVED_AS_FUNCTION, f"{name} is a reserved fact, not a function", name_tok)
            elif name in self.functions and self.functions[name] != arity:
                self.err(D.ARITY_MISMATCH,
                         f"{name} redeclared with arity {arity} (was /{self.functions[name]})",
                         name_tok)
            else:
                self.functions[name] = arity
                if name not in BUILTIN_FUNCTIONS:
                    self.declared_functions.append(name)
                self.spans[("function", name)] = (name_tok.line, name_tok.column)
            if self.peek().kind == "COMMA":
                self.next()
                continue
            return

    def parse_equations(self):
        self.expect_word("equations")
        self.expect("COLON", "':'")
        while True:
            lhs_tok = self.peek()
            lhs = self.parse_term()
            self.expect("EQ", "'='")
            rhs = self.parse_term()
            if not is_subterm_convergent(lhs, rhs):
                self.err(D.BAD_EQUATION,
                         "equation right side must be a variable of the left side or a ground constant",
                         lhs_tok)
            else:
                self.equations.append((lhs, rhs))
                self.spans[("equation", len(self.equations) - 1)] = (lhs_tok.line, lhs_tok.column)
            if self.peek().kind == "COMMA":
                self.next()
                continue
            return

    def parse_term(self) -> tuple:
        t = self.peek()
        if t.kind == "TILDE":
            self.next()
            name = self.expect("IDENT", "name after '~'")
            return T.fresh_var(name.value)
        if t.kind == "DOLLAR":
            self.next()
            name = self.expect("IDENT", "name after '$'")
            return T.pub_var(name.value)
        if t.kind == "STRING":
            self.next()
            return T.string(t.value)
        if t.kind == "LT":
            self.next()
            items = [self.parse_term()]
            while self.peek().kind == "COMMA":
                self.next()
                items.append(self.parse_term())
            self.expect("GT", "'>'")
            return T.pairs(items)
        if t.kind == "IDENT":
            self.next()
            if self.peek().kind == "LPAREN":
                self.next()
                args = []
                if self.peek().kind != "RPAREN":
                    args.append(self.parse_term())
                    while self.peek().kind == "COMMA":
                        self.next()
                        args.append(self.parse_term())
                self.expect("RPAREN", "')'")
                if t.value not in self.functions:
                    raise _ParseError(f"undeclared function symbol '{t.value}'", t)
                if self.functions[t.value] != len(args):
                    raise _ParseError(
                        f"'{t.value}' takes {self.functions[t.value]} argument(s), got {len(args)}", t)
                return T.app(t.value, *args)
            if t.value in self.functions and self.functions[t.value] == 0:
                return T.app(t.value)
            return T.var(t.value)
        raise _ParseError("expected a term", t)

    def parse_fact(self, rule_name: str, section: str, index: int):
        t = self.peek()
        if self.at_word("not"):
            self.next()
            self.expect("LPAREN", "'(' after not")
            inner, persistent, tok = self.parse_plain_fact(rule_name, section, index)
            self.expect("RPAREN", "')'")
            return inner, persistent, True, tok
        inner, persistent, tok = self.parse_plain_fact(rule_name, section, index)
        return inner, persistent, False, tok

    def parse_plain_fact(self, rule_name: str, section: str, index: int):
        banged = False
        if self.peek().kind == "BANG":
            self.next()
            banged = True
        name_tok = self.expect("IDENT", "fact name")
        self.expect("LPAREN", "'('")
        args = []
        if self.peek().kind != "RPAREN":
            args.append(self.parse_term())
            while self.peek().kind == "COMMA":
                self.next()
                args.append(self.parse_term())
        self.expect("RPAREN", "')'")
        self.spans[("fact", rule_name, section, index)] = (name_tok.line, name_tok.column)
        return (name_tok.value, tuple(args)), banged, name_tok

    def parse_let_block(self) -> list:
        self.expect_word("let")
        bindings = []
        while True:
            name = self.expect("IDENT", "let-bound name")
            self.expect("EQ", "'='")
            bindings.append((T.var(name.value), self.parse_term()))
            if self.at_word("in"):
                self.next()
                return bindings

    def parse_fact_list(self, rule_name: str, section: str, start_index: int):
        """The bracketed list; returns [(fact, banged, negated, token)]."""
        self.expect("LBRACK", "'['")
        facts = []
        if self.peek().kind != "RBRACK":
            facts.append(self.parse_fact(rule_name, section, start_index))
            while self.peek().kind == "COMMA":
                self.next()
                facts.append(self.parse_fact(rule_name, section, start_index + len(facts)))
        self.expect("RBRACK", "']'")
        return facts

    def parse_rule(self):
        self.expect_word("rule")
        name_tok = self.expect("IDENT", "rule name")
        name = name_tok.value
        self.expect("COLON", "':'")
        self.spans[("rule", name)] = (name_tok.line, name_tok.column)

        lets: list = []
        premises: list = []
        # let blocks and premise lists in any interleaving, then the arrow
        while True:
            if self.at_word("let"):
                lets.extend(self.parse_let_block())
                continue
            if self.peek().kind == "LBRACK":
                premises.extend(self.parse_fact_list(name, "premises", len(premises)))
                continue
            break
        actions: list = []
        t = self.peek()
        if t.kind == "ARROW":
            self.next()
        elif t.kind == "ARROW_ACT":
            self.next()
            if self.peek().kind != "ARROW_END":
                actions.append(self.parse_fact(name, "actions", 0))
                while self.peek().kind == "COMMA":
                    self.next()
                    actions.append(self.parse_fact(name, "actions", len(actions)))
            self.expect("ARROW_END", "']->'")
        else:
            raise _ParseError("expected '-->' or '--[' after premises", t)
        conclusions = self.parse_fact_list(name, "conclusions", 0)

        if any(r.name == name for r in self.rules):
            self.err(D.DUPLICATE_RULE, f"rule '{name}' already defined", name_tok)
            return

        # Expand let bindings (earlier bindings visible to later ones).
        subst: dict = {}
        for v, term in lets:
            subst[v] = substitute(subst, term)

        def expand(f):
            return (f[0], tuple(substitute(subst, a) for a in f[1]))

        prems = []
        for i, (f, banged, negated, tok) in enumerate(premises):
            f = expand(f)
            self.register_schema(f, banged, negated, tok)
            prems.append(Premise(f, negated))
        acts = []
        for f, banged, negated, tok in actions:
            if negated:
                self.err(D.SYNTAX_ERROR, "not(...) is only valid in premises", tok)
                continue
            acts.append(expand(f))
        concls = []
        for f, banged, negated, tok in conclusions:
            if negated:
                self.err(D.SYNTAX_ERROR, "not(...) is only valid in premises", tok)
                continue
            f = expand(f)
            self.register_schema(f, banged, negated, tok)
            concls.append(f)

        self.rules.append(Rule(name, tuple(prems), tuple(acts), tuple(concls)))

    def register_schema(self, f, banged: bool, negated: bool, tok):
        name, args = f
        if name in RESERVED_SCHEMAS:
            schema = RESERVED_SCHEMAS[name]
            if banged != (schema.kind == PERSISTENT) and not negated:
                self.err(D.FACT_KIND_CONFLICT,
                         f"reserved fact {name} is {schema.kind}", tok)
            if len(args) != schema.arity:
                self.err(D.RESERVED_ARITY,
                         f"reserved fact {name} takes {schema.arity} argument(s)", tok)
            return
        kind = PERSISTENT if banged else LINEAR
        known = self.schemas.get(name)
        if known is None:
            # A bare name inside not(...) refers to a (possibly later)
            # persistent schema; negative premises never introduce one.
            if negated and not banged:
                return
            self.schemas[name] = FactSchema(name, len(args), kind)
            return
        if known.arity != len(args):
            self.err(D.ARITY_MISMATCH,
                     f"fact {name} used with {len(args)} argument(s), declared with {known.arity}",
                     tok)
        if not negated and known.kind != kind:
            self.err(D.FACT_KIND_CONFLICT,
                     f"fact {name} is {known.kind} elsewhere", tok)

    # -- lemmas ---------------------------------------------------------------

    def parse_lemma(self):
        self.expect_word("lemma")
        name_tok = self.expect("IDENT", "lemma name")
        self.expect("COLON", "':'")
        mode = ALL_TRACES
        t = self.peek()
        if t.kind == "IDENT" and t.value in (EXISTS_TRACE, ALL_TRACES):
            mode = t.value
            self.next()
        self.expect("QUOTE", "'\"' opening the lemma formula")
        formula = self.parse_formula_body()
        self.expect("QUOTE", "closing '\"'")
        if any(l.name == name_tok.value for l in self.lemmas):
            self.err(D.DUPLICATE_LEMMA, f"lemma '{name_tok.value}' already defined", name_tok)
            return
        self.spans[("lemma", name_tok.value)] = (name_tok.line, name_tok.column)
        self.lemmas.append(Lemma(name_tok.value, mode, formula))

    def parse_formula_body(self) -> Formula:
        prefix = []
        while self.at_word(ALL) or self.at_word(EX):
            quant = self.next().value
            saw = False
            while True:
                t = self.peek()
                if t.kind == "TPVAR":
                    self.next()
                    prefix.append((quant, t.value, "timepoint"))
                    saw = True
                elif t.kind == "IDENT" and t.value not in (ALL, EX):
                    self.next()
                    prefix.append((quant, t.value, "msg"))
                    saw = True
                else:
                    break
            if not saw:
                raise _ParseError("expected quantified variables", self.peek())
            self.expect("DOT", "'.' after quantifier prefix")
        body = self.parse_imp()
        return Formula(tuple(prefix), body)

    def parse_imp(self):
        left = self.parse_or()
        if self.peek().kind == "IMPLIES":
            self.next()
            return ("imp", left, self.parse_imp())
        return left

    def parse_or(self):
        left = self.parse_and()
        while self.peek().kind == "OR":
            self.next()
            left = ("or", left, self.parse_and())
        return left

    def parse_and(self):
        left = self.parse_formula_atom()
        while self.peek().kind == "AND":
            self.next()
            left = ("and", left, self.parse_formula_atom())
        return left

    def parse_formula_atom(self):
        t = self.peek()
        if self.at_word("not"):
            self.next()
            return ("not", self.parse_formula_atom())
        if t.kind == "LPAREN":
            self.next()
            inner = self.parse_imp()
            self.expect("RPAREN", "')'")
            return inner
        if t.kind == "TPVAR":
            self.next()
            op = self.peek()
            if op.kind == "LT":
                self.next()
                other = self.expect("TPVAR", "timepoint variable")
                return ("less", t.value, other.value)
            if op.kind == "EQ":
                self.next()
                other = self.expect("TPVAR", "timepoint variable")
                return ("eqtime", t.value, other.value)
            raise _ParseError("expected '<' or '=' after timepoint", op)
        if t.kind == "BANG" or (t.kind == "IDENT" and self.peek(1).kind == "LPAREN"):
            # Fact pattern: names live in the action-fact namespace, so they
            # need not be declared functions unless this turns out to be a
            # term equation.
            if t.kind == "BANG":
                self.next()
            name_tok = self.expect("IDENT", "fact or function name")
            self.expect("LPAREN", "'('")
            args = []
            if self.peek().kind != "RPAREN":
                args.append(self.parse_term())
                while self.peek().kind == "COMMA":
                    self.next()
                    args.append(self.parse_term())
            self.expect("RPAREN", "')'")
            nxt = self.peek()
            if nxt.kind == "AT":
                self.next()
                tp = self.expect("TPVAR", "timepoint variable after '@'")
                return ("atom", (name_tok.value, tuple(args)), tp.value)
            if nxt.kind == "EQ":
                if name_tok.value not in self.functions:
                    raise _ParseError(f"undeclared function symbol '{name_tok.value}'", name_tok)
                if self.functions[name_tok.value] != len(args):
                    raise _ParseError(
                        f"'{name_tok.value}' takes {self.functions[name_tok.value]} argument(s), got {len(args)}",
                        name_tok)
                self.next()
                rhs = self.parse_term()
                return ("eqterm", T.app(name_tok.value, *args), rhs)
            raise _ParseError("expected '@' or '=' after fact pattern", nxt)
        if t.kind in ("IDENT", "STRING", "TILDE", "DOLLAR", "LT"):
            term = self.parse_term()
            self.expect("EQ", "'=' after term")
            rhs = self.parse_term()
            return ("eqterm", term, rhs)
        raise _ParseError("expected a formula atom", t)

    # -- finish -----------------------------------------------------------

    def build(self) -> Theory:
        return Theory(
            name=self.theory_name or "Unnamed",
            functions=self.functions,
            equations=tuple(BUILTIN_EQUATIONS) + tuple(self.equations),
            schemas=self.schemas,
            rules=tuple(self.rules),
            lemmas=tuple(self.lemmas),
            spans=self.spans,
        )


def parse_theory(text: str):
    """Parse and validate; returns (theory_or_None, diagnostics).

    The theory is returned when no error-severity diagnostic was produced;
    warnings alone do not reject it.
    """
    try:
        toks = tokenize(text)
    except _LexError as e:
        return None, [D.error(D.LEX_ERROR, str(e), e.line, e.column)]
    p = _Parser(toks)
    p.parse_theory()
    theory = p.build()
    diags = list(p.diags)
    diags.extend(validate(theory))
    if any(d.severity == "error" for d in diags):
        return None, diags
    return theory, diags


def parse_formula(text: str) -> Formula:
    """Parse a bare guarded formula (used by tests and tooling)."""
    toks = tokenize(text)
    p = _Parser(toks)
    f = p.parse_formula_body()
    if p.peek().kind != "EOF":
        raise ValueError(f"trailing input after formula at {p.peek().line}:{p.peek().column}")
    return f


# --- semantic validation ----------------------------------------------------


def _fact_term_vars(f) -> set:
    out: set = set()
    for a in f[1]:
        out |= T.variables(a)
    return out


def validate(theory: Theory) -> list[D.Diagnostic]:
    """Semantic checks; empty list iff every theory invariant holds."""
    diags: list[D.Diagnostic] = []

    def span(key, default=(1, 1)):
        return theory.spans.get(key, default)

    action_names = set()
    for rule in theory.rules:
        rl, rc = span(("rule", rule.name))

        def fact_pos(section, idx):
            return span(("fact", rule.name, section, idx), (rl, rc))

        bound: set = set()
        for i, prem in enumerate(rule.premises):
            name = prem.fact[0]
            line, col = fact_pos("premises", i)
            if name == "Out":
                diags.append(D.error(D.OUT_IN_PREMISE,
                                     f"rule {rule.name}: Out is only allowed in conclusions",
                                     line, col))
            if name == "K":
                diags.append(D.error(D.K_IN_RULE,
                                     f"rule {rule.name}: K facts belong to the adversary, not user rules",
                                     line, col))
            if name == "Fr":
                args = prem.fact[1]
                if len(args) != 1 or args[0][0] != T.VAR or args[0][2] != T.SORT_FRESH:
                    diags.append(D.error(D.FR_BAD_ARGUMENT,
                                         f"rule {rule.name}: Fr takes a single fresh variable (~x)",
                                         line, col))
            if prem.negated:
                schema = theory.schemas.get(name)
                if name in RESERVED_FACTS or schema is None or schema.kind != PERSISTENT:
                    diags.append(D.error(D.NOT_ON_NONPERSISTENT,
                                         f"rule {rule.name}: not(...) requires a user-declared persistent fact",
                                         line, col))
            else:
                bound |= _fact_term_vars(prem.fact)

        for i, prem in enumerate(rule.premises):
            if prem.negated:
                line, col = fact_pos("premises", i)
                for v in sorted(_fact_term_vars(prem.fact) - bound):
                    if v[2] != T.SORT_PUB:
                        diags.append(D.error(D.UNBOUND_VARIABLE,
                                             f"rule {rule.name}: variable {T.pretty(v)} in not(...) is not bound by a premise",
                                             line, col))

        for section, facts in (("actions", rule.actions), ("conclusions", rule.conclusions)):
            for i, f in enumerate(facts):
                line, col = fact_pos(section, i)
                if section == "actions" and f[0] in RESERVED_FACTS:
                    diags.append(D.error(D.RESERVED_IN_ACTION,
                                         f"rule {rule.name}: {f[0]} is recorded by the engine and cannot be a user action",
                                         line, col))
                if section == "conclusions":
                    if f[0] == "Fr":
                        diags.append(D.error(D.FR_IN_CONCLUSION,
                                             f"rule {rule.name}: Fr facts are engine-generated and cannot be concluded",
                                             line, col))
                    if f[0] == "In":
                        diags.append(D.error(D.IN_IN_CONCLUSION,
                                             f"rule {rule.name}: In is only allowed in premises",
                                             line, col))
                    if f[0] == "K":
                        diags.append(D.error(D.K_IN_RULE,
                                             f"rule {rule.name}: K facts belong to the adversary, not user rules",
                                             line, col))
                for v in sorted(_fact_term_vars(f) - bound):
                    if v[2] != T.SORT_PUB:
                        diags.append(D.error(D.UNBOUND_VARIABLE,
                                             f"rule {rule.name}: variable {T.pretty(v)} in {section} is not bound by a premise",
                                             line, col))
        for f in rule.actions:
            action_names.add(f[0])

    for lemma in theory.lemmas:
        line, col = span(("lemma", lemma.name))
        diags.extend(_validate_formula(theory, lemma, action_names, line, col))

    return diags


def _validate_formula(theory, lemma, action_names, line, col) -> list[D.Diagnostic]:
    diags = []
    f = lemma.formula
    msg_vars = {name for _, name, sort in f.prefix if sort == "msg"}
    tp_vars = {name for _, name, sort in f.prefix if sort == "timepoint"}

    seen_in_atom: set = set()
    used_msg: set = set()
    used_tp: set = set()
    warned: set = set()
    for node in formula_nodes(f.body):
        head = node[0]
        if head == "atom":
            fact_pattern, tp = node[1], node[2]
            used_tp.add(tp)
            seen_in_atom.add(tp)
            for a in fact_pattern[1]:
                for v in T.variables(a):
                    used_msg.add(v[1])
                    seen_in_atom.add(v[1])
            if (fact_pattern[0] not in action_names and fact_pattern[0] not in RESERVED_FACTS
                    and fact_pattern[0] not in warned):
                warned.add(fact_pattern[0])
                diags.append(D.warning(D.UNUSED_ACTION,
                                       f"lemma {lemma.name}: no rule records action fact '{fact_pattern[0]}'",
                                       line, col))
        elif head in ("less", "eqtime"):
            used_tp.update((node[1], node[2]))
        elif head == "eqterm":
            for t in (node[1], node[2]):
                for v in T.variables(t):
                    used_msg.add(v[1])

    for name in sorted(used_msg - msg_vars):
        diags.append(D.error(D.UNGUARDED_FORMULA,
                             f"lemma {lemma.name}: message variable {name} is not quantified",
                             line, col))
    for name in sorted(used_tp - tp_vars):
        diags.append(D.error(D.UNGUARDED_FORMULA,
                             f"lemma {lemma.name}: timepoint #{name} is not quantified",
                             line, col))
    for name in sorted((msg_vars | tp_vars) - seen_in_atom):
        diags.append(D.error(D.UNGUARDED_FORMULA,
                             f"lemma {lemma.name}: quantified variable {name} never occurs in an action atom",
                             line, col))
    return diags


# --- pretty printing ----------------------------------------------------------


def pretty_formula(f: Formula) -> str:
    parts = []
    i = 0
    prefix = f.prefix
    while i < len(prefix):
        quant = prefix[i][0]
        names = []
        while i < len(prefix) and prefix[i][0] == quant:
            _, name, sort = prefix[i]
            names.append("#" + name if sort == "timepoint" else name)
            i += 1
        parts.append(f"{quant} {' '.join(names)}.")
    body = _pretty_body(f.body)
    return (" ".join(parts) + " " + body) if parts else body


def _pretty_body(node, parent: str = "") -> str:
    head = node[0]
    if head == "atom":
        fname, args = node[1]
        inner = ", ".join(T.pretty(a) for a in args)
        return f"{fname}({inner}) @ #{node[2]}"
    if head == "less":
        return f"#{node[1]} < #{node[2]}"
    if head == "eqtime":
        return f"#{node[1]} = #{node[2]}"
    if head == "eqterm":
        return f"{T.pretty(node[1])} = {T.pretty(node[2])}"
    if head == "not":
        return f"not {_pretty_body(node[1], 'not')}"
    ops = {"and": "&", "or": "|", "imp": "==>"}
    text = f"{_pretty_body(node[1], head)} {ops[head]} {_pretty_body(node[2], head)}"
    needs_parens = parent and (parent != head or head == "imp")
    return f"({text})" if needs_parens else text


def pretty_theory(theory: Theory) -> str:
    """Canonical text form; parse_theory(pretty_theory(T)) == T."""
    out = [f"theory {theory.name}", "begin", ""]
    user_functions = [(n, a) for n, a in theory.functions.items() if n not in BUILTIN_FUNCTIONS]
    if user_functions:
        sigs = ", ".join(f"{n}/{a}" for n, a in user_functions)
        out.append(f"functions: {sigs}")
        out.append("")
    user_equations = [eq for eq in theory.equations if eq not in BUILTIN_EQUATIONS]
    if user_equations:
        eqs = ", ".join(f"{T.pretty(l)} = {T.pretty(r)}" for l, r in user_equations)
        out.append(f"equations: {eqs}")
        out.append("")
    for rule in theory.rules:
        out.append(f"rule {rule.name}:")
        prems = ", ".join(_pretty_premise(theory, p) for p in rule.premises)
        concls = ", ".join(_pretty_rule_fact(theory, f) for f in rule.conclusions)
        if rule.actions:
            acts = ", ".join(_pretty_rule_fact(theory, f, action=True) for f in rule.actions)
            out.append(f"  [ {prems} ] --[ {acts} ]-> [ {concls} ]")
        else:
            out.append(f"  [ {prems} ] --> [ {concls} ]")
        out.append("")
    for lemma in theory.lemmas:
        out.append(f"lemma {lemma.name}: {lemma.mode}")
        out.append(f'  "{pretty_formula(lemma.formula)}"')
        out.append("")
    out.append("end")
    return "\n".join(out) + "\n"


def _pretty_rule_fact(theory: Theory, f, action: bool = False) -> str:
    schema = theory.schemas.get(f[0])
    persistent = (not action) and schema is not None and schema.kind == PERSISTENT
    args = ", ".join(T.pretty(a) for a in f[1])
    return f"{'!' if persistent else ''}{f[0]}({args})"


def _pretty_premise(theory: Theory, p: Premise) -> str:
    if p.negated:
        args = ", ".join(T.pretty(a) for a in p.fact[1])
        return f"not({p.fact[0]}({args}))"
    return _pretty_rule_fact(theory, p.fact)
