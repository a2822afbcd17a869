"""Dolev-Yao adversary deduction.

The adversary composes terms by applying public function symbols and
decomposes captured terms by running rewrite equations in reverse: to
extract ``m`` from ``enc(m, k)`` it must first derive ``k``.  ``mac`` and
``hash`` have no equations, so they are never inverted; a MAC is "checked"
only by recomputing it from known inputs.

Bounding: composed terms are limited to depth ``depth_bound``;
decomposition results are subterms of known material and are never
depth-limited.  ``saturate`` materializes the closure (finite),
``derivable`` answers goal-directed queries and returns a replayable
:class:`Derivation`.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

from spthylite import terms as T
from spthylite.kernel import match, normalize, substitute


@dataclass(frozen=True)
class Extractor:
    """One reverse reading of an equation: knowing an instance of
    ``container`` and deriving the ``keys`` yields the instance of
    ``result`` (for ``dec(enc(m, k), k) = m``: container ``enc(m, k)``,
    keys ``(k,)``, result ``m``)."""

    container: tuple
    keys: tuple
    result: tuple


def extractors_from_equations(equations) -> tuple:
    out = []
    for lhs, rhs in equations:
        if rhs[0] != T.VAR:
            continue
        for i, arg in enumerate(lhs[2]):
            if rhs in T.variables(arg) and arg[0] == T.APP:
                keys = tuple(a for j, a in enumerate(lhs[2]) if j != i)
                out.append(Extractor(arg, keys, rhs))
                break
    return tuple(out)


@dataclass(frozen=True)
class Derivation:
    """Proof tree; ``kind`` is 'known', 'construct' or 'extract'.

    construct: children are the argument derivations, rule the symbol.
    extract:   children are (container, *keys), rule the container symbol.
    """

    kind: str
    term: tuple
    rule: str = ""
    children: tuple = ()

    def replay(self, known: frozenset, ctx: "DeductionContext") -> bool:
        """Re-run bottom-up and confirm the tree really produces ``term``."""
        if self.kind == "known":
            return self.term in known
        if not all(c.replay(known, ctx) for c in self.children):
            return False
        if self.kind == "construct":
            built = normalize((T.APP, self.rule, tuple(c.term for c in self.children)),
                              ctx.eq_index)
            return built == self.term
        container = self.children[0].term
        keys = tuple(c.term for c in self.children[1:])
        for ex in ctx.extractors:
            if ex.container[1] != self.rule:
                continue
            subst = match(ex.container, container)
            if subst is None:
                continue
            if (substitute(subst, ex.result) == self.term
                    and tuple(substitute(subst, k) for k in ex.keys) == keys):
                return True
        return False

    def leaves(self) -> list:
        if self.kind == "known":
            return [self.term]
        out = []
        for c in self.children:
            out.extend(c.leaves())
        return out

    def construction_terms(self) -> list:
        """Terms produced by construction steps, innermost first."""
        out = []
        for c in self.children:
            out.extend(c.construction_terms())
        if self.kind == "construct":
            out.append(self.term)
        return out


class KnowledgeBase:
    """Immutable set of ground normalized terms the adversary holds
    outright (captured messages plus the public universe)."""

    __slots__ = ("terms",)

    def __init__(self, terms=frozenset()):
        self.terms = frozenset(terms)

    def with_terms(self, new_terms) -> "KnowledgeBase":
        added = frozenset(new_terms) - self.terms
        if not added:
            return self
        return KnowledgeBase(self.terms | added)

    def __contains__(self, t) -> bool:
        return t in self.terms

    def __iter__(self):
        return iter(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def __eq__(self, other) -> bool:
        return isinstance(other, KnowledgeBase) and self.terms == other.terms

    def __hash__(self) -> int:
        return hash(self.terms)

    def __repr__(self) -> str:
        inner = ", ".join(sorted(T.pretty(t) for t in self.terms))
        return f"KnowledgeBase({{{inner}}})"


class DeductionContext:
    """Equation machinery plus a per-knowledge-set analysis cache."""

    __slots__ = ("eq_index", "extractors", "functions", "_cache")

    def __init__(self, eq_index: dict, extractors: tuple, functions: dict):
        self.eq_index = eq_index
        self.extractors = extractors
        self.functions = functions
        self._cache: dict = {}

    @staticmethod
    def for_theory(theory) -> "DeductionContext":
        return DeductionContext(
            eq_index=theory.eq_index,
            extractors=extractors_from_equations(theory.equations),
            functions=dict(theory.functions),
        )


def analysis(kb: KnowledgeBase, ctx: DeductionContext, depth_bound: int) -> dict:
    """Decomposition closure: every exposed term mapped to a Derivation.

    Exposed = known outright, or extractable from exposed material with
    keys derivable from exposed material (keys may be composed, subject to
    the same depth bound as any other construction).
    """
    cached = ctx._cache.get((kb.terms, depth_bound))
    if cached is not None:
        return cached
    exposed: dict = {t: Derivation("known", t) for t in kb.terms}
    changed = True
    while changed:
        changed = False
        for t in list(exposed):
            if t[0] != T.APP:
                continue
            for ex in ctx.extractors:
                subst = match(ex.container, t)
                if subst is None:
                    continue
                result = substitute(subst, ex.result)
                if result in exposed:
                    continue
                key_derivs = []
                for key_pat in ex.keys:
                    d = _synthesize(substitute(subst, key_pat), exposed, ctx, depth_bound)
                    if d is None:
                        break
                    key_derivs.append(d)
                else:
                    exposed[result] = Derivation("extract", result, t[1],
                                                 (exposed[t], *key_derivs))
                    changed = True
    ctx._cache[(kb.terms, depth_bound)] = exposed
    return exposed


def _synthesize(t, exposed: dict, ctx: DeductionContext, depth_bound: int):
    found = exposed.get(t)
    if found is not None:
        return found
    if t[0] != T.APP:
        return None
    if T.depth(t) > depth_bound:
        return None
    arity = ctx.functions.get(t[1])
    if arity is None or arity != len(t[2]):
        return None
    children = []
    for a in t[2]:
        d = _synthesize(a, exposed, ctx, depth_bound)
        if d is None:
            return None
        children.append(d)
    return Derivation("construct", t, t[1], tuple(children))


def derivable(kb: KnowledgeBase, target, ctx: DeductionContext, depth_bound: int):
    """Derivation of ground normalized ``target`` whose constructed terms
    stay within ``depth_bound``, or None."""
    exposed = analysis(kb, ctx, depth_bound)
    return _synthesize(target, exposed, ctx, depth_bound)


def synthesize_matches(kb: KnowledgeBase, pattern, ctx: DeductionContext,
                       depth_bound: int, bindings=None):
    """All ways the adversary can supply an instance of ``pattern``.

    Returns deterministically ordered (substitution, Derivation, instance)
    triples.  Pattern variables range over exposed terms; structured
    patterns are additionally satisfied by construction, so composed
    instances arise exactly where the pattern demands structure.  Results
    are memoized per (knowledge, residual pattern).
    """
    base = dict(bindings or {})
    residual = substitute(base, pattern)
    memo_key = ("synth", kb.terms, depth_bound, residual)
    cached = ctx._cache.get(memo_key)
    if cached is None:
        cached = _synthesize_pattern(kb, residual, ctx, depth_bound)
        ctx._cache[memo_key] = cached
    out = []
    for delta, deriv, inst in cached:
        merged = dict(base)
        merged.update(delta)
        out.append((merged, deriv, inst))
    return out


def _synthesize_pattern(kb: KnowledgeBase, pattern, ctx: DeductionContext,
                        depth_bound: int):
    exposed = analysis(kb, ctx, depth_bound)
    exposed_sorted = sorted(exposed)
    seen = set()
    out = []

    def walk(pat, subst):
        pat = substitute(subst, pat)
        if T.is_ground(pat):
            d = _synthesize(pat, exposed, ctx, depth_bound)
            if d is not None:
                yield subst, d
            return
        # direct matches against exposed terms
        for t in exposed_sorted:
            s2 = match(pat, t, subst)
            if s2 is not None:
                yield s2, exposed[t]
        # constructions demanded by pattern structure
        if pat[0] == T.APP:
            arity = ctx.functions.get(pat[1])
            if arity is None or arity != len(pat[2]):
                return

            def build(i, subst_i, children):
                if i == len(pat[2]):
                    term = substitute(subst_i, pat)
                    if T.depth(term) <= depth_bound:
                        yield subst_i, Derivation("construct", term, pat[1], tuple(children))
                    return
                for s2, d in walk(pat[2][i], subst_i):
                    yield from build(i + 1, s2, children + [d])

            yield from build(0, subst, [])

    for subst, deriv in walk(pattern, {}):
        inst = normalize(substitute(subst, pattern), ctx.eq_index)
        key = tuple(sorted(subst.items()))
        if (inst, key) in seen:
            continue
        seen.add((inst, key))
        out.append((subst, deriv, inst))
    out.sort(key=lambda x: (x[2], tuple(sorted(x[0].items()))))
    return out


def saturate(kb: KnowledgeBase, ctx: DeductionContext, depth_bound: int) -> frozenset:
    """Least fixpoint of composition (depth-capped) and decomposition."""
    result = set(analysis(kb, ctx, depth_bound))
    grown = True
    while grown:
        grown = False
        pool = sorted(result)
        depths = {t: T.depth(t) for t in pool}
        for fname, arity in sorted(ctx.functions.items()):
            if arity == 0:
                t = normalize((T.APP, fname, ()), ctx.eq_index)
                if t not in result:
                    result.add(t)
                    grown = True
                continue
            for args in product(pool, repeat=arity):
                if 1 + max(depths[a] for a in args) > depth_bound:
                    continue
                t = normalize((T.APP, fname, args), ctx.eq_index)
                if t not in result:
                    result.add(t)
                    grown = True
    return frozenset(result)
