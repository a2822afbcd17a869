"""Sorted term representation.

Terms are immutable tagged tuples so they hash, compare and pickle cheaply;
the same representation is shared by the pure-Python and the compiled
rewriting kernels.  Shapes:

    (VAR,   name,  sort)        variable, sort in {'msg', 'fresh', 'pub'}
    (FRESH, label, index)       fresh name, index globally unique per run
    (PUB,   name)               public name
    (STR,   text)               string constant, e.g. 'message'
    (APP,   fname, args)        function application, args a tuple of terms

Tuple comparison gives a total, deterministic term order which the engine
uses for canonical tie-breaking.
"""

from __future__ import annotations

from typing import Iterator

VAR = 0
FRESH = 1
PUB = 2
STR = 3
APP = 4

SORT_MSG = "msg"
SORT_FRESH = "fresh"
SORT_PUB = "pub"

Term = tuple


def var(name: str, sort: str = SORT_MSG) -> Term:
    return (VAR, name, sort)


def fresh_var(name: str) -> Term:
    return (VAR, name, SORT_FRESH)


def pub_var(name: str) -> Term:
    return (VAR, name, SORT_PUB)


def fresh(label: str, index: int) -> Term:
    return (FRESH, label, index)


def pub(name: str) -> Term:
    return (PUB, name)


def string(text: str) -> Term:
    return (STR, text)


def app(fname: str, *args: Term) -> Term:
    return (APP, fname, tuple(args))


def is_var(t: Term) -> bool:
    return t[0] == VAR


def is_ground(t: Term) -> bool:
    tag = t[0]
    if tag == VAR:
        return False
    if tag == APP:
        return all(is_ground(a) for a in t[2])
    return True


def sort_of(t: Term) -> str:
    """Sort of a term; applications are plain messages."""
    tag = t[0]
    if tag == VAR:
        return t[2]
    if tag == FRESH:
        return SORT_FRESH
    if tag in (PUB, STR):
        return SORT_PUB
    return SORT_MSG


def sort_accepts(sort: str, t: Term) -> bool:
    """May a variable of `sort` be bound to `t`?

    fresh and pub are incompatible subsorts of msg; a variable of a strict
    sort also accepts a variable of the same sort (used by unification).
    """
    if sort == SORT_MSG:
        return True
    return sort_of(t) == sort


def subterms(t: Term) -> Iterator[Term]:
    """All subterms of t, including t itself, preorder."""
    yield t
    if t[0] == APP:
        for a in t[2]:
            yield from subterms(a)


def depth(t: Term) -> int:
    if t[0] == APP and t[2]:
        return 1 + max(depth(a) for a in t[2])
    return 1


def variables(t: Term) -> set:
    return {s for s in subterms(t) if s[0] == VAR}


def function_symbols(t: Term) -> set:
    return {(s[1], len(s[2])) for s in subterms(t) if s[0] == APP}


PAIR = "pair"


def pairs(items) -> Term:
    """Right-nested pair spine for the <a, b, c> tuple sugar."""
    items = list(items)
    if not items:
        raise ValueError("empty tuple term")
    t = items[-1]
    for a in reversed(items[:-1]):
        t = app(PAIR, a, t)
    return t


def pretty(t: Term) -> str:
    """Concrete syntax; inverse of the parser's term grammar."""
    tag = t[0]
    if tag == VAR:
        if t[2] == SORT_FRESH:
            return "~" + t[1]
        if t[2] == SORT_PUB:
            return "$" + t[1]
        return t[1]
    if tag == FRESH:
        return f"~{t[1]}#{t[2]}"
    if tag == PUB:
        return t[1]
    if tag == STR:
        return f"'{t[1]}'"
    fname, args = t[1], t[2]
    if fname == PAIR and len(args) == 2:
        flat = [args[0]]
        rest = args[1]
        while rest[0] == APP and rest[1] == PAIR and len(rest[2]) == 2:
            flat.append(rest[2][0])
            rest = rest[2][1]
        flat.append(rest)
        return "<" + ", ".join(pretty(a) for a in flat) + ">"
    if not args:
        return fname + "()"
    return fname + "(" + ", ".join(pretty(a) for a in args) + ")"
