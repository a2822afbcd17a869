"""Pure-Python rewriting kernel: normalize / match / unify / substitute.

This is the fallback twin of the compiled kernel in ``_rewrite_cy.pyx``;
both expose the same four entry points over the tagged-tuple terms of
:mod:`spthylite.terms`.  Equations are passed pre-indexed by root symbol:
``{fname: ((lhs, rhs), ...)}``.

Semantics:

* ``normalize`` rewrites left-to-right to the unique normal form.  The
  equation set is assumed subterm-convergent (right side a subterm of the
  left or a ground constant), which makes innermost rewriting terminate
  and yields confluence.
* ``match(pattern, term)`` least substitution with subst(pattern) == term,
  sort-respecting; no occurs issues because bindings are one-way.
* ``unify`` most general syntactic unifier with occurs check.
* ``substitute`` homomorphic replacement (no normalization; callers that
  want the spec's ``apply`` compose it with ``normalize``).
"""

BACKEND = "python"

_VAR = 0
_APP = 4
_SORT_MSG = "msg"
_SORT_FRESH = "fresh"


def _sort_of(t):
    tag = t[0]
    if tag == _VAR:
        return t[2]
    if tag == 1:  # FRESH
        return "fresh"
    if tag == 2 or tag == 3:  # PUB, STR
        return "pub"
    return "msg"


def _sort_ok(sort, t):
    return sort == _SORT_MSG or _sort_of(t) == sort


def substitute(subst, t):
    if not subst:
        return t
    tag = t[0]
    if tag == _VAR:
        return subst.get(t, t)
    if tag == _APP:
        args = t[2]
        new_args = tuple(substitute(subst, a) for a in args)
        if new_args == args:
            return t
        return (_APP, t[1], new_args)
    return t


def match(pattern, term, bindings=None):
    """Match pattern against term; returns a substitution dict or None."""
    subst = {} if bindings is None else dict(bindings)
    if _match_into(pattern, term, subst):
        return subst
    return None


def _match_into(pattern, term, subst):
    tag = pattern[0]
    if tag == _VAR:
        bound = subst.get(pattern)
        if bound is not None:
            return bound == term
        if not _sort_ok(pattern[2], term):
            return False
        subst[pattern] = term
        return True
    if tag == _APP:
        if term[0] != _APP or term[1] != pattern[1]:
            return False
        pargs, targs = pattern[2], term[2]
        if len(pargs) != len(targs):
            return False
        for p, t in zip(pargs, targs):
            if not _match_into(p, t, subst):
                return False
        return True
    return pattern == term


def normalize(t, eq_index):
    """Rewrite to normal form, innermost-first."""
    if not eq_index:
        return t
    return _normalize(t, eq_index)


def _normalize(t, eq_index):
    if t[0] != _APP:
        return t
    args = t[2]
    new_args = tuple(_normalize(a, eq_index) for a in args)
    if new_args != args:
        t = (_APP, t[1], new_args)
    # Root rewriting: arguments are normal, and subterm-convergent right
    # sides are either one of those arguments' subterms or ground normal
    # forms, so one pass per redex suffices; loop guards composed rules.
    while t[0] == _APP:
        rules = eq_index.get(t[1])
        if not rules:
            return t
        for lhs, rhs in rules:
            subst = match(lhs, t)
            if subst is not None:
                t = substitute(subst, rhs)
                break
        else:
            return t
    return t


def _occurs(v, t):
    if t == v:
        return True
    if t[0] == _APP:
        return any(_occurs(v, a) for a in t[2])
    return False


def _walk(t, subst):
    while t[0] == _VAR:
        nxt = subst.get(t)
        if nxt is None:
            return t
        t = nxt
    return t


def unify(a, b, bindings=None):
    """Most general unifier (triangular form resolved before returning)."""
    subst = {} if bindings is None else dict(bindings)
    if not _unify_into(a, b, subst):
        return None
    # Resolve chains so the result is idempotent.
    return {v: _resolve(t, subst) for v, t in subst.items()}


def _resolve(t, subst):
    t = _walk(t, subst)
    if t[0] == _APP:
        return (_APP, t[1], tuple(_resolve(a, subst) for a in t[2]))
    return t


def _unify_into(a, b, subst):
    a = _walk(a, subst)
    b = _walk(b, subst)
    if a == b:
        return True
    a_var = a[0] == _VAR
    b_var = b[0] == _VAR
    if a_var and b_var:
        # Bind the less specific sort to the more specific one.
        if a[2] == _SORT_MSG and b[2] != _SORT_MSG:
            subst[a] = b
        elif b[2] == _SORT_MSG and a[2] != _SORT_MSG:
            subst[b] = a
        elif a[2] == b[2]:
            subst[a] = b
        else:
            return False  # fresh vs pub never unify
        return True
    if a_var or b_var:
        v, t = (a, b) if a_var else (b, a)
        if not _sort_ok(v[2], t):
            return False
        if _occurs_resolved(v, t, subst):
            return False
        subst[v] = t
        return True
    if a[0] != b[0]:
        return False
    if a[0] == _APP:
        if a[1] != b[1] or len(a[2]) != len(b[2]):
            return False
        for x, y in zip(a[2], b[2]):
            if not _unify_into(x, y, subst):
                return False
        return True
    return False


def _occurs_resolved(v, t, subst):
    t = _walk(t, subst)
    if t == v:
        return True
    if t[0] == _APP:
        return any(_occurs_resolved(v, a, subst) for a in t[2])
    return False
