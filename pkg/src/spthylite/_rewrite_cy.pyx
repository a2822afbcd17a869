# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled rewriting kernel; drop-in twin of ``_rewrite_py``.

Operates on the same tagged-tuple terms, so results are interchangeable
with the pure-Python kernel (asserted by the parity tests).
"""

BACKEND = "cython"

DEF TAG_VAR = 0
DEF TAG_FRESH = 1
DEF TAG_PUB = 2
DEF TAG_STR = 3
DEF TAG_APP = 4

cdef str SORT_MSG = "msg"
cdef str SORT_FRESH = "fresh"
cdef str SORT_PUB = "pub"


cdef inline str _sort_of(tuple t):
    cdef int tag = <int> t[0]
    if tag == TAG_VAR:
        return <str> t[2]
    if tag == TAG_FRESH:
        return SORT_FRESH
    if tag == TAG_PUB or tag == TAG_STR:
        return SORT_PUB
    return SORT_MSG


cdef inline bint _sort_ok(str sort, tuple t):
    return sort == SORT_MSG or _sort_of(t) == sort


cpdef tuple substitute(dict subst, tuple t):
    if not subst:
        return t
    return _substitute(subst, t)


cdef tuple _substitute(dict subst, tuple t):
    cdef int tag = <int> t[0]
    cdef tuple args, new_args
    cdef Py_ssize_t i, n
    cdef bint changed
    if tag == TAG_VAR:
        return <tuple> subst.get(t, t)
    if tag == TAG_APP:
        args = <tuple> t[2]
        n = len(args)
        changed = False
        out = []
        for i in range(n):
            a = _substitute(subst, <tuple> args[i])
            if a is not args[i]:
                changed = True
            out.append(a)
        if not changed:
            return t
        return (TAG_APP, t[1], tuple(out))
    return t


def match(tuple pattern, tuple term, bindings=None):
    cdef dict subst = {} if bindings is None else dict(bindings)
    if _match_into(pattern, term, subst):
        return subst
    return None


cdef bint _match_into(tuple pattern, tuple term, dict subst):
    cdef int tag = <int> pattern[0]
    cdef tuple pargs, targs
    cdef Py_ssize_t i, n
    if tag == TAG_VAR:
        bound = subst.get(pattern)
        if bound is not None:
            return bound == term
        if not _sort_ok(<str> pattern[2], term):
            return False
        subst[pattern] = term
        return True
    if tag == TAG_APP:
        if <int> term[0] != TAG_APP or term[1] != pattern[1]:
            return False
        pargs = <tuple> pattern[2]
        targs = <tuple> term[2]
        n = len(pargs)
        if n != len(targs):
            return False
        for i in range(n):
            if not _match_into(<tuple> pargs[i], <tuple> targs[i], subst):
                return False
        return True
    return pattern == term


cpdef tuple normalize(tuple t, dict eq_index):
    if not eq_index:
        return t
    return _normalize(t, eq_index)


cdef tuple _normalize(tuple t, dict eq_index):
    cdef tuple args, new_args, lhs, rhs, rule
    cdef Py_ssize_t i, n
    cdef bint changed, fired
    cdef dict subst
    if <int> t[0] != TAG_APP:
        return t
    args = <tuple> t[2]
    n = len(args)
    changed = False
    out = []
    for i in range(n):
        a = _normalize(<tuple> args[i], eq_index)
        if a is not args[i]:
            changed = True
        out.append(a)
    if changed:
        t = (TAG_APP, t[1], tuple(out))
    while <int> t[0] == TAG_APP:
        rules = eq_index.get(t[1])
        if rules is None:
            return t
        fired = False
        for rule in <tuple> rules:
            lhs = <tuple> rule[0]
            rhs = <tuple> rule[1]
            subst = {}
            if _match_into(lhs, t, subst):
                t = _substitute(subst, rhs)
                fired = True
                break
        if not fired:
            return t
    return t


cdef tuple _walk(tuple t, dict subst):
    while <int> t[0] == TAG_VAR:
        nxt = subst.get(t)
        if nxt is None:
            return t
        t = <tuple> nxt
    return t


def unify(tuple a, tuple b, bindings=None):
    cdef dict subst = {} if bindings is None else dict(bindings)
    if not _unify_into(a, b, subst):
        return None
    cdef dict out = {}
    for v, t in subst.items():
        out[v] = _resolve(<tuple> t, subst)
    return out


cdef tuple _resolve(tuple t, dict subst):
    t = _walk(t, subst)
    if <int> t[0] == TAG_APP:
        return (TAG_APP, t[1], tuple(_resolve(<tuple> a, subst) for a in <tuple> t[2]))
    return t


cdef bint _unify_into(tuple a, tuple b, dict subst):
    cdef bint a_var, b_var
    cdef tuple v, t, xargs, yargs
    cdef Py_ssize_t i, n
    a = _walk(a, subst)
    b = _walk(b, subst)
    if a == b:
        return True
    a_var = <int> a[0] == TAG_VAR
    b_var = <int> b[0] == TAG_VAR
    if a_var and b_var:
        if a[2] == SORT_MSG and b[2] != SORT_MSG:
            subst[a] = b
        elif b[2] == SORT_MSG and a[2] != SORT_MSG:
            subst[b] = a
        elif a[2] == b[2]:
            subst[a] = b
        else:
            return False
        return True
    if a_var or b_var:
        if a_var:
            v = a
            t = b
        else:
            v = b
            t = a
        if not _sort_ok(<str> v[2], t):
            return False
        if _occurs_resolved(v, t, subst):
            return False
        subst[v] = t
        return True
    if <int> a[0] != <int> b[0]:
        return False
    if <int> a[0] == TAG_APP:
        if a[1] != b[1]:
            return False
        xargs = <tuple> a[2]
        yargs = <tuple> b[2]
        n = len(xargs)
        if n != len(yargs):
            return False
        for i in range(n):
            if not _unify_into(<tuple> xargs[i], <tuple> yargs[i], subst):
                return False
        return True
    return False


cdef bint _occurs_resolved(tuple v, tuple t, dict subst):
    t = _walk(t, subst)
    if t == v:
        return True
    if <int> t[0] == TAG_APP:
        for a in <tuple> t[2]:
            if _occurs_resolved(v, <tuple> a, subst):
                return True
        return False
    return False
