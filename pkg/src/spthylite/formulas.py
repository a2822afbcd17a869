"""Trace-time evaluation of guarded trace formulas.

Satisfaction is standard first-order semantics over one trace: message
variables range over terms occurring in the trace's action facts,
timepoint variables over the trace's event indices, and an action atom
``F(args) @ #i`` holds when the event at ``#i`` records a matching action
fact.  ``#i < #j`` is index order; term equality compares normal forms.

Evaluation is guarded rather than enumerative: the body is put into
negation normal form and split into disjuncts, and positive action atoms
are solved by joining against the recorded actions, which binds both the
message variables and the timepoints.  Variables not reachable that way
(rare; the guardedness checks keep formulas anchored) fall back to domain
enumeration.
"""

from __future__ import annotations

from spthylite import terms as T
from spthylite.kernel import match, normalize, substitute
from spthylite.theory import ALL, EX, Formula, formula_nodes


def negate(f: Formula) -> Formula:
    """Dual formula: flipped quantifiers over the negated body."""
    prefix = tuple((ALL if q == EX else EX, name, sort) for q, name, sort in f.prefix)
    return Formula(prefix, ("not", f.body))


def atom_patterns(f: Formula) -> list:
    """The action-fact patterns a formula can observe."""
    return [node[1] for node in formula_nodes(f.body) if node[0] == "atom"]


def _nnf(node, neg: bool):
    head = node[0]
    if head == "not":
        return _nnf(node[1], not neg)
    if head == "imp":
        # a => b  ==  not a | b
        if neg:
            return ("and", _nnf(node[1], False), _nnf(node[2], True))
        return ("or", _nnf(node[1], True), _nnf(node[2], False))
    if head == "and":
        op = "or" if neg else "and"
        return (op, _nnf(node[1], neg), _nnf(node[2], neg))
    if head == "or":
        op = "and" if neg else "or"
        return (op, _nnf(node[1], neg), _nnf(node[2], neg))
    return ("lit", node, neg)


def _dnf(node) -> list:
    """List of conjuncts; each conjunct a list of ('lit', atom, negated)."""
    head = node[0]
    if head == "lit":
        return [[node]]
    if head == "or":
        return _dnf(node[1]) + _dnf(node[2])
    left = _dnf(node[1])
    right = _dnf(node[2])
    return [l + r for l in left for r in right]


class _TraceView:
    """Precomputed lookup structures for one trace."""

    def __init__(self, trace, eq_index):
        self.eq_index = eq_index
        self.actions = []  # (timepoint, fact)
        self.by_name: dict = {}
        self.by_tp: dict = {}
        self.indices = []
        for e in trace.events:
            self.indices.append(e.index)
            for f in e.actions:
                self.actions.append((e.index, f))
                self.by_name.setdefault(f[0], []).append((e.index, f))
                self.by_tp.setdefault(e.index, []).append(f)
        terms = set()
        for _, f in self.actions:
            for a in f[1]:
                terms.update(T.subterms(a))
        self.term_domain = sorted(terms)


def holds(formula: Formula, trace, eq_index: dict):
    """Evaluate ``formula`` on ``trace``.

    Returns ``(value, assignment)``: for a satisfied existential prefix the
    assignment is a witness; for a falsified universal prefix it is the
    violating assignment of the dual existential.  Otherwise ``None``.
    """
    view = _TraceView(trace, eq_index)
    quants = formula.prefix
    if all(q == EX for q, _, _ in quants):
        env = _solve_exists(quants, formula.body, False, view)
        return (env is not None), env
    if all(q == ALL for q, _, _ in quants):
        env = _solve_exists(tuple((EX, n, s) for _, n, s in quants),
                            formula.body, True, view)
        return env is None, env
    value = _eval_naive(quants, 0, formula.body, {}, {}, view)
    return value, None


def _solve_exists(quants, body, negated: bool, view: _TraceView):
    """Search for an assignment satisfying Ex-prefix . (not?) body."""
    nnf = _nnf(body, negated)
    msg_vars = {name for q, name, sort in quants if sort == "msg"}
    tp_vars = {name for q, name, sort in quants if sort == "timepoint"}
    for conjunct in _dnf(nnf):
        env = _solve_conjunct(conjunct, msg_vars, tp_vars, view)
        if env is not None:
            return env
    return None


def _solve_conjunct(literals, msg_vars, tp_vars, view: _TraceView):
    positives = [l for l in literals if l[1][0] == "atom" and not l[2]]
    rest = [l for l in literals if not (l[1][0] == "atom" and not l[2])]

    def constraints_ok(subst, tps, require_all_bound: bool):
        for _, node, neg in rest:
            val = _eval_literal(node, subst, tps, view, strict=require_all_bound)
            if val is None:
                if require_all_bound:
                    return False
                continue
            if val == neg:
                return False
        return True

    def join(i, subst, tps):
        if i == len(positives):
            # bind leftovers by domain enumeration (guardedness makes this
            # empty in practice)
            free_msg = [v for v in msg_vars if (T.VAR, v, "msg") not in subst]
            free_tp = [v for v in tp_vars if v not in tps]
            yield from enumerate_free(free_msg, free_tp, subst, tps)
            return
        _, node, _ = positives[i]
        (fname, fargs), tpname = node[1], node[2]
        for tp, fact in view.by_name.get(fname, ()):
            if len(fact[1]) != len(fargs):
                continue
            bound_tp = tps.get(tpname)
            if bound_tp is not None and bound_tp != tp:
                continue
            s2 = subst
            ok = True
            for p, t in zip(fargs, fact[1]):
                s2 = match(_msgvar(p), t, s2)
                if s2 is None:
                    ok = False
                    break
            if not ok:
                continue
            tps2 = tps if bound_tp is not None else {**tps, tpname: tp}
            yield from join(i + 1, s2, tps2)

    def enumerate_free(free_msg, free_tp, subst, tps):
        if not free_msg and not free_tp:
            if constraints_ok(subst, tps, require_all_bound=True):
                yield subst, tps
            return
        if free_msg:
            v, more = free_msg[0], free_msg[1:]
            for t in view.term_domain:
                yield from enumerate_free(more, free_tp, {**subst, (T.VAR, v, "msg"): t}, tps)
            return
        v, more = free_tp[0], free_tp[1:]
        for idx in view.indices:
            yield from enumerate_free([], more, subst, {**tps, v: idx})

    for subst, tps in join(0, {}, {}):
        return {"msg": {v[1]: t for v, t in subst.items()},
                "timepoints": dict(tps)}
    return None


def _msgvar(p):
    """Formula msg variables are msg-sorted by construction; leave other
    terms untouched."""
    return p


def _eval_literal(node, subst, tps, view: _TraceView, strict: bool):
    """Truth of one literal under a (possibly partial) assignment.

    Returns None when an unbound variable prevents evaluation and
    ``strict`` is False.
    """
    head = node[0]
    if head in ("less", "eqtime"):
        a, b = tps.get(node[1]), tps.get(node[2])
        if a is None or b is None:
            return None if not strict else False
        return a < b if head == "less" else a == b
    if head == "eqterm":
        t1 = substitute(subst, node[1])
        t2 = substitute(subst, node[2])
        if not (T.is_ground(t1) and T.is_ground(t2)):
            return None if not strict else False
        return normalize(t1, view.eq_index) == normalize(t2, view.eq_index)
    if head == "atom":
        (fname, fargs), tpname = node[1], node[2]
        tp = tps.get(tpname)
        inst = tuple(substitute(subst, a) for a in fargs)
        if tp is None or not all(T.is_ground(a) for a in inst):
            return None if not strict else False
        facts = view.by_tp.get(tp, ())
        return (fname, inst) in facts
    raise ValueError(f"unknown literal {node[0]}")


def _eval_naive(quants, i, body, subst, tps, view: _TraceView):
    """Reference semantics by domain enumeration (mixed prefixes)."""
    if i == len(quants):
        return _eval_body(body, subst, tps, view)
    q, name, sort = quants[i]
    domain = view.indices if sort == "timepoint" else view.term_domain
    for d in domain:
        if sort == "timepoint":
            val = _eval_naive(quants, i + 1, body, subst, {**tps, name: d}, view)
        else:
            val = _eval_naive(quants, i + 1, body,
                              {**subst, (T.VAR, name, "msg"): d}, tps, view)
        if q == EX and val:
            return True
        if q == ALL and not val:
            return False
    return q == ALL


def _eval_body(node, subst, tps, view: _TraceView) -> bool:
    head = node[0]
    if head == "not":
        return not _eval_body(node[1], subst, tps, view)
    if head == "and":
        return _eval_body(node[1], subst, tps, view) and _eval_body(node[2], subst, tps, view)
    if head == "or":
        return _eval_body(node[1], subst, tps, view) or _eval_body(node[2], subst, tps, view)
    if head == "imp":
        return (not _eval_body(node[1], subst, tps, view)) or _eval_body(node[2], subst, tps, view)
    return bool(_eval_literal(node, subst, tps, view, strict=True))
