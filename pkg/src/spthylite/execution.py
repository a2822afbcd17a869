"""Multiset rewriting semantics with an implicit network adversary.

A state holds the linear-fact multiset, the persistent-fact set, the
adversary knowledge and the fresh-name counter.  Firing a rule consumes
matched linear premises, adds conclusions, and routes reserved facts
through the adversary:

* ``Out(t)`` conclusions insert ``t`` into the knowledge (an adv-receive
  event recording ``K(t)``), followed by adv-construct events recording
  ``K(u)`` for every term newly exposed by decomposition;
* ``In(p)`` premises are satisfied on demand: the adversary synthesizes a
  matching term from its knowledge (an adv-send event recording
  ``In(t)``, carrying its construction tree);
* ``Fr(~x)`` premises allocate fresh names from the per-trace counter
  (a fresh event recording ``Fr(n)``).

Unbound public variables of a rule instantiate to the public name spelled
like the variable (one agent per role name at this bound), and public
names silently join the knowledge on first use.

Exploration is breadth-first and fully deterministic: enabled choices are
ordered by rule name, then by a canonical ordering of the substitution.
``max_events`` counts rule firings; adversary and fresh bookkeeping events
carry timepoints but are not charged against the bound.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass

from spthylite import terms as T
from spthylite.deduction import DeductionContext, KnowledgeBase, analysis, synthesize_matches
from spthylite.kernel import match, normalize, substitute, unify
from spthylite.theory import LINEAR, PERSISTENT, Theory


@dataclass(frozen=True)
class Bounds:
    max_events: int = 10
    max_fresh: int = 6
    adv_depth: int = 4

    def __post_init__(self):
        if self.max_events <= 0 or self.max_fresh <= 0 or self.adv_depth <= 0:
            raise ValueError("all bounds must be positive")


@dataclass(frozen=True)
class State:
    linear: tuple  # sorted tuple of ground facts (multiset)
    persistent: frozenset  # ground facts
    knowledge: KnowledgeBase
    fresh_count: int = 0
    events_used: int = 0

    def core(self):
        """State content without the step counter (used for no-op detection)."""
        return (self.linear, self.persistent, self.knowledge, self.fresh_count)


@dataclass(frozen=True)
class Event:
    """One timepoint of a trace."""

    index: int
    kind: str  # "rule" | "fresh" | "adv-receive" | "adv-construct" | "adv-send"
    label: str
    actions: tuple = ()  # ground action facts recorded at this timepoint
    subst: tuple = ()  # rule events: canonical (var, term) pairs
    consumed: tuple = ()  # rule events: (fact, channel) per positive premise
    produced: tuple = ()  # rule events: (fact, kind) per conclusion
    out_terms: tuple = ()  # rule events: terms sent to the network
    term: tuple | None = None  # adversary/fresh events
    derivation: object = None  # adv-send events


@dataclass(frozen=True)
class Trace:
    initial: State
    events: tuple
    final: State

    def __len__(self) -> int:
        return len(self.events)

    def rule_events(self) -> list:
        return [e for e in self.events if e.kind == "rule"]

    def action_index(self) -> list:
        """(timepoint, fact) pairs for every recorded action."""
        out = []
        for e in self.events:
            for f in e.actions:
                out.append((e.index, f))
        return out


@dataclass(frozen=True)
class Choice:
    rule_name: str
    subst: tuple  # canonical (var, term) pairs
    in_supplies: tuple  # (premise_position, term, Derivation)
    fresh_allocs: tuple  # (premise_position, var, FreshName)


class ContractError(Exception):
    """A caller violated an engine precondition."""


CHANNEL_LINEAR = "linear"
CHANNEL_PERSISTENT = "persistent"
CHANNEL_IN = "in"
CHANNEL_FR = "fr"


class Engine:
    """Execution semantics for one theory under fixed bounds."""

    def __init__(self, theory: Theory, bounds: Bounds):
        self.theory = theory
        self.bounds = bounds
        self.ctx = DeductionContext.for_theory(theory)
        self.rules = sorted(theory.rules, key=lambda r: r.name)

    # -- initial state -----------------------------------------------------

    def initial_state(self) -> State:
        kb = KnowledgeBase(self.theory.string_constants())
        return State(linear=(), persistent=frozenset(), knowledge=kb)

    # -- rule instantiation --------------------------------------------------

    def enabled(self, state: State) -> list:
        """Deterministically ordered list of enabled choices."""
        out = []
        for rule in self.rules:
            out.extend(self._rule_choices(state, rule))
        out.sort(key=lambda c: (c.rule_name, c.subst))
        return out

    def _rule_choices(self, state: State, rule) -> list:
        positive = []
        negative = []
        in_premises = []
        fr_premises = []
        for pos, prem in enumerate(rule.premises):
            name = prem.fact[0]
            if prem.negated:
                negative.append((pos, prem.fact))
            elif name == "In":
                in_premises.append((pos, prem.fact))
            elif name == "Fr":
                fr_premises.append((pos, prem.fact))
            else:
                kind = self._kind(name)
                positive.append((pos, prem.fact, kind))

        results: list = []
        seen_substs: set = set()

        fresh_needed = len(fr_premises)
        if state.fresh_count + fresh_needed > self.bounds.max_fresh:
            return results

        linear_counts = Counter(state.linear)

        def instantiate_positive(i, subst, used):
            if i == len(positive):
                instantiate_in(0, subst, ())
                return
            pos, pat, kind = positive[i]
            if kind == PERSISTENT:
                pool = sorted(state.persistent)
            else:
                pool = sorted(set(state.linear))
            for f in pool:
                if f[0] != pat[0] or len(f[1]) != len(pat[1]):
                    continue
                if kind == LINEAR and used.get(f, 0) >= linear_counts.get(f, 0):
                    continue
                s2 = dict(subst)
                ok = True
                for p, t in zip(pat[1], f[1]):
                    m = match(p, t, s2)
                    if m is None:
                        ok = False
                        break
                    s2 = m
                if not ok:
                    continue
                if kind == LINEAR:
                    used2 = dict(used)
                    used2[f] = used2.get(f, 0) + 1
                else:
                    used2 = used
                instantiate_positive(i + 1, s2, used2)

        def instantiate_in(j, subst, supplies):
            if j == len(in_premises):
                finish(subst, supplies)
                return
            pos, pat = in_premises[j]
            pattern = pat[1][0]
            for s2, deriv, inst in synthesize_matches(
                    state.knowledge, pattern, self.ctx, self.bounds.adv_depth, subst):
                instantiate_in(j + 1, s2, supplies + ((pos, inst, deriv),))

        def finish(subst, supplies):
            subst = dict(subst)
            allocs = []
            for k, (pos, pat) in enumerate(fr_premises):
                v = pat[1][0]
                if v in subst:
                    return  # a fresh variable cannot also be premise-bound
                name = T.fresh(v[1], state.fresh_count + k)
                subst[v] = name
                allocs.append((pos, v, name))
            # leftover public variables instantiate to their role name
            for v in self._rule_vars(rule):
                if v not in subst and v[2] == T.SORT_PUB:
                    subst[v] = T.pub(v[1])
            # negation-as-absence over the persistent set
            for pos, pat in negative:
                ground_pat = (pat[0], tuple(substitute(subst, a) for a in pat[1]))
                if self._negative_hit(state, ground_pat):
                    return
            key = tuple(sorted(subst.items()))
            if key in seen_substs:
                return
            seen_substs.add(key)
            results.append(Choice(rule.name, key, tuple(supplies), tuple(allocs)))

        instantiate_positive(0, {}, {})
        return results

    def _negative_hit(self, state: State, pat) -> bool:
        for f in state.persistent:
            if f[0] != pat[0] or len(f[1]) != len(pat[1]):
                continue
            s: dict | None = {}
            for p, t in zip(pat[1], f[1]):
                s = match(p, t, s)
                if s is None:
                    break
            if s is not None:
                return True
        return False

    def _rule_vars(self, rule) -> list:
        out: set = set()
        for prem in rule.premises:
            for a in prem.fact[1]:
                out |= T.variables(a)
        for f in rule.actions + rule.conclusions:
            for a in f[1]:
                out |= T.variables(a)
        return sorted(out)

    def _kind(self, name: str) -> str:
        schema = self.theory.schemas.get(name)
        return schema.kind if schema else LINEAR

    # -- stepping ---------------------------------------------------------

    def step(self, state: State, choice: Choice, base_index: int = 0):
        """Fire a choice; returns (new_state, events)."""
        rule = self.theory.rule(choice.rule_name)
        subst = dict(choice.subst)
        eqx = self.theory.eq_index

        def ground_fact(f):
            return (f[0], tuple(normalize(substitute(subst, a), eqx) for a in f[1]))

        events = []
        idx = base_index

        for pos, v, name in choice.fresh_allocs:
            events.append(Event(index=idx, kind="fresh", label=T.pretty(name),
                                actions=(("Fr", (name,)),), term=name))
            idx += 1

        supplies = dict()
        for pos, term, deriv in choice.in_supplies:
            supplies[pos] = term
            events.append(Event(index=idx, kind="adv-send", label=f"isend {T.pretty(term)}",
                                actions=(("In", (term,)),), term=term, derivation=deriv))
            idx += 1

        consumed = []
        new_linear = list(state.linear)
        for pos, prem in enumerate(rule.premises):
            if prem.negated:
                continue
            name = prem.fact[0]
            if name == "In":
                consumed.append((("In", (supplies[pos],)), CHANNEL_IN))
                continue
            if name == "Fr":
                g = ground_fact(prem.fact)
                consumed.append((g, CHANNEL_FR))
                continue
            g = ground_fact(prem.fact)
            if self._kind(name) == PERSISTENT:
                if g not in state.persistent:
                    raise ContractError(f"persistent premise {g} not in state")
                consumed.append((g, CHANNEL_PERSISTENT))
            else:
                try:
                    new_linear.remove(g)
                except ValueError:
                    raise ContractError(f"linear premise {g} not in state") from None
                consumed.append((g, CHANNEL_LINEAR))

        actions = tuple(ground_fact(f) for f in rule.actions)
        produced = []
        out_terms = []
        new_persistent = set(state.persistent)
        for f in rule.conclusions:
            g = ground_fact(f)
            if g[0] == "Out":
                out_terms.append(g[1][0])
                produced.append((g, "out"))
                continue
            kind = self._kind(g[0])
            if kind == PERSISTENT:
                new_persistent.add(g)
            else:
                new_linear.append(g)
            produced.append((g, kind))

        rule_actions = actions + tuple(("Out", (t,)) for t in out_terms)
        events.append(Event(index=idx, kind="rule", label=rule.name,
                            actions=rule_actions, subst=choice.subst,
                            consumed=tuple(consumed), produced=tuple(produced),
                            out_terms=tuple(out_terms)))
        idx += 1

        # capture network output, then expose what decomposition reaches
        kb = state.knowledge
        pre_exposed = set(analysis(kb, self.ctx, self.bounds.adv_depth))
        gained = [t for t in out_terms if t not in kb.terms]
        # public names of this instance silently join the knowledge
        pub_names = {s for _, t in choice.subst for s in T.subterms(t) if s[0] == T.PUB}
        kb2 = kb.with_terms(set(gained) | pub_names)
        seen_gain = set()
        for t in gained:
            if t in seen_gain:
                continue
            seen_gain.add(t)
            events.append(Event(index=idx, kind="adv-receive", label=f"recv {T.pretty(t)}",
                                actions=(("K", (t,)),), term=t))
            idx += 1
        if kb2 is not kb:
            newly_exposed = sorted(
                set(analysis(kb2, self.ctx, self.bounds.adv_depth))
                - pre_exposed - kb2.terms)
            for t in newly_exposed:
                events.append(Event(index=idx, kind="adv-construct",
                                    label=f"coerce {T.pretty(t)}",
                                    actions=(("K", (t,)),), term=t))
                idx += 1

        new_state = State(
            linear=tuple(sorted(new_linear)),
            persistent=frozenset(new_persistent),
            knowledge=kb2,
            fresh_count=state.fresh_count + len(choice.fresh_allocs),
            events_used=state.events_used + 1,
        )
        return new_state, tuple(events)

    # -- exploration ----------------------------------------------------------

    def explore(self, visible=None):
        """Breadth-first, deterministic enumeration of reachable traces.

        Every reachable trace (including the empty one and every prefix)
        is yielded exactly once.  ``visible`` optionally lists action-fact
        patterns a property observes: a step that leaves the state
        unchanged and records no action matching any of them is skipped
        together with its subtree, which cannot change any verdict over
        the visible patterns.
        """
        init = self.initial_state()
        root = Trace(init, (), init)
        yield root
        queue = deque([root])
        while queue:
            trace = queue.popleft()
            state = trace.final
            if state.events_used >= self.bounds.max_events:
                continue
            for choice in self.enabled(state):
                new_state, events = self.step(state, choice, base_index=len(trace.events))
                if visible is not None and new_state.core() == state.core():
                    if not any(self._action_visible(f, visible)
                               for e in events for f in e.actions):
                        continue
                child = Trace(trace.initial, trace.events + events, new_state)
                yield child
                queue.append(child)

    @staticmethod
    def _action_visible(factinst, visible) -> bool:
        for name, args in visible:
            if name != factinst[0] or len(args) != len(factinst[1]):
                continue
            s: dict | None = {}
            for p, t in zip(args, factinst[1]):
                s = unify(p, t, s)
                if s is None:
                    break
            if s is not None:
                return True
        return False

    def search(self, visible):
        """Exploration for verdict computation: like :meth:`explore` but
        merging trace branches that cannot be told apart by a property
        over the ``visible`` action patterns.

        Two branches merge when they agree on (a) the state up to a
        label-preserving renaming of fresh names, (b) the sequence of
        visible action facts grouped by event under the same renaming,
        (c) the consumed budgets and the total event count.  Formula
        satisfaction is invariant under fresh renamings and depends only
        on the visible event sequence and trace length, so dropping the
        duplicate cannot change any verdict.
        """
        init = self.initial_state()
        root = Trace(init, (), init)
        yield root
        queue = deque([(root, ())])
        seen = {self._merge_key(init, (), 0)}
        while queue:
            trace, vis_seq = queue.popleft()
            state = trace.final
            if state.events_used >= self.bounds.max_events:
                continue
            for choice in self.enabled(state):
                new_state, events = self.step(state, choice, base_index=len(trace.events))
                groups = []
                for e in events:
                    hits = tuple(f for f in e.actions if self._action_visible(f, visible))
                    if hits:
                        groups.append(hits)
                if new_state.core() == state.core() and not groups:
                    continue
                vis2 = vis_seq + tuple(groups)
                key = self._merge_key(new_state, vis2, len(trace.events) + len(events))
                if key in seen:
                    continue
                seen.add(key)
                child = Trace(trace.initial, trace.events + events, new_state)
                yield child
                queue.append((child, vis2))

    @staticmethod
    def _merge_key(state: State, vis_seq: tuple, total_events: int):
        mapping: dict = {}
        label_counts: dict = {}

        def canon(t):
            tag = t[0]
            if tag == T.FRESH:
                r = mapping.get(t)
                if r is None:
                    label = t[1]
                    r = (T.FRESH, label, label_counts.get(label, 0))
                    label_counts[label] = label_counts.get(label, 0) + 1
                    mapping[t] = r
                return r
            if tag == T.APP:
                return (T.APP, t[1], tuple(canon(a) for a in t[2]))
            return t

        def canon_fact(f):
            return (f[0], tuple(canon(a) for a in f[1]))

        def shape(t):
            tag = t[0]
            if tag == T.FRESH:
                return (T.FRESH, t[1], -1)
            if tag == T.APP:
                return (T.APP, t[1], tuple(shape(a) for a in t[2]))
            return t

        def fact_shape(f):
            return (f[0], tuple(shape(a) for a in f[1]))

        # The visible sequence pins renaming order; remaining state items
        # are visited in a shape-major order so isomorphic states mostly
        # canonicalize identically (ties fall back to concrete names,
        # which only costs merge opportunities, never soundness).
        vis_c = tuple(tuple(canon_fact(f) for f in group) for group in vis_seq)
        lin = tuple(sorted(canon_fact(f) for f in
                           sorted(state.linear, key=lambda f: (fact_shape(f), f))))
        pers = tuple(sorted(canon_fact(f) for f in
                            sorted(state.persistent, key=lambda f: (fact_shape(f), f))))
        know = tuple(sorted(canon(t) for t in
                            sorted(state.knowledge.terms, key=lambda t: (shape(t), t))))
        return (vis_c, lin, pers, know, state.fresh_count, state.events_used, total_events)

    # -- replay -----------------------------------------------------------------

    def replay(self, trace: Trace) -> State:
        """Re-execute the event sequence; returns the resulting state.

        Raises ContractError when the sequence is not executable.  The
        caller compares against ``trace.final`` (see tests and graphs).
        """
        state = trace.initial
        i = 0
        events = trace.events
        while i < len(events):
            e = events[i]
            if e.kind in ("fresh", "adv-send"):
                i += 1
                continue
            if e.kind in ("adv-receive", "adv-construct"):
                i += 1
                continue
            if e.kind != "rule":
                raise ContractError(f"unknown event kind {e.kind}")
            # collect this step's group: preceding fresh/send were consumed
            choice = self._rebuild_choice(e, events, i)
            base = events[i - len(choice.fresh_allocs) - len(choice.in_supplies)].index \
                if (choice.fresh_allocs or choice.in_supplies) else e.index
            new_state, new_events = self.step(state, choice, base_index=base)
            expected = events[base:base + len(new_events)]
            if tuple(new_events) != tuple(expected):
                raise ContractError(f"replay diverged at timepoint {e.index}")
            state = new_state
            i = base + len(new_events)
        return state

    def _rebuild_choice(self, rule_event: Event, events, i: int) -> Choice:
        rule = self.theory.rule(rule_event.label)
        fresh_allocs = []
        in_supplies = []
        # walk backwards over this step's bookkeeping events
        j = i - 1
        sends = []
        freshes = []
        while j >= 0 and events[j].kind in ("fresh", "adv-send"):
            if events[j].kind == "adv-send":
                sends.append(events[j])
            else:
                freshes.append(events[j])
            j -= 1
        sends.reverse()
        freshes.reverse()
        subst = dict(rule_event.subst)
        si = 0
        for pos, prem in enumerate(rule.premises):
            if prem.negated:
                continue
            if prem.fact[0] == "Fr":
                v = prem.fact[1][0]
                name = subst[v]
                fresh_allocs.append((pos, v, name))
            elif prem.fact[0] == "In":
                ev = sends[si]
                si += 1
                in_supplies.append((pos, ev.term, ev.derivation))
        return Choice(rule_event.label, rule_event.subst,
                      tuple(in_supplies), tuple(fresh_allocs))


def explore(theory: Theory, bounds: Bounds, visible=None):
    """Module-level convenience over :class:`Engine`."""
    return Engine(theory, bounds).explore(visible=visible)
