"""Lemma verdicts over the bounded trace space.

An all-traces lemma is falsified by the first explored trace violating
its formula (breadth-first order, so counterexamples are minimal-length);
otherwise it is verified up to the bound.  An exists-trace lemma is
witnessed by the first satisfying trace or reported unwitnessed.

Exploration is restricted with the lemma's own atom patterns: steps that
do not change the state and record nothing the formula could observe are
skipped (they cannot affect any verdict).
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from spthylite.execution import Bounds, Engine, Trace
from spthylite.formulas import atom_patterns, holds
from spthylite.theory import ALL_TRACES, EXISTS_TRACE, Lemma, Theory

VERIFIED = "verified_up_to_bound"
FALSIFIED = "falsified"
WITNESS = "witness_found"
NO_WITNESS = "no_witness_up_to_bound"


@dataclass(frozen=True)
class Verdict:
    kind: str
    bound: Bounds
    traces_examined: int
    trace: Trace | None = None  # counterexample or witness
    assignment: dict | None = None

    @property
    def holds_up_to_bound(self) -> bool:
        return self.kind in (VERIFIED, WITNESS)

    def describe(self) -> str:
        if self.kind == VERIFIED:
            return f"verified up to bound ({self.traces_examined} traces)"
        if self.kind == FALSIFIED:
            steps = len(self.trace.rule_events()) if self.trace else 0
            return f"falsified - found trace ({steps} steps)"
        if self.kind == WITNESS:
            steps = len(self.trace.rule_events()) if self.trace else 0
            return f"witness found ({steps} steps)"
        return f"no witness up to bound ({self.traces_examined} traces)"


def check_lemma(theory: Theory, lemma: Lemma, bounds: Bounds) -> Verdict:
    engine = Engine(theory, bounds)
    visible = atom_patterns(lemma.formula)
    eqx = theory.eq_index
    count = 0
    for trace in engine.search(visible=visible):
        count += 1
        value, env = holds(lemma.formula, trace, eqx)
        if lemma.mode == ALL_TRACES and not value:
            return Verdict(FALSIFIED, bounds, count, trace, env)
        if lemma.mode == EXISTS_TRACE and value:
            return Verdict(WITNESS, bounds, count, trace, env)
    if lemma.mode == ALL_TRACES:
        return Verdict(VERIFIED, bounds, count)
    return Verdict(NO_WITNESS, bounds, count)


def _check_named(args):
    theory, name, bounds = args
    return name, check_lemma(theory, theory.lemma(name), bounds)


def check_theory(theory: Theory, bounds: Bounds, lemma_names=None, workers: int | None = None):
    """Verdicts for several lemmas; returns {name: Verdict} in theory order.

    ``workers`` > 1 checks lemmas in parallel processes (each lemma is an
    independent computation); results are identical to a sequential run.
    """
    names = [l.name for l in theory.lemmas]
    if lemma_names is not None:
        names = [n for n in names if n in set(lemma_names)]
    if workers is None:
        workers = max(1, int(os.environ.get("SPTHYLITE_WORKERS", "1")))
    results: dict = {}
    if workers > 1 and len(names) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(names))) as pool:
            for name, verdict in pool.map(_check_named,
                                          [(theory, n, bounds) for n in names]):
                results[name] = verdict
    else:
        for n in names:
            results[n] = check_lemma(theory, theory.lemma(n), bounds)
    return {n: results[n] for n in names}
