"""Kernel selection: compiled extension when available, pure Python otherwise.

Set ``SPTHYLITE_KERNEL=py`` (or ``cy``) to force a backend; ``auto`` is the
default.  All callers import the four operations from here so one process
uses exactly one backend.
"""

from __future__ import annotations

import os

_choice = os.environ.get("SPTHYLITE_KERNEL", "auto").strip().lower()

if _choice not in ("auto", "py", "cy"):
    raise RuntimeError(f"SPTHYLITE_KERNEL must be auto, py or cy (got {_choice!r})")

if _choice == "py":
    from spthylite import _rewrite_py as _impl
elif _choice == "cy":
    from spthylite import _rewrite_cy as _impl  # type: ignore[no-redef]
else:
    try:
        from spthylite import _rewrite_cy as _impl  # type: ignore[no-redef]
    except ImportError:
        from spthylite import _rewrite_py as _impl

BACKEND: str = _impl.BACKEND

normalize = _impl.normalize
match = _impl.match
unify = _impl.unify
substitute = _impl.substitute


def compile_equations(equations) -> dict:
    """Index (lhs, rhs) pairs by root symbol for the kernels."""
    index: dict = {}
    for lhs, rhs in equations:
        index.setdefault(lhs[1], []).append((lhs, rhs))
    return {f: tuple(rules) for f, rules in index.items()}


def apply(subst: dict, t: tuple, eq_index: dict) -> tuple:
    """Substitute, then normalize (the public term-algebra apply)."""
    return normalize(substitute(subst, t), eq_index)
