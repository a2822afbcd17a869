"""Built-in cryptographic signature and its rewrite equations.

The fixed primitive set: pairing with projections, symmetric and
asymmetric encryption, signatures with message recovery and verification,
plus one-way mac and hash (no equations, so they are never inverted).
Theories may re-declare these names at the same arity; declaring a
different arity is a diagnostic.
"""

from __future__ import annotations

from spthylite import terms as T
from spthylite.kernel import compile_equations

BUILTIN_FUNCTIONS: dict[str, int] = {
    "pair": 2,
    "fst": 1,
    "snd": 1,
    "enc": 2,
    "dec": 2,
    "aenc": 2,
    "adec": 2,
    "pk": 1,
    "sign": 2,
    "verify": 3,
    "getmsg": 1,
    "true": 0,
    "mac": 2,
    "hash": 1,
}

_m = T.var("m")
_k = T.var("k")
_a = T.var("a")
_b = T.var("b")

BUILTIN_EQUATIONS: tuple = (
    (T.app("fst", T.app("pair", _a, _b)), _a),
    (T.app("snd", T.app("pair", _a, _b)), _b),
    (T.app("dec", T.app("enc", _m, _k), _k), _m),
    (T.app("adec", T.app("aenc", _m, T.app("pk", _k)), _k), _m),
    (T.app("verify", T.app("sign", _m, _k), _m, T.app("pk", _k)), T.app("true")),
    (T.app("getmsg", T.app("sign", _m, _k)), _m),
)

BUILTIN_EQ_INDEX = compile_equations(BUILTIN_EQUATIONS)

RESERVED_FACTS = ("Fr", "In", "Out", "K")


def is_subterm_convergent(lhs: tuple, rhs: tuple) -> bool:
    """Right side must be a variable of the left or a ground constant."""
    if rhs[0] == T.VAR:
        return rhs in T.variables(lhs)
    return T.is_ground(rhs)
