"""Parameter sets instantiating one identity.

A :class:`ParamSet` stores every numeric entry as a pair of decimal
strings, so serialization is byte-stable and values can be re-bound at any
working precision without a double-precision round trip.  Exact balancing
constraints (e.g. solving d from q^{1-|m|} a b = c d) are represented as
*derived* entries: markers resolved at bind time, at full precision, by
the owning identity's dependent-parameter rules.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from gmpy2 import mpc

from .precision import parse_decimal, set_working_precision
from .qarith import Workspace

DERIVED = "__derived__"


@dataclass
class ParamSet:
    """A named bag of vectors, scalars and integers for one identity."""

    identity: str
    mode: str = "q"  # "q" | "classical"
    dims: dict[str, int] = field(default_factory=dict)  # n, p, r
    ints: dict[str, int] = field(default_factory=dict)  # N, L, ...
    ivecs: dict[str, list[int]] = field(default_factory=dict)  # m, l
    scalars: dict[str, Any] = field(default_factory=dict)  # name -> (re, im) | DERIVED
    vectors: dict[str, list] = field(default_factory=dict)  # name -> [(re, im)|DERIVED]

    def to_json(self) -> dict:
        return {
            "identity": self.identity,
            "mode": self.mode,
            "dims": dict(sorted(self.dims.items())),
            "ints": dict(sorted(self.ints.items())),
            "ivecs": {k: list(v) for k, v in sorted(self.ivecs.items())},
            "scalars": {k: list(v) if isinstance(v, tuple) else v
                        for k, v in sorted(self.scalars.items())},
            "vectors": {
                k: [list(e) if isinstance(e, tuple) else e for e in v]
                for k, v in sorted(self.vectors.items())
            },
        }

    @classmethod
    def from_json(cls, d: dict) -> "ParamSet":
        return cls(
            identity=d["identity"],
            mode=d["mode"],
            dims={k: int(v) for k, v in d.get("dims", {}).items()},
            ints={k: int(v) for k, v in d.get("ints", {}).items()},
            ivecs={k: [int(x) for x in v] for k, v in d.get("ivecs", {}).items()},
            scalars={k: tuple(v) if isinstance(v, list) else v
                     for k, v in d.get("scalars", {}).items()},
            vectors={
                k: [tuple(e) if isinstance(e, list) else e for e in v]
                for k, v in d.get("vectors", {}).items()
            },
        )

    def serialize(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


class Bound:
    """A ParamSet bound to a working precision.

    Attribute access returns raw mpc scalars, lists of mpc for vectors,
    plain ints for dimensions/offsets, and lists of ints for integer
    vectors.  Helper methods provide aggregate coordinate products and
    |.| coordinate sums.
    """

    def __init__(self, ps: ParamSet, bits: int, resolver=None):
        set_working_precision(bits)
        self.ps = ps
        self.bits = bits
        self._vals: dict[str, Any] = {}
        for k, v in ps.dims.items():
            self._vals[k] = v
        for k, v in ps.ints.items():
            self._vals[k] = v
        for k, v in ps.ivecs.items():
            self._vals[k] = list(v)
        pending_s = []
        for k, v in ps.scalars.items():
            if v == DERIVED:
                pending_s.append(k)
            else:
                self._vals[k] = _parse(v, bits)
        pending_v = []
        for k, vec in ps.vectors.items():
            out = []
            for i, e in enumerate(vec):
                if e == DERIVED:
                    out.append(None)
                    pending_v.append((k, i))
                else:
                    out.append(_parse(e, bits))
            self._vals[k] = out
        q = self._vals.get("q") if ps.mode == "q" else None
        self.ws = Workspace(q, bits)
        if pending_s or pending_v:
            if resolver is None:
                from .registry import dependent_rules

                resolver = dependent_rules(ps.identity)
            for key in pending_s:
                self._vals[key] = resolver[key](self)
            for key, i in pending_v:
                self._vals[key][i] = resolver[f"{key}[{i}]"](self)

    def __getattr__(self, name):
        try:
            return self._vals[name]
        except KeyError:
            raise AttributeError(f"parameter {name!r} not present") from None

    def get(self, name, default=None):
        return self._vals.get(name, default)

    def prod(self, name: str) -> mpc:
        out = mpc(1)
        for v in self._vals[name]:
            out *= v
        return out

    def isum(self, name: str) -> int:
        return sum(self._vals[name])


def _parse(pair: tuple[str, str], bits: int) -> mpc:
    return mpc(parse_decimal(pair[0], bits), parse_decimal(pair[1], bits))
