"""The identity registry.

One :class:`IdentityDescriptor` per identity of the underlying theory,
binding a parameter schema, machine-checkable constraints, left- and
right-hand-side evaluators, a seeded sampling recipe, and the
dependent-parameter rules that realize exact balancing conditions.

The concrete definitions live in :mod:`kmseries.identities_q` and
:mod:`kmseries.identities_classical`; importing this module loads both.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from gmpy2 import mpc

from .errors import ConstraintViolated, UnknownIdentity
from .lattice import SumDiagnostics, TruncationPolicy
from .params import Bound, ParamSet


@dataclass(frozen=True)
class Constraint:
    """A decidable, side-effect-free condition on a bound ParamSet."""

    kind: str  # modulus_lt_1 | exact_equality | nonvanishing_denominator |
    #            nonneg_integer | real_part_gt
    expression: str
    check: Callable[[Bound], bool]
    achieved: Optional[Callable[[Bound], float]] = None
    threshold: Optional[float] = None


@dataclass(frozen=True)
class IdentityDescriptor:
    """Registry entry for one identity."""

    id: str
    anchor: str
    mode: str  # "q" | "classical"
    route: str  # which lattice engine evaluates the LHS
    schema: dict
    constraints: tuple[Constraint, ...]
    lhs: Callable[[Bound, TruncationPolicy], tuple[mpc, SumDiagnostics]]
    rhs: Callable[[Bound, TruncationPolicy], tuple[mpc, SumDiagnostics]]
    sampler: Callable = None  # (rng, cfg) -> ParamSet
    dependents: dict = field(default_factory=dict)  # name -> fn(Bound) -> mpc
    atoms: Callable = None  # (Bound) -> list of (kind, value) atom tuples
    degenerations: Callable = None  # (rng, cfg) -> list[ParamSet]
    lhs_term: Callable = None  # (Bound) -> term function, for sum-type LHS


_REGISTRY: dict[str, IdentityDescriptor] = {}
_ORDER: list[str] = []


def register(desc: IdentityDescriptor) -> IdentityDescriptor:
    if desc.id in _REGISTRY:
        raise ValueError(f"duplicate identity id {desc.id}")
    _REGISTRY[desc.id] = desc
    _ORDER.append(desc.id)
    return desc


def _ensure_loaded() -> None:
    if not _REGISTRY:
        from . import identities_q, identities_classical  # noqa: F401


def list_identities() -> list[IdentityDescriptor]:
    """The full registry, in declaration order."""
    _ensure_loaded()
    return [_REGISTRY[i] for i in _ORDER]


def get(identity_id: str) -> IdentityDescriptor:
    _ensure_loaded()
    try:
        return _REGISTRY[identity_id]
    except KeyError:
        raise UnknownIdentity(identity_id) from None


def constraints(identity_id: str) -> list[Constraint]:
    return list(get(identity_id).constraints)


def dependent_rules(identity_id: str) -> dict:
    return get(identity_id).dependents


def validate_schema(ps: ParamSet) -> None:
    """Check that a ParamSet carries every name its identity requires."""
    desc = get(ps.identity)
    sch = desc.schema
    for d in sch.get("dims", []):
        if d not in ps.dims:
            raise ConstraintViolated(f"{ps.identity}: missing dimension {d}")
    for name, dim in sch.get("vectors", {}).items():
        want = _dim_value(ps, dim)
        got = ps.vectors.get(name)
        if got is None or (want is not None and len(got) != want):
            raise ConstraintViolated(
                f"{ps.identity}: vector {name} must have length {dim}"
            )
    for name, dim in sch.get("ivecs", {}).items():
        want = ps.dims.get(dim)
        got = ps.ivecs.get(name)
        if got is None or (want is not None and len(got) != want):
            raise ConstraintViolated(
                f"{ps.identity}: integer vector {name} must have length {dim}"
            )
        if any(v < 0 for v in got):
            raise ConstraintViolated(f"{ps.identity}: {name} entries must be >= 0")
    for name in sch.get("scalars", []):
        if name not in ps.scalars:
            raise ConstraintViolated(f"{ps.identity}: missing scalar {name}")
    for name in sch.get("ints", []):
        if name not in ps.ints:
            raise ConstraintViolated(f"{ps.identity}: missing integer {name}")


def _dim_value(ps: ParamSet, dim) -> int | None:
    """Resolve a schema length spec: an int, a dim name, or name+-offset."""
    if isinstance(dim, int):
        return dim
    if dim in ps.dims:
        return ps.dims[dim]
    for sep in ("+", "-"):
        if sep in dim:
            name, off = dim.split(sep)
            if name in ps.dims:
                return ps.dims[name] + (int(off) if sep == "+" else -int(off))
    return None


def check_constraints(bound: Bound) -> None:
    """Raise ConstraintViolated if any registered constraint fails."""
    desc = get(bound.ps.identity)
    for c in desc.constraints:
        if not c.check(bound):
            raise ConstraintViolated(f"{bound.ps.identity}: {c.expression}")


def lhs_eval(
    identity_id: str, ps: ParamSet, policy: TruncationPolicy, bits: int
) -> tuple[mpc, SumDiagnostics]:
    """Evaluate the identity's left-hand side."""
    desc = get(identity_id)
    b = Bound(ps, bits)
    check_constraints(b)
    return desc.lhs(b, policy)


def rhs_eval(
    identity_id: str, ps: ParamSet, policy: TruncationPolicy, bits: int
) -> tuple[mpc, SumDiagnostics]:
    """Evaluate the identity's right-hand side."""
    desc = get(identity_id)
    b = Bound(ps, bits)
    check_constraints(b)
    return desc.rhs(b, policy)
