"""Registry completeness, schema validation and degeneration hooks."""

import pytest

from kmseries import registry
from kmseries.errors import ConstraintViolated, UnknownIdentity
from kmseries.params import DERIVED, ParamSet
from kmseries.sampler import SampleConfig, rng_for

EXPECTED_IDS = [
    "gustafson_6psi6",
    "thm1",
    "thm1_shifted",
    "cor_c1",
    "cor_st",
    "cor_csc",
    "cor_chu_un",
    "cor_pk",
    "cor_pkb",
    "cor_kajihara_watson",
    "cor_kajihara_bailey",
    "cor_milne_saalschutz",
    "cor_milne_dougall",
    "cor_c2",
    "cor_c3",
    "cor_2l",
    "cor_3l",
    "cor_mnc",
    "eq_pbt",
    "cor_mnb",
    "cor_c1p",
    "cor_cn",
    "cor_cmn",
    "cl_km",
    "cl_kmg",
    "cl_us",
    "cl_bi",
    "cl_5h5",
    "cl_2h2",
    "cl_thm_a",
    "cl_thm_b",
    "cl_3h3",
]


def test_registry_exact_contents():
    assert [d.id for d in registry.list_identities()] == EXPECTED_IDS


def test_every_descriptor_is_complete():
    for d in registry.list_identities():
        assert d.mode in ("q", "classical")
        assert d.route in (
            "hyperplane_bilateral",
            "lattice_bilateral",
            "orthant",
            "finite_box",
            "finite_simplex",
        )
        assert callable(d.lhs) and callable(d.rhs) and callable(d.sampler)
        assert d.anchor
        assert isinstance(d.schema, dict)


def test_unknown_identity_raises():
    with pytest.raises(UnknownIdentity):
        registry.get("no_such_identity")


def test_q_identities_require_q_scalar():
    for d in registry.list_identities():
        if d.mode == "q":
            assert "q" in d.schema.get("scalars", [])
        else:
            assert "q" not in d.schema.get("scalars", [])


def test_sampled_sets_satisfy_their_schema():
    cfg = SampleConfig(seed=4)
    for d in registry.list_identities():
        ps = d.sampler(rng_for(4, d.id, 0), cfg)
        registry.validate_schema(ps)  # must not raise
        assert ps.identity == d.id
        assert ps.mode == d.mode


def test_schema_rejects_missing_vector():
    ps = ParamSet("gustafson_6psi6", "q", dims={"n": 2},
                  scalars={"q": ("0.5", "0")},
                  vectors={"a": [("1", "0")] * 2, "b": [("1", "0")] * 2})
    with pytest.raises(ConstraintViolated):
        registry.validate_schema(ps)


def test_schema_rejects_wrong_length():
    ps = ParamSet("cl_2h2", "classical", dims={"n": 2},
                  ivecs={"M": [1, 1], "J": [1, 1]},
                  vectors={"a": [DERIVED] * 2,  # schema wants n+1 entries
                           "b": [DERIVED] * 3,
                           "z": [("0.3", "0.1")] * 2})
    with pytest.raises(ConstraintViolated):
        registry.validate_schema(ps)


def test_schema_rejects_negative_shift_orders():
    ps = ParamSet("thm1", "q", dims={"n": 1, "p": 1},
                  ivecs={"m": [-1]},
                  scalars={"q": ("0.5", "0")},
                  vectors={"a": [("1.2", "0")], "b": [DERIVED],
                           "z": [("0.7", "0")], "c": [("1.1", "0")]})
    with pytest.raises(ConstraintViolated):
        registry.validate_schema(ps)


def test_degeneration_hooks_present():
    have = {d.id for d in registry.list_identities() if d.degenerations}
    assert {"thm1", "cor_2l", "cl_km", "cl_kmg"} <= have


def test_degenerations_produce_admissible_sets():
    cfg = SampleConfig(seed=9)
    for ident in ("thm1", "cl_km", "cl_kmg"):
        d = registry.get(ident)
        sets = d.degenerations(rng_for(9, ident + ":deg", 0), cfg)
        assert sets
        for ps in sets:
            registry.validate_schema(ps)


def test_constraints_have_expressions():
    for d in registry.list_identities():
        for c in d.constraints:
            assert c.expression
