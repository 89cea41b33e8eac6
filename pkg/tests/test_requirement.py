import json

import numpy as np
import pytest

from stladapt import (
    Polarity,
    RequirementError,
    RequirementSpace,
    degree_of_strengthening,
    degree_of_weakening,
    in_validity_domain,
    instantiate,
    load_requirement_space,
    parse_pstl,
    parse_stl,
    robustness,
    satisfies,
    to_text,
    valuation_leq,
    weaker_than,
    Signal,
)

from .conftest import random_signal

INC = Polarity.STRENGTHENS_WHEN_INCREASED
DEC = Polarity.STRENGTHENS_WHEN_DECREASED


@pytest.fixture
def thrust_space():
    return RequirementSpace(
        formula=parse_pstl("G[0,1](thrust > $p1)"),
        polarity={"p1": INC},
        nu_min={"p1": 50.0},
        nu_opt={"p1": 100.0},
        nu_curr={"p1": 100.0},
        name="thruster",
    )


class TestInstantiate:
    def test_lower_endpoint_slot_unsupported(self):
        # time params are upper-endpoint only in v1
        with pytest.raises(Exception):
            parse_pstl("F[$tau1,$tau2](f > $a)")

    def test_upper_time_param(self):
        phi = parse_pstl("F[0,$tau2](f > $a)")
        inst = instantiate(phi, {"tau2": 5.0, "a": 30.0})
        assert inst == parse_stl("F[0,5](f > 30)")

    def test_thrust_instantiation(self, thrust_space):
        assert instantiate(thrust_space.formula, {"p1": 100.0}) == \
            parse_stl("G[0,1](thrust > 100)")

    def test_zero_parameters(self):
        phi = parse_pstl("G[0,1](x > 0)")
        assert instantiate(phi, {}) == phi

    def test_missing_parameter(self, thrust_space):
        with pytest.raises(RequirementError):
            instantiate(thrust_space.formula, {})

    def test_interval_inversion_rejected(self):
        phi = parse_pstl("F[3,$tau](x > 0)")
        with pytest.raises(RequirementError):
            instantiate(phi, {"tau": 1.0})


def test_lower_endpoint_time_param_rejected():
    with pytest.raises(Exception):
        parse_pstl("F[$tau1,5](x > 0)")


class TestValuationOrder:
    def test_increase_polarity(self):
        assert valuation_leq({"p1": 70.0}, {"p1": 100.0}, {"p1": INC})
        assert not valuation_leq({"p1": 100.0}, {"p1": 70.0}, {"p1": INC})

    def test_decrease_polarity(self):
        assert valuation_leq({"tau": 15.0}, {"tau": 5.0}, {"tau": DEC})
        assert not valuation_leq({"tau": 5.0}, {"tau": 15.0}, {"tau": DEC})

    def test_reflexive(self):
        nu = {"a": 1.0, "b": 2.0}
        assert valuation_leq(nu, nu, {"a": INC, "b": DEC})

    def test_mismatched_parameters(self):
        with pytest.raises(RequirementError):
            valuation_leq({"a": 1.0}, {"b": 1.0}, {"a": INC})


class TestWeakerThan:
    def test_weak_vs_origin(self, thrust_space):
        weak = parse_stl("G[0,1](thrust > 70)")
        origin = parse_stl("G[0,1](thrust > 100)")
        assert weaker_than(weak, origin, thrust_space)
        assert not weaker_than(origin, weak, thrust_space)

    def test_reflexive(self, thrust_space):
        phi = parse_stl("G[0,1](thrust > 80)")
        assert weaker_than(phi, phi, thrust_space)

    def test_non_instantiation_rejected(self, thrust_space):
        with pytest.raises(RequirementError):
            weaker_than(parse_stl("G[0,2](thrust > 70)"),
                        parse_stl("G[0,1](thrust > 100)"), thrust_space)

    def test_entailment_soundness_sampled(self, thrust_space):
        rng = np.random.default_rng(4)
        weak = parse_stl("G[0,1](thrust > 70)")
        origin = parse_stl("G[0,1](thrust > 100)")
        checked = 0
        for _ in range(500):
            s = random_signal(rng, ("thrust",), min_len=3)
            s = Signal(1.0, ("thrust",), s.samples * 10 + 85)
            if satisfies(origin, s, 0.0):
                assert satisfies(weak, s, 0.0)
            checked += 1
        assert checked == 500

    def test_robustness_monotonicity_sampled(self, thrust_space):
        rng = np.random.default_rng(5)
        for _ in range(200):
            s = random_signal(rng, ("thrust",), min_len=3)
            lo = robustness(instantiate(thrust_space.formula, {"p1": 60.0}), s, 0.0)
            hi = robustness(instantiate(thrust_space.formula, {"p1": 90.0}), s, 0.0)
            if lo.defined and hi.defined:
                assert lo.value >= hi.value - 1e-12


class TestDegrees:
    def test_paper_values(self, thrust_example_signal):
        origin = parse_stl("G[0,1](thrust > 100)")
        weak = parse_stl("G[0,1](thrust > 70)")
        assert degree_of_weakening(origin, weak, thrust_example_signal, 0.0) == \
            pytest.approx(30.0, abs=1e-12)
        assert degree_of_strengthening(weak, origin, thrust_example_signal, 0.0) == \
            pytest.approx(30.0, abs=1e-12)

    def test_zero_on_identical(self, thrust_example_signal):
        phi = parse_stl("G[0,1](thrust > 100)")
        assert degree_of_weakening(phi, phi, thrust_example_signal, 0.0) == 0.0
        assert degree_of_strengthening(phi, phi, thrust_example_signal, 0.0) == 0.0

    def test_antisymmetry_and_negation(self, thrust_example_signal):
        a = parse_stl("G[0,1](thrust > 100)")
        b = parse_stl("G[0,1](thrust > 70)")
        s = thrust_example_signal
        assert degree_of_weakening(a, b, s, 0.0) + degree_of_weakening(b, a, s, 0.0) == 0.0
        assert degree_of_strengthening(a, b, s, 0.0) == -degree_of_weakening(a, b, s, 0.0)

    def test_globally_reduces_to_parameter_difference(self):
        rng = np.random.default_rng(6)
        tpl = parse_pstl("G[0,2](x > $p)")
        for _ in range(100):
            s = random_signal(rng, ("x",), min_len=4)
            p1, p2 = sorted(rng.normal(0, 5, size=2))
            f1 = instantiate(tpl, {"p": p1})
            f2 = instantiate(tpl, {"p": p2})
            assert degree_of_weakening(f2, f1, s, 0.0) == pytest.approx(p2 - p1, abs=1e-9)


class TestValidityDomain:
    @pytest.fixture
    def space(self):
        return RequirementSpace(
            formula=parse_pstl("G[0,1](thrust > $p1)"),
            polarity={"p1": INC},
            nu_min={"p1": 50.0},
            nu_opt={"p1": 100.0},
            nu_curr={"p1": 80.0},
        )

    @pytest.fixture
    def const80(self):
        return Signal.from_columns(1.0, {"thrust": [80.0, 80.0, 80.0]})

    def test_inside(self, space, const80):
        assert in_validity_domain({"p1": 70.0}, space.formula, space, const80, 0.0)

    def test_above_optimal(self, space, const80):
        assert not in_validity_domain({"p1": 110.0}, space.formula, space, const80, 0.0)

    def test_unsatisfied_within_bounds(self, space, const80):
        assert not in_validity_domain({"p1": 90.0}, space.formula, space, const80, 0.0)

    def test_below_minimal(self, space, const80):
        assert not in_validity_domain({"p1": 40.0}, space.formula, space, const80, 0.0)


class TestSpaceConstruction:
    def test_rejects_current_outside_bounds(self):
        with pytest.raises(RequirementError):
            RequirementSpace(parse_pstl("G[0,1](thrust > $p)"), {"p": INC},
                             {"p": 50.0}, {"p": 100.0}, {"p": 110.0})
        with pytest.raises(RequirementError):
            RequirementSpace(parse_pstl("G[0,1](thrust > $p)"), {"p": INC},
                             {"p": 50.0}, {"p": 100.0}, {"p": 40.0})

    def test_rejects_wrong_polarity(self):
        # raising the bound of "thrust > p" strengthens; declaring the
        # opposite direction must fail the empirical check
        with pytest.raises(RequirementError):
            RequirementSpace(parse_pstl("G[0,1](thrust > $p)"), {"p": DEC},
                             {"p": 100.0}, {"p": 50.0}, {"p": 50.0})

    def test_time_parameter_polarity(self):
        # shrinking an F deadline strengthens
        RequirementSpace(
            parse_pstl("G[0,1]((visibility < 20) -> F[0,$tau](distance_to_pipeline < 10))"),
            {"tau": DEC}, {"tau": 15.0}, {"tau": 5.0}, {"tau": 5.0})


def test_requirement_space_file_roundtrip(tmp_path):
    doc = {
        "name": "thruster",
        "formula": "G[0,1](thrust > $p1)",
        "parameters": [
            {"name": "p1", "kind": "value", "polarity": "increase",
             "min": 50, "opt": 100, "initial": 100},
        ],
    }
    path = tmp_path / "req.json"
    path.write_text(json.dumps(doc))
    space = load_requirement_space(str(path))
    assert space.nu_min == {"p1": 50.0}
    assert space.nu_curr == {"p1": 100.0}
    assert to_text(space.optimal()) == "G[0,1](thrust > 100)"


def test_loader_rejects_unknown_parameter(tmp_path):
    doc = {"formula": "G[0,1](thrust > $p1)",
           "parameters": [{"name": "zzz", "polarity": "increase",
                           "min": 0, "opt": 1}]}
    path = tmp_path / "req.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(RequirementError):
        load_requirement_space(str(path))
