import json

import numpy as np
import pytest

from stladapt.envmodel import (
    Action,
    Effect,
    LinearExpr,
    ModelError,
    StateVar,
    TransitionSystem,
    load_model,
)


def velocity_model():
    return TransitionSystem(
        variables=(
            StateVar("vel_x", -10, 10, 1.0),
            StateVar("vel_y", -10, 10, 0.0),
            StateVar("vel_z", -10, 10, 2.0),
        ),
        actions=(
            Action("accelerate", "sys", (
                Effect("vel_x", "add", 0.5),
                Effect("vel_z", "add", -1.0),
            )),
            Action("noop", "sys"),
        ),
        updates={},
    )


def thruster_model(n=4, rating=30.0):
    variables = [StateVar(f"on_{k}", 0, 1, 1.0 if k < 2 else 0.0) for k in range(n)]
    variables.append(StateVar("thrust", 0, n * rating, 0.0))
    actions = [Action(f"enable_{k}", "sys", (Effect(f"on_{k}", "set", 1.0),))
               for k in range(n)]
    actions.append(Action("noop", "sys"))
    return TransitionSystem(
        variables=tuple(variables),
        actions=tuple(actions),
        updates={},
        derived={"thrust": LinearExpr.make({f"on_{k}": rating for k in range(n)})},
    )


class TestStep:
    def test_velocity_update_componentwise(self):
        ts = velocity_model()
        q = ts.initial_state()
        q2 = ts.step(q, "accelerate")
        assert (q2["vel_x"], q2["vel_y"], q2["vel_z"]) == (1.5, 0.0, 1.0)

    def test_noop_identity(self):
        ts = velocity_model()
        q = ts.initial_state()
        assert ts.step(q, "noop") == q

    def test_thruster_sum_rule(self):
        ts = thruster_model()
        q = ts.initial_state()
        assert q["thrust"] == 60.0  # two of four on at 30 N each
        q2 = ts.step(q, "enable_2")
        assert q2["thrust"] == 90.0

    def test_undeclared_action(self):
        ts = velocity_model()
        with pytest.raises(ModelError):
            ts.step(ts.initial_state(), "warp")

    def test_clamping_recorded(self):
        ts = TransitionSystem(
            variables=(StateVar("x", 0, 5, 4.0),),
            actions=(Action("bump", "sys", (Effect("x", "add", 3.0),)),),
            updates={},
        )
        log = []
        q2 = ts.step(ts.initial_state(), "bump", clamp_log=log)
        assert q2["x"] == 5.0
        assert log == [("x", 7.0, 5.0)]

    def test_guard_blocks_effect(self):
        ts = TransitionSystem(
            variables=(StateVar("ok", 0, 1, 0.0), StateVar("x", 0, 10, 0.0)),
            actions=(Action("use", "sys", (Effect("x", "add", 1.0),),
                            guard=LinearExpr.make({"ok": 1.0}, -1.0)),),
            updates={},
        )
        q2 = ts.step(ts.initial_state(), "use")
        assert q2["x"] == 0.0  # guard ok - 1 >= 0 fails


class TestRollout:
    def test_empty_sequence(self):
        ts = velocity_model()
        s = ts.rollout(ts.initial_state(), [])
        assert len(s) == 1
        assert s.value_at("vel_x", 0) == 1.0

    def test_repeated_acceleration_closed_form(self):
        ts = velocity_model()
        k = 7
        s = ts.rollout(ts.initial_state(), ["accelerate"] * k)
        assert s.value_at("vel_x", k) == pytest.approx(1.0 + 0.5 * k)
        assert s.value_at("vel_z", k) == pytest.approx(2.0 - 1.0 * k)

    def test_concatenation_compositionality(self):
        ts = velocity_model()
        a1, a2 = ["accelerate", "noop"], ["accelerate"] * 3
        full = ts.rollout(ts.initial_state(), a1 + a2)
        first = ts.rollout(ts.initial_state(), a1)
        second = ts.rollout(first.sample_dict(len(first) - 1), a2)
        np.testing.assert_allclose(full.samples[len(a1):], second.samples)

    def test_prefix_stability(self):
        ts = velocity_model()
        acts = ["accelerate", "noop", "accelerate"]
        full = ts.rollout(ts.initial_state(), acts)
        prefix = ts.rollout(ts.initial_state(), acts[:2])
        np.testing.assert_array_equal(full.samples[:3], prefix.samples)

    def test_determinism_bit_for_bit(self):
        ts = velocity_model()
        acts = ["accelerate", "noop"] * 5
        s1 = ts.rollout(ts.initial_state(), acts)
        s2 = ts.rollout(ts.initial_state(), acts)
        assert s1.samples.tobytes() == s2.samples.tobytes()

    def test_env_event_then_action_in_one_step(self):
        ts = TransitionSystem(
            variables=(StateVar("x", -100, 100, 0.0),),
            actions=(Action("plus", "sys", (Effect("x", "add", 1.0),)),
                     Action("reset", "env", (Effect("x", "set", 50.0),))),
            updates={},
        )
        s = ts.rollout(ts.initial_state(), [("reset", "plus")])
        assert s.value_at("x", 1) == 51.0  # event applied first, then action


class TestValidation:
    def test_disjoint_action_sets(self):
        with pytest.raises(ModelError):
            TransitionSystem(
                variables=(StateVar("x", 0, 1, 0.0),),
                actions=(Action("a", "sys"), Action("a", "env")),
                updates={},
            )

    def test_undeclared_update_reference(self):
        with pytest.raises(ModelError):
            TransitionSystem(
                variables=(StateVar("x", 0, 1, 0.0),),
                actions=(),
                updates={"x": LinearExpr.make({"ghost": 1.0})},
            )

    def test_infinite_bounds_rejected(self):
        with pytest.raises(ModelError):
            StateVar("x", 0, float("inf"), 0.0)


def test_model_file_loader(tmp_path):
    doc = {
        "dt": 0.5,
        "vars": [
            {"name": "x", "lo": -100, "hi": 100, "init": 0},
            {"name": "v", "lo": -2, "hi": 2, "init": 0},
        ],
        "sys_actions": [
            {"name": "noop"},
            {"name": "speed_up", "effects": [{"var": "v", "op": "add", "value": 0.5}]},
        ],
        "env_actions": [
            {"name": "stall", "effects": [{"var": "v", "op": "set", "value": 0}]},
        ],
        "updates": {"x": {"coeffs": {"x": 1, "v": 0.5}}},
    }
    path = tmp_path / "model.json"
    path.write_text(json.dumps(doc))
    ts = load_model(str(path))
    assert ts.sample_period == 0.5
    s = ts.rollout(ts.initial_state(), ["speed_up", "noop"])
    assert s.value_at("v", 2) == 0.5
    assert s.value_at("x", 2) == pytest.approx(0.25)
