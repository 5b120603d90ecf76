import json

import numpy as np
import pytest

from mabd import fixture_builders as fb
from mabd.joints import eval_constraint, make_joint
from mabd.kkt import SolverFailure
from mabd.scene import ParseError, ValidationError, load_scene, load_scene_file, momentum_energy, run, step


def test_minimal_document():
    sc = load_scene({"bodies": [{"geometry": {"type": "box", "size": [0.1, 0.1, 0.1]}}]})
    assert sc.n_bodies == 1 and sc.joints == [] and sc.topology_summary() == "Free"
    rec = sc.run(3)
    assert len(rec) == 4


def test_pendulum_fixture_structure():
    sc = load_scene(fb.pendulum())
    assert len(sc.joints) == 2
    assert str(sc.islands[0][2]) == "Chain"
    assert max(sc.residuals()) <= 1e-12


class TestValidation:
    def doc(self, **joint):
        d = fb.chain(n=2)
        d["joints"][1].update(joint)
        return d

    def test_unknown_body(self):
        with pytest.raises(ValidationError, match="ghost"):
            load_scene(self.doc(bodies=["link0", "ghost"]))

    def test_non_unit_axis_names_joint(self):
        with pytest.raises(ValidationError, match="elbow"):
            load_scene(self.doc(name="elbow", axis=[0, 2, 0]))

    def test_bad_kind_and_self_joint(self):
        with pytest.raises(ValidationError):
            load_scene(self.doc(kind="weld"))
        with pytest.raises(ValidationError):
            load_scene(self.doc(bodies=["link0", "link0"]))

    def test_bad_material_and_geometry(self):
        d = fb.minimal()
        d["bodies"][0]["poisson"] = 0.5
        with pytest.raises(ValidationError, match="poisson"):
            load_scene(d)
        d = fb.minimal()
        d["bodies"][0]["geometry"] = {"type": "box", "size": [0.1, 0, 0.1]}
        with pytest.raises(ValidationError, match="geometry"):
            load_scene(d)

    def test_duplicate_and_reserved_ids(self):
        d = fb.chain(n=2)
        d["bodies"][1]["id"] = "link0"
        with pytest.raises(ValidationError):
            load_scene(d)
        d = fb.minimal()
        d["bodies"][0]["id"] = "world"
        with pytest.raises(ValidationError):
            load_scene(d)

    def test_integrator_keys(self):
        d = fb.minimal()
        d["integrator"]["substeps"] = 3
        with pytest.raises(ValidationError, match="substeps"):
            load_scene(d)
        d = fb.minimal()
        d["integrator"]["h"] = 0
        with pytest.raises(ValidationError):
            load_scene(d)

    def test_mixed_twist(self):
        d = fb.minimal()
        d["bodies"][0]["twist"] = {"omega": [0, 0, 1], "p": [1, 0, 0]}
        with pytest.raises(ValidationError, match="twist"):
            load_scene(d)

    def test_json_error_position(self):
        with pytest.raises(ParseError, match="line 2"):
            load_scene('{"bodies": [\n  oops]}')

    def test_no_bodies(self):
        with pytest.raises(ValidationError):
            load_scene({"bodies": []})


class TestStepping:
    def test_rest_is_fixed_point(self):
        d = fb.minimal()
        d["gravity"] = [0, 0, 0]
        sc = load_scene(d)
        q0 = sc.state[0].q.copy()
        sc.run(5)
        assert np.array_equal(sc.state[0].q, q0)

    def test_zero_steps(self):
        sc = load_scene(fb.chain(n=3))
        rec = sc.run(0)
        assert len(rec) == 1 and sc.time == 0.0

    def test_negative_steps(self):
        with pytest.raises(ValueError):
            load_scene(fb.minimal()).run(-1)

    def test_free_fall(self):
        sc = load_scene(fb.minimal())
        rec = sc.run(10)
        h = sc.settings.h
        # implicit Euler: z_n = -g h² n(n+1)/2
        assert sc.state[0].t[2] == pytest.approx(-9.81 * h * h * 55, rel=1e-9)
        assert len(rec.times) == 11

    def test_module_level_helpers(self):
        sc = load_scene(fb.chain(n=3))
        states, row = step(sc)
        assert row["time"] == pytest.approx(sc.settings.h)
        assert set(row) >= {"p", "L", "energy", "residuals", "us"}
        assert len(run(sc, 2)) == 3

    def test_step_size_change_refactorizes(self):
        sc = load_scene(fb.chain(n=3))
        sc.step(h=2e-3)
        assert all(m.Hbar_factor.h == 2e-3 for m in sc.models)
        assert sc.time == pytest.approx(2e-3)

    def test_constraints_hold(self):
        for doc in (fb.chain(n=5, kinds=("hinge", "ball", "prismatic")), fb.tree(depth=2), fb.ring()):
            sc = load_scene(doc)
            rec = sc.run(50)
            assert np.max(rec.residuals[1:]) <= 1e-6

    def test_limits_hold_hinge(self):
        d = fb.chain(n=1)
        d["joints"][0]["limits"] = [-0.3, 0.3]
        sc = load_scene(d)
        sc.run(400)
        assert abs(sc._theta[0]) <= 0.3 + 0.02

    def test_schedule_applies_wrench(self):
        d = fb.minimal()
        d["gravity"] = [0, 0, 0]
        d["schedule"] = [{"body": "box", "start": 0.0, "end": 0.05, "f": [2.0, 0, 0]}]
        sc = load_scene(d)
        sc.run(10)
        p = sc.diagnostics()["p"]
        assert p[0] == pytest.approx(2.0 * 0.05, rel=1e-6)

    def test_polar_off_runs(self):
        d = fb.chain(n=3)
        d["integrator"]["use_polar"] = False
        rec = load_scene(d).run(20)
        assert np.max(rec.residuals[1:]) <= 1e-6

    def test_solver_failure_on_mismatch(self):
        d = fb.ring()
        d["integrator"]["solver"] = "chain"
        with pytest.raises(SolverFailure, match="step 0"):
            load_scene(d).run(1)


class TestDiagnostics:
    def test_momentum_of_launched_cube(self):
        sc = load_scene(fb.cube_momentum())
        dg = sc.diagnostics()
        np.testing.assert_allclose(dg["p"], [100, 0, 0], atol=1e-9)
        np.testing.assert_allclose(dg["L"], [0, 100, 0], atol=1e-9)

    def test_rigid_kinetic_energy(self):
        sc = load_scene(fb.t_handle())
        m, s = sc.models[0], sc.state[0]
        from mabd.body import twist_map

        V = twist_map(s)
        c = m.com
        Ic = m.rest_inertia - m.mass * ((c @ c) * np.eye(3) - np.outer(c, c))
        A = s.A
        v_com = V.v + np.cross(V.omega, A @ c)
        ke = 0.5 * V.omega @ (A @ Ic @ A.T) @ V.omega + 0.5 * m.mass * v_com @ v_com
        assert momentum_energy(sc.models, sc.state)["energy"] == pytest.approx(ke, rel=1e-9)

    def test_static_energy_zero(self):
        sc = load_scene(fb.chain(n=2))
        dg = sc.diagnostics()
        assert dg["energy"] == 0.0 and np.all(dg["p"] == 0)


class TestUniversalExpansion:
    def test_expanded_matches_native_constraint(self):
        def doc(expand):
            d = fb.chain(n=2, kinds=("universal",))
            d["joints"][1]["expand"] = expand
            d["joints"][1]["name"] = "u"
            return d

        native = load_scene(doc(False))
        expanded = load_scene(doc(True))
        assert expanded.n_bodies == native.n_bodies + 1
        assert len(expanded.joints) == len(native.joints) + 1
        ref = make_joint("universal", 0, 1, native.joints[1].point, native.state[0].q, native.state[1].q,
                         axes=native.joints[1].axes)
        for sc in (native, expanded):
            sc.run(200)
            assert np.max(sc.residuals()) <= 1e-6
            r = eval_constraint(ref, sc.state[0].q, sc.state[1].q)
            assert np.abs(r).max() <= 1e-4


class TestRecords:
    def test_csv_shape_and_header(self):
        sc = load_scene(fb.chain(n=2))
        rec = sc.run(4)
        text = rec.to_csv(timing=False)
        lines = text.strip().split("\n")
        assert len(lines) == 6
        cols = lines[0].split(",")
        assert cols[:3] == ["time", "body0_A00", "body0_A01"]
        assert cols[-8:] == ["px", "py", "pz", "Lx", "Ly", "Lz", "energy", "us_per_step"]
        assert "joint1_residual" in cols
        assert all(len(l.split(",")) == len(cols) for l in lines)

    def test_deterministic(self):
        texts = [load_scene(fb.tree(depth=2)).run(20).to_csv(timing=False) for _ in range(2)]
        assert texts[0] == texts[1]

    def test_arrays(self):
        a = load_scene(fb.chain(n=2)).run(3).arrays()
        assert a["q"].shape == (4, 2, 12) and a["residual"].shape == (4, 2)


@pytest.mark.parametrize("name", sorted(fb.BUNDLED))
def test_bundled_fixtures_in_sync(name):
    assert fb.fixture_path(name).read_text() == fb.dump(fb.BUNDLED[name]())
    sc = load_scene_file(fb.fixture_path(name))
    assert max(sc.residuals(), default=0.0) <= 1e-10


def test_random_articulation_topologies(rng):
    for topo, expect in (("chain", "Chain"), ("tree", "Tree"), ("loop", "Loop(breakers=1)")):
        sc = load_scene(fb.random_articulation(rng, 8, topo, kinds=("ball", "hinge")))
        assert sc.topology_summary() == expect
