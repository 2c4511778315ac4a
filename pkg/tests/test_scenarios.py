import numpy as np
import pytest

from legendrian_lab.ambient_geometry import special_legendrian_eval, Plane2
from legendrian_lab.currents import mass, triangle_frames
from legendrian_lab.scenarios import SCENARIOS, scenario_build, sphere_current


def test_registry_builds_every_scenario():
    for name in SCENARIOS:
        sc = scenario_build(name, resolution=32)
        assert sc.current is not None or sc.qgraph is not None
        for a in sc.annotations:
            assert a.source in ("closed-form", "construction")


def test_unknown_scenario():
    with pytest.raises(KeyError):
        scenario_build("torus")


def test_scenarios_are_deterministic():
    a = scenario_build("l0-plus-l", resolution=32).current
    b = scenario_build("l0-plus-l", resolution=32).current
    assert np.array_equal(a.rows(), b.rows())


@pytest.mark.parametrize("which", ["l0", "l"])
def test_sphere_triangles_positively_calibrated(which):
    C = sphere_current(which, 48)
    v = C.vertices
    F = triangle_frames(v)
    c = v.mean(1)
    c /= np.linalg.norm(c, axis=1, keepdims=True)
    k = np.arange(0, len(C), 37)
    vals = [C.orientation[i] * special_legendrian_eval(c[i], Plane2(*_tangentize(c[i], F[i]))) for i in k]
    # secant planes are close to tangent: calibration near 1
    assert min(vals) > 0.95


def _tangentize(p, fr):
    e1 = fr[0] - (fr[0] @ p) * p
    e1 /= np.linalg.norm(e1)
    e2 = fr[1] - (fr[1] @ p) * p - (fr[1] @ e1) * e1
    return e1, e2 / np.linalg.norm(e2)


def test_annotated_values_match_geometry():
    sc = scenario_build("flat-disk-Q", {"Q": 3, "radius": 1.0})
    ann = {a.kind: a.value for a in sc.annotations}
    assert mass(sc.current) == pytest.approx(ann["mass"], rel=2e-3)
    sc = scenario_build("zk-branch", {"k": 3})
    assert sc.annotations[0].value == 3
    phi, _ = sc.qgraph.evaluate(np.array([0.5]))
    assert np.allclose(sorted(phi[0].real), [-0.0625, 0.0625])
