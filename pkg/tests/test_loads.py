import numpy as np
import pytest

from traction_gap.geometry import Domain, volume_quadrature
from traction_gap.loads import (
    AXIS_SUBGROUP,
    FULL_SO3,
    IDENTITY_ONLY,
    INCOMPATIBLE,
    LoadError,
    LoadSpec,
    body_force,
    compatibility_report,
    default_rules,
    load_functional,
    moment_matrix,
    reversed_compatibility_witness,
    rigid_projection,
    rotate_loads,
)
from traction_gap.rotations import exp_so3, rotation_about_z, skew_matrix


def test_body_force_preset_axis_value(preset):
    psi0 = preset.psi(0.0)
    f = body_force(preset, np.array([[0.0, 0.0, 0.0]]))
    assert np.allclose(f, [[0.0, 0.0, psi0]])


def test_body_force_ball_pull_in():
    spec = LoadSpec.ball_pull_in()
    f = body_force(spec, np.array([[1.0, 0.0, 0.0]]))
    assert np.allclose(f, [[-1.0, 0.0, 0.0]])


def test_body_force_axial_profile():
    spec = LoadSpec(psi_coeffs=(-0.5, 1.0))
    f = body_force(spec, np.array([[0.0, 0.0, 1.0]]))
    assert np.allclose(f, [[0.0, 0.0, 0.5]])


def test_profile_validation():
    with pytest.raises(LoadError, match="value_at_1"):
        LoadSpec(phi_coeffs=(1.0, 0.0, 1.0))
    with pytest.raises(LoadError, match="mean"):
        LoadSpec(psi_coeffs=(1.0,))
    with pytest.raises(LoadError, match="first moment"):
        LoadSpec(psi_coeffs=(0.5, -1.0))  # zero mean but negative moment
    with pytest.raises(LoadError):
        LoadSpec(surface_pressure=1.0, domain=Domain.unit_ball())
    with pytest.raises(LoadError, match="builtin"):
        LoadSpec(builtin="unknown")


def test_load_kills_constants_and_spins(preset, preset_rules):
    for c in np.eye(3):
        vals = np.tile(c, (len(preset_rules.volume), 1))
        assert abs(load_functional(preset, vals, preset_rules)) < 1e-12
    for params in [(1, 0, 0), (0, 1, 0), (0, 0, 1), (0.3, -0.5, 0.8)]:
        W = skew_matrix(*params)
        assert abs(load_functional(preset, lambda p: p @ W.T, preset_rules)) < 1e-12


def test_load_quadratic_spin_work_formula(preset, preset_rules):
    # work of W^2 x is -pi (b^2 + c^2) * first moment of the axial profile
    moment = preset.axial_moment
    for a, b, c in [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.2, -0.7, 1.1)]:
        W = skew_matrix(a, b, c)
        val = load_functional(preset, lambda p: p @ (W @ W).T, preset_rules)
        assert np.isclose(val, -np.pi * (b * b + c * c) * moment, atol=1e-12)


def test_load_linearity(preset, preset_rules, rng):
    n = len(preset_rules.volume)
    u = rng.normal(size=(n, 3))
    v = rng.normal(size=(n, 3))
    a, b = 0.83, -1.91
    lhs = load_functional(preset, a * u + b * v, preset_rules)
    rhs = a * load_functional(preset, u, preset_rules) + b * load_functional(
        preset, v, preset_rules
    )
    assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(lhs))


def test_classification_preset(preset, preset_rules):
    rep = compatibility_report(preset, preset_rules)
    assert rep.classification == AXIS_SUBGROUP
    assert np.allclose(rep.axis, [0.0, 0.0, 1.0], atol=1e-10)
    assert rep.momentum_max < 1e-12
    assert np.linalg.norm(rep.resultant) < 1e-12
    # the two negative eigenvalues equal -pi * axial moment
    expected = -np.pi * preset.axial_moment
    assert np.allclose(np.sort(rep.eigenvalues)[:2], expected, atol=1e-12)


def test_classification_full_so3():
    spec = LoadSpec.cylinder_preset(beta=0.0)
    rep = compatibility_report(spec, default_rules(spec, 10))
    assert rep.classification == FULL_SO3


def test_classification_ball_pull_in():
    spec = LoadSpec.ball_pull_in()
    rep = compatibility_report(spec, default_rules(spec, 10))
    assert rep.classification == INCOMPATIBLE
    # the quadratic spin work of the pull-in load is 8 pi / 15 on unit axes
    assert np.isclose(rep.w2_max, 8 * np.pi / 15, atol=1e-10)
    assert np.linalg.norm(rep.resultant) < 1e-12
    assert rep.momentum_max < 1e-12


def test_classification_identity_only():
    spec = LoadSpec(surface_pressure=1.0)
    rep = compatibility_report(spec, default_rules(spec, 10))
    assert rep.classification == IDENTITY_ONLY
    # tension pressure: spin form is -2 lambda pi I
    assert np.allclose(rep.eigenvalues, -2.0 * np.pi, atol=1e-10)


def test_reversed_witness_compressive_pressure():
    spec = LoadSpec(surface_pressure=-1.0)
    rules = default_rules(spec, 10)
    R = reversed_compatibility_witness(spec, rules)
    assert R is not None
    T = moment_matrix(spec, rules)
    work = float(np.sum((R - np.eye(3)) * T))
    assert work > 0.0
    # matches lambda * Tr(R - I) * |Omega| for the pressure load
    assert np.isclose(work, -1.0 * (np.trace(R) - 3.0) * np.pi, atol=1e-10)


def test_reversed_witness_absent_for_compatible(preset, preset_rules):
    assert reversed_compatibility_witness(preset, preset_rules) is None
    zero = LoadSpec()
    assert reversed_compatibility_witness(zero, default_rules(zero, 6)) is None


def test_kernel_rotations_do_no_work(preset, preset_rules):
    for theta in np.linspace(-np.pi, np.pi, 100):
        R = rotation_about_z(theta)
        val = load_functional(preset, lambda p: p @ (R - np.eye(3)).T, preset_rules)
        assert abs(val) < 1e-10


def test_kernel_subgroup_property(preset, preset_rules, rng):
    # products and transposes of kernel rotations stay in the kernel
    T = moment_matrix(preset, preset_rules)
    for _ in range(20):
        R = rotation_about_z(rng.uniform(-np.pi, np.pi))
        S = rotation_about_z(rng.uniform(-np.pi, np.pi))
        assert abs(float(np.sum((R @ S - np.eye(3)) * T))) < 1e-12
        assert abs(float(np.sum((R.T - np.eye(3)) * T))) < 1e-12


def test_rigid_projection_constant(cylinder_rule):
    part = rigid_projection(lambda p: np.tile([1.0, -2.0, 0.5], (len(p), 1)), cylinder_rule)
    assert np.allclose(part.translation, [1.0, -2.0, 0.5], atol=1e-12)
    assert np.allclose(part.omega, 0.0, atol=1e-12)


def test_rigid_projection_spin(cylinder_rule):
    omega = np.array([0.4, -0.1, 0.9])
    part = rigid_projection(
        lambda p: np.cross(np.broadcast_to(omega, (len(p), 3)), p), cylinder_rule
    )
    assert np.allclose(part.omega, omega, atol=1e-12)
    assert np.allclose(part.translation, 0.0, atol=1e-12)


def test_rigid_projection_identity_field(cylinder_rule):
    # symmetric gradient has no skew part; the fit keeps only the centroid
    part = rigid_projection(lambda p: p.copy(), cylinder_rule)
    assert np.allclose(part.omega, 0.0, atol=1e-12)
    assert np.allclose(part.translation, [0.0, 0.0, 0.5], atol=1e-12)


def test_rigid_projection_idempotent(cylinder_rule, rng):
    vals = rng.normal(size=(len(cylinder_rule), 3))
    part = rigid_projection(vals, cylinder_rule)
    again = rigid_projection(part.values(cylinder_rule.points), cylinder_rule)
    assert np.allclose(again.translation, part.translation, atol=1e-12)
    assert np.allclose(again.omega, part.omega, atol=1e-12)


def test_rotate_loads_identity(preset, preset_rules, rng):
    rot = rotate_loads(preset, np.eye(3))
    for _ in range(20):
        vals = rng.normal(size=(len(preset_rules.volume), 3))
        assert load_functional(rot, vals, preset_rules) == pytest.approx(
            load_functional(preset, vals, preset_rules), rel=1e-14, abs=1e-14
        )


def test_rotate_loads_kernel_composition(preset, preset_rules):
    # for kernel rotations R, S: L_R((S - I) x) = L((R S - I) x) = 0
    R = rotation_about_z(0.9)
    rot = rotate_loads(preset, R)
    for theta in (-2.0, 0.3, 2.7):
        S = rotation_about_z(theta)
        val = load_functional(rot, lambda p: p @ (S - np.eye(3)).T, preset_rules)
        assert abs(val) < 1e-12


def test_rotate_loads_swirl_forces(preset):
    # rotating by the quarter-turn kernel element swaps the planar force
    # components: R f = (f_2, -f_1, f_3)
    R = rotation_about_z(np.pi / 2)  # equals the transpose of the swirl rotation
    rot = rotate_loads(preset, R.T)
    pts = np.array([[0.3, -0.4, 0.7], [0.1, 0.9, 0.2]])
    f = body_force(preset, pts)
    frot = body_force(rot, pts)
    expected = np.stack([f[:, 1], -f[:, 0], f[:, 2]], axis=1)
    assert np.allclose(frot, expected, atol=1e-14)


def test_rotate_loads_rejects_non_rotation(preset):
    with pytest.raises(LoadError):
        rotate_loads(preset, 2.0 * np.eye(3))
