"""Limit-energy minimization over the rotation kernel, closed-form cylinder
minimizers, gap certification, rotated-load and nonuniqueness checks.

For the cylinder profile loads the minimizers of the per-rotation energies
have the structured form

    u(x, y, z) = p(r^2) (a x + b y, a y - b x, 0) + (0, 0, w(z)),

with p = eta(r)/r built from the radial equilibrium profile and w the axial
equilibrium displacement; theta parameterizes the family through
a = cos(theta), b = -2 sin(theta).  The value of the per-rotation minimum
decomposes as cos^2(theta) * minE + sin^2(theta) * minSwirl, which is the
closed form the numerical searches are checked against.

Certification logic for the incompressible gap:

* upper bound for the constrained swirl side: the divergence-free planar
  ansatz is feasible, so its Galerkin minimum is a genuine upper bound;
* lower bound for the constrained linear side: a divergence penalty added
  to the full space relaxes the constraint, so penalized minima sit below
  the constrained minimum for every penalty weight.

The gap is certified when the upper bound falls strictly below the lower
bound; otherwise the report says so rather than asserting the inequality.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from .energy import QUADRATIC_SCALE
from .galerkin import (
    SolveResult,
    SolverError,
    StiffnessSystem,
    assemble,
    build_space,
    solve_quadratic,
    strain,
)
from .geometry import volume_quadrature, surface_quadrature
from .loads import (
    AXIS_SUBGROUP,
    FULL_SO3,
    IDENTITY_ONLY,
    INCOMPATIBLE,
    KernelReport,
    LoadRules,
    LoadSpec,
    RotatedLoad,
    body_force,
    compatibility_report,
    default_rules,
    load_functional,
)
from .profiles import (
    as_poly,
    axial_displacement_profile,
    axial_strain_integral,
    biharmonic_residual,
    planar_profile,
    radial_displacement_profile,
    radial_ode_residual,
    radial_strain_integral,
    swirl_strain_integral,
)
from .rotations import exp_so3, rotation_about_z, skew_from_axis

DEFAULT_DEGREE = 8
DEFAULT_KAPPAS = (1e3, 1e4, 1e5, 1e6)
THETA_COARSE = 64
THETA_TOL = 1e-10


# ---------------------------------------------------------------------------
# structured closed-form fields


class StructuredField:
    """Displacement p(r^2)(a x + b y, a y - b x, 0) + (0, 0, w(z)).

    All derivatives are exact polynomial evaluations, including the
    divergence of the strain needed for equilibrium residuals.
    """

    def __init__(self, a: float, b: float, p: Polynomial, w: Polynomial):
        self.a = float(a)
        self.b = float(b)
        self.p = as_poly(p)
        self.dp = self.p.deriv()
        self.d2p = self.dp.deriv()
        self.w = as_poly(w)
        self.dw = self.w.deriv()
        self.d2w = self.dw.deriv()

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.value(points)

    def value(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
        s = x * x + y * y
        ps = self.p(s)
        out = np.empty_like(pts)
        out[:, 0] = ps * (self.a * x + self.b * y)
        out[:, 1] = ps * (self.a * y - self.b * x)
        out[:, 2] = self.w(z)
        return out

    def gradient(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
        s = x * x + y * y
        ps, dps = self.p(s), self.dp(s)
        u1_rad = self.a * x + self.b * y
        u2_rad = self.a * y - self.b * x
        G = np.zeros((pts.shape[0], 3, 3))
        G[:, 0, 0] = self.a * ps + 2.0 * x * dps * u1_rad
        G[:, 0, 1] = self.b * ps + 2.0 * y * dps * u1_rad
        G[:, 1, 0] = -self.b * ps + 2.0 * x * dps * u2_rad
        G[:, 1, 1] = self.a * ps + 2.0 * y * dps * u2_rad
        G[:, 2, 2] = self.dw(z)
        return G

    def strain(self, points: np.ndarray) -> np.ndarray:
        return strain(self.gradient(points))

    def div_strain(self, points: np.ndarray) -> np.ndarray:
        """div E(u), the equilibrium operator up to the factor -8."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
        s = x * x + y * y
        coeff = 0.5 * (8.0 * self.dp(s) + 4.0 * s * self.d2p(s))
        out = np.empty_like(pts)
        out[:, 0] = coeff * (2.0 * self.a * x + self.b * y)
        out[:, 1] = coeff * (2.0 * self.a * y - self.b * x)
        out[:, 2] = self.d2w(z)
        return out


@dataclass
class ExplicitSolution:
    phi: Polynomial
    psi: Polynomial
    eta: Polynomial
    planar: Polynomial  # p(s) with eta(r) = r p(r^2)
    axial: Polynomial  # w(z)
    radial_integral: float
    swirl_integral: float
    axial_integral: float

    def minimizer_field(self, theta: float) -> StructuredField:
        return StructuredField(np.cos(theta), -2.0 * np.sin(theta), self.planar, self.axial)

    @property
    def u0(self) -> StructuredField:
        return self.minimizer_field(0.0)

    @property
    def u_swirl(self) -> StructuredField:
        return self.minimizer_field(-0.5 * np.pi)

    @property
    def min_linear_value(self) -> float:
        return -QUADRATIC_SCALE * (2.0 * np.pi * self.radial_integral + np.pi * self.axial_integral)

    @property
    def min_swirl_value(self) -> float:
        return -QUADRATIC_SCALE * (2.0 * np.pi * self.swirl_integral + np.pi * self.axial_integral)

    @property
    def margin(self) -> float:
        return self.min_linear_value - self.min_swirl_value

    def min_rotated_value(self, theta: float) -> float:
        c, s = np.cos(theta), np.sin(theta)
        return c * c * self.min_linear_value + s * s * self.min_swirl_value


def explicit_minimizers(spec: LoadSpec) -> ExplicitSolution:
    """Closed-form per-rotation minimizers for a unit-cylinder profile load."""
    if spec.domain.kind != "cylinder" or spec.builtin is not None:
        raise ValueError("explicit minimizers exist only for cylinder profile loads")
    if abs(spec.domain.radius - 1.0) > 0 or abs(spec.domain.height - 1.0) > 0:
        raise ValueError("explicit minimizers assume the unit cylinder")
    eta = radial_displacement_profile(spec.phi)
    return ExplicitSolution(
        phi=spec.phi,
        psi=spec.psi,
        eta=eta,
        planar=planar_profile(eta),
        axial=axial_displacement_profile(spec.psi),
        radial_integral=radial_strain_integral(eta),
        swirl_integral=swirl_strain_integral(eta),
        axial_integral=axial_strain_integral(axial_displacement_profile(spec.psi)),
    )


def verify_explicit(spec: LoadSpec, n_grid: int = 1000, order: int = 16) -> dict[str, float]:
    """Residuals of the closed-form solution against its defining equations."""
    sol = explicit_minimizers(spec)
    r_grid = np.linspace(1e-3, 1.0, n_grid)
    out = {
        "ode_residual": radial_ode_residual(sol.eta, spec.phi, r_grid),
        "eta_at_0": abs(float(sol.eta(0.0))),
        "eta_slope_at_1": abs(float(sol.eta.deriv()(1.0))),
        "axial_slope_at_0": abs(float(sol.axial.deriv()(0.0))),
        "axial_slope_at_1": abs(float(sol.axial.deriv()(1.0))),
        "biharmonic_residual": biharmonic_residual(sol.eta, spec.phi, r_grid),
    }
    vol = volume_quadrature(spec.domain, order)
    surf = surface_quadrature(spec.domain, order)
    interior = vol.points
    f = body_force(spec, interior)
    u0 = sol.u0
    out["euler_lagrange_interior"] = float(
        np.max(np.abs(-8.0 * u0.div_strain(interior) - f))
    )
    tractions = np.einsum("nij,nj->ni", u0.strain(surf.points), surf.normals)
    out["boundary_traction"] = float(np.max(np.abs(tractions)))
    # the two minimizers share the same axial strain, so the full contraction
    # equals the axial energy pi * integral w'^2; the orthogonality that the
    # value decomposition rests on is that of the differing planar parts
    e0 = u0.strain(vol.points)
    e1 = sol.u_swirl.strain(vol.points)
    out["strain_orthogonality_full"] = abs(
        float(np.dot(vol.weights, np.einsum("nij,nij->n", e0, e1)))
    )
    zero = Polynomial([0.0])
    p0 = StructuredField(u0.a, u0.b, sol.planar, zero).strain(vol.points)
    p1 = StructuredField(0.0, 2.0, sol.planar, zero).strain(vol.points)
    out["strain_orthogonality"] = abs(
        float(np.dot(vol.weights, np.einsum("nij,nij->n", p0, p1)))
    )
    out["axial_overlap"] = np.pi * axial_strain_integral(sol.axial)
    return out


# ---------------------------------------------------------------------------
# quadrature evaluation of the energies at explicit fields


def quadratic_energy(field, rules: LoadRules) -> float:
    """4 * integral of |E(u)|^2 at a field with a .strain evaluator."""
    vol = rules.volume
    E = field.strain(vol.points)
    return QUADRATIC_SCALE * float(np.dot(vol.weights, np.einsum("nij,nij->n", E, E)))


def rotated_energy_value(spec, field, theta: float, rules: LoadRules) -> float:
    """Energy 4|E|^2 - L(R_theta u) of a structured field, by quadrature."""
    R = rotation_about_z(theta)
    work = load_functional(spec, lambda p: field.value(p) @ R.T, rules)
    return quadratic_energy(field, rules) - work


def work_moment(load, values: np.ndarray, rules: LoadRules) -> np.ndarray:
    """Y with L(R u) = <R, Y> for the given field values on the volume rule."""
    vol = rules.volume
    f = body_force(load, vol.points)
    return np.einsum("n,ni,nj->ij", vol.weights, f, values)


def max_work_over_axis(Y: np.ndarray, axis: np.ndarray) -> tuple[float, float]:
    """Maximize <R_theta, Y> over rotations about the axis (closed form)."""
    W = skew_from_axis(np.asarray(axis, dtype=float))
    base = float(np.sum((np.eye(3) + W @ W) * Y))
    c1 = float(np.sum(W * Y))
    c2 = float(np.sum((W @ W) * Y))
    theta = float(np.arctan2(c1, -c2))
    return base + c1 * np.sin(theta) - c2 * np.cos(theta), theta


def angle_about_axis(R: np.ndarray, axis: np.ndarray) -> float:
    """Angle theta with R = exp(theta * axis), for R in the axis subgroup."""
    axis = np.asarray(axis, dtype=float)
    W = skew_from_axis(axis / np.linalg.norm(axis))
    return float(np.arctan2(0.5 * np.sum(R * W), -0.5 * np.sum(R * (W @ W))))


# ---------------------------------------------------------------------------
# Galerkin minimization of the linear and limit energies


def _system_for(spec, kind: str, degree: int, degree1d: int | None = None,
                penalty: float | None = None) -> StiffnessSystem:
    space = build_space(kind, degree, spec.domain, degree1d=degree1d)
    return assemble(space, spec, incompressible_penalty=penalty)


def min_linear(
    spec: LoadSpec,
    incompressible: bool = False,
    degree: int = DEFAULT_DEGREE,
) -> SolveResult:
    """Galerkin minimum of the linear energy (divergence-free space when
    the incompressible flag is set, giving an upper bound of that minimum)."""
    report = compatibility_report(spec)
    if report.classification == INCOMPATIBLE:
        raise SolverError(
            "loads violate the rigid-rotation work condition; the scaled "
            "energies are unbounded below and no linear minimum exists"
        )
    kind = "div_free" if incompressible else "full"
    system = _system_for(spec, kind, degree)
    return solve_quadratic(system)


@dataclass
class IncompressibleBounds:
    upper: SolveResult  # divergence-free Galerkin value (feasible, above min)
    lower: float  # largest penalized relaxation value (below min)
    kappa_schedule: tuple[float, ...]
    kappa_values: list[float]


def incompressible_linear_bounds(
    spec: LoadSpec,
    degree: int = DEFAULT_DEGREE,
    kappas: tuple[float, ...] = DEFAULT_KAPPAS,
    rotation: np.ndarray | None = None,
) -> IncompressibleBounds:
    upper = solve_quadratic(_system_for(spec, "div_free", degree), R=rotation)
    system = _system_for(spec, "full", degree, penalty=kappas[0])
    values = []
    for kappa in kappas:
        system.penalty = kappa
        values.append(solve_quadratic(system, R=rotation, method="direct").value)
    return IncompressibleBounds(
        upper=upper, lower=values[-1], kappa_schedule=tuple(kappas), kappa_values=values
    )


def _golden_section(f, lo: float, hi: float, tol: float) -> tuple[float, float]:
    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while abs(b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


def _axis_search(system: StiffnessSystem, axis: np.ndarray,
                 compose_with: np.ndarray | None = None) -> tuple[SolveResult, float]:
    """Minimize the per-rotation Galerkin value over rotations about an axis."""
    axis = np.asarray(axis, dtype=float)
    state = {"x0": None}

    def value(theta: float) -> float:
        R = exp_so3(theta * axis)
        if compose_with is not None:
            R = compose_with @ R
        res = solve_quadratic(system, R=R, x0=state["x0"])
        state["x0"] = res.coefficients
        return res.value

    thetas = np.linspace(-np.pi, np.pi, THETA_COARSE, endpoint=False)
    vals = np.array([value(t) for t in thetas])
    k = int(np.argmin(vals))
    span = 2.0 * np.pi / THETA_COARSE
    theta, _ = _golden_section(value, thetas[k] - span, thetas[k] + span, THETA_TOL)
    R = exp_so3(theta * axis)
    if compose_with is not None:
        R = compose_with @ R
    res = solve_quadratic(system, R=R, x0=state["x0"])
    return res, float(theta)


def _so3_multistart(system: StiffnessSystem, starts: int = 8, seed: int = 0,
                    max_iter: int = 200) -> SolveResult:
    """Multistart descent of the per-rotation value over all of SO(3).

    The value function is m(R) = -b(R)' c(R) / 2 with b linear in R, so the
    envelope gradient along R exp(t W) is -<R W, sum_k c_k T_k>.
    """
    rng = np.random.default_rng(seed)
    gens = [skew_from_axis(np.eye(3)[i]) for i in range(3)]
    start_rots = [np.eye(3)] + [exp_so3(rng.uniform(-np.pi, np.pi, 3)) for _ in range(starts - 1)]
    best = None
    for R in start_rots:
        res = solve_quadratic(system, R=R)
        for _ in range(max_iter):
            Mstar = np.einsum("k,kij->ij", res.coefficients, system.load_moments)
            grad = np.array([-float(np.sum((R @ W) * Mstar)) for W in gens])
            gnorm = float(np.linalg.norm(grad))
            if gnorm < 1e-12 * max(1.0, abs(res.value)):
                break
            step = 1.0
            improved = False
            while step > 1e-14:
                Rn = R @ exp_so3(-step * grad)
                rn = solve_quadratic(system, R=Rn, x0=res.coefficients)
                if rn.value < res.value - 1e-4 * step * gnorm * gnorm:
                    R, res = Rn, rn
                    improved = True
                    break
                step *= 0.5
            if not improved:
                break
        if best is None or res.value < best.value:
            best = res
    return best


def min_limit(
    spec: LoadSpec,
    incompressible: bool = False,
    degree: int = DEFAULT_DEGREE,
    report: KernelReport | None = None,
) -> SolveResult:
    """Minimum of the relaxed energy: outer search over the rotation kernel,
    inner quadratic solve per rotation."""
    if report is None:
        report = compatibility_report(spec)
    if report.classification == INCOMPATIBLE:
        raise SolverError(
            "rotation kernel is incompatible (some rotation does positive "
            "work); the limit energy is unbounded below"
        )
    kind = "div_free" if incompressible else "full"
    system = _system_for(spec, kind, degree)
    if report.classification == IDENTITY_ONLY:
        return solve_quadratic(system)
    if report.classification == AXIS_SUBGROUP:
        res, _ = _axis_search(system, report.axis)
        return res
    return _so3_multistart(system)


# ---------------------------------------------------------------------------
# reports


@dataclass
class DecompositionRow:
    theta: float
    value: float
    predicted: float
    residual: float


@dataclass
class IncompressibleGap:
    min_EI_upper: float
    min_EI_lower: float
    min_GI_upper: float
    certified: bool
    kappa_schedule: tuple[float, ...]
    kappa_values: list[float]
    degree: int


@dataclass
class GapReport:
    min_E: float
    min_G: float
    optimal_theta: float
    margin: float
    relative_margin: float
    classification: str
    galerkin_degree: int
    galerkin_min_E: float
    galerkin_min_G: float
    galerkin_rel_err_E: float
    galerkin_rel_err_G: float
    incompressible: IncompressibleGap
    decomposition: list[DecompositionRow] = field(default_factory=list)


DECOMPOSITION_THETAS = (-0.5 * np.pi, -0.25 * np.pi, 0.0, 0.25 * np.pi, 0.5 * np.pi)


def gap_report(
    spec: LoadSpec,
    degree: int = DEFAULT_DEGREE,
    kappas: tuple[float, ...] = DEFAULT_KAPPAS,
    order: int = 16,
) -> GapReport:
    """Certify the gap between the relaxed and the classical linear minima.

    Headline compressible numbers come from the closed-form minimizers via
    one-dimensional quadrature; the Galerkin solves are the independent
    cross-check.  The incompressible side reports the sandwich described in
    the module docstring.
    """
    kernel = compatibility_report(spec)
    if kernel.classification == INCOMPATIBLE:
        raise SolverError("gap report requires compatible loads")
    sol = explicit_minimizers(spec)
    rules = default_rules(spec, order)

    min_E = sol.min_linear_value
    min_G = sol.min_swirl_value

    galerkin_E = solve_quadratic(_system_for(spec, "full", degree))
    limit_res = min_limit(spec, degree=degree, report=kernel)
    rel_E = abs(galerkin_E.value - min_E) / abs(min_E)
    rel_G = abs(limit_res.value - min_G) / abs(min_G)

    # optimal rotation angle about the kernel axis, from the numerical search
    if kernel.classification == AXIS_SUBGROUP and limit_res.rotation is not None:
        theta_opt = angle_about_axis(limit_res.rotation, kernel.axis)
    else:
        theta_opt = -0.5 * np.pi

    rows = []
    for theta in DECOMPOSITION_THETAS:
        u_theta = sol.minimizer_field(theta)
        value = rotated_energy_value(spec, u_theta, theta, rules)
        predicted = sol.min_rotated_value(theta)
        rows.append(
            DecompositionRow(
                theta=float(theta),
                value=value,
                predicted=predicted,
                residual=abs(value - predicted),
            )
        )

    swirl = rotation_about_z(-0.5 * np.pi)
    bounds = incompressible_linear_bounds(spec, degree=degree, kappas=kappas)
    gi_upper = solve_quadratic(_system_for(spec, "ansatz_k_div", degree), R=swirl)
    inc = IncompressibleGap(
        min_EI_upper=bounds.upper.value,
        min_EI_lower=bounds.lower,
        min_GI_upper=gi_upper.value,
        certified=bool(gi_upper.value < bounds.lower),
        kappa_schedule=tuple(kappas),
        kappa_values=bounds.kappa_values,
        degree=degree,
    )
    return GapReport(
        min_E=min_E,
        min_G=min_G,
        optimal_theta=float(theta_opt),
        margin=sol.margin,
        relative_margin=sol.margin / abs(min_E),
        classification=kernel.classification,
        galerkin_degree=degree,
        galerkin_min_E=galerkin_E.value,
        galerkin_min_G=limit_res.value,
        galerkin_rel_err_E=rel_E,
        galerkin_rel_err_G=rel_G,
        incompressible=inc,
        decomposition=rows,
    )


@dataclass
class RotatedCheck:
    rotation_theta: float
    min_E_rotated: float
    min_G_rotated: float
    difference: float
    relative_difference: float
    kernel_unchanged: bool
    gap_at_identity: float


def rotated_no_gap_check(spec: LoadSpec, degree: int = DEFAULT_DEGREE) -> RotatedCheck:
    """With the optimal kernel rotation folded into the loads, the relaxed
    and the classical linear minima agree; quantify the residual difference."""
    kernel = compatibility_report(spec)
    if kernel.classification not in (AXIS_SUBGROUP, FULL_SO3):
        raise SolverError("rotated check needs a nontrivial rotation kernel")
    axis = kernel.axis if kernel.classification == AXIS_SUBGROUP else np.array([0.0, 0.0, 1.0])
    system = _system_for(spec, "full", degree)
    base, theta_star = _axis_search(system, axis)
    R_star = exp_so3(theta_star * axis)

    # rotated loads: L_R(v) = L(R v); its linear minimum is the solve at R_star,
    # and its relaxed minimum searches R_star composed with the (unchanged) kernel
    min_E_rot = solve_quadratic(system, R=R_star).value
    rotated_res, _ = _axis_search(system, axis, compose_with=R_star)
    min_G_rot = rotated_res.value

    rotated = RotatedLoad(base=spec, rotation=R_star)
    kernel_rot = compatibility_report(rotated)
    unchanged = kernel_rot.classification == kernel.classification
    if unchanged and kernel.classification == AXIS_SUBGROUP:
        unchanged = bool(np.allclose(kernel_rot.axis, kernel.axis, atol=1e-8))

    identity_gap = solve_quadratic(system).value - base.value
    diff = abs(min_G_rot - min_E_rot)
    return RotatedCheck(
        rotation_theta=theta_star,
        min_E_rotated=min_E_rot,
        min_G_rotated=min_G_rot,
        difference=diff,
        relative_difference=diff / abs(min_E_rot),
        kernel_unchanged=unchanged,
        gap_at_identity=identity_gap,
    )


@dataclass
class NonuniquenessCheck:
    value_at_minimizer: float
    value_at_mirror: float
    relative_value_difference: float
    strain_distance: float
    strain_norm: float
    distinct: bool
    mirror_theta: float


def nonuniqueness_check(spec: LoadSpec, order: int = 16) -> NonuniquenessCheck:
    """The planar sign flip of the swirl minimizer is again a minimizer but
    differs by more than an infinitesimal rigid displacement."""
    kernel = compatibility_report(spec)
    if kernel.classification != AXIS_SUBGROUP:
        raise SolverError("nonuniqueness check needs the axis-subgroup kernel")
    sol = explicit_minimizers(spec)
    rules = default_rules(spec, order)
    u_star = sol.u_swirl
    u_hat = StructuredField(-u_star.a, -u_star.b, u_star.p, u_star.w)

    vol = rules.volume
    axis = kernel.axis

    def limit_value(fld) -> tuple[float, float]:
        Y = work_moment(spec, fld.value(vol.points), rules)
        best_work, theta = max_work_over_axis(Y, axis)
        return quadratic_energy(fld, rules) - best_work, theta

    v_star, _ = limit_value(u_star)
    v_hat, theta_hat = limit_value(u_hat)

    E_star = u_star.strain(vol.points)
    E_hat = u_hat.strain(vol.points)
    diff = E_hat - E_star
    norm_star = np.sqrt(float(np.dot(vol.weights, np.einsum("nij,nij->n", E_star, E_star))))
    norm_diff = np.sqrt(float(np.dot(vol.weights, np.einsum("nij,nij->n", diff, diff))))
    rel = abs(v_hat - v_star) / abs(v_star)
    return NonuniquenessCheck(
        value_at_minimizer=v_star,
        value_at_mirror=v_hat,
        relative_value_difference=rel,
        strain_distance=norm_diff,
        strain_norm=norm_star,
        distinct=bool(norm_diff > 0.1 * norm_star),
        mirror_theta=theta_hat,
    )
