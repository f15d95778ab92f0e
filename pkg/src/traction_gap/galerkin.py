"""Polynomial displacement spaces, quadratic assembly, and null-space-aware
conjugate-gradient minimization.

Space kinds
-----------
* ``full``         -- every displacement component spanned by products of 1D
                      Legendre polynomials on the bounding box with total
                      degree <= degree.
* ``ansatz_k``     -- planar fields (m_y, -m_x, 0) from a 2D scalar potential
                      of total degree <= degree, plus axial fields (0, 0, w(z))
                      with deg w <= degree1d.
* ``ansatz_k_div`` -- the planar (exactly divergence-free) part only.
* ``div_free``     -- curls of polynomial vector potentials of total degree
                      <= degree + 1; exactly divergence-free, rank-deficient
                      by construction (deflated numerically).

The assembled quadratic form is A_ij = 8 * integral of E(b_i) : E(b_j), so
the energy of a coefficient vector c is c'Ac/2 = 4 |E(u)|^2 integrated, and
load vectors per rotation come from precomputed first-moment tensors:
L(R b_k) = <R, T_k>.  Rigid (and, for ``div_free``, redundant) directions
are deflated by projection, which keeps the reported energy exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Domain, QuadratureRule, volume_quadrature, surface_quadrature
from .loads import LoadRules, body_force, surface_force

KERNEL_EIGENVALUE_CUT = 1e-10
COMPATIBILITY_TOL = 1e-8
CG_TOL = 1e-12


class AssemblyError(RuntimeError):
    pass


class SolverError(RuntimeError):
    def __init__(self, message: str, history: list[float] | None = None):
        super().__init__(message)
        self.history = history or []


def _legendre_tables(x: np.ndarray, deg: int, lo: float, hi: float, nder: int) -> np.ndarray:
    """Values and derivatives of Legendre P_0..P_deg scaled to [lo, hi].

    Returns (nder+1, deg+1, N); row d holds the d-th derivative.
    """
    t = (2.0 * x - (lo + hi)) / (hi - lo)
    scale = 2.0 / (hi - lo)
    out = np.empty((nder + 1, deg + 1, x.size))
    eye = np.eye(deg + 1)
    for i in range(deg + 1):
        c = eye[i]
        for d in range(nder + 1):
            out[d, i] = np.polynomial.legendre.legval(t, c) * scale ** d
            c = np.polynomial.legendre.legder(c)
    return out


def _total_degree_indices(deg: int, ndim: int) -> list[tuple[int, ...]]:
    if ndim == 2:
        return [(i, j) for i in range(deg + 1) for j in range(deg + 1 - i)]
    return [
        (i, j, k)
        for i in range(deg + 1)
        for j in range(deg + 1 - i)
        for k in range(deg + 1 - i - j)
    ]


@dataclass
class GalerkinSpace:
    kind: str
    domain: Domain
    degree: int
    degree1d: int | None = None
    _tables: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        a = self.domain.radius
        h = self.domain.height if self.domain.kind == "cylinder" else self.domain.radius
        self._box = (a, h)
        if self.kind == "full":
            self._idx = _total_degree_indices(self.degree, 3)
            self.dim = 3 * len(self._idx)
        elif self.kind in ("ansatz_k", "ansatz_k_div"):
            if self.domain.kind != "cylinder":
                raise ValueError("ansatz spaces are cylinder-only")
            self._idx2 = [ij for ij in _total_degree_indices(self.degree, 2) if ij != (0, 0)]
            if self.kind == "ansatz_k":
                self._naxial = (self.degree1d if self.degree1d is not None else 4) + 1
            else:
                self._naxial = 0
            self.dim = len(self._idx2) + self._naxial
        elif self.kind == "div_free":
            idx = _total_degree_indices(self.degree + 1, 3)
            self._idx = [m for m in idx if sum(m) >= 1]
            self.dim = 3 * len(self._idx)
        else:
            raise ValueError(f"unknown space kind {self.kind!r}")

    # -- basis tables -------------------------------------------------

    def tables(self, rule: QuadratureRule) -> tuple[np.ndarray, np.ndarray]:
        """(values (K,N,3), gradients (K,N,3,3)) at the rule's nodes."""
        key = id(rule)
        hit = self._tables.get(key)
        if hit is not None and hit[0] is rule:
            return hit[1], hit[2]
        vals, grads = self._build_tables(rule)
        self._tables[key] = (rule, vals, grads)
        return vals, grads

    def _build_tables(self, rule: QuadratureRule):
        pts = rule.points
        N = pts.shape[0]
        a, h = self._box
        K = self.dim
        vals = np.zeros((K, N, 3))
        grads = np.zeros((K, N, 3, 3))
        if self.kind in ("full", "div_free"):
            deg = self.degree if self.kind == "full" else self.degree + 1
            nder = 1 if self.kind == "full" else 2
            zlo = 0.0 if self.domain.kind == "cylinder" else -h
            Lx = _legendre_tables(pts[:, 0], deg, -a, a, nder)
            Ly = _legendre_tables(pts[:, 1], deg, -a, a, nder)
            Lz = _legendre_tables(pts[:, 2], deg, zlo, h, nder)
            nscal = len(self._idx)
            sval = np.empty((nscal, N))
            sgrad = np.empty((nscal, N, 3))
            for m, (i, j, k) in enumerate(self._idx):
                sval[m] = Lx[0, i] * Ly[0, j] * Lz[0, k]
                sgrad[m, :, 0] = Lx[1, i] * Ly[0, j] * Lz[0, k]
                sgrad[m, :, 1] = Lx[0, i] * Ly[1, j] * Lz[0, k]
                sgrad[m, :, 2] = Lx[0, i] * Ly[0, j] * Lz[1, k]
            if self.kind == "full":
                for c in range(3):
                    vals[c * nscal:(c + 1) * nscal, :, c] = sval
                    grads[c * nscal:(c + 1) * nscal, :, c, :] = sgrad
            else:
                shess = np.empty((nscal, N, 3, 3))
                for m, (i, j, k) in enumerate(self._idx):
                    shess[m, :, 0, 0] = Lx[2, i] * Ly[0, j] * Lz[0, k]
                    shess[m, :, 1, 1] = Lx[0, i] * Ly[2, j] * Lz[0, k]
                    shess[m, :, 2, 2] = Lx[0, i] * Ly[0, j] * Lz[2, k]
                    sxy = Lx[1, i] * Ly[1, j] * Lz[0, k]
                    sxz = Lx[1, i] * Ly[0, j] * Lz[1, k]
                    syz = Lx[0, i] * Ly[1, j] * Lz[1, k]
                    shess[m, :, 0, 1] = shess[m, :, 1, 0] = sxy
                    shess[m, :, 0, 2] = shess[m, :, 2, 0] = sxz
                    shess[m, :, 1, 2] = shess[m, :, 2, 1] = syz
                # field = grad(m) x e_c; gradient rows from Hessian columns
                for c in range(3):
                    sl = slice(c * nscal, (c + 1) * nscal)
                    e = np.zeros(3)
                    e[c] = 1.0
                    vals[sl] = np.cross(sgrad, e[None, None, :])
                    grads[sl] = np.cross(np.swapaxes(shess, 2, 3), e[None, None, None, :])
                    grads[sl] = np.swapaxes(grads[sl], 2, 3)
        else:
            d2 = self.degree
            Lx = _legendre_tables(pts[:, 0], d2, -a, a, 2)
            Ly = _legendre_tables(pts[:, 1], d2, -a, a, 2)
            for m, (i, j) in enumerate(self._idx2):
                vals[m, :, 0] = Lx[0, i] * Ly[1, j]
                vals[m, :, 1] = -Lx[1, i] * Ly[0, j]
                grads[m, :, 0, 0] = Lx[1, i] * Ly[1, j]
                grads[m, :, 0, 1] = Lx[0, i] * Ly[2, j]
                grads[m, :, 1, 0] = -Lx[2, i] * Ly[0, j]
                grads[m, :, 1, 1] = -Lx[1, i] * Ly[1, j]
            if self._naxial:
                Lz = _legendre_tables(pts[:, 2], self._naxial - 1, 0.0, h, 1)
                base = len(self._idx2)
                for k in range(self._naxial):
                    vals[base + k, :, 2] = Lz[0, k]
                    grads[base + k, :, 2, 2] = Lz[1, k]
        return vals, grads

    def evaluate(self, coeffs: np.ndarray, rule: QuadratureRule) -> np.ndarray:
        vals, _ = self.tables(rule)
        return np.tensordot(coeffs, vals, axes=(0, 0))

    def gradients(self, coeffs: np.ndarray, rule: QuadratureRule) -> np.ndarray:
        _, grads = self.tables(rule)
        return np.tensordot(coeffs, grads, axes=(0, 0))

    # -- rigid displacements ------------------------------------------

    def rigid_coefficients(self) -> np.ndarray | None:
        """Exact coefficient vectors of the representable rigid fields.

        None for ``div_free``, where the null space (rigid plus redundant
        combinations) is detected numerically instead.
        """
        a, h = self._box
        if self.kind == "full":
            nscal = len(self._idx)
            pos = {m: n for n, m in enumerate(self._idx)}
            zlo = 0.0 if self.domain.kind == "cylinder" else -h
            # coordinate expansions in the scaled Legendre family
            #   x = a P1(x/a);  z = mid + half * P1(.) on [zlo, h]
            zmid, zhalf = 0.5 * (zlo + h), 0.5 * (h - zlo)
            vecs = np.zeros((6, self.dim))
            for c in range(3):  # translations
                vecs[c, c * nscal + pos[(0, 0, 0)]] = 1.0
            # spin about x: (0, -z, y)
            vecs[3, 1 * nscal + pos[(0, 0, 0)]] = -zmid
            vecs[3, 1 * nscal + pos[(0, 0, 1)]] = -zhalf
            vecs[3, 2 * nscal + pos[(0, 1, 0)]] = a
            # spin about y: (z, 0, -x)
            vecs[4, 0 * nscal + pos[(0, 0, 0)]] = zmid
            vecs[4, 0 * nscal + pos[(0, 0, 1)]] = zhalf
            vecs[4, 2 * nscal + pos[(1, 0, 0)]] = -a
            # spin about z: (-y, x, 0)
            vecs[5, 0 * nscal + pos[(0, 1, 0)]] = -a
            vecs[5, 1 * nscal + pos[(1, 0, 0)]] = a
            return vecs
        if self.kind in ("ansatz_k", "ansatz_k_div"):
            pos = {m: n for n, m in enumerate(self._idx2)}
            rows = []
            tx = np.zeros(self.dim)
            tx[pos[(0, 1)]] = a  # potential y -> field (1, 0, 0)
            rows.append(tx)
            ty = np.zeros(self.dim)
            ty[pos[(1, 0)]] = -a  # potential -x -> field (0, 1, 0)
            rows.append(ty)
            if self.degree >= 2:
                spin = np.zeros(self.dim)
                # potential -(x^2+y^2)/2 -> field (-y, x, 0); x^2 = a^2 (2 P2 + 1)/3
                spin[pos[(2, 0)]] = -(a * a) / 3.0
                spin[pos[(0, 2)]] = -(a * a) / 3.0
                rows.append(spin)
            if self._naxial:
                tz = np.zeros(self.dim)
                tz[len(self._idx2)] = 1.0
                rows.append(tz)
            return np.stack(rows)
        return None

    def recommended_order(self, nonlinear: bool = False) -> int:
        """Quadrature order making the assembled integrands exact.

        Field degree d gives stiffness integrands of polynomial degree
        2(d-1) (quartic in the nonlinear energy); the radial Gauss rule of
        order n is exact through degree 2n-1 and the angular rule carries
        2n nodes (harmonics through 2n-1).
        """
        if self.kind in ("full", "div_free"):
            fdeg = self.degree
        else:
            fdeg = max(self.degree - 1, (self._naxial - 1) if self._naxial else 1)
        if nonlinear:
            return max(2 * fdeg + 2, 12)
        return max(fdeg + 2, 10)


def strain(gradient: np.ndarray) -> np.ndarray:
    """Symmetric part of a displacement gradient (batched)."""
    g = np.asarray(gradient, dtype=float)
    return 0.5 * (g + np.swapaxes(g, -1, -2))


def build_space(kind: str, degree: int, domain: Domain, degree1d: int | None = None) -> GalerkinSpace:
    return GalerkinSpace(kind=kind, domain=domain, degree=degree, degree1d=degree1d)


@dataclass
class StiffnessSystem:
    space: GalerkinSpace
    rules: LoadRules
    A: np.ndarray
    load_moments: np.ndarray  # (K, 3, 3); b_k(R) = <R, T_k>
    kernel: np.ndarray  # orthonormal rows spanning ker A
    rigid: np.ndarray | None  # exact rigid coefficient vectors
    div_matrix: np.ndarray | None = None
    penalty: float | None = None

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def load_vector(self, R: np.ndarray | None = None) -> np.ndarray:
        if R is None:
            R = np.eye(3)
        return np.einsum("kij,ij->k", self.load_moments, R)

    def operator(self) -> np.ndarray:
        if self.penalty:
            return self.A + self.penalty * self.div_matrix
        return self.A


def _principal_angle(U: np.ndarray, V: np.ndarray) -> float:
    """Largest principal angle (radians) between two row-spans."""
    qu = np.linalg.qr(U.T)[0]
    qv = np.linalg.qr(V.T)[0]
    s = np.linalg.svd(qu.T @ qv, compute_uv=False)
    return float(np.arccos(np.clip(s.min(), -1.0, 1.0)))


def assemble(
    space: GalerkinSpace,
    load,
    rules: LoadRules | None = None,
    incompressible_penalty: float | None = None,
) -> StiffnessSystem:
    """Quadratic form, load moment tensors, and the deflation basis."""
    if rules is None:
        order = space.recommended_order()
        vol = volume_quadrature(space.domain, order)
        surf = surface_quadrature(space.domain, order) if load.has_surface_term else None
        rules = LoadRules(volume=vol, surface=surf)
    vol = rules.volume
    vals, grads = space.tables(vol)
    K, N = space.dim, len(vol)
    E = strain(grads).reshape(K, N * 9)
    Ew = E * np.repeat(vol.weights, 9)[None, :]
    A = 8.0 * (Ew @ E.T)
    A = 0.5 * (A + A.T)

    f = body_force(load, vol.points)
    moments = np.einsum("n,ni,knj->kij", vol.weights, f, vals)
    if load.has_surface_term:
        surf = rules.surface
        if surf is None:
            raise AssemblyError("pressure load assembled without a surface rule")
        svals, _ = space.tables(surf)
        g = surface_force(load, surf.normals)
        moments += np.einsum("n,ni,knj->kij", surf.weights, g, svals)

    div = np.trace(grads, axis1=2, axis2=3)  # (K, N)
    D = None
    if incompressible_penalty is not None:
        Dw = div * vol.weights[None, :]
        D = Dw @ div.T
        D = 0.5 * (D + D.T)

    eigvals, eigvecs = np.linalg.eigh(A)
    scale = max(eigvals[-1], 1.0)
    nkern = int(np.sum(eigvals < KERNEL_EIGENVALUE_CUT * scale))
    kernel = eigvecs[:, :nkern].T.copy()

    rigid = space.rigid_coefficients()
    if rigid is not None:
        if nkern != rigid.shape[0]:
            raise AssemblyError(
                f"numeric kernel dimension {nkern} != analytic rigid dimension "
                f"{rigid.shape[0]}; assembly is inconsistent"
            )
        if _principal_angle(kernel, rigid) > 1e-6:
            raise AssemblyError("numeric kernel does not span the rigid modes")
    return StiffnessSystem(
        space=space,
        rules=rules,
        A=A,
        load_moments=moments,
        kernel=kernel,
        rigid=rigid,
        div_matrix=D,
        penalty=incompressible_penalty,
    )


@dataclass
class SolveResult:
    coefficients: np.ndarray
    value: float
    rotation: np.ndarray | None
    residual_norm: float
    iterations: int
    status: str
    history: list[float] = field(default_factory=list)


def _project_out(Z: np.ndarray, v: np.ndarray) -> np.ndarray:
    if Z.size == 0:
        return v
    return v - Z.T @ (Z @ v)


def projected_cg(
    A: np.ndarray,
    b: np.ndarray,
    Z: np.ndarray,
    tol: float = CG_TOL,
    maxiter: int | None = None,
    x0: np.ndarray | None = None,
) -> tuple[np.ndarray, list[float], int, bool]:
    """CG on the orthogonal complement of the rows of Z (A SPD there)."""
    n = b.size
    if maxiter is None:
        maxiter = 10 * n
    bp = _project_out(Z, b)
    bn = float(np.linalg.norm(bp))
    if bn == 0.0:
        return np.zeros(n), [0.0], 0, True
    x = _project_out(Z, x0.copy()) if x0 is not None else np.zeros(n)
    r = _project_out(Z, bp - A @ x)
    p = r.copy()
    rs = float(r @ r)
    history = [np.sqrt(rs)]
    restarted = False
    best = rs
    since_best = 0
    it = 0
    while it < maxiter:
        if np.sqrt(rs) <= tol * bn:
            return x, history, it, True
        Ap = _project_out(Z, A @ p)
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            break  # numerically lost positive-definiteness; trigger restart path
        alpha = rs / pAp
        x += alpha * p
        r -= alpha * Ap
        r = _project_out(Z, r)
        rs_new = float(r @ r)
        history.append(np.sqrt(rs_new))
        if rs_new < best * 0.99:
            best, since_best = rs_new, 0
        else:
            since_best += 1
        if since_best > 200:
            if restarted:
                raise SolverError(
                    f"projected CG stagnated at residual {np.sqrt(rs_new):.3e} "
                    f"(target {tol * bn:.3e})",
                    history[-50:],
                )
            restarted = True
            r = _project_out(Z, bp - A @ x)
            p = r.copy()
            rs = float(r @ r)
            best, since_best = rs, 0
            it += 1
            continue
        beta = rs_new / rs
        rs = rs_new
        p = r + beta * p
        it += 1
    converged = np.sqrt(rs) <= tol * bn
    if not converged:
        raise SolverError(
            f"projected CG did not converge in {maxiter} iterations "
            f"(residual {np.sqrt(rs):.3e}, target {tol * bn:.3e})",
            history[-50:],
        )
    return x, history, it, True


def solve_quadratic(
    system: StiffnessSystem,
    R: np.ndarray | None = None,
    b: np.ndarray | None = None,
    x0: np.ndarray | None = None,
    tol: float = CG_TOL,
    method: str = "cg",
) -> SolveResult:
    """Minimize c'Ac/2 - c'b over the complement of the rigid modes.

    ``method="direct"`` solves through the eigendecomposition of the
    operator instead; the penalized systems of the incompressible lower
    bound are too stiff for unpreconditioned CG at large penalty weights.
    """
    if b is None:
        b = system.load_vector(R)
    Z = system.kernel
    bn = max(1.0, float(np.linalg.norm(b)))
    overlap = Z @ b if Z.size else np.zeros(0)
    if overlap.size and float(np.max(np.abs(overlap))) > COMPATIBILITY_TOL * bn:
        k = int(np.argmax(np.abs(overlap)))
        mode = "translation (null-resultant condition)" if _looks_like_translation(
            system, Z[k]
        ) else "infinitesimal rotation (null-momentum condition)"
        raise SolverError(
            f"load vector does work on a rigid {mode}: |Z b| = {abs(overlap[k]):.3e}"
        )
    A = system.operator()
    if method == "direct":
        x, history, iters = _direct_solve(A, b), [0.0], 0
    else:
        x, history, iters, _ = projected_cg(A, b, Z, tol=tol, x0=x0)
    x = _remove_rigid_component(system, x)
    value = 0.5 * float(x @ A @ x) - float(x @ b)
    res = float(np.linalg.norm(_project_out(Z, b - A @ x)))
    return SolveResult(
        coefficients=x,
        value=value,
        rotation=None if R is None else np.asarray(R, dtype=float),
        residual_norm=res,
        iterations=iters,
        status="converged",
        history=history[-10:],
    )


def _direct_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    eigvals, V = np.linalg.eigh(A)
    mask = eigvals > KERNEL_EIGENVALUE_CUT * max(eigvals[-1], 1.0)
    return V[:, mask] @ ((V[:, mask].T @ b) / eigvals[mask])


def _looks_like_translation(system: StiffnessSystem, z: np.ndarray) -> bool:
    vals = system.space.evaluate(z, system.rules.volume)
    mean = system.rules.volume.weights @ vals / np.sum(system.rules.volume.weights)
    return float(np.linalg.norm(mean)) > 1e-6


def _remove_rigid_component(system: StiffnessSystem, x: np.ndarray) -> np.ndarray:
    """Subtract the L^2-rigid part of the solution field (energy unchanged)."""
    basis = system.rigid if system.rigid is not None else system.kernel
    if basis is None or basis.size == 0:
        return x
    vol = system.rules.volume
    fields = np.stack([system.space.evaluate(v, vol) for v in basis])
    sol = system.space.evaluate(x, vol)
    G = np.einsum("ani,n,bni->ab", fields, vol.weights, fields)
    m = np.einsum("ani,n,ni->a", fields, vol.weights, sol)
    gamma = np.linalg.lstsq(G, m, rcond=None)[0]
    return x - basis.T @ gamma
