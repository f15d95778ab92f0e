"""Kirchhoff-Saint-Venant stored energy and its quadratic form.

density(F) = |F^T F - I|^2 vanishes exactly on rotations and is frame
indifferent.  Its Hessian at the identity acts only on symmetric strains,
so the quadratic form is implemented as 4 |sym F|^2 (the two conventions
agree on the symmetric arguments the theory evaluates it at).
"""

from __future__ import annotations

import numpy as np

QUADRATIC_SCALE = 4.0
INCOMPRESSIBLE_TRACE_TOL = 1e-12

_I = np.eye(3)


def density(F: np.ndarray) -> np.ndarray | float:
    """|F^T F - I|^2, batched over leading axes."""
    F = np.asarray(F, dtype=float)
    C = np.swapaxes(F, -1, -2) @ F - _I
    out = np.einsum("...ij,...ij->...", C, C)
    return float(out) if out.ndim == 0 else out


def density_gradient(F: np.ndarray) -> np.ndarray:
    """dW/dF = 4 F (F^T F - I)."""
    F = np.asarray(F, dtype=float)
    C = np.swapaxes(F, -1, -2) @ F - _I
    return 4.0 * (F @ C)


def quadratic_form(F: np.ndarray) -> np.ndarray | float:
    """Q(F) = 4 |sym F|^2."""
    F = np.asarray(F, dtype=float)
    S = 0.5 * (F + np.swapaxes(F, -1, -2))
    out = QUADRATIC_SCALE * np.einsum("...ij,...ij->...", S, S)
    return float(out) if out.ndim == 0 else out


def quadratic_form_incompressible(F: np.ndarray) -> float:
    """Q(F) when tr F = 0, +inf otherwise."""
    F = np.asarray(F, dtype=float)
    if abs(float(np.trace(F))) >= INCOMPRESSIBLE_TRACE_TOL:
        return np.inf
    return float(quadratic_form(F))


def taylor_residual(B: np.ndarray, h: float) -> float:
    """|h^-2 density(I + h B) - Q(sym B)|; decays like O(h)."""
    if h <= 0:
        raise ValueError("h must be positive")
    B = np.asarray(B, dtype=float)
    return abs(float(density(_I + h * B)) / h ** 2 - float(quadratic_form(B)))
