"""Frame machinery: Maurer-Cartan assembly, flatness, integration, reduction.

The 1-form Theta = A dx + B dy is stored as two (nx, ny, 5, 5) arrays of
affine-algebra values in the 5x5 representation [[0, 0], [p, x]].  A frame
field stores one 5x5 group element per node; the immersion is its
translation part.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import DEFAULT_TOLS, Tolerances
from .core import (
    AffineAlgebra4,
    AffineSymplecticElement,
    J4,
    symplectic_defect,
)
from .errors import (
    FrameDefect,
    IntegrationBlowup,
    NotAdapted,
    NotElliptic,
    NotLagrangian,
    UmbilicGaugeWarning,
)
from .grids import ComplexGrid, GridGeometry, diff4
from .invariants import InvariantTriple
from . import grids


@dataclass(frozen=True)
class MaurerCartanField:
    """Per-node coefficient pair (A, B) of Theta = A dx + B dy."""

    geometry: GridGeometry
    A: np.ndarray  # (nx, ny, 5, 5)
    B: np.ndarray

    def node(self, i: int, j: int) -> tuple[AffineAlgebra4, AffineAlgebra4]:
        return (AffineAlgebra4.from_matrix5(self.A[i, j]),
                AffineAlgebra4.from_matrix5(self.B[i, j]))


@dataclass(frozen=True)
class FrameField:
    """Group-valued field S(x, y) with integration diagnostics."""

    geometry: GridGeometry
    S: np.ndarray  # (nx, ny, 5, 5)
    flatness_report: float = 0.0
    path_defect: float = 0.0

    def node(self, i: int, j: int, tol: float = 1e-6) -> AffineSymplecticElement:
        return AffineSymplecticElement.from_matrix5(self.S[i, j], tol)

    def max_symplectic_defect(self) -> float:
        X = self.S[:, :, 1:, 1:]
        E = np.swapaxes(X, -1, -2) @ J4 @ X - J4
        return float(np.max(np.abs(E)))


@dataclass(frozen=True)
class ImmersionGrid:
    """R^4-valued immersion samples f[i, j] on a grid."""

    geometry: GridGeometry
    f: np.ndarray  # (nx, ny, 4)

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float)
        if f.shape != (self.geometry.nx, self.geometry.ny, 4):
            raise ValueError(f"immersion values have shape {f.shape}")
        if not np.all(np.isfinite(f)):
            raise ValueError("immersion values must be finite")
        object.__setattr__(self, "f", f)


@dataclass(frozen=True)
class FirstOrderFrameData:
    """Diagnostics of the first/second order reduction stages."""

    l1: np.ndarray
    l2: np.ndarray
    phi: np.ndarray
    ell: np.ndarray


# -- Theta from invariants ----------------------------------------------------


def theta_from_invariants(inv: InvariantTriple) -> MaurerCartanField:
    """Assemble the flat 1-form whose frame integral realizes (t, h, p).

    Coefficient layout per node (upper-left 1-row is zero):
      translation: (t1, -t2, 0, 0) dx + (-t2, -t1, 0, 0) dy
      alpha from h, gamma constant, beta from the derivative terms of h and p.
    """
    geom = inv.geometry
    t = inv.t.values
    h = inv.h.values
    p = inv.p.values
    t1, t2 = t.real, t.imag
    h1, h2 = h.real, h.imag
    habs2 = np.abs(h) ** 2

    h_zbar = grids.d_zbar(inv.h).values
    ups_x = 2.0 * h_zbar.real
    ups_y = -2.0 * h_zbar.imag
    rho_x = p + habs2
    rho_y = 1j * (p - habs2)

    nx, ny = geom.nx, geom.ny
    A = np.zeros((nx, ny, 5, 5))
    B = np.zeros((nx, ny, 5, 5))

    # translation parts
    A[..., 1, 0] = t1
    A[..., 2, 0] = -t2
    B[..., 1, 0] = -t2
    B[..., 2, 0] = -t1

    def fill(M, alpha, beta, gamma):
        M[..., 1:3, 1:3] = alpha
        M[..., 1:3, 3:5] = beta
        M[..., 3:5, 1:3] = gamma
        M[..., 3:5, 3:5] = -np.swapaxes(alpha, -1, -2)

    def sym2(b11, b12, b22):
        out = np.empty(b11.shape + (2, 2))
        out[..., 0, 0] = b11
        out[..., 0, 1] = b12
        out[..., 1, 0] = b12
        out[..., 1, 1] = b22
        return out

    alpha_x = np.empty((nx, ny, 2, 2))
    alpha_x[..., 0, 0] = h1
    alpha_x[..., 0, 1] = -h2
    alpha_x[..., 1, 0] = -h2
    alpha_x[..., 1, 1] = -h1
    alpha_y = np.empty((nx, ny, 2, 2))
    alpha_y[..., 0, 0] = -h2
    alpha_y[..., 0, 1] = -h1
    alpha_y[..., 1, 0] = -h1
    alpha_y[..., 1, 1] = h2

    beta_x = sym2(ups_x + rho_x.real, -rho_x.imag, ups_x - rho_x.real)
    beta_y = sym2(ups_y + rho_y.real, -rho_y.imag, ups_y - rho_y.real)

    gamma_x = np.broadcast_to(np.array([[1.0, 0.0], [0.0, -1.0]]), (nx, ny, 2, 2))
    gamma_y = np.broadcast_to(np.array([[0.0, 1.0], [1.0, 0.0]]), (nx, ny, 2, 2))

    fill(A, alpha_x, beta_x, gamma_x)
    fill(B, alpha_y, beta_y, gamma_y)
    return MaurerCartanField(geom, A, B)


def flatness_residual(theta: MaurerCartanField) -> np.ndarray:
    """Node-wise sup-norm of dB/dx - dA/dy + [A, B] (zero-curvature residual)."""
    geom = theta.geometry
    dBdx = diff4(theta.B, geom.dx, axis=0)
    dAdy = diff4(theta.A, geom.dy, axis=1)
    comm = theta.A @ theta.B - theta.B @ theta.A
    return np.max(np.abs(dBdx - dAdy + comm), axis=(-1, -2))


# -- frame integration --------------------------------------------------------


def _midpoints(M: np.ndarray) -> np.ndarray:
    """Cubic-interpolated midpoint samples along axis 0; shape (n-1, ...)."""
    n = M.shape[0]
    mid = np.empty((n - 1,) + M.shape[1:], dtype=M.dtype)
    mid[1:-1] = (-M[:-3] + 9.0 * M[1:-2] + 9.0 * M[2:-1] - M[3:]) / 16.0
    w = np.array([5.0, 15.0, -5.0, 1.0]) / 16.0
    mid[0] = np.tensordot(w, M[:4], axes=(0, 0))
    mid[-1] = np.tensordot(w, M[-1:-5:-1], axes=(0, 0))
    return mid


def _project_symplectic(S: np.ndarray) -> np.ndarray:
    """One Newton step of X <- X (I + J E / 2) onto X^T J X = J."""
    X = S[1:, 1:]
    E = X.T @ J4 @ X - J4
    S = S.copy()
    S[1:, 1:] = X @ (np.eye(4) + 0.5 * (J4 @ E))
    return S


def _sweep(S_start: np.ndarray, M: np.ndarray, h: float, tols: Tolerances) -> np.ndarray:
    """RK4 sweep of dS/ds = S M(s) along sampled coefficients M (n, 5, 5)."""
    n = M.shape[0]
    mid = _midpoints(M)
    out = np.empty((n, 5, 5))
    out[0] = S_start
    S = S_start
    for k in range(n - 1):
        k1 = S @ M[k]
        k2 = (S + 0.5 * h * k1) @ mid[k]
        k3 = (S + 0.5 * h * k2) @ mid[k]
        k4 = (S + h * k3) @ M[k + 1]
        S = S + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if np.max(np.abs(S)) > 1e12:
            raise IntegrationBlowup(f"frame norm exceeded 1e12 at sweep step {k}")
        d = symplectic_defect(S[1:, 1:])
        if d > tols.tol_frame:
            S = _project_symplectic(S)
            d = symplectic_defect(S[1:, 1:])
            if d > 100.0 * tols.tol_frame:
                raise FrameDefect(f"defect {d:.3e} after projection at step {k}")
        out[k + 1] = S
    return out


def _integrate_column_rows(theta: MaurerCartanField, S0: np.ndarray,
                           tols: Tolerances) -> np.ndarray:
    """First column in y, then each row in x."""
    geom = theta.geometry
    S = np.empty((geom.nx, geom.ny, 5, 5))
    S[0, :] = _sweep(S0, theta.B[0, :], geom.dy, tols)
    for j in range(geom.ny):
        S[:, j] = _sweep(S[0, j], theta.A[:, j], geom.dx, tols)
    return S


def _integrate_row_columns(theta: MaurerCartanField, S0: np.ndarray,
                           tols: Tolerances) -> np.ndarray:
    geom = theta.geometry
    S = np.empty((geom.nx, geom.ny, 5, 5))
    S[:, 0] = _sweep(S0, theta.A[:, 0], geom.dx, tols)
    for i in range(geom.nx):
        S[i, :] = _sweep(S[i, 0], theta.B[i, :], geom.dy, tols)
    return S


def integrate_frame(
    theta: MaurerCartanField,
    S0: AffineSymplecticElement | None = None,
    tols: Tolerances = DEFAULT_TOLS,
    compute_path_defect: bool = True,
) -> FrameField:
    """Integrate dS = S Theta from the base node with classical 4th-order steps.

    Flatness is measured first; a residual above tol_flat is reported as a
    warning (the integral still exists on each path, it just becomes
    path-dependent, which the transposed-sweep defect quantifies).
    """
    if S0 is None:
        S0 = AffineSymplecticElement.identity()
    flat = float(np.max(flatness_residual(theta)))
    if flat > tols.tol_flat:
        warnings.warn(f"flatness residual {flat:.3e} exceeds tol_flat "
                      f"{tols.tol_flat:.3e}; frame is path-dependent")
    S = _integrate_column_rows(theta, S0.as_matrix5(), tols)
    path_defect = 0.0
    if compute_path_defect:
        S_alt = _integrate_row_columns(theta, S0.as_matrix5(), tols)
        path_defect = float(np.max(np.abs(S - S_alt)))
    return FrameField(theta.geometry, S, flatness_report=flat, path_defect=path_defect)


def immersion_from_frame(F: FrameField) -> ImmersionGrid:
    return ImmersionGrid(F.geometry, F.S[:, :, 1:, 0].copy())


def lagrangian_defect(m: ImmersionGrid) -> np.ndarray:
    """|Omega(f_x, f_y)| with finite-difference partials, per node."""
    geom = m.geometry
    fx = diff4(m.f, geom.dx, axis=0)
    fy = diff4(m.f, geom.dy, axis=1)
    return np.abs(np.einsum("...i,ij,...j->...", fx, J4, fy))


def immersion_singular_mask(m: ImmersionGrid, tol: float = DEFAULT_TOLS.tol_rank) -> np.ndarray:
    """Nodes where df drops rank (the discrete immersion condition fails)."""
    geom = m.geometry
    fx = diff4(m.f, geom.dx, axis=0)
    fy = diff4(m.f, geom.dy, axis=1)
    gram = np.empty(m.f.shape[:2] + (2, 2))
    gram[..., 0, 0] = np.einsum("...i,...i->...", fx, fx)
    gram[..., 0, 1] = gram[..., 1, 0] = np.einsum("...i,...i->...", fx, fy)
    gram[..., 1, 1] = np.einsum("...i,...i->...", fy, fy)
    return np.linalg.det(gram) <= tol


# -- numerical Maurer-Cartan form and invariant extraction --------------------


def numerical_maurer_cartan(F: FrameField) -> MaurerCartanField:
    """Theta-hat = S^-1 dS via 4th-order finite differences of the frame."""
    geom = F.geometry
    Sx = diff4(F.S, geom.dx, axis=0)
    Sy = diff4(F.S, geom.dy, axis=1)
    A = np.linalg.solve(F.S, Sx)
    B = np.linalg.solve(F.S, Sy)
    return MaurerCartanField(geom, A, B)


def _dz_coeff(ux, uy):
    """dz-coefficient of the 1-form ux dx + uy dy (entries may be complex)."""
    return 0.5 * (ux - 1j * uy)


def _dzbar_coeff(ux, uy):
    return 0.5 * (ux + 1j * uy)


def _blocks(M: np.ndarray):
    """tau (2-vector), alpha, beta, gamma blocks of a 5x5 algebra value field."""
    return (M[..., 1:3, 0], M[..., 1:3, 1:3], M[..., 1:3, 3:5], M[..., 3:5, 1:3])


def extract_invariants(
    F: FrameField,
    tols: Tolerances = DEFAULT_TOLS,
    check: bool = True,
) -> tuple[InvariantTriple, dict]:
    """Read (t, h, p) off the numerical Maurer-Cartan form of an adapted frame.

    The gauge report carries the max residuals of every adapted-frame
    condition; with check=True the worst offender above tol_gauge raises
    NotAdapted naming it.
    """
    mc = numerical_maurer_cartan(F)
    tau_x, alpha_x, beta_x, gamma_x = _blocks(mc.A)
    tau_y, alpha_y, beta_y, gamma_y = _blocks(mc.B)

    omega_x = 0.5 * (gamma_x[..., 0, 0] - gamma_x[..., 1, 1]) + 1j * gamma_x[..., 1, 0]
    omega_y = 0.5 * (gamma_y[..., 0, 0] - gamma_y[..., 1, 1]) + 1j * gamma_y[..., 1, 0]

    tauc_x = tau_x[..., 0] - 1j * tau_x[..., 1]
    tauc_y = tau_y[..., 0] - 1j * tau_y[..., 1]
    t = _dz_coeff(tauc_x, tauc_y)

    eta_x = 0.5 * (alpha_x[..., 0, 0] - alpha_x[..., 1, 1]) \
        - 0.5j * (alpha_x[..., 1, 0] + alpha_x[..., 0, 1])
    eta_y = 0.5 * (alpha_y[..., 0, 0] - alpha_y[..., 1, 1]) \
        - 0.5j * (alpha_y[..., 1, 0] + alpha_y[..., 0, 1])
    h = _dz_coeff(eta_x, eta_y)

    rho_x = 0.5 * (beta_x[..., 0, 0] - beta_x[..., 1, 1]) - 1j * beta_x[..., 1, 0]
    rho_y = 0.5 * (beta_y[..., 0, 0] - beta_y[..., 1, 1]) - 1j * beta_y[..., 1, 0]
    p = _dz_coeff(rho_x, rho_y)

    report = {
        "omega": float(np.max(np.abs(np.stack([omega_x - 1.0, omega_y - 1j])))),
        "gamma_trace": float(np.max(np.abs(np.stack(
            [gamma_x[..., 0, 0] + gamma_x[..., 1, 1],
             gamma_y[..., 0, 0] + gamma_y[..., 1, 1]])))),
        "alpha_trace": float(np.max(np.abs(np.stack(
            [alpha_x[..., 0, 0] + alpha_x[..., 1, 1],
             alpha_y[..., 0, 0] + alpha_y[..., 1, 1]])))),
        "alpha_skew": float(np.max(np.abs(np.stack(
            [alpha_x[..., 1, 0] - alpha_x[..., 0, 1],
             alpha_y[..., 1, 0] - alpha_y[..., 0, 1]])))),
        "ell": float(np.max(np.abs(_dzbar_coeff(eta_x, eta_y)))),
        "tau_antiholo": float(np.max(np.abs(_dzbar_coeff(tauc_x, tauc_y)))),
        "rho_conj": float(np.max(np.abs(
            _dzbar_coeff(rho_x, rho_y) - np.abs(h) ** 2))),
    }
    if check:
        for name in ("omega", "gamma_trace", "alpha_trace", "alpha_skew", "ell"):
            if report[name] > tols.tol_gauge:
                raise NotAdapted(name, report[name], tols.tol_gauge)
    geom = F.geometry
    inv = InvariantTriple(ComplexGrid(geom, t), ComplexGrid(geom, h), ComplexGrid(geom, p))
    return inv, report


# -- inverse pipeline: immersion -> adapted frame -> invariants ---------------


def _gauge_matrix5(A2: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Embed the stabilizer element Y(A, b) = [[A, A b], [0, A^-T]] in 5x5 form.

    A2 has shape (..., 2, 2); b, when given, (..., 2, 2) symmetric.
    """
    shape = A2.shape[:-2]
    Y = np.zeros(shape + (5, 5))
    Y[..., 0, 0] = 1.0
    Y[..., 1:3, 1:3] = A2
    if b is not None:
        Y[..., 1:3, 3:5] = A2 @ b
    inv = np.linalg.inv(A2)
    Y[..., 3:5, 3:5] = np.swapaxes(inv, -1, -2)
    return Y


def _unwrap2d(theta: np.ndarray) -> np.ndarray:
    """Continuous branch of an angle field over a simply connected grid."""
    row0 = np.unwrap(theta[0, :])
    out = np.unwrap(theta, axis=0)
    out += (row0 - theta[0, :])[None, :]
    return out


def reduction_pipeline(
    m: ImmersionGrid,
    orientation: int = 1,
    tols: Tolerances = DEFAULT_TOLS,
    margin: int = 4,
) -> tuple[FrameField, FirstOrderFrameData, InvariantTriple]:
    """Run the full frame reduction on an immersion and extract (t, h, p).

    Stages: tangent frame with the opposite-orientation convention and
    symplectic completion; trace-of-gamma normalization; removal of the
    antiholomorphic part of eta; conformal gauge to the grid coordinate;
    final trace/skew normalization of alpha.  Raises NotLagrangian or
    NotElliptic when the input fails the corresponding test.

    Each stage differentiates the running frame, so one-sided stencil error
    compounds in a band along the grid edge; the returned frame field and
    invariants are cropped by `margin` nodes per side to stay clear of it.
    """
    if orientation not in (1, -1):
        raise ValueError("orientation must be +1 or -1")
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    geom = m.geometry
    fx = diff4(m.f, geom.dx, axis=0)
    fy = diff4(m.f, geom.dy, axis=1)
    lag = np.abs(np.einsum("...i,ij,...j->...", fx, J4, fy))
    lag_max = float(np.max(lag))
    if lag_max > tols.tol_frame:
        raise NotLagrangian(f"max |Omega(f_x, f_y)| = {lag_max:.3e} > {tols.tol_frame:.3e}")

    if orientation == 1:
        X1, X2 = fy, fx
    else:
        X1, X2 = fx, fy
    M = np.stack([X1, X2], axis=-1)  # (nx, ny, 4, 2)
    G = np.swapaxes(M, -1, -2) @ M
    N = -(J4 @ M) @ np.linalg.inv(G)
    S = np.zeros((geom.nx, geom.ny, 5, 5))
    S[..., 0, 0] = 1.0
    S[..., 1:, 0] = m.f
    S[..., 1:, 1:3] = M
    S[..., 1:, 3:5] = N

    # stage 2: kill the trace of gamma
    mc = numerical_maurer_cartan(FrameField(geom, S))
    _, _, _, gamma_x = _blocks(mc.A)
    _, _, _, gamma_y = _blocks(mc.B)
    om1 = np.stack([0.5 * (gamma_x[..., 0, 0] - gamma_x[..., 1, 1]),
                    0.5 * (gamma_y[..., 0, 0] - gamma_y[..., 1, 1])], axis=-1)
    om2 = np.stack([gamma_x[..., 1, 0], gamma_y[..., 1, 0]], axis=-1)
    u = np.stack([0.5 * (gamma_x[..., 0, 0] + gamma_x[..., 1, 1]),
                  0.5 * (gamma_y[..., 0, 0] + gamma_y[..., 1, 1])], axis=-1)
    # induced quadratic form Gram matrix in the (dx, dy) basis
    g = np.empty((geom.nx, geom.ny, 2, 2))
    g[..., 0, 0] = om1[..., 0] ** 2 + om2[..., 0] ** 2 - u[..., 0] ** 2
    g[..., 1, 1] = om1[..., 1] ** 2 + om2[..., 1] ** 2 - u[..., 1] ** 2
    g[..., 0, 1] = g[..., 1, 0] = (om1[..., 0] * om1[..., 1]
                                   + om2[..., 0] * om2[..., 1]
                                   - u[..., 0] * u[..., 1])
    if not (np.all(g[..., 0, 0] > 0) and np.all(np.linalg.det(g) > 0)):
        raise NotElliptic("induced quadratic form is not positive definite")
    W = np.stack([om1, om2], axis=-1)  # rows: (dx, dy) coeffs; cols: (omega1, omega2)
    ell12 = np.linalg.solve(W, u[..., None])[..., 0]
    l1, l2 = ell12[..., 0], ell12[..., 1]
    if np.any(l1**2 + l2**2 >= 1.0):
        raise NotElliptic("first-order constraint l1^2 + l2^2 < 1 fails")
    phi = np.arcsin(-l2 / np.sqrt(1.0 - l1**2))
    A2 = np.zeros((geom.nx, geom.ny, 2, 2))
    A2[..., 0, 0] = np.sqrt(0.5 * (1.0 - l1)) * np.cos(phi)
    A2[..., 0, 1] = np.sqrt(0.5 * (1.0 - l1)) * np.sin(phi)
    A2[..., 1, 1] = np.sqrt(0.5 * (1.0 + l1))
    S = S @ _gauge_matrix5(A2)

    # stage 3: remove the antiholomorphic part of eta
    mc = numerical_maurer_cartan(FrameField(geom, S))
    _, alpha_x, _, gamma_x = _blocks(mc.A)
    _, alpha_y, _, gamma_y = _blocks(mc.B)
    omega_x = 0.5 * (gamma_x[..., 0, 0] - gamma_x[..., 1, 1]) + 1j * gamma_x[..., 1, 0]
    omega_y = 0.5 * (gamma_y[..., 0, 0] - gamma_y[..., 1, 1]) + 1j * gamma_y[..., 1, 0]
    eta_x = 0.5 * (alpha_x[..., 0, 0] - alpha_x[..., 1, 1]) \
        - 0.5j * (alpha_x[..., 1, 0] + alpha_x[..., 0, 1])
    eta_y = 0.5 * (alpha_y[..., 0, 0] - alpha_y[..., 1, 1]) \
        - 0.5j * (alpha_y[..., 1, 0] + alpha_y[..., 0, 1])
    # least squares for eta = h omega + ell conj(omega), unknowns (h1, h2, ell)
    rows = []
    rhs = []
    for wa, ea in ((omega_x, eta_x), (omega_y, eta_y)):
        w1, w2 = wa.real, wa.imag
        rows.append(np.stack([w1, -w2, w1], axis=-1))
        rows.append(np.stack([w2, w1, -w2], axis=-1))
        rhs.append(ea.real)
        rhs.append(ea.imag)
    D = np.stack(rows, axis=-2)  # (nx, ny, 4, 3)
    r = np.stack(rhs, axis=-1)[..., None]  # (nx, ny, 4, 1)
    Dt = np.swapaxes(D, -1, -2)
    sol = np.linalg.solve(Dt @ D, Dt @ r)[..., 0]
    ell = sol[..., 2]
    b3 = np.zeros((geom.nx, geom.ny, 2, 2))
    b3[..., 0, 0] = ell
    b3[..., 1, 1] = ell
    eye2 = np.broadcast_to(np.eye(2), (geom.nx, geom.ny, 2, 2))
    S = S @ _gauge_matrix5(eye2, b3)

    # stage 4: conformal gauge so that omega = dz
    mc = numerical_maurer_cartan(FrameField(geom, S))
    _, _, _, gamma_x = _blocks(mc.A)
    _, _, _, gamma_y = _blocks(mc.B)
    omega_x = 0.5 * (gamma_x[..., 0, 0] - gamma_x[..., 1, 1]) + 1j * gamma_x[..., 1, 0]
    omega_y = 0.5 * (gamma_y[..., 0, 0] - gamma_y[..., 1, 1]) + 1j * gamma_y[..., 1, 0]
    c = _dz_coeff(omega_x, omega_y)
    r4 = np.abs(c) ** -0.5
    s4 = 0.5 * _unwrap2d(np.angle(c))
    A4 = np.empty((geom.nx, geom.ny, 2, 2))
    A4[..., 0, 0] = r4 * np.cos(s4)
    A4[..., 0, 1] = -r4 * np.sin(s4)
    A4[..., 1, 0] = r4 * np.sin(s4)
    A4[..., 1, 1] = r4 * np.cos(s4)
    S = S @ _gauge_matrix5(A4)

    # stage 5: kill the trace and skew parts of alpha
    mc = numerical_maurer_cartan(FrameField(geom, S))
    _, alpha_x, _, _ = _blocks(mc.A)
    _, alpha_y, _, _ = _blocks(mc.B)
    wx = (alpha_x[..., 0, 0] + alpha_x[..., 1, 1]) \
        - 1j * (alpha_x[..., 1, 0] - alpha_x[..., 0, 1])
    wy = (alpha_y[..., 0, 0] + alpha_y[..., 1, 1]) \
        - 1j * (alpha_y[..., 1, 0] - alpha_y[..., 0, 1])
    w = _dz_coeff(wx, wy)
    b5 = np.empty((geom.nx, geom.ny, 2, 2))
    b5[..., 0, 0] = 0.5 * w.real
    b5[..., 0, 1] = b5[..., 1, 0] = -0.5 * w.imag
    b5[..., 1, 1] = -0.5 * w.real
    S = S @ _gauge_matrix5(eye2, b5)

    if margin:
        if geom.nx - 2 * margin < 5 or geom.ny - 2 * margin < 5:
            raise ValueError(f"grid too small for margin {margin}")
        geom = GridGeometry(
            geom.nx - 2 * margin, geom.ny - 2 * margin,
            geom.x0 + margin * geom.dx, geom.y0 + margin * geom.dy,
            geom.dx, geom.dy,
        )
        S = S[margin:-margin, margin:-margin]
        l1 = l1[margin:-margin, margin:-margin]
        l2 = l2[margin:-margin, margin:-margin]
        phi = phi[margin:-margin, margin:-margin]
        ell = ell[margin:-margin, margin:-margin]
    frame = FrameField(geom, S)
    inv, report = extract_invariants(frame, tols)
    if inv.h.min_abs() < tols.tol_umbilic:
        warnings.warn("min |h| below tol_umbilic: umbilic nodes present",
                      UmbilicGaugeWarning)
    data = FirstOrderFrameData(l1=l1, l2=l2, phi=phi, ell=ell)
    return frame, data, inv


def _affine_inverse5(S: np.ndarray) -> np.ndarray:
    X = S[1:, 1:]
    Xinv = -J4 @ X.T @ J4
    out = np.zeros((5, 5))
    out[0, 0] = 1.0
    out[1:, 1:] = Xinv
    out[1:, 0] = -Xinv @ S[1:, 0]
    return out


def congruence_defect(
    m1: ImmersionGrid,
    m2: ImmersionGrid,
    orientation: int = 1,
    tols: Tolerances = DEFAULT_TOLS,
    margin: int = 4,
) -> float:
    """Sup-norm defect of the best symplectic motion taking m1 onto m2.

    The motion is built from the two adapted frames at the base node; both
    frame signs are tried and the smaller defect returned.  A value below
    tol_congruent certifies congruence.
    """
    F1, _, _ = reduction_pipeline(m1, orientation, tols, margin)
    F2, _, _ = reduction_pipeline(m2, orientation, tols, margin)
    best = np.inf
    for sign in (1.0, -1.0):
        S0 = F1.S[0, 0].copy()
        S0[1:, 1:] *= sign
        D = F2.S[0, 0] @ _affine_inverse5(S0)
        moved = D[1:, 0] + np.einsum("ij,...j->...i", D[1:, 1:], m1.f)
        best = min(best, float(np.max(np.abs(moved - m2.f))))
    return best


# -- serialization ------------------------------------------------------------


def save_immersion(
    m: ImmersionGrid, path: str | Path, frame: FrameField | None = None
) -> None:
    """Write `i,j,x,y,f1..f4` rows (17 significant digits), one per node.

    When a frame field is supplied its 16 symplectic-matrix entries are
    appended per row (s11..s44, row-major).  Geometry goes in a .json sidecar.
    """
    path = Path(path)
    geom = m.geometry
    if frame is not None and frame.geometry != geom:
        raise ValueError("frame and immersion must share one grid geometry")
    header = ["i", "j", "x", "y", "f1", "f2", "f3", "f4"]
    if frame is not None:
        header += [f"s{r}{c}" for r in range(1, 5) for c in range(1, 5)]
    xs, ys = geom.x, geom.y
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(geom.nx):
            for j in range(geom.ny):
                row = [i, j, f"{xs[i]:.17g}", f"{ys[j]:.17g}"]
                row += [f"{v:.17g}" for v in m.f[i, j]]
                if frame is not None:
                    row += [f"{v:.17g}" for v in frame.S[i, j, 1:, 1:].ravel()]
                w.writerow(row)
    with open(path.with_suffix(path.suffix + ".json"), "w") as fh:
        json.dump(geom.as_dict(), fh, indent=2)


def load_immersion(path: str | Path) -> tuple[ImmersionGrid, FrameField | None]:
    """Read an immersion CSV back; returns the frame field too when present."""
    path = Path(path)
    with open(path.with_suffix(path.suffix + ".json")) as fh:
        geom = GridGeometry.from_dict(json.load(fh))
    f = np.empty((geom.nx, geom.ny, 4))
    S = None
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows)
        has_frame = len(header) > 8
        if has_frame:
            S = np.zeros((geom.nx, geom.ny, 5, 5))
            S[..., 0, 0] = 1.0
        count = 0
        for r in rows:
            i, j = int(r[0]), int(r[1])
            f[i, j] = [float(v) for v in r[4:8]]
            if has_frame:
                S[i, j, 1:, 1:] = np.array([float(v) for v in r[8:24]]).reshape(4, 4)
                S[i, j, 1:, 0] = f[i, j]
            count += 1
    if count != geom.nx * geom.ny:
        raise ValueError(f"{path}: expected {geom.nx * geom.ny} rows, got {count}")
    m = ImmersionGrid(geom, f)
    return m, (FrameField(geom, S) if S is not None else None)
