"""Evaluable (u, m, H-bar) fields reconstructed from a solver state.

GP fields use the representer form u(x) = K(x, phi) (Theta + eta R)^{-1} z;
FF fields are finite trigonometric sums with coefficients recovered through
the ridge least-squares map.  Both expose exact operator application, so
held-out PDE residuals use analytic derivatives rather than stencils.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import features as F
from . import kernels as K
from .collocation import FunctionalSet
from .errors import EmptyGrid
from .linsys import FeatureFactor, GramFactor, ridge_coefficients
from .optimizer import SolverState
from .problems import SPACE_HALF_WIDTH, PLANNING, ProblemSpec, interior_residual_batch


@dataclass(frozen=True)
class GpField:
    """Representer-form field: sum_i c_i (R_i K)(x, y_i)."""

    coeffs: np.ndarray
    funcs: FunctionalSet
    kernel: K.KernelSpec
    nonlocal_modes: int = 64

    def eval_op(self, op: str, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.zeros(X.shape[0])
        for (tag, pts, _), sl in zip(self.funcs.blocks, self.funcs.slices):
            if pts.shape[0] == 0:
                continue
            block = K.pairwise_op_matrix(self.kernel, op, tag, X, pts, self.nonlocal_modes)
            out += block @ self.coeffs[sl]
        return out

    def __call__(self, X) -> np.ndarray:
        return self.eval_op(K.ID, X)


@dataclass(frozen=True)
class FfField:
    """Finite feature expansion alpha^T zeta(x)."""

    coeffs: np.ndarray
    basis: F.FeatureBasis

    def eval_op(self, op: str, X) -> np.ndarray:
        return F.eval_feature_op(self.basis, op, X) @ self.coeffs

    def __call__(self, X) -> np.ndarray:
        return self.eval_op(K.ID, X)


def gp_reconstruct(
    state: SolverState,
    factor_u: GramFactor,
    factor_m: GramFactor,
    kernel: K.KernelSpec,
    phi: FunctionalSet,
    psi: FunctionalSet,
    nonlocal_modes: int = 64,
):
    u = GpField(factor_u.solve(state.z), phi, kernel, nonlocal_modes)
    m = GpField(factor_m.solve(state.rho), psi, kernel, nonlocal_modes)
    return u, m, state.lam


def ff_reconstruct(
    state: SolverState,
    factor_u: FeatureFactor,
    factor_m: FeatureFactor,
    basis_u: F.FeatureBasis,
    basis_m: F.FeatureBasis,
):
    alpha = ridge_coefficients(factor_u, state.z)
    beta = ridge_coefficients(factor_m, state.rho)
    return FfField(alpha, basis_u), FfField(beta, basis_m), state.lam


def linf_error(field, reference, grid) -> float:
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.shape[0] == 0:
        raise EmptyGrid("evaluation grid is empty")
    fv = np.asarray(field(grid), dtype=float)
    rv = np.asarray(reference(grid), dtype=float)
    return float(np.max(np.abs(fv - rv)))


def held_out_points(spec: ProblemSpec, n: int = 2000, seed: int = 987654321) -> np.ndarray:
    """Seed-fixed uniform points disjoint (a.s.) from any training lattice."""
    rng = np.random.default_rng(seed)
    if spec.dim == 1:
        return rng.random((n, 1))
    pts = rng.random((n, 2))
    if spec.kind == PLANNING:
        pts[:, 1] = (pts[:, 1] * 2.0 - 1.0) * SPACE_HALF_WIDTH
    return pts


def pde_residual_norm(u_field, m_field, lam, spec: ProblemSpec, test_points) -> float:
    """RMS over test points of the interior residual vector norm."""
    X = np.atleast_2d(np.asarray(test_points, dtype=float))
    U = np.stack([u_field.eval_op(op, X) for op in spec.u_operators], axis=1)
    M = np.stack([m_field.eval_op(op, X) for op in spec.m_operators], axis=1)
    R, _, _, _ = interior_residual_batch(spec, X, U, M, lam or 0.0)
    return float(np.sqrt(np.mean(np.sum(R**2, axis=1))))


def mass_trace(m_field, t_values, x_nodes) -> list:
    """Trapezoid integral of the density in x at each requested time."""
    x_nodes = np.asarray(x_nodes, dtype=float)
    out = []
    for t in t_values:
        pts = np.stack([np.full_like(x_nodes, float(t)), x_nodes], axis=1)
        out.append(float(np.trapezoid(m_field(pts), x_nodes)))
    return out


@dataclass
class ErrorReport:
    """Error metrics; reference-based entries are None when no closed form exists."""

    linf_u: float | None
    linf_m: float | None
    err_hbar: float | None
    residual_l2: float
    mass_error: float
    grid: str

    def to_json(self) -> str:
        payload = {
            "err_hbar": self.err_hbar,
            "grid": self.grid,
            "linf_m": self.linf_m,
            "linf_u": self.linf_u,
            "mass_error": self.mass_error,
            "residual_l2": self.residual_l2,
        }
        return json.dumps(payload, sort_keys=True, indent=2)
