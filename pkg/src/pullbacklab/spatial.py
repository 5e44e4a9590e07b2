"""Eigenbases of the Laplacian on (0, pi) and grid/coefficient transforms.

Dirichlet and Neumann use their analytic eigenpairs sampled on uniform interior
grids chosen so the discrete sine/cosine orthogonality is exact.  Robin uses a
cell-centered second-order finite-difference eigensolve, with the first N
eigenvalues Richardson-refined from a solve at twice the resolution.

States are plain coefficient vectors in the basis (numpy arrays of length N);
the grid view is derived on demand.  All eigenfunctions are sup-normalized on
the grid, so coefficients read directly as amplitudes.  Sup-norms are measured
on the interior grid; Dirichlet boundary values are identically zero by basis
construction and are not represented.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BOUNDARY_CONDITIONS = ("dirichlet", "neumann", "robin")

# partial-order outcomes
LEQ, GEQ, EQUAL, INCOMPARABLE = "leq", "geq", "equal", "incomparable"


@dataclass(frozen=True)
class Basis:
    """Eigendecomposition of the Laplacian under one boundary condition.

    eigenvalues are the mu_k of Delta (strictly decreasing, mu_0 > mu_1 > ...),
    gamma0 = -mu_0 is the principal eigenvalue of the associated positive
    problem, and gap = mu_0 - mu_1 > 0 controls how fast the non-principal
    directions die relative to the principal one.
    """

    bc: str
    alpha: float | None
    n_modes: int
    n_grid: int
    x: np.ndarray               # collocation grid, interior points only
    eigenvalues: np.ndarray     # (N,)
    functions: np.ndarray       # (M, N), sup-normalized columns
    _coeff_map: np.ndarray      # (N, M), left inverse of functions on the span

    @property
    def gamma0(self) -> float:
        return -float(self.eigenvalues[0])

    @property
    def e0(self) -> np.ndarray:
        """Principal eigenfunction as a coefficient vector (unit on mode 0)."""
        z = np.zeros(self.n_modes)
        z[0] = 1.0
        return z

    @property
    def e0_grid(self) -> np.ndarray:
        return self.functions[:, 0]

    @property
    def gap(self) -> float:
        return float(self.eigenvalues[0] - self.eigenvalues[1])

    def to_grid(self, coeffs) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[0] != self.n_modes:
            raise ValueError(f"expected {self.n_modes} coefficients, got {coeffs.shape[0]}")
        return self.functions @ coeffs

    def to_coeffs(self, grid_profile) -> np.ndarray:
        grid_profile = np.asarray(grid_profile, dtype=float)
        if grid_profile.shape[0] != self.n_grid:
            raise ValueError(f"expected {self.n_grid} grid values, got {grid_profile.shape[0]}")
        return self._coeff_map @ grid_profile

    def sup_norm(self, coeffs) -> float:
        return float(np.max(np.abs(self.to_grid(coeffs))))


def build_basis(bc: str, n_modes: int, n_grid: int, alpha: float | None = None) -> Basis:
    """Assemble the eigenbasis for one boundary condition.

    Requires n_modes >= 2 and n_grid >= 4*n_modes (the oversampled grid doubles
    as the dealiasing grid for pointwise nonlinearities).
    """
    if bc not in BOUNDARY_CONDITIONS:
        raise ValueError(f"unknown boundary condition {bc!r}")
    if n_modes < 2:
        raise ValueError("n_modes must be >= 2")
    if n_grid < 4 * n_modes:
        raise ValueError("n_grid must be >= 4 * n_modes")
    if bc == "robin":
        if alpha is None or alpha < 0:
            raise ValueError("robin requires alpha >= 0")
    elif alpha is not None:
        raise ValueError(f"alpha is only meaningful for robin, not {bc}")

    N, M = n_modes, n_grid
    if bc == "dirichlet":
        x = np.pi * np.arange(1, M + 1) / (M + 1)
        k = np.arange(1, N + 1)
        eigenvalues = -(k.astype(float) ** 2)
        functions = np.sin(np.outer(x, k))
    elif bc == "neumann":
        x = np.pi * (np.arange(M) + 0.5) / M
        k = np.arange(N)
        eigenvalues = -(k.astype(float) ** 2)
        functions = np.cos(np.outer(x, k))
    else:
        x = np.pi * (np.arange(M) + 0.5) / M
        eigenvalues, functions = _robin_eigensolve(alpha, N, M)
        refined, _ = _robin_eigensolve(alpha, N, 2 * M)
        # second-order scheme: Richardson in h^2 across M and 2M
        eigenvalues = (4.0 * refined - eigenvalues) / 3.0
        # analytic modes carry their exact continuum normalization; Robin modes
        # are sign-fixed (positive at their largest lobe) and grid-sup-normalized
        peaks = functions[np.argmax(np.abs(functions), axis=0), np.arange(N)]
        functions = functions * np.where(peaks < 0, -1.0, 1.0)
        functions = functions / np.max(np.abs(functions), axis=0)

    gram = np.sum(functions * functions, axis=0)
    coeff_map = (functions / gram).T

    if not np.all(np.diff(eigenvalues) < 0):
        raise ValueError("eigenvalues are not strictly decreasing")
    return Basis(bc=bc, alpha=alpha, n_modes=N, n_grid=M, x=x,
                 eigenvalues=eigenvalues, functions=functions, _coeff_map=coeff_map)


def _robin_eigensolve(alpha: float, n_modes: int, m: int):
    """Cell-centered FD eigensolve of u'' with u' = alpha*u at 0, u' = -alpha*u at pi."""
    h = np.pi / m
    main = np.full(m, -2.0)
    # ghost-cell elimination keeps the matrix symmetric
    c = (1.0 - alpha * h / 2.0) / (1.0 + alpha * h / 2.0)
    main[0] += c
    main[-1] += c
    mat = (np.diag(main) + np.diag(np.ones(m - 1), 1) + np.diag(np.ones(m - 1), -1)) / h**2
    vals, vecs = np.linalg.eigh(mat)
    order = np.argsort(vals)[::-1][:n_modes]
    return vals[order], vecs[:, order]


def to_coeffs(basis: Basis, grid_profile) -> np.ndarray:
    return basis.to_coeffs(grid_profile)


def to_grid(basis: Basis, coeffs) -> np.ndarray:
    return basis.to_grid(coeffs)


def sup_norm(basis: Basis, coeffs) -> float:
    return basis.sup_norm(coeffs)


def partial_order(basis: Basis, s1, s2, tol: float = 1e-10) -> str:
    """Grid-pointwise order of two states: leq, geq, equal, or incomparable."""
    diff = basis.to_grid(s2) - basis.to_grid(s1)
    if np.all(np.abs(diff) <= tol):
        return EQUAL
    if np.all(diff >= -tol):
        return LEQ
    if np.all(diff <= tol):
        return GEQ
    return INCOMPARABLE
