"""Structured quadrilateral mesh with Q1 velocity and Q0 cell spaces.

Nodes are numbered row by row, ``node = j * (nx + 1) + i`` with ``i`` along
x.  Cells follow the same pattern and list their four nodes counterclockwise
starting at the lower-left corner.  Velocity DOFs are interleaved,
``dof = 2 * node + component``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

# reference coordinates of the 4 local nodes, counterclockwise
REF_NODES = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
GAUSS_1D = 1.0 / np.sqrt(3.0)


@dataclass(frozen=True)
class QuadPointSet:
    """2x2 Gauss rule with Q1 shape data for one (any) cell of the grid.

    All cells of a uniform grid share the same affine map up to a shift,
    so a single template serves every cell.
    """

    ref_points: np.ndarray      # (4, 2)
    ref_weights: np.ndarray     # (4,)
    weights: np.ndarray         # (4,) physical, sum = cell area
    shape: np.ndarray           # (4 points, 4 nodes)
    grad: np.ndarray            # (4 points, 4 nodes, 2) physical gradients

    @property
    def npoints(self) -> int:
        return len(self.ref_weights)


def gauss_quadrature():
    """Reference 2x2 Gauss points and weights on [-1, 1]^2."""
    g = GAUSS_1D
    pts = np.array([[-g, -g], [g, -g], [g, g], [-g, g]])
    return pts, np.ones(4)


def shape_functions(ref_point):
    """Bilinear shape values and reference gradients at ``ref_point``."""
    xi, eta = ref_point
    xa, ya = REF_NODES[:, 0], REF_NODES[:, 1]
    vals = 0.25 * (1.0 + xa * xi) * (1.0 + ya * eta)
    dxi = 0.25 * xa * (1.0 + ya * eta)
    deta = 0.25 * ya * (1.0 + xa * xi)
    return vals, np.stack([dxi, deta], axis=-1)


@dataclass(frozen=True)
class StructuredGrid:
    L: float
    nx: int
    ny: int

    def __post_init__(self):
        if not (self.L > 0):
            raise ValueError(f"domain length must be positive, got {self.L}")
        if self.nx < 1 or self.ny < 1:
            raise ValueError(f"cell counts must be >= 1, got {self.nx}x{self.ny}")
        if self.nx != self.ny:
            raise ValueError("anisotropic grids are not supported (dx must equal dy)")

    @property
    def dx(self) -> float:
        return self.L / self.nx

    @property
    def dy(self) -> float:
        return self.L / self.ny

    @property
    def n_nodes(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def n_dofs(self) -> int:
        return 2 * self.n_nodes

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @cached_property
    def node_coords(self) -> np.ndarray:
        x = np.linspace(0.0, self.L, self.nx + 1)
        y = np.linspace(0.0, self.L, self.ny + 1)
        X, Y = np.meshgrid(x, y)
        return np.column_stack([X.ravel(), Y.ravel()])

    @cached_property
    def cell_centers(self) -> np.ndarray:
        x = (np.arange(self.nx) + 0.5) * self.dx
        y = (np.arange(self.ny) + 0.5) * self.dy
        X, Y = np.meshgrid(x, y)
        return np.column_stack([X.ravel(), Y.ravel()])

    @cached_property
    def cells(self) -> np.ndarray:
        """(n_cells, 4) node indices, counterclockwise from lower-left."""
        i, j = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        n0 = (j * (self.nx + 1) + i).ravel()
        return np.column_stack([n0, n0 + 1, n0 + self.nx + 2, n0 + self.nx + 1])

    @cached_property
    def cell_dofs(self) -> np.ndarray:
        """(n_cells, 8) velocity DOFs, local index ``2 * a + k``."""
        c = self.cells
        return np.stack([2 * c, 2 * c + 1], axis=-1).reshape(self.n_cells, 8)

    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        i = np.arange(self.n_nodes) % (self.nx + 1)
        j = np.arange(self.n_nodes) // (self.nx + 1)
        return (i == 0) | (i == self.nx) | (j == 0) | (j == self.ny)

    @cached_property
    def boundary_dofs(self) -> np.ndarray:
        return np.repeat(self.boundary_nodes, 2)

    @cached_property
    def quad(self) -> QuadPointSet:
        pts, w = gauss_quadrature()
        jac = np.array([self.dx / 2.0, self.dy / 2.0])
        vals, grads = [], []
        for p in pts:
            v, g = shape_functions(p)
            vals.append(v)
            grads.append(g / jac)
        return QuadPointSet(
            ref_points=pts,
            ref_weights=w,
            weights=w * jac.prod(),
            shape=np.array(vals),
            grad=np.array(grads),
        )

    @cached_property
    def quad_coords(self) -> np.ndarray:
        """(n_cells, 4, 2) physical coordinates of the quadrature points."""
        corner = self.node_coords[self.cells[:, 0]]
        offs = (self.quad.ref_points + 1.0) * 0.5 * np.array([self.dx, self.dy])
        return corner[:, None, :] + offs[None, :, :]

    def shape_eval(self, cell, ref_point):
        """Shape values and physical gradients of ``cell`` at ``ref_point``."""
        if not 0 <= cell < self.n_cells:
            raise IndexError(cell)
        vals, g = shape_functions(ref_point)
        return vals, g / np.array([self.dx / 2.0, self.dy / 2.0])

    def cell_to_point(self, cell, ref_point):
        x0, y0 = self.node_coords[self.cells[cell, 0]]
        return np.array([x0 + (ref_point[0] + 1) * self.dx / 2, y0 + (ref_point[1] + 1) * self.dy / 2])


def build_grid(L, n):
    """Square grid of ``n x n`` cells on ``(0, L)^2`` (lengths in meters)."""
    if not (L > 0) or int(n) != n or n < 1:
        raise ValueError(f"need L > 0 and integer n >= 1, got L={L}, n={n}")
    return StructuredGrid(float(L), int(n), int(n))


def apply_dirichlet(matrix, rhs, grid):
    """Symmetric elimination of the boundary DOFs.

    Boundary rows and columns are zeroed, the diagonal set to one and the
    rhs entries zeroed (homogeneous data).  Returns new objects.
    """
    n = grid.n_dofs
    if matrix.shape != (n, n) or len(rhs) != n:
        raise ValueError(f"system of shape {matrix.shape} does not match {n} DOFs")
    bnd = grid.boundary_dofs
    keep = sp.diags((~bnd).astype(float))
    A = (keep @ sp.csr_matrix(matrix) @ keep + sp.diags(bnd.astype(float))).tocsr()
    A.eliminate_zeros()
    A.sort_indices()
    b = np.array(rhs, dtype=float, copy=True)
    b[bnd] = 0.0
    return A, b


def mass_matrix(grid, density=None):
    """Scalar Q1 mass matrix (dense-free reference helper)."""
    q = grid.quad
    ke = np.einsum("q,qa,qb->ab", q.weights, q.shape, q.shape)
    rho = np.ones(grid.n_cells) if density is None else np.asarray(density)
    rows = np.repeat(grid.cells, 4, axis=1).ravel()
    cols = np.tile(grid.cells, (1, 4)).ravel()
    vals = (rho[:, None, None] * ke[None]).ravel()
    return sp.csr_matrix((vals, (rows, cols)), shape=(grid.n_nodes,) * 2)
