"""Pointwise samples of (1,1)-forms as Hermitian coefficient matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

HERMITIAN_TOL = 1e-12

# Coefficients of ddbar are stored directly; the i/2pi factor is not applied.
CONVENTION = "ddbar-coefficients"


@dataclass(frozen=True)
class HermitianFormSample:
    point: tuple[complex, ...]
    matrix: np.ndarray
    eigenvalues: tuple[float, ...] = field(default=())
    convention: str = CONVENTION

    @classmethod
    def from_matrix(cls, point, matrix) -> "HermitianFormSample":
        matrix = np.asarray(matrix, dtype=complex)
        scale = max(1.0, float(np.max(np.abs(matrix), initial=0.0)))
        if float(np.max(np.abs(matrix - matrix.conj().T), initial=0.0)) > HERMITIAN_TOL * scale:
            raise ValueError("matrix is not Hermitian")
        # symmetrize away rounding; the stored matrix is then exactly Hermitian
        herm = 0.5 * (matrix + matrix.conj().T)
        eig = tuple(float(v) for v in np.sort(np.linalg.eigvalsh(herm)))
        return cls(tuple(complex(c) for c in point), herm, eig)

    @classmethod
    def from_gram(cls, point, rows) -> "HermitianFormSample":
        """The PSD form sum_p rows_p (x) conj(rows_p).

        In two variables the small eigenvalue is det / lambda_max with the
        determinant taken as a sum of squared 2x2 minors (Cauchy-Binet), which
        keeps it accurate relative to itself rather than to lambda_max.
        """
        U = np.asarray(rows, dtype=complex)
        n = U.shape[1]
        herm = U.T @ U.conj()
        herm = 0.5 * (herm + herm.conj().T)
        if n != 2:
            eig = tuple(float(v) for v in np.sort(np.linalg.eigvalsh(herm)))
            return cls(tuple(complex(c) for c in point), herm, eig)
        tr = float(np.sum(np.abs(U) ** 2))
        p, q = np.triu_indices(U.shape[0], 1)
        det = float(np.sum(np.abs(U[p, 0] * U[q, 1] - U[p, 1] * U[q, 0]) ** 2))
        top = 0.5 * tr + math.sqrt(max(0.25 * tr * tr - det, 0.0))
        low = det / top if top > 0.0 else 0.0
        return cls(tuple(complex(c) for c in point), herm, (low, top))

    @property
    def min_eig(self) -> float:
        return self.eigenvalues[0]

    @property
    def max_eig(self) -> float:
        return self.eigenvalues[-1]

    def hermitian_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0))

    def __neg__(self) -> "HermitianFormSample":
        eig = tuple(sorted(-e for e in self.eigenvalues))
        return HermitianFormSample(self.point, -self.matrix, eig, self.convention)

    def __add__(self, other: "HermitianFormSample") -> "HermitianFormSample":
        return HermitianFormSample.from_matrix(self.point, self.matrix + other.matrix)

    def scaled(self, c: float) -> "HermitianFormSample":
        return HermitianFormSample.from_matrix(self.point, c * self.matrix)

    def quadratic(self, v) -> float:
        """Real value of v* H v."""
        v = np.asarray(v, dtype=complex)
        return float(np.real(v.conj() @ self.matrix @ v))
