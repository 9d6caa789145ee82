"""Independent reference evaluations used to cross-check the metric module."""

import numpy as np

from saper_forge.poly import MultiPoly


def sum_sq(gens, z, scale=1.0) -> float:
    """sum_j |scale * f_j(z)|^2, term by term from the exact polynomials."""
    return float(sum(abs(float(scale) * g.eval(z)) ** 2 for g in gens))


def fd_levi(u, z, h: float = 1e-5) -> np.ndarray:
    """d^2 u / dz_a dzbar_b by central differences in real coordinates."""
    z = np.asarray(z, dtype=complex)
    n = len(z)
    X = np.stack([z.real, z.imag], axis=1).ravel()

    def U(X):
        return u(X[0::2] + 1j * X[1::2])

    E = np.eye(2 * n) * h
    H = np.zeros((2 * n, 2 * n))
    for i in range(2 * n):
        for j in range(i, 2 * n):
            H[i, j] = H[j, i] = (U(X + E[i] + E[j]) - U(X + E[i] - E[j]) - U(X - E[i] + E[j]) + U(X - E[i] - E[j])) / (4 * h * h)
    xx, yy, xy, yx = H[0::2, 0::2], H[1::2, 1::2], H[0::2, 1::2], H[1::2, 0::2]
    return 0.25 * (xx + yy + 1j * (xy - yx))


def fs_pullback_levi(gens, z) -> np.ndarray:
    """Levi of log sum |f_j|^2 as the pullback of the Fubini-Study form.

    On the affine chart f_i != 0 with w_k = f_k / f_i, log F differs from
    log(1 + |w|^2) by the pluriharmonic log |f_i|^2.
    """
    z = tuple(complex(c) for c in z)
    n = gens[0].nvars
    f = np.array([g.eval(z) for g in gens])
    df = np.array([[g.partial(a).eval(z) for a in range(n)] for g in gens])
    i = int(np.argmax(np.abs(f)))
    others = [k for k in range(len(gens)) if k != i]
    if not others:
        return np.zeros((n, n), dtype=complex)
    w = f[others] / f[i]
    J = (df[others] * f[i] - np.outer(f[others], df[i])) / f[i] ** 2
    s = 1.0 + float(np.sum(np.abs(w) ** 2))
    H_fs = np.eye(len(others)) / s - np.outer(w.conj(), w) / s**2
    return J.T @ H_fs @ J.conj()


def rel_err(a, b) -> float:
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / max(np.linalg.norm(b), 1e-300))


def log_sum_sq(gens, scale=1.0):
    def u(z):
        return np.log(sum_sq(gens, tuple(z), scale))

    return u


def cusp_ideal_gens() -> list[MultiPoly]:
    return [MultiPoly.parse(t) for t in ("x^6", "x^4*y", "x^3*y^2", "x*y^3", "y^4")]
