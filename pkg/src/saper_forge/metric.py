"""Pointwise (1,1)-forms built from generator sums F = sum_j |f_j|^2.

All matrices are coefficients of ddbar (the i/2pi factor is dropped, see
``hermitian.CONVENTION``). Entry [a, b] is d^2 u / dz_a dzbar_b.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import FNotBelowOne, OutsideCover, PointOnCenter, QuadratureUnstable, ScanFailed
from .hermitian import HermitianFormSample
from .poly import EPS_F, CompiledGenerators, MultiPoly, _levi_parts, levi_log_sum_sq, log_jet

BASE_FORMS = ("euclidean", "fubini-study-chart")
SEED = 0x5A9E12
PD_TOL = 1e-10
L_CAP = 2**16
STABILITY_GATE = 0.05
REFINE_TOL = 1e-7
MAX_PANELS = 2**12
DEFAULT_STOPS = (1e-2, 1e-4, 1e-8, 1e-16)


def threads() -> int:
    """Worker cap for grid scans, read from SAPER_FORGE_THREADS."""
    raw = os.environ.get("SAPER_FORGE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def map_points(fn: Callable, points: Sequence) -> list:
    """Apply ``fn`` to every point; results keep the input order."""
    n = threads()
    if n == 1 or len(points) < 2:
        return [fn(p) for p in points]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, points))


@dataclass(frozen=True)
class MetricParams:
    l: int = 1
    base_form: str = "euclidean"
    scale: Fraction = Fraction(1)

    def __post_init__(self):
        if not isinstance(self.l, int) or self.l < 1:
            raise ValueError(f"l must be a positive integer, got {self.l!r}")
        if self.base_form not in BASE_FORMS:
            raise ValueError(f"unknown base form {self.base_form!r}")
        object.__setattr__(self, "scale", Fraction(self.scale))
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    def with_l(self, l: int) -> "MetricParams":
        return MetricParams(l, self.base_form, self.scale)

    def to_json(self) -> dict:
        return {"l": self.l, "base_form": self.base_form, "scale": str(self.scale)}

    @classmethod
    def from_json(cls, data) -> "MetricParams":
        return cls(int(data["l"]), data["base_form"], Fraction(data["scale"]))


def base_form_matrix(kind: str, z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    n = len(z)
    if kind == "euclidean":
        return np.eye(n, dtype=complex)
    if kind == "fubini-study-chart":
        s = 1.0 + float(np.sum(np.abs(z) ** 2))
        return np.eye(n, dtype=complex) / s - np.outer(z.conj(), z) / s**2
    raise ValueError(f"unknown base form {kind!r}")


# Potentials: anything exposing nvars and jet(z) -> (log F, d log F, ddbar log F)


class GeneratorPotential:
    """log F for F = sum_j |scale * f_j|^2 on a single chart."""

    def __init__(self, gens, scale=Fraction(1)):
        self.compiled = gens if isinstance(gens, CompiledGenerators) else CompiledGenerators(list(gens))
        self.nvars = self.compiled.nvars
        self.scale = Fraction(scale)
        self._log_s2 = 2.0 * math.log(float(self.scale))

    def F(self, z) -> float:
        return float(self.scale) ** 2 * self.compiled.sum_sq(z)

    def jet(self, z):
        F, dphi, H = log_jet(self.compiled, z)
        return math.log(F) + self._log_s2, dphi, H

    def gram_jet(self, z):
        """Like ``jet`` with the Levi matrix given by rows U, H = U^T conj(U)."""
        F, dphi, U = _levi_parts(self.compiled, z, EPS_F)
        return math.log(F) + self._log_s2, dphi, U

    def direct_saper(self, z) -> np.ndarray:
        """-ddbar log((log F)^2) by the chain rule on g(F) = log((log F)^2)."""
        f, d = self.compiled.evaluate(z)
        c = float(np.max(np.abs(f)))
        F = float(self.scale) ** 2 * float(np.sum(np.abs(f) ** 2))
        if not F > EPS_F or c == 0.0:
            raise PointOnCenter(f"F = {F!r} at {tuple(z)}")
        # F = (s c)^2 Fn with dF, ddbar F scaled alike; g' and g'' absorb the factor
        f, d = f / c, d / c
        Fn = float(np.sum(np.abs(f) ** 2))
        dFn = d.T @ f.conj()
        mn = d.T @ d.conj()
        L = math.log(F)
        g1 = 2.0 / (Fn * L)
        g2 = -2.0 * (L + 1.0) / (Fn**2 * L**2)
        return -(g1 * mn + g2 * np.outer(dFn, dFn.conj()))


def as_potential(source, scale=Fraction(1)):
    if hasattr(source, "jet"):
        return source
    return GeneratorPotential(source, scale)


def F_local(gens, scale, z) -> float:
    """sum_j |scale * f_j(z)|^2."""
    return GeneratorPotential(gens, scale).F(z)


def chern_form_local(gens, z) -> HermitianFormSample:
    """Chern form -ddbar log F of the exceptional bundle; negative semidefinite."""
    pot = as_potential(gens)
    if isinstance(pot, GeneratorPotential):
        return -levi_log_sum_sq(pot.compiled, z)
    return HermitianFormSample.from_matrix(z, -pot.jet(z)[2])


def omega_tilde(gens, params: MetricParams, z) -> HermitianFormSample:
    """l * base + ddbar log F."""
    _, _, H = as_potential(gens, params.scale).jet(z)
    return HermitianFormSample.from_matrix(z, params.l * base_form_matrix(params.base_form, z) + H)


def saper_terms(phi: float, dphi: np.ndarray, H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """The two pieces of -ddbar log((log F)^2) = 2 (chern + poincare).

    chern = ddbar log F / |log F| and poincare = dF (x) dbarF / (F log F)^2.
    """
    if not phi < 0.0:
        raise FNotBelowOne(f"log F = {phi!r} is not negative; rescale the generators")
    chern = H / abs(phi)
    poincare = np.outer(dphi, dphi.conj()) / phi**2
    return chern, poincare


@dataclass(frozen=True)
class SaperDecomposition:
    point: tuple[complex, ...]
    F: float
    l: int
    base: np.ndarray
    chern_term: np.ndarray
    poincare_term: np.ndarray
    direct: np.ndarray | None = None

    @property
    def decomposed(self) -> np.ndarray:
        return 2.0 * (self.chern_term + self.poincare_term)

    @property
    def form(self) -> HermitianFormSample:
        return HermitianFormSample.from_matrix(self.point, self.l * self.base + self.decomposed)

    @property
    def residual(self) -> float:
        """Relative Frobenius gap between the direct and decomposed evaluations."""
        if self.direct is None:
            return float("nan")
        scale = max(float(np.linalg.norm(self.direct)), 1e-300)
        return float(np.linalg.norm(self.direct - self.decomposed)) / scale


def saper_decomposition(gens, params: MetricParams, z) -> SaperDecomposition:
    pot = as_potential(gens, params.scale)
    phi, dphi, H = pot.jet(z)
    chern, poincare = saper_terms(phi, dphi, H)
    direct = pot.direct_saper(z) if hasattr(pot, "direct_saper") else None
    return SaperDecomposition(
        tuple(complex(c) for c in z),
        math.exp(phi),
        params.l,
        base_form_matrix(params.base_form, z),
        chern,
        poincare,
        direct,
    )


def omega_saper(gens, params: MetricParams, z) -> HermitianFormSample:
    """l * base - ddbar log((log F)^2), assembled from the decomposition."""
    return saper_decomposition(gens, params, z).form


def default_scale(gens, radius: float = 1.0, samples: int = 48, seed: int = SEED) -> Fraction:
    """Power of two s with s^2 * sup F < 1 on the polydisc, then halved.

    F is plurisubharmonic, so its sup over a polydisc sits on the torus
    |z_a| = radius; that torus is scanned on an angle grid.
    """
    cg = gens if isinstance(gens, CompiledGenerators) else CompiledGenerators(list(gens))
    n = cg.nvars
    if n <= 2:
        angles = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
        mesh = np.meshgrid(*([angles] * n), indexing="ij")
        thetas = np.stack([m.ravel() for m in mesh], axis=1) if n else np.zeros((1, 0))
    else:
        thetas = np.random.default_rng(seed).uniform(0.0, 2 * np.pi, size=(samples**2, n))
    fmax = max(cg.sum_sq(radius * np.exp(1j * t)) for t in thetas)
    s = Fraction(1)
    while s * s * Fraction(fmax) >= 1:
        s /= 2
    return s / 2


# Smooth partitions of unity from t -> exp(-1/t)


def _psi(t: float) -> tuple[float, float, float]:
    """exp(-1/t) for t > 0 (else 0) with its first two derivatives."""
    if t <= 0.0:
        return 0.0, 0.0, 0.0
    v = math.exp(-1.0 / t)
    return v, v / t**2, v * (1.0 - 2.0 * t) / t**4


def smooth_step(r: float, r0: float, r1: float) -> tuple[float, float, float]:
    """1 on [0, r0], 0 beyond r1, smooth in between; value and two r-derivatives."""
    a, a1, a2 = _psi(r1 - r)
    b, b1, b2 = _psi(r - r0)
    a1, a2 = -a1, a2  # chain rule through r1 - r
    s, s1, s2 = a + b, a1 + b1, a2 + b2
    chi = a / s
    chi1 = (a1 * s - a * s1) / s**2
    chi2 = (a2 * s - a * s2) / s**2 - 2.0 * s1 * (a1 * s - a * s1) / s**3
    return chi, chi1, chi2


def _real(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return np.stack([z.real, z.imag], axis=1).ravel()


def _complex_gradient(g: np.ndarray) -> np.ndarray:
    """d/dz_a = (d/dx_a - i d/dy_a) / 2 from a real gradient (x1, y1, x2, y2, ...)."""
    return 0.5 * (g[0::2] - 1j * g[1::2])


def _complex_levi(h: np.ndarray) -> np.ndarray:
    """d^2/dz_a dzbar_b from a real Hessian in (x1, y1, x2, y2, ...) order."""
    xx, yy = h[0::2, 0::2], h[1::2, 1::2]
    xy, yx = h[0::2, 1::2], h[1::2, 0::2]
    return 0.25 * (xx + yy + 1j * (xy - yx))


@dataclass(frozen=True)
class BumpChart:
    """Radial bump: 1 within r0 of center, 0 beyond r1 (reversed when exterior)."""

    center: tuple[complex, ...]
    r0: float
    r1: float
    exterior: bool = False

    def __post_init__(self):
        if not 0.0 < self.r0 < self.r1:
            raise ValueError("need 0 < r0 < r1")

    def real_jet(self, z) -> tuple[float, np.ndarray, np.ndarray]:
        """Value, real gradient and real Hessian of the radial bump."""
        x = _real(z) - _real(self.center)
        n = len(x)
        r = float(np.linalg.norm(x))
        if r <= self.r0 or r >= self.r1:
            inside = 1.0 if r <= self.r0 else 0.0
            return (1.0 - inside if self.exterior else inside), np.zeros(n), np.zeros((n, n))
        chi, chi1, chi2 = smooth_step(r, self.r0, self.r1)
        u = x / r
        grad = chi1 * u
        hess = chi2 * np.outer(u, u) + chi1 * (np.eye(n) - np.outer(u, u)) / r
        if self.exterior:
            return 1.0 - chi, -grad, -hess
        return chi, grad, hess


@dataclass(frozen=True)
class BumpPartition:
    """rho_alpha = beta_alpha / sum beta over radial bumps beta_alpha."""

    charts: tuple[BumpChart, ...]

    def real_jets(self, z) -> list[tuple[float, np.ndarray, np.ndarray]]:
        bumps = [c.real_jet(z) for c in self.charts]
        w = sum(b[0] for b in bumps)
        if not w > 0.0:
            raise OutsideCover(f"{tuple(z)} lies outside every chart")
        gw = sum(b[1] for b in bumps)
        hw = sum(b[2] for b in bumps)
        out = []
        for v, g, h in bumps:
            q = v / w
            gq = (g - q * gw) / w
            hq = (h - q * hw - np.outer(gq, gw) - np.outer(gw, gq)) / w
            out.append((q, gq, hq))
        return out

    def values(self, z) -> np.ndarray:
        return np.array([q for q, _, _ in self.real_jets(z)])

    def jets(self, z) -> list[tuple[float, np.ndarray, np.ndarray]]:
        """(rho, d rho, ddbar rho) per chart in complex form."""
        return [(q, _complex_gradient(g), _complex_levi(h)) for q, g, h in self.real_jets(z)]


class PatchedPotential:
    """log F for F = prod_alpha F_alpha^rho_alpha."""

    def __init__(self, charts: Sequence, bumps: BumpPartition, scale=Fraction(1)):
        if len(charts) != len(bumps.charts):
            raise ValueError("one bump per chart is required")
        self.locals = [GeneratorPotential(g, scale) for g in charts]
        self.nvars = self.locals[0].nvars
        self.bumps = bumps

    def jet(self, z):
        n = self.nvars
        phi, dphi, H = 0.0, np.zeros(n, complex), np.zeros((n, n), complex)
        for (rho, drho, ddrho), pot in zip(self.bumps.jets(z), self.locals):
            if rho == 0.0 and not np.any(drho) and not np.any(ddrho):
                continue
            p, dp, hp = pot.jet(z)
            phi += rho * p
            dphi += drho * p + rho * dp
            H += ddrho * p + np.outer(drho, dp.conj()) + np.outer(dp, drho.conj()) + rho * hp
        return phi, dphi, H


def patch_global(charts: Sequence, bumps: BumpPartition, z, scale=Fraction(1)) -> HermitianFormSample:
    """ddbar of sum_alpha rho_alpha log F_alpha at z."""
    _, _, H = PatchedPotential(charts, bumps, scale).jet(z)
    return HermitianFormSample.from_matrix(z, H)


# Sample points


def _directions(rng: np.random.Generator, n: int, nvars: int) -> np.ndarray:
    v = rng.standard_normal((n, nvars)) + 1j * rng.standard_normal((n, nvars))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def sample_points(n: int, seed: int = SEED, rmin: float = 1e-8, rmax: float = 1.0, nvars: int = 2) -> np.ndarray:
    """Random points with radius log-uniform on [rmin, rmax]."""
    rng = np.random.default_rng(seed)
    r = np.exp(rng.uniform(math.log(rmin), math.log(rmax), size=n))
    return r[:, None] * _directions(rng, n, nvars)


def radial_log_grid(n: int, seed: int = SEED, rmin: float = 1e-8, rmax: float = 1.0, nvars: int = 2) -> np.ndarray:
    """n log-spaced radii in (rmin, rmax), each paired with a seeded direction."""
    if n < 1:
        raise ValueError("grid size must be positive")
    rng = np.random.default_rng(seed)
    k = (np.arange(n) + 0.5) / n
    r = rmin * (rmax / rmin) ** k
    return r[:, None] * _directions(rng, n, nvars)


def min_l_scan(
    gens,
    grid: int = 1000,
    region: tuple[float, float] = (1e-8, 1.0),
    seed: int = SEED,
    params: MetricParams | None = None,
    points: np.ndarray | None = None,
) -> int:
    """Smallest l >= 1 making the Saper form positive definite on the grid."""
    params = params or MetricParams()
    pot = as_potential(gens, params.scale)
    if points is None:
        points = radial_log_grid(grid, seed, region[0], region[1], pot.nvars)

    def pieces(z):
        chern, poincare = saper_terms(*pot.jet(z))
        return base_form_matrix(params.base_form, z), 2.0 * (chern + poincare)

    base, rest = zip(*map_points(pieces, list(points)))
    base, rest = np.array(base), np.array(rest)

    def passes(l: int) -> bool:
        m = l * base + rest
        m = 0.5 * (m + np.conj(np.swapaxes(m, 1, 2)))
        return bool(np.min(np.linalg.eigvalsh(m)) > PD_TOL)

    hi = 1
    while not passes(hi):
        hi *= 2
        if hi > L_CAP:
            raise ScanFailed(f"no l up to {L_CAP} makes the form positive definite")
    lo = hi // 2  # fails, or 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if passes(mid):
            hi = mid
        else:
            lo = mid
    return hi


# Path lengths along rays


@dataclass(frozen=True)
class PathLengths:
    form: str
    direction: tuple[complex, ...]
    stops: tuple[float, ...]
    cumulative: tuple[float, ...]
    increments: tuple[float, ...]
    refinement_gaps: tuple[float, ...] = field(default=())

    @property
    def total(self) -> float:
        return self.cumulative[-1]

    def diverging(self, ratio: float = 0.5) -> bool:
        """Strictly increasing, each increment at least ``ratio`` times the previous."""
        inc = self.increments
        return all(i > 0 for i in inc) and all(b >= ratio * a for a, b in zip(inc, inc[1:]))

    def bounded(self, fraction: float = 1e-3) -> bool:
        """Final increment is a negligible part of the total."""
        return self.increments[-1] < fraction * self.total

    def to_json(self) -> dict:
        return {
            "form": self.form,
            "direction": [[c.real, c.imag] for c in self.direction],
            "stops": list(self.stops),
            "cumulative": list(self.cumulative),
            "increments": list(self.increments),
            "refinement_gaps": list(self.refinement_gaps),
        }


def _midpoint(fn: Callable[[float], float], a: float, b: float, n: int) -> float:
    h = (b - a) / n
    return h * sum(fn(a + (k + 0.5) * h) for k in range(n))


def integrate(fn: Callable[[float], float], a: float, b: float, panels: int = 8) -> tuple[float, float]:
    """Midpoint rule refined by doubling; returns (Richardson value, last relative gap)."""
    coarse = _midpoint(fn, a, b, panels)
    while True:
        panels *= 2
        fine = _midpoint(fn, a, b, panels)
        gap = abs(fine - coarse) / max(abs(fine), 1e-300)
        if gap < REFINE_TOL or panels >= MAX_PANELS:
            break
        coarse = fine
    if gap > STABILITY_GATE:
        raise QuadratureUnstable(f"refinements differ by {gap:.3%} on [{a}, {b}]")
    return (4.0 * fine - coarse) / 3.0, gap


def path_length(
    form: str,
    gens,
    params: MetricParams,
    direction=(1, 1),
    stops: Sequence[float] = DEFAULT_STOPS,
    base_point=None,
) -> PathLengths:
    """Arc length of t -> base_point + t * direction between decreasing stops.

    Segments are integrated in s = log t, where the integrands are smooth.
    """
    stops = tuple(float(t) for t in stops)
    if len(stops) < 2 or any(not 0.0 < t < 1.0 for t in stops):
        raise ValueError("need at least two stops inside (0, 1)")
    if any(b >= a for a, b in zip(stops, stops[1:])):
        raise ValueError("stops must decrease")
    v = np.asarray(direction, dtype=complex)
    p = np.zeros_like(v) if base_point is None else np.asarray(base_point, dtype=complex)
    pot = as_potential(gens, params.scale)

    if form not in ("saper", "tilde"):
        raise ValueError(f"unknown form {form!r}")

    def speed_sq(z) -> float:
        base = params.l * float(np.real(v @ base_form_matrix(params.base_form, z) @ v.conj()))
        if hasattr(pot, "gram_jet"):
            # radial entries of the Levi matrix are ~1/t^2 and cancel in v H v*
            phi, dphi, U = pot.gram_jet(z)
            levi = float(np.sum(np.abs(U @ v) ** 2))
        else:
            phi, dphi, H = pot.jet(z)
            levi = float(np.real(v @ H @ v.conj()))
        if form == "tilde":
            return base + levi
        if not phi < 0.0:
            raise FNotBelowOne(f"log F = {phi!r} is not negative; rescale the generators")
        return base + 2.0 * (levi / abs(phi) + abs(dphi @ v) ** 2 / phi**2)

    def integrand(s: float) -> float:
        t = math.exp(s)
        return t * math.sqrt(max(speed_sq(p + t * v), 0.0))

    increments, gaps = [], []
    for a, b in zip(stops, stops[1:]):
        value, gap = integrate(integrand, math.log(b), math.log(a))
        increments.append(value)
        gaps.append(gap)
    cumulative = [0.0]
    for inc in increments:
        cumulative.append(cumulative[-1] + inc)
    return PathLengths(form, tuple(complex(c) for c in v), stops, tuple(cumulative), tuple(increments), tuple(gaps))
