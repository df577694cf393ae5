"""Nonminimal real-analytic hypersurfaces and their Segre varieties.

A hypersurface M in C^n is given by a complex defining function
rho(z, w, cz, cw) with M = {rho(Z, conj Z) = 0} and X = {w = 0} contained in M.
Points are numpy arrays ``[z1, ..., z{n-1}, w]``.
"""
import dataclasses
import logging
import math
import threading
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.optimize

from segretool import expr
from segretool.config import DEFAULT_TOLERANCES, Tolerances
from segretool.errors import (
    DegenerateError,
    DomainError,
    LeviDegenerateError,
    OnExceptionalLocusError,
    SegreSolveError,
    SingularEvaluationError,
    ValidationError,
)

Radii = tuple[float, float]


def as_point(coords, n: int | None = None) -> np.ndarray:
    point = np.atleast_1d(np.asarray(coords, dtype=complex)).copy()
    if n is not None and point.shape != (n,):
        raise DomainError(f"Expected a point with {n} coordinates, got {point.shape[0]}")
    if not np.all(np.isfinite(point)):
        raise DomainError(f"Point has non-finite coordinates: {point}")
    return point


def _radii(value: float | Sequence[float]) -> Radii:
    if isinstance(value, (int, float)):
        return float(value), float(value)
    rz, rw = value
    return float(rz), float(rw)


@dataclasses.dataclass(frozen=True)
class Hypersurface:
    """A real hypersurface given by its complexified defining function.

    :param u1: Radii (z, w) of the inner polydisc of the standard pair.
    :param u2: Radii (z, w) of the outer polydisc.
    :param phi: Exponent of the form rho = w - cw * exp(i * phi), when known.
    :param nonminimal: False for surfaces without the exceptional locus (hyperquadrics).
    """

    name: str
    n: int
    defining: expr.AnalyticExpr
    u1: Radii
    u2: Radii
    phi: expr.AnalyticExpr | None = None
    nonminimal: bool = True

    def __post_init__(self):
        if self.n < 2:
            raise ValidationError(f"{self.name}: ambient dimension must be at least 2, got {self.n}")
        object.__setattr__(self, "u1", _radii(self.u1))
        object.__setattr__(self, "u2", _radii(self.u2))
        if self.u1[0] > self.u2[0] or self.u1[1] > self.u2[1]:
            raise ValidationError(f"{self.name}: U1 {self.u1} is not contained in U2 {self.u2}")
        if expr.dimension_of(self.defining) > self.n:
            raise ValidationError(f"{self.name}: defining function uses more than {self.n - 1} z variables")
        if expr.LOG_W in self.defining.variables:
            raise ValidationError(f"{self.name}: defining function may not use {expr.LOG_W}")

    @classmethod
    def from_source(
        cls,
        name: str,
        n: int,
        defining: str,
        u1: float | Sequence[float],
        u2: float | Sequence[float],
        phi: str | None = None,
        nonminimal: bool = True,
    ) -> "Hypersurface":
        return cls(
            name=name,
            n=n,
            defining=expr.parse(defining, n),
            u1=_radii(u1),
            u2=_radii(u2),
            phi=None if phi is None else expr.parse(phi, n),
            nonminimal=nonminimal,
        )

    def rho(self, Z, zeta) -> complex:
        """rho(Z, conj zeta)."""
        Z, zeta = np.asarray(Z, dtype=complex), np.asarray(zeta, dtype=complex)
        return expr.evaluate(self.defining, expr.assignment(Z[:-1], Z[-1], np.conj(zeta[:-1]), np.conj(zeta[-1])))

    def in_domain(self, P, which: str = "u1") -> bool:
        rz, rw = self.u1 if which == "u1" else self.u2
        P = np.asarray(P, dtype=complex)
        return bool(np.all(np.abs(P[:-1]) < rz) and abs(P[-1]) < rw)

    def near_x(self, P, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
        return self.nonminimal and abs(complex(np.asarray(P)[-1])) < tol.degeneracy * self.u1[1]


class SegreVariety:
    """Q_zeta = {Z : rho(Z, conj zeta) = 0} as a graph w = h(z, conj zeta).

    Solved points are memoized; the cache is shared between threads.
    """

    def __init__(self, surface: Hypersurface, base, tol: Tolerances = DEFAULT_TOLERANCES):
        self.surface = surface
        self.base = as_point(base, surface.n)
        self.tol = tol
        self.degenerate = surface.near_x(self.base, tol)
        self._cz = np.conj(self.base[:-1])
        self._cw = complex(np.conj(self.base[-1]))
        self._cache: dict[tuple[complex, ...], complex] = {}
        self._lock = threading.Lock()
        self._anchor = None if self.degenerate else self._newton(self.base[:-1], complex(self.base[-1]))

    def _point(self, z, w) -> dict[str, complex]:
        return expr.assignment(z, w, self._cz, self._cw)

    def slopes(self, z, w) -> tuple[complex, np.ndarray]:
        """rho_w and the vector of rho_z at (z, w)."""
        names = tuple(f"z{j + 1}" for j in range(len(z))) + ("w",)
        jet = expr.eval_jet(self.surface.defining, self._point(z, w), 1, names)
        return jet.gradient[-1], jet.gradient[:-1]

    def _newton(self, z, seed: complex) -> complex:
        w = complex(seed)
        defining = self.surface.defining
        for _ in range(self.tol.newton_max_iter):
            try:
                point = self._point(z, w)
                value = expr.evaluate(defining, point)
                slope = expr.derivative(defining, point, "w")
            except SingularEvaluationError as error:
                raise SegreSolveError(f"Segre graph evaluation hit a singularity: {error}", tuple(z)) from error
            if slope == 0:
                raise SegreSolveError("Segre graph has a vertical tangent", tuple(z))
            step = value / slope
            w -= step
            if abs(step) <= self.tol.newton * max(1.0, abs(w)):
                return w
        raise SegreSolveError(f"Newton did not converge in {self.tol.newton_max_iter} iterations", tuple(z))

    def _follow(self, z_target: np.ndarray) -> complex:
        z = self.base[:-1].copy()
        w = self._anchor
        max_dw = 0.1 * self.surface.u2[1]
        remaining = 1.0
        direction = z_target - z
        for _ in range(100000):
            if remaining <= 0:
                return w
            rho_w, rho_z = self.slopes(z, w)
            predicted = abs(np.dot(-rho_z / rho_w, direction))
            h = remaining if predicted * remaining <= max_dw else max_dw / predicted
            z_next = z + h * direction
            w = self._newton(z_next, w + h * np.dot(-rho_z / rho_w, direction))
            z = z_next
            remaining -= h
        raise SegreSolveError("Path following along the Segre variety did not terminate", tuple(z_target))

    def graph(self, z, seed: complex | None = None) -> complex:
        """w = h(z, conj zeta).

        :param z: z-coordinates (scalar allowed when n = 2).
        :param seed: Starting value for Newton; path following from the base is used otherwise.
        """
        if self.degenerate:
            return 0j
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        key = tuple(z.tolist())
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        w = None
        if seed is not None:
            try:
                w = self._newton(z, seed)
            except SegreSolveError as error:
                logging.debug(f"SEGRE: seeded Newton failed ({error}), path following instead")
        if w is None:
            w = self._follow(z)
        with self._lock:
            self._cache[key] = w
        return w

    def point(self, z, seed: complex | None = None) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        return np.append(z, self.graph(z, seed))

    def contains(self, Z, tol: float) -> bool:
        return abs(self.surface.rho(Z, self.base)) < tol


def segre_variety(M: Hypersurface, zeta, tol: Tolerances = DEFAULT_TOLERANCES) -> SegreVariety:
    """Segre variety of zeta, with its graph solver.

    :raise DomainError: zeta lies outside U1.
    """
    zeta = as_point(zeta, M.n)
    if not M.in_domain(zeta):
        raise DomainError(f"{M.name}: {zeta} lies outside U1 {M.u1}")
    return SegreVariety(M, zeta, tol)


def on_surface(M: Hypersurface, P, tol: float = DEFAULT_TOLERANCES.membership) -> bool:
    """True iff P lies on M, i.e. on its own Segre variety."""
    P = as_point(P, M.n)
    return abs(M.rho(P, P)) < tol


def _oriented_gradient(a: np.ndarray, b: np.ndarray) -> tuple[complex, np.ndarray]:
    """Unit factor g with rho = g * r for a real r, and the gradient of r oriented so Im dr/dw > 0."""
    j = int(np.argmax(np.abs(b)))
    if abs(b[j]) == 0:
        raise DegenerateError("Defining function has a vanishing gradient")
    g = np.sqrt(a[j] / np.conj(b[j]))
    g = g / abs(g)
    dr = a / g
    if dr[-1].imag < 0 or (dr[-1].imag == 0 and dr[-1].real < 0):
        g, dr = -g, -dr
    return g, dr


def levi_form(M: Hypersurface, P, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Eigenvalues of the Levi form at P, in ascending order."""
    P = as_point(P, M.n)
    if M.near_x(P, tol):
        raise OnExceptionalLocusError(f"The Levi form vanishes identically on X; {P} lies on X")
    residual = abs(M.rho(P, P))
    if residual > math.sqrt(tol.membership) * max(1.0, abs(P[-1])):
        raise DomainError(f"{P} is not on {M.name} (residual {residual:.3e})")
    n = M.n
    holomorphic = tuple(f"z{j + 1}" for j in range(n - 1)) + ("w",)
    antiholomorphic = tuple(expr.conjugate_name(name) for name in holomorphic)
    jet = expr.eval_jet(M.defining, expr.assignment(P[:-1], P[-1], np.conj(P[:-1]), np.conj(P[-1])), 2,
                        holomorphic + antiholomorphic)
    a, b = jet.gradient[:n], jet.gradient[n:]
    g, dr = _oriented_gradient(a, b)
    mixed = jet.hessian[:n, n:] / g
    mixed = (mixed + mixed.conj().T) / 2
    basis = scipy.linalg.null_space(dr[None, :])
    restricted = basis.T @ mixed @ basis.conj()
    return np.linalg.eigvalsh((restricted + restricted.conj().T) / 2)


def levi_signature(M: Hypersurface, P, tol: Tolerances = DEFAULT_TOLERANCES) -> tuple[int, int]:
    """(positive, negative) eigenvalue counts of the Levi form at P.

    :raise LeviDegenerateError: an eigenvalue is numerically zero.
    :raise OnExceptionalLocusError: P lies on X.
    """
    eigenvalues = levi_form(M, P, tol)
    scale = max(1.0, float(np.max(np.abs(eigenvalues))))
    if np.any(np.abs(eigenvalues) < tol.levi * scale):
        raise LeviDegenerateError(eigenvalues.tolist())
    return int(np.sum(eigenvalues > 0)), int(np.sum(eigenvalues < 0))


def _graph_coefficients(M: Hypersurface, z0: np.ndarray, conj_coords: np.ndarray, degree: int,
                        tol: Tolerances) -> np.ndarray:
    """Taylor coefficients of z -> h(z, conj zeta) at z0 up to the given degree."""
    zeta = np.conj(conj_coords)
    variety = SegreVariety(M, zeta, tol)
    if variety.degenerate:
        raise OnExceptionalLocusError(f"Segre variety of {zeta} is X; the Segre map collapses there")
    w0 = variety.graph(z0)
    coefficients = [w0]
    if degree == 0:
        return np.array(coefficients)
    names = tuple(f"z{j + 1}" for j in range(M.n - 1)) + ("w",)
    jet = expr.eval_jet(M.defining, expr.assignment(z0, w0, conj_coords[:-1], conj_coords[-1]),
                        2 if degree >= 2 else 1, names)
    rho_w = jet.gradient[-1]
    h1 = -jet.gradient[:-1] / rho_w
    coefficients.extend(h1)
    if degree >= 2:
        H = jet.hessian
        m = M.n - 1
        for i in range(m):
            for j in range(i, m):
                value = H[i, j] + H[i, -1] * h1[j] + H[j, -1] * h1[i] + H[-1, -1] * h1[i] * h1[j]
                coefficients.append(-value / rho_w)
    return np.array(coefficients, dtype=complex)


def segre_map_rank(M: Hypersurface, P, jet_degree: int = 2, tol: Tolerances = DEFAULT_TOLERANCES,
                   step: float = 1e-6) -> int:
    """Numerical rank of the Segre map at P.

    The Segre map sends Z to the Taylor jet of the graph of Q_Z at P's
    z-coordinate. Rank n means it is locally injective at P.
    """
    if jet_degree not in (0, 1, 2):
        raise DomainError(f"Segre map jets are supported up to degree 2, got {jet_degree}")
    P = as_point(P, M.n)
    if M.near_x(P, tol):
        raise OnExceptionalLocusError(f"{P} lies on X, where the Segre map collapses to a point")
    z0 = P[:-1]
    base = np.conj(P)
    columns = []
    for k in range(M.n):
        shift = np.zeros(M.n, dtype=complex)
        shift[k] = step
        forward = _graph_coefficients(M, z0, base + shift, jet_degree, tol)
        backward = _graph_coefficients(M, z0, base - shift, jet_degree, tol)
        columns.append((forward - backward) / (2 * step))
    jacobian = np.stack(columns, axis=1)
    singular_values = np.linalg.svd(jacobian, compute_uv=False)
    rank = int(np.sum(singular_values > tol.rank * singular_values[0]))
    logging.debug(f"SEGRE: map rank {rank} at {P}, singular values {singular_values}")
    return rank


def _random_disc(rng: np.random.Generator, radius: float, size: int) -> np.ndarray:
    r = radius * np.sqrt(rng.uniform(0.0, 1.0, size))
    return r * np.exp(2j * math.pi * rng.uniform(0.0, 1.0, size))


def sample_surface_points(
    M: Hypersurface,
    count: int,
    rng: np.random.Generator,
    center=None,
    radius: float | None = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> np.ndarray:
    """Random points of M near a centre.

    z is drawn from a disc of the given radius around the centre's z, |w| from
    an interval around |w_center|; the argument of w is then solved so that
    rho(P, conj P) = 0, starting from the centre's argument. The side of M \\ X
    is therefore selected by the centre.

    :return: Array of shape (count, n).
    """
    if center is None:
        center = np.zeros(M.n, dtype=complex)
        center[-1] = 0.5 * M.u1[1]
    center = as_point(center, M.n)
    if radius is None:
        radius = 0.3 * M.u1[0]
    w_modulus = abs(center[-1])
    w_spread = min(radius, 0.5 * w_modulus)
    theta0 = math.atan2(center[-1].imag, center[-1].real)

    def residual(theta, z, modulus):
        P = np.append(z, modulus * np.exp(1j * theta[0]))
        value = M.rho(P, P)
        return [value.real, value.imag]

    points = []
    attempts = 0
    while len(points) < count:
        attempts += 1
        if attempts > 20 * count:
            raise ValidationError(f"{M.name}: only {len(points)} of {count} surface points found near {center}")
        z = center[:-1] + _random_disc(rng, radius, M.n - 1)
        modulus = w_modulus + w_spread * rng.uniform(-1.0, 1.0)
        try:
            solution = scipy.optimize.least_squares(residual, [theta0], args=(z, modulus),
                                                    xtol=1e-15, ftol=1e-15, gtol=1e-15)
        except SingularEvaluationError as error:
            logging.debug(f"SURFACE: skipped sample at z={z}: {error}")
            continue
        P = np.append(z, modulus * np.exp(1j * solution.x[0]))
        if abs(M.rho(P, P)) < tol.membership * max(1.0, modulus) and M.in_domain(P, "u2"):
            points.append(P)
        else:
            logging.debug(f"SURFACE: rejected sample at z={z}, residual {abs(M.rho(P, P)):.3e}")
    return np.array(points)


def random_domain_points(M: Hypersurface, count: int, rng: np.random.Generator, scale: float = 0.5,
                         min_w_ratio: float = 0.1) -> np.ndarray:
    """Random points of the polydisc scale * U1 away from X."""
    rz, rw = M.u1
    z = _random_disc(rng, scale * rz, count * (M.n - 1)).reshape(count, M.n - 1)
    modulus = scale * rw * rng.uniform(min_w_ratio, 1.0, count)
    w = modulus * np.exp(2j * math.pi * rng.uniform(0.0, 1.0, count))
    return np.column_stack([z, w])


def reality_residual(M: Hypersurface, rng: np.random.Generator, count: int = 100,
                     tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Largest violation of the reality of rho.

    A complex defining function is real up to a unit factor, so only its zero set is
    symmetric: Z on Q_zeta must give zeta on Q_Z.
    """
    worst = 0.0
    for zeta in random_domain_points(M, count, rng):
        variety = SegreVariety(M, zeta, tol)
        z = _random_disc(rng, 0.5 * M.u1[0], M.n - 1)
        Z = variety.point(z)
        worst = max(worst, abs(M.rho(zeta, Z)) / max(1.0, abs(zeta[-1])))
    return worst


def validate(M: Hypersurface, rng: np.random.Generator, count: int = 100,
             tol: Tolerances = DEFAULT_TOLERANCES) -> None:
    """Check that X lies in M and that rho is the complexification of a real function.

    :raise ValidationError: on the first failed check.
    """
    if M.nonminimal:
        for z in _random_disc(rng, M.u1[0], count * (M.n - 1)).reshape(count, M.n - 1):
            value = expr.evaluate(M.defining, expr.assignment(z, 0, np.conj(z), 0))
            if abs(value) > tol.membership:
                raise ValidationError(f"{M.name}: X is not contained in M, rho = {value} at z = {z}")
    residual = reality_residual(M, rng, count, tol)
    if residual > tol.membership:
        raise ValidationError(f"{M.name}: defining function is not real (residual {residual:.3e})")
    logging.info(f"SURFACE: {M.name} validated, reality residual {residual:.3e}")


def k_root(M: Hypersurface, k: int, rng: np.random.Generator | None = None, count: int = 100,
           tol: Tolerances = DEFAULT_TOLERANCES) -> Hypersurface:
    """The k-root: w* = cw* exp((i/k) phi(z*, cz*, cw*^k)).

    The map (z*, w*) -> (z*, w*^k) sends the k-root into M; this is checked
    on sampled points.

    :raise ValidationError: M has no exponential form, or the check fails.
    """
    if k < 1:
        raise ValidationError(f"k-root needs k >= 1, got {k}")
    if k == 1:
        return M
    if M.phi is None:
        raise ValidationError(f"{M.name} has no exponential form w = cw exp(i phi); k-root undefined")
    phi_k = expr.substitute(M.phi, {"cw": expr.parse(f"conj(w)^{k}")})
    phi_source = f"({expr.to_source(phi_k)}) / {k}"
    root = Hypersurface.from_source(
        name=f"{M.name}-root{k}",
        n=M.n,
        defining=f"w - conj(w) * exp(i * {phi_source})",
        phi=phi_source,
        u1=(M.u1[0], M.u1[1] ** (1.0 / k)),
        u2=(M.u2[0], M.u2[1] ** (1.0 / k)),
    )
    rng = np.random.default_rng(0) if rng is None else rng
    for P in sample_surface_points(root, count, rng, tol=tol):
        image = P.copy()
        image[-1] = P[-1] ** k
        residual = abs(M.rho(image, image))
        if residual > tol.membership * max(1.0, abs(image[-1])):
            raise ValidationError(f"{root.name}: (z, w^k) leaves {M.name} at {P} (residual {residual:.3e})")
    return root
