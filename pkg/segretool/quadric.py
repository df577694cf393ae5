"""Hermitian quadrics in CP^n and projective linear algebra.

Homogeneous coordinates use the chart order ``[z1, ..., z{n-1}, w, t]``;
the affine point (z, w) is ``[z, w, 1]``. A quadric is {xi : xi^T H conj(xi) = 0}
and its Segre variety of zeta is the hyperplane with covector H conj(zeta).
"""
import cmath
import dataclasses
import itertools
import logging
import math
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from segretool.config import DEFAULT_TOLERANCES, Tolerances
from segretool.errors import DegenerateConfigurationError, DegenerateError, DomainError

TWO_PI_I = 2j * math.pi


# ----- projective points -----

def homogenize(P) -> np.ndarray:
    return np.append(np.asarray(P, dtype=complex), 1.0 + 0j)


def dehomogenize(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=complex)
    if abs(xi[-1]) < 1e-14 * np.linalg.norm(xi):
        raise DomainError(f"Projective point {xi} lies at infinity of the affine chart")
    return xi[:-1] / xi[-1]


def canonical_point(xi) -> np.ndarray:
    """Unit-norm representative whose first nonzero entry is positive real."""
    xi = np.asarray(xi, dtype=complex)
    norm = np.linalg.norm(xi)
    if norm == 0:
        raise DegenerateError("The zero vector is not a projective point")
    xi = xi / norm
    pivot = xi[np.argmax(np.abs(xi) > 1e-12)]
    return xi * (abs(pivot) / pivot)


def projective_distance(x, y) -> float:
    """Sine of the angle between two vectors; 0 iff they agree up to scale.

    Works for points and, flattened, for matrices.
    """
    x = np.ravel(np.asarray(x, dtype=complex))
    y = np.ravel(np.asarray(y, dtype=complex))
    x = x / np.linalg.norm(x)
    y = y / np.linalg.norm(y)
    # residual of x after projecting onto y, exact near 0
    return min(1.0, float(np.linalg.norm(x - np.vdot(y, x) * y)))


def apply_map(T, xi) -> np.ndarray:
    return np.asarray(T, dtype=complex) @ np.asarray(xi, dtype=complex)


# ----- quadrics -----

@dataclasses.dataclass(frozen=True, eq=False)
class HermitianQuadric:
    H: np.ndarray

    def __post_init__(self):
        H = np.asarray(self.H, dtype=complex)
        if H.ndim != 2 or H.shape[0] != H.shape[1] or H.shape[0] < 3:
            raise DegenerateError(f"A quadric needs a square matrix of size >= 3, got shape {H.shape}")
        scale = np.linalg.norm(H)
        if scale == 0 or np.linalg.norm(H - H.conj().T) > 1e-12 * scale * H.shape[0]:
            raise DegenerateError("Quadric matrix is not Hermitian")
        H = (H + H.conj().T) / 2
        eigenvalues = np.linalg.eigvalsh(H)
        if np.min(np.abs(eigenvalues)) < 1e-10 * np.max(np.abs(eigenvalues)):
            raise DegenerateError(f"Degenerate quadric, eigenvalues {eigenvalues}")
        object.__setattr__(self, "H", H)

    @property
    def n(self) -> int:
        return self.H.shape[0] - 1

    @classmethod
    def standard(cls, signs: Sequence[int]) -> "HermitianQuadric":
        """Im w* = sum signs[j] |z*_j|^2."""
        m = len(signs)
        H = np.zeros((m + 2, m + 2), dtype=complex)
        for j, sign in enumerate(signs):
            H[j, j] = -sign
        H[m, m + 1] = -0.5j
        H[m + 1, m] = 0.5j
        return cls(H)

    @classmethod
    def with_signature(cls, k: int, l: int) -> "HermitianQuadric":
        return cls.standard([1] * k + [-1] * l)

    def transformed(self, T) -> "HermitianQuadric":
        """The image quadric T(Q)."""
        inverse = np.linalg.inv(np.asarray(T, dtype=complex))
        H = inverse.T @ self.H @ inverse.conj()
        return HermitianQuadric(H / np.linalg.norm(H))

    def value(self, xi, zeta=None) -> complex:
        """H(xi, conj zeta); zeta defaults to xi."""
        xi = np.asarray(xi, dtype=complex)
        zeta = xi if zeta is None else np.asarray(zeta, dtype=complex)
        return complex(xi @ self.H @ zeta.conj())

    def signature(self) -> tuple[int, int]:
        """(k, l) with k >= l, where H has k+1 and l+1 eigenvalues of opposite signs."""
        eigenvalues = np.linalg.eigvalsh(self.H)
        positive, negative = int(np.sum(eigenvalues > 0)), int(np.sum(eigenvalues < 0))
        k, l = positive - 1, negative - 1
        return (k, l) if k >= l else (l, k)

    def distance(self, other: "HermitianQuadric") -> float:
        """Projective distance between the matrices, treating H and -H as equal."""
        return projective_distance(self.H, other.H)


def segre_hyperplane(Q: HermitianQuadric, zeta) -> np.ndarray:
    """Covector of the hyperplane {xi : H(xi, conj zeta) = 0}."""
    return Q.H @ np.conj(np.asarray(zeta, dtype=complex))


def inverse_segre(Q: HermitianQuadric, covector) -> np.ndarray:
    """The point whose Segre hyperplane is the given covector."""
    return np.conj(np.linalg.solve(Q.H, np.asarray(covector, dtype=complex)))


# ----- fitting -----

def _unit_rows(points: Iterable) -> np.ndarray:
    rows = np.array([np.asarray(p, dtype=complex) for p in points])
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms == 0):
        raise DegenerateConfigurationError("Zero vector among projective points")
    return rows / norms[:, None]


def _conditioning(rows: np.ndarray) -> np.ndarray:
    """Linear change of coordinates C giving the unit rows an isotropic second moment.

    Works on homogeneous vectors directly, so points with a vanishing coordinate need no special chart.
    """
    moment = rows.T @ rows.conj() / rows.shape[0]
    values, vectors = np.linalg.eigh((moment + moment.conj().T) / 2)
    values = np.maximum(values, 1e-12 * max(float(values[-1]), 1e-300))
    return (vectors / np.sqrt(values)) @ vectors.conj().T


def fit_hyperplane(points: Sequence, tol: Tolerances = DEFAULT_TOLERANCES) -> tuple[np.ndarray, float]:
    """Least-squares hyperplane through projective points.

    :return: (covector, smallest / largest singular value).
    :raise DegenerateConfigurationError: the points do not determine a single hyperplane.
    """
    rows = _unit_rows(points)
    m, size = rows.shape
    if m < size:
        raise DegenerateConfigurationError(f"Need at least {size} points to fit a hyperplane in CP^{size - 1}, got {m}")
    _, singular_values, vh = np.linalg.svd(rows)
    if singular_values[-2] < tol.rank * singular_values[0]:
        raise DegenerateConfigurationError("Points span too small a subspace to determine a hyperplane")
    covector = np.conj(vh[-1])
    return covector, float(singular_values[-1] / singular_values[0])


def fit_projective_map(pairs: Sequence[tuple], tol: Tolerances = DEFAULT_TOLERANCES) -> tuple[np.ndarray, float]:
    """Projective map T with T x_i proportional to y_i.

    Each pair contributes the conditions y_a (T x)_b - y_b (T x)_a = 0 for a < b.

    :return: (T normalized to unit Frobenius norm, smallest singular value of the condition matrix).
    :raise DegenerateConfigurationError: the null space has dimension above one.
    """
    xs = _unit_rows(x for x, _ in pairs)
    ys = _unit_rows(y for _, y in pairs)
    Cx, Cy = _conditioning(xs), _conditioning(ys)
    xs, ys = _unit_rows(xs @ Cx.T), _unit_rows(ys @ Cy.T)
    size = xs.shape[1]
    rows = []
    for x, y in zip(xs, ys):
        for a, b in itertools.combinations(range(size), 2):
            row = np.zeros((size, size), dtype=complex)
            row[b] += y[a] * x
            row[a] -= y[b] * x
            rows.append(row.ravel())
    system = np.array(rows)
    if system.shape[0] < size * size:
        raise DegenerateConfigurationError(f"{len(pairs)} point pairs cannot determine a map of CP^{size - 1}")
    _, singular_values, vh = np.linalg.svd(system)
    if singular_values[-2] < tol.rank * singular_values[0]:
        raise DegenerateConfigurationError("Point pairs are not in general position; the map is not unique")
    T = np.linalg.solve(Cy, np.conj(vh[-1]).reshape(size, size) @ Cx)
    return T / np.linalg.norm(T), float(singular_values[-1])


def _hermitian_basis(size: int) -> list[np.ndarray]:
    basis = []
    for j in range(size):
        E = np.zeros((size, size), dtype=complex)
        E[j, j] = 1
        basis.append(E)
    for j, k in itertools.combinations(range(size), 2):
        S = np.zeros((size, size), dtype=complex)
        S[j, k] = S[k, j] = 1
        A = np.zeros((size, size), dtype=complex)
        A[j, k], A[k, j] = 1j, -1j
        basis.extend((S, A))
    return basis


def fit_quadric(points: Sequence, tol: Tolerances = DEFAULT_TOLERANCES) -> tuple[HermitianQuadric, float, tuple[int, int]]:
    """Hermitian quadric through projective points.

    :return: (quadric with unit Frobenius norm, relative residual, signature (k, l)).
    """
    rows = _unit_rows(points)
    C = _conditioning(rows)
    rows = _unit_rows(rows @ C.T)
    size = rows.shape[1]
    basis = _hermitian_basis(size)
    if rows.shape[0] < len(basis):
        raise DegenerateConfigurationError(f"Need at least {len(basis)} points to fit a quadric, got {rows.shape[0]}")
    system = np.array([[np.real(x @ B @ x.conj()) for B in basis] for x in rows])
    _, singular_values, vh = np.linalg.svd(system)
    if singular_values[-2] < tol.rank * singular_values[0]:
        raise DegenerateConfigurationError("Points lie on more than one quadric")
    H = C.T @ sum(c * B for c, B in zip(vh[-1], basis)) @ np.conj(C)
    H = (H + H.conj().T) / 2
    quadric = HermitianQuadric(H / np.linalg.norm(H))
    residual = float(singular_values[-1] / singular_values[0])
    return quadric, residual, quadric.signature()


# ----- logarithms and Jordan forms -----

def canonical_scaling(T) -> np.ndarray:
    """Representative of T up to scale with determinant 1.

    Among the n+1 representatives with determinant 1, the one whose principal
    logarithm has trace closest to 0 is chosen (ties to the lowest root index).
    """
    T = np.asarray(T, dtype=complex)
    size = T.shape[0]
    det = np.linalg.det(T)
    if det == 0 or not np.isfinite(det):
        raise DegenerateError("Projective map is not invertible")
    T0 = T / cmath.exp(cmath.log(det) / size)
    eigenvalues = np.linalg.eigvals(T0)
    best, best_trace = 0, math.inf
    for j in range(size):
        root = cmath.exp(TWO_PI_I * j / size)
        trace = abs(sum(_principal_log(root * lam) for lam in eigenvalues))
        if trace < best_trace - 1e-9:
            best, best_trace = j, trace
    return T0 * cmath.exp(TWO_PI_I * best / size)


def _principal_log(x: complex) -> complex:
    value = cmath.log(x)
    return complex(value.real, math.pi) if value.imag == -math.pi else value


def matrix_log(T, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """A = log(T_c) / (2 pi i) for the canonically scaled T_c, principal branch."""
    Tc = canonical_scaling(T)
    clusters, _ = _cluster(np.linalg.eigvals(Tc), tol.jordan_cluster)
    for cluster in clusters:
        center = complex(np.mean(cluster))
        if len(cluster) > 1 and center.real < 0 and abs(center.imag) < math.sqrt(tol.jordan_cluster):
            logging.warning(f"MATRIX LOG: repeated eigenvalue {center} on the branch cut; logarithm is ill-conditioned")
    A = scipy.linalg.logm(Tc) / TWO_PI_I
    return np.asarray(A, dtype=complex)


def matrix_power_of_w(A, log_w: complex) -> np.ndarray:
    """w^A = exp(A log w) for a tracked value of log w."""
    return scipy.linalg.expm(np.asarray(A, dtype=complex) * log_w)


def _cluster(eigenvalues: np.ndarray, tolerance: float) -> tuple[list[list[complex]], bool]:
    clusters: list[list[complex]] = []
    for lam in sorted(eigenvalues, key=lambda v: (abs(v), cmath.phase(v))):
        for cluster in clusters:
            if min(abs(lam - mu) for mu in cluster) < tolerance:
                cluster.append(lam)
                break
        else:
            clusters.append([lam])
    ambiguous = any(
        tolerance <= abs(a - b) < 100 * tolerance
        for ca, cb in itertools.combinations(clusters, 2)
        for a in ca
        for b in cb
    )
    return clusters, ambiguous


def spectral_projector(T, center: complex, radius: float, nodes: int = 64) -> np.ndarray:
    """Riesz projector onto the eigenvalues of T inside the circle |z - center| < radius."""
    T = np.asarray(T, dtype=complex)
    identity = np.eye(T.shape[0], dtype=complex)
    P = np.zeros_like(T)
    for k in range(nodes):
        offset = radius * cmath.exp(2j * math.pi * k / nodes)
        P += offset * np.linalg.inv((center + offset) * identity - T)
    return P / nodes


def log_branches(T, tol: Tolerances = DEFAULT_TOLERANCES) -> list[np.ndarray]:
    """Logarithms of T_c / (2 pi i) on other branches.

    Each eigenvalue cluster's generalized eigenspace is shifted by an integer in
    {-1, 0, 1}; the principal logarithm comes first.
    """
    Tc = canonical_scaling(T)
    A = matrix_log(Tc, tol)
    clusters, _ = _cluster(np.linalg.eigvals(Tc), tol.jordan_cluster)
    centers = [np.mean(cluster) for cluster in clusters]
    projectors = []
    for index, center in enumerate(centers):
        others = [abs(center - c) for j, c in enumerate(centers) if j != index]
        radius = 0.5 * min(others, default=1.0)
        projectors.append(spectral_projector(Tc, center, radius))
    shifts = sorted(itertools.product((0, -1, 1), repeat=len(projectors)), key=lambda s: sum(map(abs, s)))
    return [A + sum(s * P for s, P in zip(shift, projectors)) for shift in shifts]


@dataclasses.dataclass(frozen=True)
class JordanForm:
    """Jordan blocks (eigenvalue, size) of a canonically scaled projective map."""

    blocks: tuple[tuple[complex, int], ...]
    ambiguous: bool = False

    @property
    def size(self) -> int:
        return sum(size for _, size in self.blocks)

    def matrix(self, superdiagonal: complex = 1.0) -> np.ndarray:
        J = np.zeros((self.size, self.size), dtype=complex)
        start = 0
        for eigenvalue, size in self.blocks:
            for i in range(size):
                J[start + i, start + i] = eigenvalue
                if i + 1 < size:
                    J[start + i, start + i + 1] = superdiagonal
            start += size
        return J

    def is_scalar(self, tol: float = 1e-8) -> bool:
        first = self.blocks[0][0]
        return all(size == 1 and abs(e - first) < tol for e, size in self.blocks)

    def close_to(self, other: "JordanForm", tol: float = 1e-6) -> bool:
        if [size for _, size in self.blocks] != [size for _, size in other.blocks]:
            return False
        return all(abs(a - b) < tol for (a, _), (b, _) in zip(self.blocks, other.blocks))


def _block_key(eigenvalue: complex, size: int) -> tuple[float, float, int]:
    arg = cmath.phase(eigenvalue) % (2 * math.pi)
    if arg > 2 * math.pi - 1e-6:
        arg = 0.0
    return round(abs(eigenvalue), 6), round(arg, 6), size


def scaled_jordan(T, tol: Tolerances = DEFAULT_TOLERANCES) -> JordanForm:
    """Jordan normal form of T up to scale.

    Eigenvalues are clustered at ``tol.jordan_cluster``; block sizes follow from
    the ranks of (T - lambda)^k. The remaining root-of-unity ambiguity of the
    scaling is removed by taking the lexicographically smallest block list
    under (|lambda|, arg lambda in [0, 2 pi), size).
    """
    Tc = canonical_scaling(T)
    size = Tc.shape[0]
    clusters, ambiguous = _cluster(np.linalg.eigvals(Tc), tol.jordan_cluster)
    if ambiguous:
        logging.warning("JORDAN: eigenvalue clusters are close to the clustering tolerance; block structure is ambiguous")
    norm = max(1.0, float(np.linalg.norm(Tc, 2)))
    identity = np.eye(size, dtype=complex)
    blocks = []
    for cluster in clusters:
        center = complex(np.mean(cluster))
        multiplicity = len(cluster)
        shifted = Tc - center * identity
        ranks = [size]
        power = identity
        for k in range(1, multiplicity + 1):
            power = power @ shifted
            singular_values = np.linalg.svd(power, compute_uv=False)
            ranks.append(int(np.sum(singular_values > tol.jordan_rank * norm**k)))
        at_least = [max(0, ranks[k - 1] - ranks[k]) for k in range(1, multiplicity + 1)] + [0]
        sizes = []
        for k in range(1, multiplicity + 1):
            sizes.extend([k] * max(0, at_least[k - 1] - at_least[k]))
        if sum(sizes) != multiplicity:
            logging.warning(f"JORDAN: rank tests inconsistent for cluster at {center}; treating it as diagonal")
            sizes = [1] * multiplicity
        blocks.extend((center, s) for s in sizes)

    best = None
    for j in range(size):
        root = cmath.exp(TWO_PI_I * j / size)
        candidate = sorted(((lam * root, s) for lam, s in blocks), key=lambda b: _block_key(*b))
        key = [_block_key(*b) for b in candidate]
        if best is None or key < best[0]:
            best = (key, candidate)
    return JordanForm(tuple(best[1]), ambiguous)
