"""Iterated Segre sets and Segre chains between points of U1 \\ X."""
import dataclasses
import logging
import math

import numpy as np

from segretool.config import DEFAULT_TOLERANCES, Tolerances
from segretool.errors import ChainNotFoundError, DomainError, SegreSolveError, ValidationError
from segretool.hypersurface import Hypersurface, SegreVariety, as_point, segre_variety


@dataclasses.dataclass(frozen=True, eq=False)
class SegreCloud:
    """Monte-Carlo sample of the Segre sets S^q_0 .. S^q_depth.

    ``levels[d]`` holds the depth-d points and ``parents[d][i]`` the index in
    ``levels[d - 1]`` of the point whose Segre variety produced ``levels[d][i]``.
    """

    base: np.ndarray
    depth: int
    levels: tuple[np.ndarray, ...]
    parents: tuple[np.ndarray, ...]
    failures: int = 0

    @property
    def points(self) -> np.ndarray:
        return self.levels[-1]

    def membership_residual(self, M: Hypersurface) -> float:
        """Largest |rho(P, conj parent)| over all levels, scaled by max(1, |w|)."""
        worst = 0.0
        for d in range(1, self.depth + 1):
            for P, parent in zip(self.levels[d], self.parents[d]):
                worst = max(worst, abs(M.rho(P, self.levels[d - 1][parent])) / max(1.0, abs(P[-1])))
        return worst


@dataclasses.dataclass(frozen=True, eq=False)
class SegreChain:
    """Waypoints p, p1, ..., p_{2j-1}, target with each point on the Segre variety of the one before."""

    waypoints: tuple[np.ndarray, ...]

    @property
    def steps(self) -> int:
        return len(self.waypoints) - 1

    @property
    def start(self) -> np.ndarray:
        return self.waypoints[0]

    @property
    def end(self) -> np.ndarray:
        return self.waypoints[-1]

    def validate(self, M: Hypersurface, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
        """Re-check every membership; returns the largest residual.

        :raise ValidationError: a membership fails or a waypoint lies on X.
        """
        worst = 0.0
        for index, P in enumerate(self.waypoints):
            if M.near_x(P, tol):
                raise ValidationError(f"Chain waypoint {index} lies on X: {P}")
            if index == 0:
                continue
            residual = abs(M.rho(P, self.waypoints[index - 1])) / max(1.0, abs(P[-1]))
            if residual > tol.membership:
                raise ValidationError(f"Chain waypoint {index} is not on the Segre variety of its predecessor "
                                      f"(residual {residual:.3e})")
            worst = max(worst, residual)
        return worst


def _uniform_polydisc(rng: np.random.Generator, radius: float, dim: int) -> np.ndarray:
    r = radius * np.sqrt(rng.uniform(0.0, 1.0, dim))
    return r * np.exp(2j * math.pi * rng.uniform(0.0, 1.0, dim))


def sample_segre_set(
    M: Hypersurface,
    q,
    depth: int,
    count: int,
    rng: np.random.Generator,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> SegreCloud:
    """Sample S^q_1 .. S^q_depth.

    Each depth draws ``count`` points: a random parent of the previous depth,
    a z uniform in the z-polydisc of U1, lifted to the parent's Segre variety.
    Lifts leaving U1 are discarded; solver failures are skipped and counted.

    :raise SegreSolveError: more than half of the lifts at one depth failed to solve.
    """
    q = as_point(q, M.n)
    if not M.in_domain(q):
        raise DomainError(f"{q} lies outside U1 {M.u1}")
    levels = [q[None, :]]
    parents = [np.zeros(1, dtype=int)]
    failures = 0
    for d in range(1, depth + 1):
        previous = levels[-1]
        if len(previous) == 0:
            logging.warning(f"SEGRE SET: depth {d - 1} is empty, stopping early")
            break
        varieties: dict[int, SegreVariety] = {}
        points, owners, level_failures = [], [], 0
        for _ in range(count):
            parent = int(rng.integers(len(previous)))
            z = _uniform_polydisc(rng, M.u1[0], M.n - 1)
            try:
                variety = varieties.setdefault(parent, SegreVariety(M, previous[parent], tol))
                P = variety.point(z)
            except SegreSolveError as error:
                level_failures += 1
                logging.debug(f"SEGRE SET: lift failed at depth {d}: {error}")
                continue
            if M.in_domain(P):
                points.append(P)
                owners.append(parent)
        if level_failures > count // 2:
            raise SegreSolveError(f"{level_failures} of {count} Segre graph solves failed at depth {d}")
        failures += level_failures
        levels.append(np.array(points, dtype=complex).reshape(-1, M.n))
        parents.append(np.array(owners, dtype=int))
        logging.info(f"SEGRE SET: depth {d}: {len(points)} points kept of {count}, {level_failures} failures")
    return SegreCloud(q, len(levels) - 1, tuple(levels), tuple(parents), failures)


def _intersection_newton(a: SegreVariety, b: SegreVariety, z: np.ndarray, tol: Tolerances) -> np.ndarray | None:
    """Newton on z1 for graph_a(z) = graph_b(z) with the other z-coordinates held."""
    M = a.surface
    wa = wb = None
    for _ in range(tol.newton_max_iter):
        wa, wb = a.graph(z, wa), b.graph(z, wb)
        rho_w_a, rho_z_a = a.slopes(z, wa)
        rho_w_b, rho_z_b = b.slopes(z, wb)
        slope_a, slope_b = -rho_z_a[0] / rho_w_a, -rho_z_b[0] / rho_w_b
        difference = wa - wb
        if slope_a == slope_b:
            return None
        step = difference / (slope_a - slope_b)
        z = z.copy()
        z[0] -= step
        if abs(z[0]) > 2 * M.u1[0]:
            return None
        if abs(step) <= tol.newton * max(1.0, abs(z[0])):
            return np.append(z, a.graph(z, wa))
    return None


def two_step_reachable(
    M: Hypersurface,
    start,
    end,
    rng: np.random.Generator,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> np.ndarray | None:
    """A point s on Q_start and on Q_end, or None if none was found.

    :raise DomainError: an endpoint lies on X.
    """
    start, end = as_point(start, M.n), as_point(end, M.n)
    for P in (start, end):
        if M.near_x(P, tol):
            raise DomainError(f"{P} lies on X; Segre chains avoid X")
    if np.allclose(start, end, rtol=0, atol=1e-14):
        if abs(M.rho(start, start)) < tol.membership:
            return start
        variety = segre_variety(M, start, tol)
        return variety.point(start[:-1])
    qa, qb = segre_variety(M, start, tol), segre_variety(M, end, tol)
    for attempt in range(tol.restarts):
        z = _uniform_polydisc(rng, M.u1[0], M.n - 1)
        try:
            s = _intersection_newton(qa, qb, z, tol)
        except SegreSolveError as error:
            logging.debug(f"SEGRE CHAIN: intersection restart {attempt} failed: {error}")
            continue
        if s is None or not M.in_domain(s) or M.near_x(s, tol):
            continue
        scale = max(1.0, abs(s[-1]))
        if abs(M.rho(s, start)) < tol.membership * scale and abs(M.rho(s, end)) < tol.membership * scale:
            return s
    logging.debug(f"SEGRE CHAIN: no intersection of Q_{start} and Q_{end} after {tol.restarts} restarts")
    return None


def _random_successor(M: Hypersurface, c: np.ndarray, rng: np.random.Generator, tol: Tolerances) -> np.ndarray | None:
    """A random point of S^c_2, i.e. c' on Q_s for some s on Q_c."""
    try:
        s = SegreVariety(M, c, tol).point(_uniform_polydisc(rng, M.u1[0], M.n - 1))
        if not M.in_domain(s) or M.near_x(s, tol):
            return None
        c_next = SegreVariety(M, s, tol).point(_uniform_polydisc(rng, M.u1[0], M.n - 1))
    except SegreSolveError:
        return None
    if not M.in_domain(c_next) or M.near_x(c_next, tol):
        return None
    return np.array([s, c_next])


def find_chain(
    M: Hypersurface,
    p,
    target,
    rng: np.random.Generator,
    max_depth: int = 4,
    width: int = 8,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> SegreChain:
    """Even-length Segre chain from p to target.

    Breadth first: each frontier chain ending at c first tries a direct double
    step c -> s -> target, then grows by random double steps into S^c_2.

    :param max_depth: Largest number of Segre steps 2j tried.
    :param width: Frontier size per depth.
    :raise ChainNotFoundError: nothing found within max_depth steps.
    """
    p, target = as_point(p, M.n), as_point(target, M.n)
    for P in (p, target):
        if M.near_x(P, tol):
            raise DomainError(f"{P} lies on X; Segre chains avoid X")
        if not M.in_domain(P):
            raise DomainError(f"{P} lies outside U1 {M.u1}")
    if np.allclose(p, target, rtol=0, atol=1e-14):
        return SegreChain((p,))
    frontier = [[p]]
    deepest = 0
    for steps in range(2, max_depth + 1, 2):
        deepest = steps
        for waypoints in frontier:
            s = two_step_reachable(M, waypoints[-1], target, rng, tol)
            if s is not None:
                chain = SegreChain(tuple(waypoints) + (s, target))
                chain.validate(M, tol)
                logging.info(f"SEGRE CHAIN: found chain with {chain.steps} steps")
                return chain
        grown = []
        for _ in range(4 * width):
            if len(grown) >= width:
                break
            waypoints = frontier[int(rng.integers(len(frontier)))]
            successor = _random_successor(M, waypoints[-1], rng, tol)
            if successor is not None:
                grown.append(waypoints + list(successor))
        if not grown:
            break
        frontier = grown
    raise ChainNotFoundError(deepest, len(frontier))
