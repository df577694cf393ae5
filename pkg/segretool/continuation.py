"""Map germs into CP^n and their analytic continuation.

A germ is either a closed form over z, w and the tracked logarithm ``Lw``,
or a table of Taylor coefficients built from Segre steps: the value of the
continued map at Z is the point whose Segre hyperplane contains the image of
Q_Z under the previous germ.
"""
import dataclasses
import logging
import math
from typing import Sequence

import numpy as np

from segretool import expr
from segretool.config import DEFAULT_TOLERANCES, Tolerances, make_rng
from segretool.errors import (
    ContinuationError,
    DegenerateConfigurationError,
    EmptyIntersectionError,
    FitError,
    OnExceptionalLocusError,
    SegreSolveError,
    SegreToolError,
    ValidationError,
)
from segretool.hypersurface import Hypersurface, SegreVariety, as_point
from segretool.quadric import (
    HermitianQuadric,
    fit_hyperplane,
    fit_projective_map,
    inverse_segre,
    projective_distance,
)
from segretool.segresets import SegreChain, find_chain

TWO_PI_I = 2j * math.pi


# ----- evaluators -----

@dataclasses.dataclass(frozen=True, eq=False)
class ClosedForm:
    """Homogeneous components given as expressions in z, w and Lw."""

    components: tuple[expr.AnalyticExpr, ...]

    @classmethod
    def from_source(cls, sources: Sequence[str], n: int) -> "ClosedForm":
        if len(sources) != n + 1:
            raise ValidationError(f"A germ into CP^{n} needs {n + 1} components, got {len(sources)}")
        components = tuple(expr.parse(source, n) for source in sources)
        for component in components:
            conjugates = [name for name in component.variables if expr.is_conjugate_variable(name)]
            if conjugates:
                raise ValidationError(f"Germ components must be holomorphic, found {', '.join(sorted(conjugates))}")
        return cls(components)

    def __call__(self, Z: np.ndarray, log_w: complex) -> np.ndarray:
        point = {f"z{j + 1}": complex(value) for j, value in enumerate(Z[:-1])}
        point["w"] = complex(Z[-1])
        point[expr.LOG_W] = log_w
        winding = 0
        if Z[-1] != 0:
            winding = round(((log_w - expr.principal_log(complex(Z[-1]))) / TWO_PI_I).real)
        return np.array([expr.evaluate(c, point, winding) for c in self.components], dtype=complex)

    def sources(self) -> list[str]:
        return [expr.to_source(c) for c in self.components]


@dataclasses.dataclass(frozen=True, eq=False)
class Tabulated:
    """Truncated Taylor expansion of an affine chart of the map, from torus samples."""

    center: np.ndarray
    sample_radius: float
    coefficients: np.ndarray
    chart: int

    def __call__(self, Z: np.ndarray, log_w: complex | None = None) -> np.ndarray:
        offsets = (np.asarray(Z, dtype=complex) - self.center) / self.sample_radius
        result = self.coefficients
        for offset in offsets:
            powers = offset ** np.arange(result.shape[0])
            result = np.tensordot(powers, result, axes=([0], [0]))
        return result


# ----- germs -----

@dataclasses.dataclass(frozen=True, eq=False)
class MapGerm:
    """A holomorphic map from the polydisc around ``base`` into CP^n.

    :param radius: Polydisc radius (same in every coordinate).
    :param target: Quadric the map sends M into.
    :param branch_log: Tracked value of log w at ``base``.
    :param post: Projective map applied after the evaluator.
    """

    base: np.ndarray
    radius: float
    target: HermitianQuadric
    evaluator: ClosedForm | Tabulated
    branch_log: complex
    post: np.ndarray | None = None

    @classmethod
    def closed_form(
        cls,
        components: Sequence[str],
        base,
        radius: float,
        target: HermitianQuadric,
        winding: int = 0,
    ) -> "MapGerm":
        base = as_point(base)
        evaluator = ClosedForm.from_source(components, len(base))
        branch_log = expr.principal_log(complex(base[-1])) + TWO_PI_I * winding if base[-1] != 0 else 0j
        return cls(base, float(radius), target, evaluator, branch_log)

    @property
    def n(self) -> int:
        return len(self.base)

    @property
    def is_closed_form(self) -> bool:
        return isinstance(self.evaluator, ClosedForm)

    @property
    def winding(self) -> int:
        return round(((self.branch_log - expr.principal_log(complex(self.base[-1]))) / TWO_PI_I).real)

    def log_w(self, Z) -> complex:
        """log w at Z, continued from the base inside the polydisc."""
        w = complex(np.asarray(Z)[-1])
        if w == 0:
            raise OnExceptionalLocusError(f"log w is undefined on X at {Z}")
        return self.branch_log + expr.principal_log(w / complex(self.base[-1]))

    def contains(self, Z, scale: float = 1.0) -> bool:
        return bool(np.max(np.abs(np.asarray(Z, dtype=complex) - self.base)) <= scale * self.radius)

    def __call__(self, Z) -> np.ndarray:
        Z = np.asarray(Z, dtype=complex)
        log_w = self.log_w(Z) if self.is_closed_form else None
        value = self.evaluator(Z, log_w)
        return value if self.post is None else self.post @ value

    def moved(self, base, branch_log: complex, radius: float | None = None) -> "MapGerm":
        """The same closed form re-centred at another base with its tracked logarithm."""
        if not self.is_closed_form:
            raise ValidationError("Only closed-form germs can be re-centred without Segre steps")
        return dataclasses.replace(self, base=as_point(base), branch_log=branch_log,
                                   radius=self.radius if radius is None else radius)

    def with_post(self, T) -> "MapGerm":
        """tau o F, mapping into tau(target)."""
        T = np.asarray(T, dtype=complex)
        post = T if self.post is None else T @ self.post
        return dataclasses.replace(self, post=post, target=self.target.transformed(T))

    def jacobian_rank(self, step: float = 1e-6, tol: float = 1e-6) -> int:
        """Rank of the affine-chart Jacobian at the base (injectivity check)."""
        center = self(self.base)
        chart = int(np.argmax(np.abs(center)))
        columns = []
        for k in range(self.n):
            shift = np.zeros(self.n, dtype=complex)
            shift[k] = step
            forward, backward = self(self.base + shift), self(self.base - shift)
            columns.append((forward / forward[chart] - backward / backward[chart]) / (2 * step))
        singular_values = np.linalg.svd(np.stack(columns, axis=1), compute_uv=False)
        return int(np.sum(singular_values > tol * singular_values[0]))


def validate_germ(M: Hypersurface, germ: MapGerm, tol: Tolerances = DEFAULT_TOLERANCES) -> None:
    """Local injectivity at the base, and F(base) on the target when the base is on M.

    :raise ValidationError: a check fails.
    """
    rank = germ.jacobian_rank()
    if rank != M.n:
        raise ValidationError(f"Germ is not locally injective at {germ.base} (Jacobian rank {rank})")
    if abs(M.rho(germ.base, germ.base)) < tol.membership:
        value = germ(germ.base)
        residual = abs(germ.target.value(value)) / (np.linalg.norm(value) ** 2 * np.linalg.norm(germ.target.H))
        if residual > tol.membership:
            raise ValidationError(f"Germ does not map {germ.base} into its target quadric (residual {residual:.3e})")


# ----- paths -----

@dataclasses.dataclass(frozen=True, eq=False)
class ContinuationPath:
    waypoints: np.ndarray

    @classmethod
    def through(cls, points) -> "ContinuationPath":
        return cls(np.array([as_point(p) for p in points]))

    @classmethod
    def loop(cls, z0, w_radius: float, turns: float = 1, start_angle: float = 0.0,
             arg_step: float = DEFAULT_TOLERANCES.path_arg_step) -> "ContinuationPath":
        """The circle {(z0, w_radius e^{i t})} run ``turns`` times, counterclockwise for turns > 0."""
        z0 = np.atleast_1d(np.asarray(z0, dtype=complex))
        sweep = 2 * math.pi * turns
        pieces = max(4, math.ceil(abs(sweep) / arg_step))
        angles = start_angle + sweep * np.arange(pieces + 1) / pieces
        return cls(np.array([np.append(z0, w_radius * np.exp(1j * a)) for a in angles]))

    @property
    def start(self) -> np.ndarray:
        return self.waypoints[0]

    @property
    def end(self) -> np.ndarray:
        return self.waypoints[-1]

    def then(self, other: "ContinuationPath") -> "ContinuationPath":
        return ContinuationPath(np.concatenate([self.waypoints, other.waypoints[1:]]))


def _segment_log_increment(a: np.ndarray, b: np.ndarray, floor: float, index: int) -> complex:
    """Change of log w along the straight segment a -> b."""
    wa, wb = complex(a[-1]), complex(b[-1])
    direction = wb - wa
    if direction == 0:
        nearest = abs(wa)
    else:
        t = min(1.0, max(0.0, -(wa.conjugate() * direction).real / abs(direction) ** 2))
        nearest = abs(wa + t * direction)
    if nearest <= floor:
        raise ContinuationError(f"Path passes within {nearest:.3e} of X", index)
    pieces = 1
    while True:
        ws = wa + direction * np.arange(pieces + 1) / pieces
        ratios = ws[1:] / ws[:-1]
        if np.all(np.abs(np.angle(ratios)) < math.pi / 2):
            return complex(sum(expr.principal_log(complex(r)) for r in ratios))
        pieces *= 2


def track_log_w(M: Hypersurface, path: ContinuationPath, log_w_start: complex,
                tol: Tolerances = DEFAULT_TOLERANCES) -> complex:
    """Value of log w at the end of the path, continued from ``log_w_start``."""
    floor = tol.degeneracy * M.u1[1]
    log_w = log_w_start
    for index in range(1, len(path.waypoints)):
        log_w += _segment_log_increment(path.waypoints[index - 1], path.waypoints[index], floor, index)
    return log_w


# ----- Segre steps -----

def spread_offsets(dim: int, count: int) -> np.ndarray:
    """Fixed spread of z-offsets of norm at most 1."""
    k = np.arange(count)[:, None]
    j = np.arange(1, dim + 1)[None, :]
    scale = np.where(np.arange(count) % 2 == 0, 1.0, 0.6)[:, None]
    return scale * np.exp(2j * math.pi * k * j / count) / math.sqrt(dim)


def segre_slice(
    variety: SegreVariety,
    germ: MapGerm,
    anchor_z: np.ndarray,
    seed_w: complex,
    count: int,
) -> list[np.ndarray]:
    """Points of Q_Z inside the germ's polydisc, spread around ``anchor_z``."""
    points = []
    for offset in spread_offsets(len(anchor_z), count):
        z = anchor_z + 0.5 * germ.radius * offset
        try:
            P = variety.point(z, seed_w)
        except SegreSolveError as error:
            logging.debug(f"CONTINUATION: slice point skipped: {error}")
            continue
        if germ.contains(P):
            points.append(P)
    return points


def segre_step(M: Hypersurface, germ: MapGerm, Z, tol: Tolerances = DEFAULT_TOLERANCES) -> tuple[np.ndarray, float]:
    """Value at Z of the continuation of the germ.

    The image of Q_Z near the germ's base lies in a hyperplane of CP^n; the
    value is the point of the target quadric whose Segre hyperplane it is.

    :return: (homogeneous value, relative residual of the hyperplane fit).
    :raise EmptyIntersectionError: Q_Z misses the germ's polydisc.
    :raise FitError: the image is not contained in a hyperplane.
    """
    Z = as_point(Z, M.n)
    variety = SegreVariety(M, Z, tol)
    if variety.degenerate:
        raise OnExceptionalLocusError(f"{Z} lies on X; its Segre variety is X")
    points = segre_slice(variety, germ, germ.base[:-1], complex(germ.base[-1]), M.n + 8)
    if len(points) < M.n + 1:
        raise EmptyIntersectionError(
            f"Q_Z for Z={Z} meets the polydisc of radius {germ.radius} around {germ.base} in {len(points)} sample points"
        )
    try:
        covector, residual = fit_hyperplane([germ(P) for P in points], tol)
    except DegenerateConfigurationError as error:
        raise EmptyIntersectionError(f"Segre variety of {Z} samples too little of the polydisc: {error}") from error
    if residual > tol.q_segre:
        raise FitError(f"Image of the Segre variety of {Z} is not contained in a hyperplane", residual)
    return inverse_segre(germ.target, covector), residual


def _segre_sensitivity(M: Hypersurface, P: np.ndarray) -> float:
    """How fast the Segre variety of P moves as P moves."""
    names = tuple(f"cz{j + 1}" for j in range(M.n - 1)) + ("cw", "w")
    jet = expr.eval_jet(M.defining, expr.assignment(P[:-1], P[-1], np.conj(P[:-1]), np.conj(P[-1])), 1, names)
    rho_w = jet.gradient[-1]
    return float(np.max(np.abs(jet.gradient[:-1] / rho_w)))


def _choose_chart(value: np.ndarray) -> int:
    if abs(value[-1]) >= 0.5 * np.max(np.abs(value)):
        return len(value) - 1
    return int(np.argmax(np.abs(value)))


def tabulate_germ(M: Hypersurface, germ: MapGerm, P, tol: Tolerances = DEFAULT_TOLERANCES) -> MapGerm:
    """A tabulated germ at P obtained from ``germ`` by Segre steps.

    Values at torus nodes around P are turned into Taylor coefficients of an
    affine chart by a discrete Fourier transform.

    :raise ContinuationError: the table does not reproduce the Segre step at P.
    """
    P = as_point(P, M.n)
    if M.near_x(P, tol):
        raise OnExceptionalLocusError(f"Cannot tabulate a germ at {P} on X")
    # the table is only trusted inside its sampling torus
    radius = tol.shrink * germ.radius / max(1.0, _segre_sensitivity(M, P))
    if M.nonminimal:
        radius = min(radius, tol.germ_radius_ratio * abs(P[-1]))
    sample_radius = radius
    shape = (tol.stencil_nodes_z,) * (M.n - 1) + (tol.stencil_nodes_w,)
    center_value, _ = segre_step(M, germ, P, tol)
    chart = _choose_chart(center_value)
    values = np.empty(shape + (M.n + 1,), dtype=complex)
    for index in np.ndindex(*shape):
        nodes = np.array([np.exp(2j * math.pi * i / size) for i, size in zip(index, shape)])
        value, _ = segre_step(M, germ, P + sample_radius * nodes, tol)
        values[index] = value / value[chart]
    coefficients = np.fft.fftn(values, axes=tuple(range(M.n))) / np.prod(shape)
    table = Tabulated(P, sample_radius, coefficients, chart)
    deviation = projective_distance(table(P), center_value)
    if deviation > tol.step_consistency:
        raise ContinuationError(f"Tabulated germ at {P} deviates from its Segre step by {deviation:.3e}", 0)
    branch_log = germ.branch_log + expr.principal_log(complex(P[-1]) / complex(germ.base[-1]))
    logging.debug(f"CONTINUATION: tabulated germ at {P}, radius {radius:.3e}, deviation {deviation:.3e}")
    return MapGerm(P, radius, germ.target, table, branch_log)


def q_segre_check(
    M: Hypersurface,
    germ: MapGerm,
    rng: np.random.Generator,
    count: int = 20,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> tuple[float, bool]:
    """Largest hyperplane-fit residual of germ images of Segre varieties through the polydisc.

    :return: (max residual, residual below the Q-Segre tolerance).
    """
    worst = 0.0
    checked = 0
    for _ in range(4 * count):
        if checked >= count:
            break
        offset = 0.5 * germ.radius * np.exp(2j * math.pi * rng.uniform(0.0, 1.0, M.n)) * rng.uniform(0.0, 1.0, M.n)
        inner = germ.base + offset
        if M.near_x(inner, tol):
            continue
        try:
            s = SegreVariety(M, inner, tol).point(inner[:-1] + 0.25 * germ.radius * offset[:-1], inner[-1])
            variety = SegreVariety(M, s, tol)
            points = segre_slice(variety, germ, inner[:-1], complex(inner[-1]), M.n + 8)
            if len(points) < M.n + 1:
                continue
            _, residual = fit_hyperplane([germ(P) for P in points], tol)
        except (SegreSolveError, DegenerateConfigurationError) as error:
            logging.debug(f"Q-SEGRE: sample skipped: {error}")
            continue
        worst = max(worst, residual)
        checked += 1
    if checked == 0:
        logging.warning("Q-SEGRE: no Segre variety met the polydisc; nothing was checked")
    return worst, worst < tol.q_segre


def segre_invariance_residual(M: Hypersurface, germ: MapGerm, Z, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Largest |H(F(xi), conj F(Z))| over xi on Q_Z near Z, relative to the norms."""
    Z = as_point(Z, M.n)
    value = germ(Z)
    points = segre_slice(SegreVariety(M, Z, tol), germ, Z[:-1], complex(Z[-1]), M.n + 8)
    if not points:
        raise EmptyIntersectionError(f"Q_Z for Z={Z} does not meet the germ's polydisc")
    H = germ.target.H
    scale = np.linalg.norm(H) * np.linalg.norm(value)
    return max(abs(germ.target.value(germ(P), value)) / (scale * np.linalg.norm(germ(P))) for P in points)


def glue(germ_a: MapGerm, germ_b: MapGerm, tol: Tolerances = DEFAULT_TOLERANCES) -> tuple[np.ndarray, float]:
    """Projective map tau with tau o germ_a = germ_b on the common polydisc.

    :return: (tau, fit residual).
    :raise EmptyIntersectionError: the polydiscs do not overlap.
    """
    gap = float(np.max(np.abs(germ_a.base - germ_b.base)))
    common = min(germ_a.radius, germ_b.radius) - gap / 2
    if common <= 0:
        raise EmptyIntersectionError(f"Germ polydiscs at {germ_a.base} and {germ_b.base} do not overlap")
    center = (germ_a.base + germ_b.base) / 2
    n = len(center)
    points = [center + 0.5 * common * offset for offset in spread_offsets(n, 2 * (n + 3))]
    pairs = [(germ_a(Z), germ_b(Z)) for Z in points]
    return fit_projective_map(pairs, tol)


# ----- continuation -----

def continue_along_chain(
    M: Hypersurface,
    germ: MapGerm,
    chain: SegreChain,
    rng: np.random.Generator,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> MapGerm:
    """Tabulated germ at the end of a Segre chain, one Segre step per waypoint.

    :raise ContinuationError: a step or a Q-Segre certification fails (index of the waypoint attached).
    """
    if chain.steps == 0:
        return germ
    if not germ.contains(chain.start):
        raise ContinuationError(f"Chain start {chain.start} is outside the germ's polydisc", 0)
    current = germ
    for index, P in enumerate(chain.waypoints[1:], start=1):
        try:
            current = tabulate_germ(M, current, P, tol)
        except SegreToolError as error:
            raise ContinuationError(f"Segre step failed: {error}", index) from error
        residual, passed = q_segre_check(M, current, rng, tol=tol)
        if not passed:
            raise ContinuationError(f"Continued germ lost the Q-Segre property (residual {residual:.3e})", index)
    if chain.steps % 2 == 0:
        branch_log = track_log_w(M, segre_path(M, chain, tol), germ.log_w(chain.start), tol)
        current = dataclasses.replace(current, branch_log=branch_log)
    return current


def segre_path(M: Hypersurface, chain: SegreChain, tol: Tolerances = DEFAULT_TOLERANCES,
               pieces: int = 32) -> ContinuationPath:
    """Continuous path realising an even chain: p_{2j} to p_{2j+2} inside Q_{p_{2j+1}}."""
    if chain.steps % 2:
        raise ValidationError(f"Only even chains have a Segre path, got {chain.steps} steps")
    points = [chain.start]
    for j in range(0, chain.steps, 2):
        start, middle, end = chain.waypoints[j], chain.waypoints[j + 1], chain.waypoints[j + 2]
        variety = SegreVariety(M, middle, tol)
        w = complex(start[-1])
        for t in np.arange(1, pieces + 1) / pieces:
            z = start[:-1] + t * (end[:-1] - start[:-1])
            w = variety.graph(z, w)
            points.append(np.append(z, w))
        points[-1] = end
    return ContinuationPath(np.array(points))


def _chain_hop(M: Hypersurface, germ: MapGerm, b: np.ndarray, rng: np.random.Generator, tol: Tolerances) -> MapGerm:
    """Germ at b from a Segre chain a -> ... -> b, glued back onto the germ at a."""
    chain = find_chain(M, germ.base, b, rng, tol=tol)
    result = continue_along_chain(M, germ, chain, rng, tol)
    tau, residual = glue(germ, result, tol)
    deviation = projective_distance(tau, np.eye(M.n + 1))
    if residual > tol.glue or deviation > tol.glue:
        raise ContinuationError(
            f"Germ at {b} does not glue onto the germ at {germ.base} (residual {residual:.3e}, deviation {deviation:.3e})",
            0,
        )
    return result


def continue_along_path(
    M: Hypersurface,
    germ: MapGerm,
    path: ContinuationPath,
    mode: str | None = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
    rng: np.random.Generator | None = None,
    max_hops: int = 16,
) -> MapGerm:
    """Germ at the end of the path.

    :param mode: ``"tracking"`` re-centres a closed form and tracks the branch of log w;
        ``"segre"`` cuts the path into hops short enough for consecutive germs to overlap,
        continues along a Segre chain per hop and glues each new germ onto the previous
        one. Defaults to tracking for closed forms and Segre steps otherwise.
    :param rng: Source of the random chain search in Segre mode.
    :param max_hops: Segre hops allowed per waypoint.
    :raise ContinuationError: the path leaves the germ at its start or comes too close to X.
    """
    mode = mode or ("tracking" if germ.is_closed_form else "segre")
    if not germ.contains(path.start):
        raise ContinuationError(f"Path start {path.start} is outside the germ's polydisc", 0)
    if mode == "tracking":
        log_w = track_log_w(M, path, germ.log_w(path.start), tol)
        end = path.end
        radius = germ.radius
        if M.nonminimal and not germ.contains(end):
            radius = min(radius, tol.germ_radius_ratio * abs(end[-1]))
        return germ.moved(end, log_w, radius)
    if mode != "segre":
        raise ValidationError(f"Unknown continuation mode '{mode}'")
    rng = rng if rng is not None else make_rng(None)
    current = germ
    waypoints = [current.base] + list(path.waypoints[1:] if np.allclose(path.start, germ.base) else path.waypoints)
    for index in range(1, len(waypoints)):
        b = waypoints[index]
        # each chain shrinks the polydisc; short hops keep the glue overlap non-empty
        for _ in range(max_hops):
            gap = float(np.max(np.abs(b - current.base)))
            if gap == 0:
                break
            hop = min(1.0, 0.1 * current.radius / gap)
            try:
                current = _chain_hop(M, current, current.base + hop * (b - current.base), rng, tol)
            except SegreToolError as error:
                raise ContinuationError(f"Segre hop failed: {error}", index) from error
            if hop == 1.0:
                break
        else:
            raise ContinuationError(
                f"Waypoint {b} not reached in {max_hops} Segre hops; the polydisc shrank to {current.radius:.3e}", index
            )
        logging.debug(f"CONTINUATION: reached waypoint {index} of {len(waypoints) - 1}")
    return current
