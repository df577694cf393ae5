"""Monodromy of a germ around X: sigma, A = log(sigma) / (2 pi i), J(M) and finite order.

Continuing a germ F once around the generator of pi_1(U1 \\ X) gives sigma o F.
The Monodromy formula writes F = w^A G with G single-valued; when sigma has
finite order k, F factors through the k-root (z, w) -> (z, w^k).
"""
import cmath
import dataclasses
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np

from segretool import expr
from segretool.config import DEFAULT_TOLERANCES, Tolerances
from segretool.continuation import (
    ClosedForm,
    ContinuationPath,
    MapGerm,
    continue_along_path,
    spread_offsets,
)
from segretool.errors import FitError, SegreToolError, ValidationError
from segretool.hypersurface import Hypersurface, k_root, sample_surface_points
from segretool.quadric import (
    HermitianQuadric,
    JordanForm,
    canonical_point,
    canonical_scaling,
    fit_projective_map,
    fit_quadric,
    log_branches,
    matrix_log,
    matrix_power_of_w,
    projective_distance,
    scaled_jordan,
)

TWO_PI_I = 2j * math.pi


@dataclasses.dataclass(frozen=True, eq=False)
class MonodromyResult:
    """Outcome of one loop continuation.

    :param sigma: Canonically scaled monodromy matrix (determinant 1).
    :param A: Principal log(sigma) / (2 pi i).
    :param residual: Smallest singular value of the projective fit.
    :param before: Germ at the loop start before the loop.
    :param after: The same germ after running the loop.
    """

    sigma: np.ndarray
    A: np.ndarray
    jordan: JordanForm
    finite_order: int | None
    residual: float
    turns: int
    before: MapGerm
    after: MapGerm

    @property
    def base(self) -> np.ndarray:
        return self.before.base


def _sample_points(germ: MapGerm, count: int | None = None) -> list[np.ndarray]:
    count = count or 2 * (germ.n + 1) + 4
    return [germ.base + 0.5 * germ.radius * offset for offset in spread_offsets(germ.n, count)]


def move_to(M: Hypersurface, germ: MapGerm, point, mode: str | None = None,
            tol: Tolerances = DEFAULT_TOLERANCES) -> MapGerm:
    """The germ continued along the straight segment from its base to ``point``."""
    point = np.asarray(point, dtype=complex)
    if np.allclose(germ.base, point, rtol=0, atol=1e-14):
        return germ
    return continue_along_path(M, germ, ContinuationPath.through([germ.base, point]), mode, tol)


def _is_scalar(P: np.ndarray, tol: float) -> bool:
    diagonal = np.diag(P)
    off_diagonal = P - np.diag(diagonal)
    scale = np.linalg.norm(P)
    if np.max(np.abs(off_diagonal)) >= tol * scale:
        return False
    mean = np.mean(diagonal)
    return bool(np.max(np.abs(diagonal - mean)) < tol * abs(mean))


def finite_order(sigma, tol: Tolerances = DEFAULT_TOLERANCES) -> int | None:
    """Smallest k <= k_max with sigma^k scalar, or None."""
    Tc = canonical_scaling(sigma)
    power = np.eye(Tc.shape[0], dtype=complex)
    for k in range(1, tol.k_max + 1):
        power = power @ Tc
        if _is_scalar(power, tol.scalar * k):
            return k
    return None


def compute_monodromy(
    M: Hypersurface,
    germ: MapGerm,
    loop: ContinuationPath,
    mode: str | None = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> MonodromyResult:
    """Continue the germ to the loop start, run the loop, and fit sigma with F_after = sigma o F_before.

    :raise ContinuationError: the continuation fails.
    :raise FitError: the projective fit residual is above ``tol.fit``.
    """
    before = move_to(M, germ, loop.start, mode, tol)
    after = continue_along_path(M, before, loop, mode, tol)
    pairs = [(before(Z), after(Z)) for Z in _sample_points(before)]
    sigma, residual = fit_projective_map(pairs, tol)
    if residual > tol.fit:
        raise FitError(f"{M.name}: monodromy fit residual {residual:.3e} above {tol.fit:.1e}", residual)
    sigma = canonical_scaling(sigma)
    turns = round(((after.branch_log - before.branch_log) / TWO_PI_I).real)
    result = MonodromyResult(
        sigma=sigma,
        A=matrix_log(sigma, tol),
        jordan=scaled_jordan(sigma, tol),
        finite_order=finite_order(sigma, tol),
        residual=residual,
        turns=turns,
        before=before,
        after=after,
    )
    logging.info(f"MONODROMY: {M.name}: {turns} turn(s), fit residual {residual:.3e}, "
                 f"finite order {result.finite_order}")
    return result


def verify_monodromy_formula(
    result: MonodromyResult,
    samples: Sequence | None = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> tuple[float, np.ndarray]:
    """Check that G = w^{-A} F is unchanged by the loop.

    Logarithms of sigma on other branches are tried in turn when the principal
    one fails; the first branch below ``tol.step_consistency`` wins.

    :return: (largest projective deviation, the A that achieved it).
    """
    before, after = result.before, result.after
    points = _sample_points(before) if samples is None else [np.asarray(Z, dtype=complex) for Z in samples]
    best_deviation, best_A = math.inf, result.A
    for attempt, A in enumerate(log_branches(result.sigma, tol)):
        deviation = 0.0
        for Z in points:
            g_before = matrix_power_of_w(-A, before.log_w(Z)) @ before(Z)
            g_after = matrix_power_of_w(-A, after.log_w(Z)) @ after(Z)
            deviation = max(deviation, projective_distance(g_before, g_after))
        if deviation < best_deviation:
            best_deviation, best_A = deviation, A
        if deviation < tol.step_consistency:
            break
        logging.warning(f"MONODROMY: log branch {attempt} leaves G multivalued (deviation {deviation:.3e}); retrying")
    return best_deviation, best_A


def branch_values(result: MonodromyResult, Z, ks: Sequence[int]) -> list[np.ndarray]:
    """F_{p,k}(Z) = sigma^k F_{p,0}(Z) for each k, as canonical points."""
    value = result.before(np.asarray(Z, dtype=complex))
    return [canonical_point(np.linalg.matrix_power(result.sigma, k) @ value) for k in ks]


def group_law_residual(one_turn: MonodromyResult, two_turns: MonodromyResult) -> float:
    return projective_distance(one_turn.sigma @ one_turn.sigma, two_turns.sigma)


def conjugation_residual(result: MonodromyResult, tau, conjugated: MonodromyResult) -> float:
    """Distance between tau sigma tau^-1 and the sigma of the tau-transformed germ."""
    tau = np.asarray(tau, dtype=complex)
    return projective_distance(tau @ result.sigma @ np.linalg.inv(tau), conjugated.sigma)


# ----- finite order -----

def root_germ(germ: MapGerm, k: int, tol: Tolerances = DEFAULT_TOLERANCES) -> MapGerm:
    """F~(z*, w*) = F(z*, (w*)^k) on the k-root, centred over the germ's base."""
    if k == 1:
        return germ
    if not germ.is_closed_form:
        raise ValidationError("Root germs are built from closed forms only")
    mapping = {"w": expr.parse(f"w^{k}"), expr.LOG_W: expr.parse(f"{k}*{expr.LOG_W}")}
    components = tuple(expr.substitute(c, mapping) for c in germ.evaluator.components)
    branch_log = germ.branch_log / k
    base = germ.base.copy()
    base[-1] = cmath.exp(branch_log)
    radius = min(germ.radius, tol.germ_radius_ratio * abs(base[-1]))
    return dataclasses.replace(germ, base=base, radius=radius, evaluator=ClosedForm(components),
                               branch_log=branch_log)


def finite_order_and_root(
    M: Hypersurface,
    germ: MapGerm,
    result: MonodromyResult,
    rng: np.random.Generator,
    mode: str | None = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> tuple[int, bool | None] | None:
    """(k, verified) for the finite order k of sigma, or None when there is none up to k_max.

    ``verified`` tells whether the germ's pull-back to the k-root has scalar
    monodromy; it is None when M has no exponential form.
    """
    k = result.finite_order
    if k is None:
        return None
    if k == 1:
        return 1, True
    if M.phi is None:
        return k, None
    root = k_root(M, k, rng, tol=tol)
    lifted = root_germ(move_to(M, germ, result.base, mode, tol), k, tol)
    w0 = complex(lifted.base[-1])
    loop = ContinuationPath.loop(lifted.base[:-1], abs(w0), 1, cmath.phase(w0))
    lifted_result = compute_monodromy(root, lifted, loop, mode, tol)
    verified = lifted_result.finite_order == 1
    logging.info(f"MONODROMY: {M.name}: order {k}, {root.name} monodromy scalar: {verified}")
    return k, verified


# ----- sides of M \ X -----

@dataclasses.dataclass(frozen=True, eq=False)
class TransferResult:
    plus: HermitianQuadric
    minus: HermitianQuadric
    plus_residual: float
    minus_residual: float

    @property
    def plus_signature(self) -> tuple[int, int]:
        return self.plus.signature()

    @property
    def minus_signature(self) -> tuple[int, int]:
        return self.minus.signature()

    @property
    def distance(self) -> float:
        return self.plus.distance(self.minus)


def side_quadric(
    M: Hypersurface,
    germ: MapGerm,
    rng: np.random.Generator,
    count: int | None = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> tuple[HermitianQuadric, float]:
    """Quadric through the images of points of M near the germ's base.

    :raise FitError: the images do not lie on a quadric.
    """
    needed = (M.n + 1) ** 2
    count = count or 3 * needed
    points = [P for P in sample_surface_points(M, count, rng, center=germ.base, radius=0.4 * germ.radius, tol=tol)
              if germ.contains(P, 0.9)]
    if len(points) < needed:
        raise ValidationError(f"{M.name}: only {len(points)} surface points inside the germ's polydisc, need {needed}")
    quadric, residual, signature = fit_quadric([germ(P) for P in points], tol)
    if residual > tol.quadric_fit:
        raise FitError(f"{M.name}: images near {germ.base} do not lie on a quadric (residual {residual:.3e})", residual)
    logging.debug(f"TRANSFER: side at {germ.base} maps to a {signature} quadric, residual {residual:.3e}")
    return quadric, residual


def sphericity_transfer(
    M: Hypersurface,
    germ: MapGerm,
    rng: np.random.Generator,
    single_valued: bool = False,
    count: int | None = None,
    mode: str | None = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> TransferResult:
    """Fit the image quadrics of both sides of M \\ X.

    The germ's base must lie on M; the germ is carried to the other side along
    half a turn of w about 0.

    :param single_valued: Also require both sides to land on the same quadric.
    :raise FitError: a side's image is not a quadric.
    :raise ValidationError: ``single_valued`` and the quadrics differ.
    """
    plus, plus_residual = side_quadric(M, germ, rng, count, tol)
    w0 = complex(germ.base[-1])
    half = ContinuationPath.loop(germ.base[:-1], abs(w0), 0.5, cmath.phase(w0))
    other_side = continue_along_path(M, germ, half, mode, tol, rng)
    minus, minus_residual = side_quadric(M, other_side, rng, count, tol)
    result = TransferResult(plus, minus, plus_residual, minus_residual)
    logging.info(f"TRANSFER: {M.name}: {result.plus_signature} and {result.minus_signature}, "
                 f"quadric distance {result.distance:.3e}")
    if single_valued and result.distance > tol.glue:
        raise ValidationError(f"{M.name}: single-valued germ sends the two sides to different quadrics "
                              f"(distance {result.distance:.3e})")
    return result


def side_quadrics(
    M: Hypersurface,
    germ: MapGerm,
    rng: np.random.Generator,
    turns: int = 2,
    count: int | None = None,
    mode: str | None = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> list[HermitianQuadric]:
    """Image quadrics of the germ's side after 0, 1, ..., turns full loops."""
    w0 = complex(germ.base[-1])
    loop = ContinuationPath.loop(germ.base[:-1], abs(w0), 1, cmath.phase(w0))
    quadrics = []
    current = germ
    for turn in range(turns + 1):
        if turn:
            current = continue_along_path(M, current, loop, mode, tol, rng)
        quadrics.append(side_quadric(M, current, rng, count, tol)[0])
    return quadrics


def cluster_point_check(
    M: Hypersurface,
    germ: MapGerm,
    z0: complex = 0.05,
    count: int = 20,
    tail: int = 5,
    threshold: float = 1e-4,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> tuple[float, bool]:
    """Germ values along a ray towards X inside one branch domain.

    The k-th point is (z0, w_b / 2 * 0.4^k). Closed forms are tracked from point to
    point, tabulated germs are carried by Segre continuation. Passes when the last
    ``tail`` values are within ``threshold`` of each other and approach the last one
    monotonically.

    :raise ContinuationError: a tabulated germ cannot be carried to the next point.

    :return: (largest pairwise distance among the last values, passed).
    """
    mode = "tracking" if germ.is_closed_form else "segre"
    w_base = complex(germ.base[-1])
    z = np.full(M.n - 1, z0, dtype=complex)
    current = germ
    values = []
    for k in range(count):
        P = np.append(z, w_base * 0.5 * 0.4**k)
        current = move_to(M, current, P, mode, tol)
        values.append(canonical_point(current(P)))
    last = values[-tail:]
    spread = max(projective_distance(a, b) for a, b in itertools.combinations(last, 2))
    approach = [projective_distance(v, last[-1]) for v in last[:-1]]
    monotone = all(a >= b for a, b in zip(approach, approach[1:]))
    passed = spread < threshold and monotone
    logging.info(f"MONODROMY: cluster point spread {spread:.3e} over the last {tail} of {count} values")
    return spread, passed


# ----- invariance -----

@dataclasses.dataclass(frozen=True, eq=False)
class InvarianceReport:
    results: tuple[MonodromyResult, ...]
    mismatches: tuple[tuple[int, int], ...]

    @property
    def passed(self) -> bool:
        return not self.mismatches


def invariance_suite(
    M: Hypersurface,
    runs: Sequence[tuple[MapGerm, ContinuationPath]],
    mode: str | None = None,
    jordan_tol: float = 1e-6,
    max_workers: int | None = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> InvarianceReport:
    """Run compute_monodromy for every (germ, loop) concurrently and compare the Jordan forms.

    Mismatches are reported as pairs of run indices, always against run 0.

    :raise SegreToolError: a run fails.
    """
    if len(runs) < 2:
        raise ValidationError("The invariance suite needs at least two runs")
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = [executor.submit(compute_monodromy, M, germ, loop, mode, tol) for germ, loop in runs]
        results = []
        for index, future in enumerate(futures):
            try:
                results.append(future.result())
            except SegreToolError as error:
                logging.error(f"MONODROMY: invariance run {index} failed: {error}")
                raise
    mismatches = tuple((0, index) for index, result in enumerate(results[1:], start=1)
                       if not result.jordan.close_to(results[0].jordan, jordan_tol))
    for pair in mismatches:
        logging.warning(f"MONODROMY: runs {pair[0]} and {pair[1]} give different Jordan forms")
    return InvarianceReport(tuple(results), mismatches)
