import math

import numpy as np
import pytest

from segretool import continuation, hypersurface
from segretool.continuation import ClosedForm, ContinuationPath, MapGerm
from segretool.errors import (
    ContinuationError,
    EmptyIntersectionError,
    OnExceptionalLocusError,
    ValidationError,
)
from segretool.quadric import HermitianQuadric, projective_distance
from segretool.segresets import find_chain

TWO_PI_I = 2j * math.pi


def _post():
    return np.array([[1, 0.2, 0], [0, 2, 0.1j], [0.3, 0, 1]], dtype=complex)


def test_closed_form_checks_components():
    with pytest.raises(ValidationError):
        ClosedForm.from_source(["z1", "w"], 2)
    with pytest.raises(ValidationError, match="holomorphic"):
        ClosedForm.from_source(["z1", "conj(w)", "1"], 2)
    assert ClosedForm.from_source(["z1", "w", "1"], 2).sources() == ["z1", "w", "1.0"]


def test_closed_form_germ_values(mlog):
    germ = mlog.germs[0].build()
    np.testing.assert_allclose(germ(germ.base), [0, 0, 1])
    wound = germ.moved(germ.base, TWO_PI_I)
    np.testing.assert_allclose(wound(germ.base), [0, TWO_PI_I, 1])
    assert wound.winding == 1
    assert abs(germ.log_w([0, 1.1j]) - (math.log(1.1) + 0.5j * math.pi)) < 1e-14


def test_log_w_on_x(mlog):
    with pytest.raises(OnExceptionalLocusError):
        mlog.germs[0].build().log_w([0.1, 0])


def test_contains(sphere):
    germ = sphere.germs[0].build()
    assert germ.contains(germ.base + 0.19)
    assert not germ.contains(germ.base + 0.21)
    assert germ.contains(germ.base + 0.09, 0.5)


def test_with_post_moves_the_target(sphere, rng):
    germ = sphere.germs[0].build().with_post(_post())
    for P in hypersurface.sample_surface_points(sphere.surface, 5, rng, center=[0.05, 0.5], radius=0.05):
        value = germ(P)
        assert abs(germ.target.value(value)) < 1e-10 * np.linalg.norm(value) ** 2


def test_validate_germ(mlog, sphere):
    continuation.validate_germ(mlog.surface, mlog.germs[0].build())
    spec = sphere.germs[0]
    flipped = MapGerm.closed_form(spec.components, (0.1, 0.5 + 0.01j), spec.radius, HermitianQuadric.standard((-1,)))
    with pytest.raises(ValidationError, match="target"):
        continuation.validate_germ(sphere.surface, flipped)
    flat = MapGerm.closed_form(["z1", "z1", "1"], spec.base, spec.radius, HermitianQuadric.standard((1,)))
    assert flat.jacobian_rank() == 1
    with pytest.raises(ValidationError, match="injective"):
        continuation.validate_germ(sphere.surface, flat)


def test_paths():
    loop = ContinuationPath.loop([0.1], 2.0, 1, math.pi / 2)
    np.testing.assert_allclose(loop.start, [0.1, 2j], atol=1e-15)
    np.testing.assert_allclose(loop.end, loop.start, atol=1e-12)
    half = ContinuationPath.loop([0.1], 2.0, 0.5)
    np.testing.assert_allclose(half.end, [0.1, -2], atol=1e-12)
    line = ContinuationPath.through([[0, 1], [0, 2]])
    joined = line.then(ContinuationPath.through([[0, 2], [1, 2]]))
    assert len(joined.waypoints) == 3


def test_track_log_w_winds(mlog):
    M = mlog.surface
    assert abs(continuation.track_log_w(M, ContinuationPath.loop([0], 1.0, 1), 0) - TWO_PI_I) < 1e-12
    assert abs(continuation.track_log_w(M, ContinuationPath.loop([0], 1.0, -2), 0) + 2 * TWO_PI_I) < 1e-12
    straight = ContinuationPath.through([[0, 1], [0, 2j]])
    assert abs(continuation.track_log_w(M, straight, 0) - (math.log(2) + 0.5j * math.pi)) < 1e-12


def test_track_log_w_through_x(mlog):
    with pytest.raises(ContinuationError):
        continuation.track_log_w(mlog.surface, ContinuationPath.through([[0, 1], [0, -1]]), 0)


def test_spread_offsets():
    offsets = continuation.spread_offsets(2, 10)
    assert offsets.shape == (10, 2)
    assert np.max(np.linalg.norm(offsets, axis=1)) <= 1 + 1e-12


def test_segre_step_of_identity_germ(sphere):
    germ = sphere.germs[0].build()
    Z = germ.base + np.array([0.03 - 0.01j, 0.02j])
    value, residual = continuation.segre_step(sphere.surface, germ, Z)
    assert projective_distance(value, germ(Z)) < 1e-10
    assert residual < 1e-12


def test_segre_step_far_away(sphere):
    germ = sphere.germs[0].build()
    with pytest.raises(EmptyIntersectionError):
        continuation.segre_step(sphere.surface, germ, [0.1, -0.5])


def test_q_segre_check(sphere, mlog, rng):
    residual, passed = continuation.q_segre_check(sphere.surface, sphere.germs[0].build(), rng, count=5)
    assert passed and residual < 1e-10
    _, passed = continuation.q_segre_check(mlog.surface, mlog.germs[0].build(), rng, count=5)
    assert passed


def test_segre_invariance_residual(sphere):
    germ = sphere.germs[0].build()
    assert continuation.segre_invariance_residual(sphere.surface, germ, germ.base + 0.01) < 1e-12


def test_glue_recovers_post(sphere):
    germ = sphere.germs[0].build()
    tau, residual = continuation.glue(germ, germ.with_post(_post()))
    assert projective_distance(tau, _post()) < 1e-8
    assert residual < 1e-8


def test_glue_needs_overlap(sphere):
    germ = sphere.germs[0].build()
    with pytest.raises(EmptyIntersectionError):
        continuation.glue(germ, germ.moved(germ.base + 1, germ.branch_log))


def test_tabulate_germ(sphere):
    germ = sphere.germs[0].build()
    P = germ.base + np.array([0.02, 0.01j])
    table = continuation.tabulate_germ(sphere.surface, germ, P)
    assert not table.is_closed_form
    near = P + 0.3 * table.radius * np.array([0.1, -0.1j])
    assert projective_distance(table(P), germ(P)) < 1e-8
    assert projective_distance(table(near), germ(near)) < 1e-7


def test_tabulated_germ_agrees_with_closed_form(sphere, rng):
    germ = sphere.germs[0].build()
    P = germ.base + np.array([0.02, 0.01j])
    table = continuation.tabulate_germ(sphere.surface, germ, P)
    offsets = 0.3 * table.radius * np.sqrt(rng.uniform(size=(50, 2))) * np.exp(TWO_PI_I * rng.uniform(size=(50, 2)))
    for offset in offsets:
        Z = P + offset
        assert projective_distance(table(Z), germ(Z)) < 1e-7


def test_tracking_continuation_around_x(mlog):
    germ = mlog.germs[0].build()
    result = continuation.continue_along_path(mlog.surface, germ, ContinuationPath.loop([0], 1.0, 1))
    np.testing.assert_allclose(result.base, germ.base, atol=1e-12)
    assert abs(result.branch_log - TWO_PI_I) < 1e-12
    np.testing.assert_allclose(result(germ.base), [0, TWO_PI_I, 1], atol=1e-12)


def test_continuation_rejects_bad_input(mlog):
    germ = mlog.germs[0].build()
    with pytest.raises(ContinuationError):
        continuation.continue_along_path(mlog.surface, germ, ContinuationPath.through([[0, 3], [0, 4]]))
    with pytest.raises(ValidationError):
        continuation.continue_along_path(mlog.surface, germ, ContinuationPath.loop([0], 1.0), "sideways")


@pytest.mark.slow
def test_segre_continuation_matches_closed_form(sphere, rng, monkeypatch):
    germ = sphere.germs[0].build()
    b = germ.base + np.array([0.015, 0.015j])
    glued = []
    glue = continuation.glue
    monkeypatch.setattr(continuation, "glue", lambda *args: glued.append(args) or glue(*args))
    path = ContinuationPath.through([germ.base, b])
    result = continuation.continue_along_path(sphere.surface, germ, path, "segre", rng=rng)
    assert projective_distance(result(b), germ(b)) < 1e-7
    assert len(glued) == 1 and not result.is_closed_form


@pytest.mark.slow
def test_continuation_along_chain(sphere, rng):
    M = sphere.surface
    germ = sphere.germs[0].build()
    target = germ.base + np.array([0.02, 0.01j])
    chain = find_chain(M, germ.base, target, rng)
    result = continuation.continue_along_chain(M, germ, chain, rng)
    assert projective_distance(result(target), germ(target)) < 1e-7
    assert abs(np.exp(result.branch_log) - target[-1]) < 1e-10
    path = continuation.segre_path(M, chain)
    np.testing.assert_array_equal(path.end, target)
