import numpy as np
import pytest

from segretool import catalog, hypersurface, segresets
from segretool.errors import ChainNotFoundError, DomainError, ValidationError
from segretool.segresets import SegreChain


def test_first_segre_set_of_mlog(mlog, rng):
    M = mlog.surface
    cloud = segresets.sample_segre_set(M, [0, 1], 1, 20, rng)
    assert cloud.depth == 1
    assert len(cloud.points) > 0
    np.testing.assert_allclose(cloud.points[:, -1], 1, atol=1e-10)
    assert cloud.membership_residual(M) < 1e-10
    assert np.all(cloud.parents[1] == 0)


def test_deeper_segre_sets(sphere, rng):
    M = sphere.surface
    cloud = segresets.sample_segre_set(M, [0.1, 0.3], 2, 30, rng)
    assert len(cloud.levels) == 3
    assert cloud.levels[2].shape[1] == 2
    assert cloud.membership_residual(M) < 1e-10
    assert all(M.in_domain(P) for P in cloud.levels[2])
    assert all(0 <= parent < len(cloud.levels[1]) for parent in cloud.parents[2])


def test_segre_set_base_outside_u1(mlog, rng):
    with pytest.raises(DomainError):
        segresets.sample_segre_set(mlog.surface, [0, 20], 1, 5, rng)


def test_find_chain_on_sphere(sphere, rng):
    M = sphere.surface
    p, target = np.array([0.1, 0.3]), np.array([-0.2j, 0.4 + 0.1j])
    chain = segresets.find_chain(M, p, target, rng)
    assert chain.steps == 2
    np.testing.assert_array_equal(chain.start, p)
    np.testing.assert_array_equal(chain.end, target)
    np.testing.assert_allclose(chain.waypoints[1], [0.1 - 0.3j, 0.36 + 0.02j], atol=1e-10)
    assert chain.validate(M) < 1e-10


def test_find_chain_to_itself(sphere, rng):
    chain = segresets.find_chain(sphere.surface, [0.1, 0.3], [0.1, 0.3], rng)
    assert chain.steps == 0


def test_find_chain_avoids_x(mlog, rng):
    with pytest.raises(DomainError):
        segresets.find_chain(mlog.surface, [0.1, 0], [0.1, 1], rng)


def test_find_chain_gives_up(sphere, rng):
    with pytest.raises(ChainNotFoundError):
        segresets.find_chain(sphere.surface, [0.1, 0.3], [-0.2j, 0.4 + 0.1j], rng, max_depth=0)


def test_two_step_reachable_point_on_surface(mlog, rng):
    P = np.array([0.0, 1.0])
    np.testing.assert_array_equal(segresets.two_step_reachable(mlog.surface, P, P, rng), P)


@pytest.mark.parametrize("w", [2.0, 0.5, 1.5j])
def test_two_step_reachable_fails_between_parallel_varieties(mlog, rng, w):
    assert segresets.two_step_reachable(mlog.surface, [0, 1], [0, w], rng) is None


def _disc(rng, radius: float) -> complex:
    return radius * np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())


@pytest.mark.parametrize("name, w_range", [("quadric(1,0)", (0.1, 0.4)), ("mlog", (0.8, 1.5))])
def test_two_step_reachable_on_generic_pairs(name, w_range, rng):
    M = catalog.get(name).surface
    for _ in range(10):
        s = np.array([_disc(rng, 0.2), rng.uniform(*w_range) * np.exp(2j * np.pi * rng.uniform())])
        variety = hypersurface.segre_variety(M, s)
        a, b = variety.point(_disc(rng, 0.3)), variety.point(_disc(rng, 0.3))
        found = segresets.two_step_reachable(M, a, b, rng)
        assert found is not None
        scale = max(1.0, abs(found[-1]))
        assert abs(M.rho(found, a)) < 1e-10 * scale
        assert abs(M.rho(found, b)) < 1e-10 * scale


def test_chain_validation_rejects_bad_waypoints(sphere):
    chain = SegreChain((np.array([0.1, 0.3]), np.array([0.2, 0.9])))
    with pytest.raises(ValidationError):
        chain.validate(sphere.surface)
