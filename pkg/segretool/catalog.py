"""Built-in hypersurfaces with their germs into quadrics and the expected results.

Entries are addressed by name: ``mlog``, ``malpha(a)``, ``km(m)``, ``ex62`` and
``quadric(k,l[,n])``.
"""
import cmath
import dataclasses
import logging
import math
import re
from fractions import Fraction

import numpy as np

from segretool import hypersurface
from segretool.config import DEFAULT_TOLERANCES, Tolerances, make_rng
from segretool.continuation import (
    ContinuationPath,
    MapGerm,
    continue_along_chain,
    continue_along_path,
    q_segre_check,
    segre_path,
    validate_germ,
)
from segretool.errors import ConfigurationError, SegreToolError
from segretool.file_io import jsonio
from segretool.hypersurface import Hypersurface
from segretool.monodromy import (
    compute_monodromy,
    finite_order_and_root,
    group_law_residual,
    sphericity_transfer,
    verify_monodromy_formula,
)
from segretool.quadric import HermitianQuadric, projective_distance, scaled_jordan
from segretool.report import Report
from segretool.segresets import find_chain, sample_segre_set

NAMES = ("mlog", "malpha(a)", "km(m)", "ex62", "quadric(k,l[,n])")


@dataclasses.dataclass(frozen=True)
class GermSpec:
    """Closed-form germ into the standard quadric Im w* = sum signs[j] |z*_j|^2."""

    components: tuple[str, ...]
    base: tuple[complex, ...]
    radius: float
    signs: tuple[int, ...]
    winding: int = 0

    def build(self) -> MapGerm:
        return MapGerm.closed_form(self.components, self.base, self.radius,
                                   HermitianQuadric.standard(self.signs), self.winding)


@dataclasses.dataclass(frozen=True, eq=False)
class Expected:
    """Results a catalog entry must reproduce; ``notes`` says where each value comes from."""

    levi: tuple[tuple[tuple[complex, ...], tuple[int, int]], ...] = ()
    monodromy: np.ndarray | None = None
    finite_order: int | None = None
    sides: tuple[tuple[int, int], tuple[int, int]] | None = None
    same_quadric: bool | None = None
    segre_level_one_w: complex | None = None
    notes: dict[str, str] = dataclasses.field(default_factory=dict)


@dataclasses.dataclass(frozen=True, eq=False)
class CatalogEntry:
    name: str
    surface: Hypersurface
    germs: tuple[GermSpec, ...]
    expected: Expected


def _mlog() -> CatalogEntry:
    surface = Hypersurface.from_source(
        name="mlog",
        n=2,
        defining="w - conj(w)*exp(2*i*z1*conj(z1))",
        phi="2*z1*conj(z1)",
        u1=(0.9, 8.0),
        u2=(1.0, 10.0),
    )
    expected = Expected(
        levi=(((0.3, cmath.exp(0.09j)), (1, 0)),),
        monodromy=np.array([[1, 0, 0], [0, 1, 2j * math.pi], [0, 0, 1]]),
        finite_order=None,
        sides=((1, 0), (1, 0)),
        same_quadric=False,
        segre_level_one_w=1.0,
        notes={
            "monodromy": "log w gains 2 pi i per turn: a unipotent 2x2 block",
            "sides": "both sides are (1,0) but land on quadrics shifted by pi in Im w*",
            "segre_level_one_w": "the Segre variety of (0, 1) is w = 1",
        },
    )
    germ = GermSpec(("z1", "Lw", "1"), (0, 1), 0.25, (1,))
    return CatalogEntry("mlog", surface, (germ,), expected)


def _rational_order(alpha: float) -> int | None:
    fraction = Fraction(alpha).limit_denominator(64)
    return fraction.denominator if abs(float(fraction) - alpha) < 1e-12 else None


def _malpha(alpha: float) -> CatalogEntry:
    if alpha <= 0:
        raise ConfigurationError(f"malpha needs a positive exponent, got {alpha}")
    a = repr(float(alpha))
    base = "(sqrt(1 - (z1*conj(z1))^2) + i*z1*conj(z1))"
    surface = Hypersurface.from_source(
        name=f"malpha({alpha:g})",
        n=2,
        defining=f"w - conj(w)*{base}^(1/{a})",
        phi=f"(1/{a})*(-i)*log{base}",
        u1=(0.9, 4.0),
        u2=(0.95, 5.0),
    )
    angle = math.asin(0.09) / (2 * alpha)
    order = _rational_order(alpha)
    expected = Expected(
        levi=(((0.3, cmath.exp(1j * angle)), (1, 0)),),
        monodromy=np.diag([cmath.exp(2j * math.pi * alpha), cmath.exp(4j * math.pi * alpha), 1]),
        finite_order=order,
        sides=((1, 0), (1, 0)),
        same_quadric=True if order == 1 else None,
        notes={
            "monodromy": "z w^a and w^(2a) pick up exp(2 pi i a) and exp(4 pi i a) per turn",
            "finite_order": "denominator of a when it is rational with denominator <= 64",
        },
    )
    germ = GermSpec((f"z1*exp({a}*Lw)", f"exp(2*{a}*Lw)", "1"), (0, 1), 0.25, (1,))
    return CatalogEntry(surface.name, surface, (germ,), expected)


def _km(m: int) -> CatalogEntry:
    if m < 1:
        raise ConfigurationError(f"km needs m >= 1, got {m}")
    surface = Hypersurface.from_source(
        name=f"km({m})",
        n=2,
        defining=f"w - conj(w) - 2*i*z1*conj(z1)*(w*conj(w))^{m}",
        u1=(0.5, 1.5),
        u2=(0.6, 2.0),
    )
    expected = Expected(
        levi=(((0.3, complex(math.sqrt(1 - 0.09**2), 0.09)), (1, 0)),),
        monodromy=np.eye(3),
        finite_order=1,
        sides=((1, 0), (1, 0)),
        same_quadric=True,
        notes={"monodromy": "the blow-up (z w^m, w) is single-valued, so the monodromy is trivial"},
    )
    germ = GermSpec((f"z1*w^{m}", "w", "1"), (0, 1), 0.25, (1,))
    return CatalogEntry(surface.name, surface, (germ,), expected)


def _ex62() -> CatalogEntry:
    surface = Hypersurface.from_source(
        name="ex62",
        n=3,
        defining="w - conj(w)*(i*z1*conj(z1) + sqrt(1 - 2*i*z2*conj(z2)*conj(w) - (z1*conj(z1))^2))^2"
                 "/(1 - 2*i*z2*conj(z2)*conj(w))^2",
        u1=(0.3, 0.3),
        u2=(0.4, 0.4),
    )
    expected = Expected(
        levi=(((0, 0, 0.1), (2, 0)), ((0, 0, -0.1), (1, 1))),
        monodromy=np.diag([-1, 1, 1, 1]),
        finite_order=2,
        sides=((2, 0), (1, 1)),
        same_quadric=False,
        notes={
            "levi": "positive definite on the w > 0 side, indefinite on the w < 0 side",
            "monodromy": "z1 sqrt(w) changes sign after one turn",
        },
    )
    germ = GermSpec(("z1*exp(Lw/2)", "z2*w", "w", "1"), (0, 0, 0.1), 0.05, (1, 1))
    return CatalogEntry("ex62", surface, (germ,), expected)


def _quadric(k: int, l: int, n: int | None = None) -> CatalogEntry:
    n = k + l + 1 if n is None else n
    if k < 0 or l < 0 or k + l + 1 != n or n < 2:
        raise ConfigurationError(f"quadric({k},{l},{n}) needs k, l >= 0 and k + l = n - 1 >= 1")
    signs = (1,) * k + (-1,) * l
    terms = " + ".join(f"{'' if s > 0 else '-'}z{j + 1}*conj(z{j + 1})" for j, s in enumerate(signs))
    surface = Hypersurface.from_source(
        name=f"quadric({k},{l},{n})",
        n=n,
        defining=f"w - conj(w) - 2*i*({terms})",
        u1=(0.8, 1.0),
        u2=(1.0, 1.2),
        nonminimal=False,
    )
    base = (0,) * (n - 1) + (0.5,)
    expected = Expected(
        levi=((base, (k, l)),),
        monodromy=np.eye(n + 1),
        finite_order=1,
        sides=((max(k, l), min(k, l)), (max(k, l), min(k, l))),
        same_quadric=True,
        notes={"levi": "the Hermitian form itself"},
    )
    components = tuple(f"z{j + 1}" for j in range(n - 1)) + ("w", "1")
    germ = GermSpec(components, base, 0.2, signs)
    return CatalogEntry(surface.name, surface, (germ,), expected)


_NAME_RE = re.compile(r"^\s*([a-z0-9]+)\s*(?:\(([^)]*)\))?\s*$")


def get(name: str) -> CatalogEntry:
    """The entry for a catalog name such as ``km(2)`` or ``malpha(0.5)``.

    :raise ConfigurationError: unknown name or malformed parameters.
    """
    match = _NAME_RE.match(name)
    if not match:
        raise ConfigurationError(f"Unknown catalog entry '{name}'; known entries: {', '.join(NAMES)}")
    key, raw = match.group(1), match.group(2)
    args = [a.strip() for a in raw.split(",")] if raw else []
    try:
        if key == "mlog" and not args:
            return _mlog()
        if key == "ex62" and not args:
            return _ex62()
        if key == "malpha" and len(args) == 1:
            return _malpha(float(args[0]))
        if key == "km" and len(args) == 1:
            return _km(int(args[0]))
        if key == "quadric" and len(args) in (2, 3):
            return _quadric(*(int(a) for a in args))
    except ValueError as error:
        raise ConfigurationError(f"Bad parameters for catalog entry '{name}': {error}") from error
    raise ConfigurationError(f"Unknown catalog entry '{name}'; known entries: {', '.join(NAMES)}")


def list_entries() -> list[CatalogEntry]:
    """One representative entry per family."""
    return [get(name) for name in ("mlog", "malpha(0.3)", "malpha(0.5)", "km(1)", "km(2)", "ex62", "quadric(1,0)")]


def _loop_at(germ: MapGerm, turns: int = 1) -> ContinuationPath:
    w0 = complex(germ.base[-1])
    return ContinuationPath.loop(germ.base[:-1], abs(w0), turns, cmath.phase(w0))


def _germ_maps_surface(entry: CatalogEntry, germ: MapGerm, rng: np.random.Generator, tol: Tolerances) -> float:
    M = entry.surface
    points = hypersurface.sample_surface_points(M, 50, rng, center=germ.base, radius=0.4 * germ.radius, tol=tol)
    worst = 0.0
    for P in points:
        value = germ(P)
        worst = max(worst, abs(germ.target.value(value)) / (np.linalg.norm(value) ** 2 * np.linalg.norm(germ.target.H)))
    return worst


def _run(report: Report, label: str, check):
    """Run one stage; numerical failures become FAIL entries."""
    try:
        return check()
    except SegreToolError as error:
        report.check(label, False, str(error))
        logging.warning(f"CATALOG: {report.name}: {label} failed: {error}")
        return None


def _passes(report: Report, label: str, check):
    if _run(report, label, lambda: check() or True):
        report.check(label, True)


def verify(
    name: str,
    rng: np.random.Generator | None = None,
    mode: str | None = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> Report:
    """Run the whole pipeline on a catalog entry and compare with its expected record.

    Stages: surface validation, Levi signatures, Segre-regularity, germ checks,
    a Segre chain with tabulated continuation, monodromy (with the Monodromy
    formula and the group law), finite order with the k-root, and the
    image quadrics of both sides.
    """
    entry = get(name)
    M, expected = entry.surface, entry.expected
    rng = make_rng(None) if rng is None else rng
    report = Report(entry.name)

    _passes(report, "surface", lambda: hypersurface.validate(M, rng, 20, tol))

    for point, signature in expected.levi:
        found = _run(report, f"levi at {point}", lambda p=point: hypersurface.levi_signature(M, p, tol))
        if found is not None:
            report.check(f"levi at {point}", tuple(found) == signature, f"{tuple(found)}, expected {signature}")

    for spec in entry.germs:
        germ = spec.build()
        rank = _run(report, "segre map rank", lambda: hypersurface.segre_map_rank(M, germ.base, tol=tol))
        if rank is not None:
            report.check("segre map rank", rank == M.n, f"{rank} at {germ.base}")
        _passes(report, "germ", lambda: validate_germ(M, germ, tol))
        residual = _run(report, "germ image", lambda: _germ_maps_surface(entry, germ, rng, tol))
        if residual is not None:
            report.check("germ image", residual < tol.membership, f"target residual {residual:.3e}")
        q_segre = _run(report, "q-segre", lambda: q_segre_check(M, germ, rng, tol=tol))
        if q_segre is not None:
            report.check("q-segre", q_segre[1], f"residual {q_segre[0]:.3e}")

        if expected.segre_level_one_w is not None:
            cloud = _run(report, "segre set", lambda: sample_segre_set(M, germ.base, 1, 20, rng, tol))
            if cloud is not None:
                spread = float(np.max(np.abs(cloud.points[:, -1] - expected.segre_level_one_w)))
                report.check("segre set", spread < tol.membership, f"max |w - w1| = {spread:.3e}")

        _verify_chain(report, M, germ, rng, tol)
        _verify_monodromy(report, entry, germ, rng, mode, tol)
    return report


def _verify_chain(report: Report, M: Hypersurface, germ: MapGerm, rng: np.random.Generator, tol: Tolerances):
    target = germ.base.copy()
    target[:-1] += 0.1 * germ.radius
    target[-1] *= 1.0 + 0.1j * germ.radius / max(1.0, abs(target[-1]))
    chain = _run(report, "chain", lambda: find_chain(M, germ.base, target, rng, tol=tol))
    if chain is None:
        return
    report.check("chain", True, f"{chain.steps} steps")
    tabulated = _run(report, "tabulated continuation", lambda: continue_along_chain(M, germ, chain, rng, tol))
    if tabulated is None:
        return
    tracked = _run(report, "tracked continuation",
                   lambda: continue_along_path(M, germ, segre_path(M, chain, tol), "tracking", tol))
    if tracked is None:
        return
    deviation = projective_distance(tabulated(target), tracked(target))
    report.check("tabulated vs tracked", deviation < 1e-7, f"deviation {deviation:.3e}")


def _verify_monodromy(report: Report, entry: CatalogEntry, germ: MapGerm, rng: np.random.Generator,
                      mode: str | None, tol: Tolerances):
    M, expected = entry.surface, entry.expected
    result = _run(report, "monodromy", lambda: compute_monodromy(M, germ, _loop_at(germ), mode, tol))
    if result is None:
        return
    if expected.monodromy is not None:
        jordan = scaled_jordan(expected.monodromy, tol)
        report.check("jordan form", result.jordan.close_to(jordan), f"{result.jordan.blocks}")
    report.check("finite order", result.finite_order == expected.finite_order,
                 f"{result.finite_order}, expected {expected.finite_order}")
    deviation, _ = verify_monodromy_formula(result, tol=tol)
    report.check("monodromy formula", deviation < tol.step_consistency, f"deviation {deviation:.3e}")
    twice = _run(report, "group law", lambda: compute_monodromy(M, germ, _loop_at(germ, 2), mode, tol))
    if twice is not None:
        residual = group_law_residual(result, twice)
        report.check("group law", residual < tol.glue, f"residual {residual:.3e}")
    if result.finite_order is not None and result.finite_order > 1:
        root = _run(report, "k-root", lambda: finite_order_and_root(M, germ, result, rng, mode, tol))
        if root is not None and root[1] is not None:
            report.check("k-root", root[1], f"order {root[0]}")
    if expected.sides is not None:
        transfer = _run(report, "sides", lambda: sphericity_transfer(M, germ, rng, bool(expected.same_quadric),
                                                                    mode=mode, tol=tol))
        if transfer is not None:
            sides = (transfer.plus_signature, transfer.minus_signature)
            report.check("sides", sides == expected.sides, f"{sides}, expected {expected.sides}")
            if expected.same_quadric is not None:
                same = transfer.distance < tol.glue
                report.check("same quadric", same == expected.same_quadric, f"distance {transfer.distance:.3e}")


def export(name: str) -> dict:
    """Surface and germ payloads of an entry, in the file formats read by the CLI."""
    entry = get(name)
    M = entry.surface
    return {
        "surface": jsonio.surface_payload(M),
        "germs": [jsonio.germ_payload(spec.build()) for spec in entry.germs],
    }

