"""Point spectrum: embedded eigenvalues, the damped branch family and contour certification.

Roots are zeros of the secular determinant ``d`` (see :mod:`tadpole.secular`). The determinant factors as
``(1 + alpha/lambda) (T - 1) (T - T2)`` with ``T = exp(i lambda L)``, so the roots split into the embedded
lattice ``2 k pi / L`` and the branch family ``T = T2``. Branch roots start at ``(2 n pi - i ln 3) / L`` for
``alpha = 0`` and move with ``alpha``; a root is an L2 eigenvalue only when ``Im lambda > 0``.

>>> from tadpole.core import GraphParams
>>> params = GraphParams.from_resolution(2 * math.pi, 0.0, n2=4, x_factor=4.0)
>>> [round(p.lam.real, 12) for p in embedded_eigenvalues(3, params)]
[1.0, 2.0, 3.0]
"""

import cmath
import logging
import math
import typing as t
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.polynomial.legendre import leggauss

from tadpole.core import GraphParams
from tadpole.errors import ContourError, DivergenceError, ParameterError, PoleProximityError
from tadpole.secular import eval_d, eval_d_array, eval_h, eval_h_prime
from tadpole.utils import Header, write_csv

__all__ = [
    "Family",
    "Sign",
    "SeedBranch",
    "FAMILIES",
    "SpectralPoint",
    "RootCertificate",
    "DiskSearch",
    "embedded_eigenvalues",
    "asymptotic_seed",
    "asymptotic_coefficients",
    "refine_root",
    "refine_branch_root",
    "count_roots_rectangle",
    "covering_rectangle",
    "certify",
    "continue_root",
    "lambda_alpha_derivative",
    "asymptotic_lambda_sq",
    "expansion_deviation",
    "search_disk",
    "point_spectrum",
    "write_spectrum_csv",
    "SPECTRUM_COLUMNS",
    "SWEEP_ALPHAS",
    "SWEEP_COLUMNS",
    "alpha_sweep",
]

Family = t.Literal["embedded", "damped", "resonance_candidate"]
Sign = t.Literal["plus", "minus"]
SeedBranch = t.Literal["plus", "minus", "both"]
FAMILIES: t.Tuple[Family, ...] = ("embedded", "damped", "resonance_candidate")

LN3 = math.log(3.0)
NEWTON_MAX_ITER = 50
MERGE_TOL = 1e-8
CONTOUR_MIN_ABS = 1e-8
SPECTRUM_COLUMNS = [
    "family",
    "index",
    "re_lambda",
    "im_lambda",
    "re_lambda_sq",
    "im_lambda_sq",
    "residual",
    "re_seed",
    "im_seed",
]
SWEEP_ALPHAS = (0.25, 0.5, 1.0, 2.0)
SWEEP_COLUMNS = ["alpha", "n", "re_lambda", "im_lambda", "re_i_lambda_sq", "reference_re_i_lambda_sq"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpectralPoint:
    """A root ``lambda`` of the secular determinant; the eigenvalue of ``H`` is ``lambda ** 2``."""

    lam: complex
    family: Family
    index: int
    residual: float
    seed: complex
    lam_sq: complex = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "lam", complex(self.lam))
        object.__setattr__(self, "seed", complex(self.seed))
        object.__setattr__(self, "lam_sq", self.lam * self.lam)

    @property
    def is_eigenvalue(self) -> bool:
        """Square-integrable eigenfunction exists."""
        return self.family != "resonance_candidate"

    def csv_row(self) -> t.List[t.Any]:
        return [
            self.family,
            self.index,
            self.lam.real,
            self.lam.imag,
            self.lam_sq.real,
            self.lam_sq.imag,
            float(self.residual),
            self.seed.real,
            self.seed.imag,
        ]


@dataclass(frozen=True)
class RootCertificate:
    """Argument-principle count over a rectangle ``(re_min, re_max, im_min, im_max)``."""

    rectangle: t.Tuple[float, float, float, float]
    winding_count: int
    roots_found: int

    @property
    def certified(self) -> bool:
        return self.winding_count == self.roots_found

    def contains(self, lam: complex) -> bool:
        re_min, re_max, im_min, im_max = self.rectangle
        return re_min < lam.real < re_max and im_min < lam.imag < im_max


@dataclass(frozen=True)
class DiskSearch:
    """Genuine eigenvalues found in the dissipative disk ``|lambda - alpha/2| < alpha/2``."""

    certificate: RootCertificate
    roots: t.List[SpectralPoint]


def _tolerance(lam: complex) -> float:
    return 1e-12 * (1 + abs(lam))


def embedded_eigenvalues(kmax: int, params: GraphParams, /) -> t.List[SpectralPoint]:
    """Roots ``2 k pi / L`` for ``k = 1..kmax``; their eigenfunctions live on the loop only."""
    if kmax < 1:
        raise ParameterError(f"kmax must be >= 1, got {kmax}")
    points = []
    for k in range(1, kmax + 1):
        lam = 2 * k * math.pi / params.L
        points.append(SpectralPoint(lam, "embedded", k, abs(eval_d(lam, params)), lam))
    return points


def asymptotic_coefficients(n: int, L: float, sign: Sign = "plus", /) -> t.Tuple[complex, complex, complex]:
    """Base point and first two Taylor coefficients in ``alpha`` of the ``n``-th branch seed.

    >>> base, a, b = asymptotic_coefficients(1, 2 * math.pi, "plus")
    >>> round(a.real, 5), round(a.imag, 5)
    (0.036, 0.20591)
    """
    if n < 1:
        raise ParameterError(f"Branch index must be >= 1, got {n}")
    if sign not in ("plus", "minus"):
        raise ParameterError(f"Unknown seed sign {sign!r}")
    s = 1 if sign == "plus" else -1
    base = complex(2 * n * math.pi / L, s * LN3 / L)
    a = 4j / (3 * L * base)
    b = 16 / (9 * L**2 * base**3) - 4j / (9 * L * base**2)
    return base, a, b


def asymptotic_seed(n: int, params: GraphParams, sign: Sign = "plus", /) -> complex:
    """Second-order seed ``base + a alpha + b alpha^2`` for the ``n``-th branch.

    ``plus`` starts from ``2 n pi / L + i ln 3 / L``; ``minus`` from the exact ``alpha = 0`` root
    ``2 n pi / L - i ln 3 / L`` of ``exp(i lambda L) = 3``.
    """
    base, a, b = asymptotic_coefficients(n, params.L, sign)
    return base + a * params.alpha + b * params.alpha**2


def _newton_on_h(lam: complex, params: GraphParams, max_iter: int = 20) -> t.Optional[complex]:
    for _ in range(max_iter):
        try:
            step = eval_h(lam, params) / eval_h_prime(lam, params)
        except (PoleProximityError, ZeroDivisionError, OverflowError):
            return None
        lam -= step
        if not cmath.isfinite(lam):
            return None
        if abs(step) < 1e-15 * (1 + abs(lam)):
            return lam
    try:
        return lam if abs(eval_h(lam, params)) < 1e-12 else None
    except PoleProximityError:
        return None


def refine_branch_root(seed: complex, params: GraphParams, /) -> complex:
    """Newton on the branch factor ``T - T2`` alone.

    Unlike :func:`refine_root` it cannot be captured by the lattice factor ``T - 1``, so a branch passing
    through a double root keeps moving with ``alpha``.

    :raises DivergenceError: the iteration leaves the domain or does not converge
    """
    lam = _newton_on_h(complex(seed), params, max_iter=NEWTON_MAX_ITER)
    if lam is None:
        raise DivergenceError(f"Newton on the branch factor did not converge from {seed}", [complex(seed)])
    return lam


def _classify(lam: complex, params: GraphParams) -> Family:
    if lam.imag > 0 and abs(cmath.exp(1j * lam * params.L) - 1) > 1e-8:
        return "damped"
    return "resonance_candidate"


def _nearest_embedded(lam: complex, params: GraphParams) -> t.Tuple[int, float]:
    k = round(lam.real * params.L / (2 * math.pi))
    return k, 2 * k * math.pi / params.L


def refine_root(
    seed: complex, params: GraphParams, /, index: int = 0, max_iter: int = NEWTON_MAX_ITER
) -> SpectralPoint:
    """Newton iteration on ``d`` with its analytic derivative, started at ``seed``.

    Converged points near the embedded lattice are polished on the branch factor ``T - T2``: a root that
    coincides with ``2 k pi / L`` is snapped to it exactly (a duplicate-root warning is emitted), which
    places a double root ``lambda = alpha`` with ``exp(i alpha L) = 1`` exactly on the lattice.

    :raises DivergenceError: no convergence within ``max_iter`` iterations (carries the iterate trace)
    """
    lam = complex(seed)
    trace = [lam]
    for iteration in range(max_iter + 1):
        if lam == 0 or not cmath.isfinite(lam):
            raise DivergenceError(f"Newton iterate left the domain of d: {lam}", trace)
        d, d_prime = (complex(v[0]) for v in eval_d_array(np.array([lam]), params))
        if abs(d) < _tolerance(lam):
            break
        if iteration == max_iter:
            raise DivergenceError(f"Newton on d did not converge in {max_iter} iterations from {seed}", trace)
        if d_prime == 0 or not cmath.isfinite(d_prime):
            raise DivergenceError(f"Vanishing derivative of d at {lam}", trace)
        lam = lam - d / d_prime
        trace.append(lam)

    k, lam_k = _nearest_embedded(lam, params)
    if k >= 1 and abs(lam - lam_k) < 1e-3 * (1 + abs(lam)):
        if abs(lam - lam_k) > 1e-10 * (1 + abs(lam)):
            polished = _newton_on_h(lam, params)
            if polished is not None and abs(polished - lam) < 1e-3 and abs(eval_d(polished, params)) < _tolerance(polished):
                lam = polished
        if abs(lam - lam_k) < 1e-10 * (1 + abs(lam)):
            logger.warning("Newton from %s converged to the embedded root 2*%d*pi/L (duplicate root)", seed, k)
            lam = complex(lam_k)

    point = SpectralPoint(lam, _classify(lam, params), index, abs(eval_d(lam, params)), seed)
    logger.debug("Refined %s -> %s (%s, |d| = %.2e, %d iterations)", seed, lam, point.family, point.residual, len(trace))
    return point


def _rectangle_sides(rect: t.Sequence[float]) -> t.List[t.Tuple[complex, complex]]:
    re_min, re_max, im_min, im_max = rect
    corners = [complex(re_min, im_min), complex(re_max, im_min), complex(re_max, im_max), complex(re_min, im_max)]
    return [(corners[i], corners[(i + 1) % 4]) for i in range(4)]


def _contour_integral(sides, params: GraphParams, nodes: int) -> t.Tuple[complex, float]:
    x, w = leggauss(nodes)
    total, min_abs = 0j, math.inf
    for a, b in sides:
        half = (b - a) / 2
        lam = (a + b) / 2 + half * x
        d, d_prime = eval_d_array(lam, params)
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(d_prime))):
            raise ContourError(f"d is not finite on the side {a} -> {b}")
        min_abs = min(min_abs, float(np.min(np.abs(d))))
        total += half * np.sum(w * d_prime / d)
    return total, min_abs


def count_roots_rectangle(
    rect: t.Sequence[float],
    params: GraphParams,
    /,
    roots: t.Iterable[complex] = (),
    max_nodes: int = 1 << 15,
) -> RootCertificate:
    """Winding number of ``d`` along the rectangle boundary, counted with multiplicity.

    Gauss-Legendre quadrature of ``d'/d`` on each side, doubling the node count until two successive
    counts agree. ``roots`` (if given) are counted inside the rectangle for the certificate.

    :raises ContourError: ``|d|`` dips below ``1e-8`` on the contour or the count is not integral
    """
    rect = tuple(float(v) for v in rect)
    re_min, re_max, im_min, im_max = rect
    if not (re_min < re_max and im_min < im_max):
        raise ParameterError(f"Degenerate rectangle {rect}")
    sides = _rectangle_sides(rect)
    perimeter = 2 * ((re_max - re_min) + (im_max - im_min))
    nodes = 64 + 16 * math.ceil(perimeter * params.L / math.pi)
    previous = None
    while True:
        integral, min_abs = _contour_integral(sides, params, nodes)
        if min_abs < CONTOUR_MIN_ABS:
            raise ContourError(f"Contour {rect} passes within |d| = {min_abs:.2e} of a root")
        winding = integral / (2j * math.pi)
        if previous is not None and abs(winding - previous) < 1e-6:
            break
        if nodes >= max_nodes:
            raise ContourError(f"Winding number along {rect} did not settle: {winding}")
        previous = winding
        nodes *= 2
    count = round(winding.real)
    if abs(winding - count) > 1e-3:
        raise ContourError(f"Winding number along {rect} is not an integer: {winding}")
    certificate = RootCertificate(rect, int(count), 0)
    found = sum(1 for lam in roots if certificate.contains(complex(lam)))
    return RootCertificate(rect, int(count), found)


def covering_rectangle(nmax: int, params: GraphParams, /) -> t.Tuple[float, float, float, float]:
    """Rectangle holding the branches ``1..nmax`` and the embedded roots ``1..nmax``.

    For ``Re lambda > 0`` every root obeys ``|T2| < 4`` hence ``Im lambda > -ln 4 / L``, and a root with
    ``Im lambda > 0`` lies in the disk ``|lambda - alpha/2| < alpha/2``; vertical sides sit halfway between
    embedded roots.
    """
    L = params.L
    return (math.pi / L, (2 * nmax + 1) * math.pi / L, -(math.log(4.0) + 1) / L, params.alpha / 2 + 1 / L)


def certify(points: t.Sequence[SpectralPoint], nmax: int, params: GraphParams, /) -> RootCertificate:
    """Compare the winding count over :func:`covering_rectangle` with the points returned inside it."""
    return count_roots_rectangle(covering_rectangle(nmax, params), params, roots=[p.lam for p in points])


def lambda_alpha_derivative(lam: complex, params: GraphParams, /) -> complex:
    """``d lambda_n / d alpha = 4 i lambda / (3 L lambda^2 + 2 alpha L lambda - alpha^2 L + 4 i alpha)``."""
    alpha, L = params.alpha, params.L
    denominator = 3 * L * lam**2 + 2 * alpha * L * lam - alpha**2 * L + 4j * alpha
    if abs(denominator) < 1e-14:
        raise PoleProximityError("branch derivative denominator", abs(denominator))
    return 4j * lam / denominator


def continue_root(n: int, params: GraphParams, /, step: float = 0.05, min_step: float = 1e-8) -> SpectralPoint:
    """Follow the ``n``-th branch from the exact ``alpha = 0`` root to ``params.alpha``.

    Euler predictor with :func:`lambda_alpha_derivative`, Newton corrector on the branch factor; the step
    in ``alpha`` is halved when the corrector fails or jumps further than a quarter of the root spacing.
    """
    if n < 1:
        raise ParameterError(f"Branch index must be >= 1, got {n}")
    start = complex(2 * n * math.pi, -LN3) / params.L
    lam, alpha = start, 0.0
    spacing = 2 * math.pi / params.L
    da = min(step, params.alpha)
    trace = [lam]
    while alpha < params.alpha:
        da = min(da, params.alpha - alpha)
        current = params.replace(alpha=alpha)
        target = params.replace(alpha=alpha + da)
        try:
            predicted = lam + da * lambda_alpha_derivative(lam, current)
        except PoleProximityError:
            predicted = lam
        corrected = _newton_on_h(predicted, target)
        if corrected is None or abs(corrected - lam) > spacing / 4:
            da /= 2
            if da < min_step:
                raise DivergenceError(f"Continuation of branch {n} stalled at alpha = {alpha}", trace)
            continue
        lam, alpha = corrected, alpha + da
        trace.append(lam)
        da = min(2 * da, step)
    point = refine_root(lam, params, index=n)
    return SpectralPoint(point.lam, point.family, n, point.residual, start)


def asymptotic_lambda_sq(n: int, params: GraphParams, sign: Sign = "minus", /) -> complex:
    """Large-``n`` expansion of ``lambda_n^2``.

    ``4 pi^2 n^2 / L^2 - ln^2 3 / L^2 + i (8 alpha / (3L) -+ 4 pi ln 3 n / L^2)``; the ``minus`` sign is the
    one the computed branch follows, ``plus`` is kept for comparison.
    """
    L, alpha = params.L, params.alpha
    s = 1 if sign == "plus" else -1
    real = (4 * math.pi**2 * n**2 - LN3**2) / L**2
    imag = 8 * alpha / (3 * L) + s * 4 * math.pi * LN3 * n / L**2
    return complex(real, imag)


def expansion_deviation(point: SpectralPoint, params: GraphParams, sign: Sign = "minus", /) -> float:
    return abs(point.lam_sq - asymptotic_lambda_sq(point.index, params, sign))


def _merge(points: t.List[SpectralPoint], candidate: SpectralPoint) -> bool:
    if any(abs(p.lam - candidate.lam) < MERGE_TOL for p in points):
        return False
    points.append(candidate)
    return True


def search_disk(params: GraphParams, /, lattice: int = 6) -> DiskSearch:
    """Locate roots with ``Im lambda > 0``; they all lie in ``|lambda - alpha/2| < alpha/2``.

    The count comes from the argument principle over the box enclosing the upper half-disk (a thin strip
    ``Im lambda < 1e-3 alpha`` is excluded to keep the contour off the real axis); roots come from Newton
    started on a polar lattice of seeds.
    """
    alpha = params.alpha
    if alpha == 0:
        return DiskSearch(RootCertificate((0.0, 0.0, 0.0, 0.0), 0, 0), [])
    margin = 1e-3 * alpha
    rect = (margin, alpha, margin, alpha / 2)
    centre, radius = alpha / 2, alpha / 2
    roots: t.List[SpectralPoint] = []
    for j in range(1, lattice + 1):
        r = radius * j / (lattice + 1)
        for m in range(1, 2 * j + 1):
            seed = centre + r * cmath.exp(1j * math.pi * m / (2 * j + 1))
            try:
                point = refine_root(seed, params)
            except DivergenceError:
                continue
            if point.family == "damped" and abs(point.lam - centre) < radius:
                _merge(roots, point)
    certificate = count_roots_rectangle(rect, params, roots=[p.lam for p in roots])
    if not certificate.certified:
        logger.warning(
            "Disk search found %d roots but the winding count is %d", certificate.roots_found, certificate.winding_count
        )
    for point in roots:
        logger.info("Genuine eigenvalue lambda = %s (lambda^2 = %s)", point.lam, point.lam_sq)
    return DiskSearch(certificate, sorted(roots, key=lambda p: (p.lam.real, p.lam.imag)))


def _sort_key(point: SpectralPoint):
    return FAMILIES.index(point.family), point.index, point.lam.real, point.lam.imag


def point_spectrum(
    nmax: int,
    params: GraphParams,
    /,
    kmax: t.Optional[int] = None,
    seed_branch: SeedBranch = "both",
    disk: bool = True,
) -> t.List[SpectralPoint]:
    """Embedded roots ``k = 1..kmax`` and the branch roots ``n = 1..nmax``.

    Each branch is first obtained by continuation in ``alpha``; the asymptotic seeds of the requested
    signs are then refined and merged (``|delta lambda| < 1e-8``). A branch root landing on the embedded
    lattice is kept only at a double root (``h(lambda) = 0`` there). Roots found in the dissipative disk
    that no branch produced are added with index 0. Results are sorted by (family, index).
    """
    if nmax < 1:
        raise ParameterError(f"nmax must be >= 1, got {nmax}")
    signs: t.Tuple[Sign, ...] = ("plus", "minus") if seed_branch == "both" else (seed_branch,)
    embedded = embedded_eigenvalues(kmax or nmax, params)
    branch: t.List[SpectralPoint] = []

    re_limit = (2 * nmax + 1) * math.pi / params.L

    def admit(point: SpectralPoint) -> None:
        if not 0 < point.lam.real < re_limit:
            logger.info("Discarding root %s outside 0 < Re lambda < %.6g", point.lam, re_limit)
            return
        k, lam_k = _nearest_embedded(point.lam, params)
        if k >= 1 and point.lam == lam_k:
            try:
                double = abs(eval_h(point.lam, params)) < 1e-8
            except PoleProximityError:
                double = False
            if not double:
                logger.warning("Branch %d converged onto the simple embedded root %s; dropped", point.index, lam_k)
                return
        if not _merge(branch, point):
            logger.debug("Merged duplicate root %s (branch %d)", point.lam, point.index)

    for n in range(1, nmax + 1):
        try:
            admit(continue_root(n, params))
        except DivergenceError as exc:
            logger.warning("Continuation of branch %d failed: %s", n, exc)
    for n in range(1, nmax + 1):
        for sign in signs:
            seed = asymptotic_seed(n, params, sign)
            try:
                point = refine_root(seed, params, index=n)
            except DivergenceError as exc:
                logger.info("Seed %s (%s, n=%d) diverged after %d iterates", seed, sign, n, len(exc.trace))
                continue
            logger.debug("Seed %s (%s, n=%d) converged to %s", seed, sign, n, point.lam)
            admit(point)
    if disk:
        for point in search_disk(params).roots:
            admit(point)
    return sorted(embedded + branch, key=_sort_key)


def write_spectrum_csv(points: t.Iterable[SpectralPoint], path: t.Union[str, Path], /, header: Header = None) -> Path:
    return write_csv(path, SPECTRUM_COLUMNS, (p.csv_row() for p in points), header=header)


def alpha_sweep(
    alphas: t.Sequence[float] = SWEEP_ALPHAS, nmax: int = 30, L: float = 2 * math.pi, /
) -> t.List[t.List[t.Any]]:
    """Branch roots ``n = 1..nmax`` for each damping in ``alphas`` with ``Re(i lambda^2)``.

    Each row ends with the reference line ``-8 alpha / (3L)``.

    >>> rows = alpha_sweep([1.0], 2)
    >>> len(rows), round(rows[0][-1], 5)
    (2, -0.42441)
    """
    rows = []
    for alpha in alphas:
        params = GraphParams.from_resolution(L, alpha, n2=16, x_factor=4.0)
        reference = -8 * alpha / (3 * L)
        for n in range(1, nmax + 1):
            point = continue_root(n, params)
            rows.append([float(alpha), n, point.lam.real, point.lam.imag, -point.lam_sq.imag, reference])
    return rows
