"""Physical, economic and composite spatial weights matrices.

Physical kernels act on great-circle distances between unit centroids,
economic kernels on a positive economic variable ``z``.  A composite matrix
is the entrywise product of one of each, row-normalized once.

>>> import numpy as np
>>> from spgrowth.weights import row_normalize, WeightsMatrix
>>> row_normalize(WeightsMatrix(np.array([[0., 2., 2.], [1., 0., 1.], [1., 3., 0.]]))).entries[0]
array([0. , 0.5, 0.5])
"""

from dataclasses import dataclass, field
import io
import math

import numpy as np

from . import _accel
from .errors import (
    DimensionError,
    InvalidInputError,
    IsolatedUnitError,
    SingularDistanceError,
)

EARTH_RADIUS_KM = 6371.0
DEFAULT_S_STAR = 2.5
DEFAULT_EPSILON = 1e-8
KERNEL_CAP = 1e12

PHYSICAL_KINDS = ("inverse_square", "neg_exponential")
ECONOMIC_KINDS = ("neg_exponential", "power_difference", "ratio_proximity")


@dataclass(frozen=True)
class Coordinates:
    lat: float
    long: float

    def __post_init__(self):
        _check_coordinates(np.array([self.lat]), np.array([self.long]))


@dataclass(frozen=True, eq=False)
class WeightsMatrix:
    """Dense n x n spatial weights with a provenance tag.

    ``entries`` is stored read-only.  ``kernel_tag`` records how the matrix
    was built (kernel kinds, scales, tuning values, normalization).
    """

    entries: np.ndarray
    kernel_tag: dict = field(default_factory=dict)
    normalized: bool = False

    def __post_init__(self):
        a = np.array(self.entries, dtype=np.float64, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"weights must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidInputError("weights contain non-finite entries")
        if np.any(a < 0):
            raise InvalidInputError("weights must be non-negative")
        if np.any(np.diag(a) != 0):
            raise InvalidInputError("weights must have a zero diagonal")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "kernel_tag", dict(self.kernel_tag))

    @property
    def n(self):
        return self.entries.shape[0]

    def __matmul__(self, other):
        return self.entries @ other

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def permuted(self, order):
        order = np.asarray(order)
        return WeightsMatrix(self.entries[np.ix_(order, order)], self.kernel_tag, self.normalized)


def _check_coordinates(lat, lon):
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    if not (np.all(np.isfinite(lat)) and np.all(np.isfinite(lon))):
        raise InvalidInputError("coordinates must be finite")
    if np.any(np.abs(lat) > 90.0):
        raise InvalidInputError("latitude outside [-90, 90]")
    if np.any(lon < -180.0) or np.any(lon > 180.0):
        raise InvalidInputError("longitude outside [-180, 180]")
    return lat, lon


def great_circle_distance(a, b, radius=EARTH_RADIUS_KM):
    """Great-circle distance between two points, in the units of ``radius``.

    Uses the haversine form, which agrees with the spherical law of cosines
    but keeps full precision for nearby points.
    """
    if not radius > 0:
        raise InvalidInputError("radius must be positive")
    lat1, lon1 = (a.lat, a.long) if isinstance(a, Coordinates) else a
    lat2, lon2 = (b.lat, b.long) if isinstance(b, Coordinates) else b
    _check_coordinates([lat1, lat2], [lon1, lon2])
    p1, p2 = math.radians(lat1), math.radians(lat2)
    h = math.sin((p1 - p2) / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(math.radians(lon1 - lon2) / 2) ** 2
    return 2.0 * radius * math.asin(math.sqrt(min(1.0, max(0.0, h))))


def distance_matrix(lat, lon, radius=EARTH_RADIUS_KM, backend=None):
    """All pairwise great-circle distances; symmetric with a zero diagonal."""
    if not radius > 0:
        raise InvalidInputError("radius must be positive")
    lat, lon = _check_coordinates(lat, lon)
    if lat.shape != lon.shape or lat.ndim != 1:
        raise DimensionError("lat and lon must be 1-d arrays of equal length")
    return _accel.great_circle_matrix(lat, lon, radius, backend=backend)


def max_offdiagonal(D):
    D = np.asarray(D, dtype=float)
    mask = ~np.eye(D.shape[0], dtype=bool)
    return float(D[mask].max())


def physical_kernel(D, kind, scale=None, backend=None):
    """Unnormalized physical weights from a distance matrix.

    ``inverse_square`` gives (D/scale)^-2 and uses raw distances by default;
    ``neg_exponential`` gives exp(-2 D/scale) with ``scale`` defaulting to the
    largest off-diagonal distance.
    """
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise DimensionError("distance matrix must be square")
    if kind not in PHYSICAL_KINDS:
        raise InvalidInputError(f"unknown physical kernel {kind!r}; expected one of {PHYSICAL_KINDS}")
    if scale is None:
        scale = 1.0 if kind == "inverse_square" else max_offdiagonal(D)
    if not scale > 0:
        raise InvalidInputError("scale must be positive")
    n = D.shape[0]
    off = ~np.eye(n, dtype=bool)
    if np.any(D[off] < 0):
        raise InvalidInputError("distances must be non-negative")
    if kind == "inverse_square":
        zero = np.argwhere((D == 0) & off)
        if len(zero):
            i, j = zero[0]
            raise SingularDistanceError(i, j)
        code = _accel.INVERSE_SQUARE
    else:
        code = _accel.NEG_EXPONENTIAL
    w = _accel.pairwise_kernel(D / scale, code, cap=KERNEL_CAP, backend=backend)
    tag = {"physical": kind, "physical_scale": float(scale)}
    return WeightsMatrix(w, tag)


def economic_kernel(z, kind, s_star=DEFAULT_S_STAR, epsilon=DEFAULT_EPSILON, standardize=True, backend=None):
    """Unnormalized economic-proximity weights from a positive vector ``z``.

    Parameters
    ----------
    z : array_like
        Positive economic variable, one entry per unit.
    kind : {"neg_exponential", "power_difference", "ratio_proximity"}
        exp(-2|z_i - z_j|), |z_i - z_j|^(-2 s_star), or
        (min(z_i/z_j, z_j/z_i) - 1)^-2.
    s_star : float
        Tuning exponent of ``power_difference``.
    epsilon : float
        Floor applied to the gap before inversion, so exact ties give bounded
        weights.
    standardize : bool
        ``neg_exponential`` only: standardize ``z`` to zero mean and unit
        variance before differencing.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 1:
        raise DimensionError("z must be a vector")
    if not np.all(np.isfinite(z)) or np.any(z <= 0):
        raise InvalidInputError("economic variable must be finite and strictly positive")
    if not s_star > 0 or not epsilon > 0:
        raise InvalidInputError("s_star and epsilon must be positive")
    if kind not in ECONOMIC_KINDS:
        raise InvalidInputError(f"unknown economic kernel {kind!r}; expected one of {ECONOMIC_KINDS}")
    tag = {"economic": kind, "epsilon": float(epsilon)}
    if kind == "neg_exponential":
        zz = z
        if standardize:
            sd = z.std()
            zz = (z - z.mean()) / sd if sd > 0 else z - z.mean()
        tag["z_scale"] = "standardized" if standardize else "raw"
        w = _accel.neg_exp_abs_difference(zz, backend=backend)
    elif kind == "power_difference":
        tag["s_star"] = float(s_star)
        w = _accel.pairwise_kernel(z, _accel.POWER_DIFFERENCE, power=s_star, eps=epsilon, cap=KERNEL_CAP, backend=backend)
    else:
        w = _accel.pairwise_kernel(z, _accel.RATIO_PROXIMITY, eps=epsilon, cap=KERNEL_CAP, backend=backend)
    return WeightsMatrix(w, tag)


def hadamard_combine(phys, econ):
    a = phys.entries if isinstance(phys, WeightsMatrix) else np.asarray(phys, dtype=float)
    b = econ.entries if isinstance(econ, WeightsMatrix) else np.asarray(econ, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    tag = {}
    for m in (phys, econ):
        if isinstance(m, WeightsMatrix):
            tag.update(m.kernel_tag)
    return WeightsMatrix(a * b, tag)


def row_normalize(W):
    """Scale each row to sum to one.

    Raises
    ------
    IsolatedUnitError
        If some row has no positive off-diagonal weight.
    """
    a = W.entries if isinstance(W, WeightsMatrix) else np.asarray(W, dtype=float)
    tag = dict(W.kernel_tag) if isinstance(W, WeightsMatrix) else {}
    sums = a.sum(axis=1)
    bad = np.flatnonzero(~(sums > 0))
    if len(bad):
        raise IsolatedUnitError(bad[0])
    out = a / sums[:, None]
    tag["normalized"] = True
    return WeightsMatrix(out, tag, normalized=True)


def build_weights(lat, lon, z=None, physical="inverse_square", economic=None, s_star=DEFAULT_S_STAR,
                  epsilon=DEFAULT_EPSILON, standardize=True, radius=EARTH_RADIUS_KM, D=None, backend=None):
    """Row-normalized physical or composite (physical o economic) weights."""
    if D is None:
        D = distance_matrix(lat, lon, radius, backend=backend)
    W = physical_kernel(D, physical, backend=backend)
    if economic is not None:
        if z is None:
            raise InvalidInputError("economic kernel requested without z")
        W = hadamard_combine(W, economic_kernel(z, economic, s_star, epsilon, standardize, backend=backend))
    W = row_normalize(W)
    return WeightsMatrix(W.entries, {**W.kernel_tag, "radius_km": float(radius)}, normalized=True)


def to_dense_text(W):
    """Tab-separated rows at full (round-trip) precision."""
    a = W.entries if isinstance(W, WeightsMatrix) else np.asarray(W)
    buf = io.StringIO()
    for row in a:
        buf.write("\t".join(repr(float(x)) for x in row))
        buf.write("\n")
    return buf.getvalue()


def from_dense_text(text):
    rows = [line.split("\t") for line in text.strip().splitlines()]
    return np.array([[float(x) for x in r] for r in rows])
