"""Points, separated nets, covering numbers and the entropy integral on S^2."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import integrate
from scipy.spatial import cKDTree

from .rng import PURPOSE_NET, PURPOSE_PROBE, RNGStream
from .special import gaussian_sf
from .spectrum import BandConfig

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0
# N <= 2 / (1 - cos(s/2)) <= 2 pi^2 / s^2 for s in (0, pi]  (disjoint caps of radius s/2)
PACKING_CONSTANT = 2.0 * math.pi ** 2
DEFAULT_NET_CAP = 200_000


class CapacityError(RuntimeError):
    """A requested construction exceeds a configured size cap."""


@dataclass(frozen=True)
class SpherePoint:
    theta: float
    phi: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError(f"colatitude {self.theta} outside [0, pi]")
        object.__setattr__(self, "phi", float(self.phi) % (2 * math.pi))

    @property
    def unit_vector(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array([st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)])

    @classmethod
    def from_vector(cls, v) -> "SpherePoint":
        v = np.asarray(v, dtype=float)
        v = v / np.linalg.norm(v)
        return cls(math.acos(max(-1.0, min(1.0, v[2]))), math.atan2(v[1], v[0]))


NORTH_POLE = SpherePoint(0.0, 0.0)


class SpherePoints:
    """Array-backed point set: colatitudes and longitudes of equal length."""

    def __init__(self, theta, phi):
        self.theta = np.atleast_1d(np.asarray(theta, dtype=float)).copy()
        self.phi = np.mod(np.atleast_1d(np.asarray(phi, dtype=float)), 2 * np.pi)
        if self.theta.shape != self.phi.shape:
            raise ValueError("theta and phi must have equal length")
        if np.any((self.theta < 0) | (self.theta > np.pi)):
            raise ValueError("colatitudes must lie in [0, pi]")

    @classmethod
    def from_vectors(cls, vectors, tol: float = 1e-12) -> "SpherePoints":
        v = np.atleast_2d(np.asarray(vectors, dtype=float))
        norms = np.linalg.norm(v, axis=1)
        bad = np.flatnonzero(np.abs(norms - 1.0) > tol)
        if bad.size:
            raise ValueError(f"point {int(bad[0])} is off the unit sphere (norm {norms[bad[0]]!r})")
        theta = np.arccos(np.clip(v[:, 2], -1.0, 1.0))
        return cls(theta, np.arctan2(v[:, 1], v[:, 0]))

    @classmethod
    def from_points(cls, points) -> "SpherePoints":
        return cls([p.theta for p in points], [p.phi for p in points])

    @property
    def unit_vectors(self) -> np.ndarray:
        st = np.sin(self.theta)
        return np.column_stack([st * np.cos(self.phi), st * np.sin(self.phi), np.cos(self.theta)])

    def __len__(self):
        return self.theta.size

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            return SpherePoint(float(self.theta[idx]), float(self.phi[idx]))
        return SpherePoints(self.theta[idx], self.phi[idx])

    def rotated(self, rotation: np.ndarray) -> "SpherePoints":
        v = self.unit_vectors @ np.asarray(rotation).T
        v /= np.linalg.norm(v, axis=1)[:, None]
        return SpherePoints.from_vectors(v, tol=1e-9)


def as_points(points) -> SpherePoints:
    if isinstance(points, SpherePoints):
        return points
    if isinstance(points, SpherePoint):
        return SpherePoints([points.theta], [points.phi])
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 3:
        return SpherePoints.from_vectors(arr)
    return SpherePoints.from_points(points)


def geodesic_distance(a, b):
    """Great-circle distance in ``[0, pi]``.

    Uses ``atan2(|a x b|, a . b)``, which equals the arccos of the inner
    product but keeps full precision for nearly coincident points.
    """
    va = a.unit_vector if isinstance(a, SpherePoint) else np.asarray(a, dtype=float)
    vb = b.unit_vector if isinstance(b, SpherePoint) else np.asarray(b, dtype=float)
    cross = np.linalg.norm(np.cross(va, vb), axis=-1)
    dot = np.sum(va * vb, axis=-1)
    out = np.arctan2(cross, dot)
    return float(out) if np.ndim(out) == 0 else out


def chord(angle):
    return 2.0 * np.sin(0.5 * np.asarray(angle, dtype=float))


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def fibonacci_lattice(n: int) -> np.ndarray:
    """``n`` near-uniform unit vectors on a golden-angle spiral."""
    i = np.arange(n, dtype=float)
    z = 1.0 - (2.0 * i + 1.0) / n
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = np.mod(2.0 * np.pi * i / GOLDEN, 2.0 * np.pi)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


@njit(cache=True)
def _greedy_thin(vecs, chord_min, n_preset, cap):
    # hash grid over [-1, 1]^3 with cell edge >= chord_min; linked lists per cell
    n = vecs.shape[0]
    cell = max(chord_min, 1e-6)
    g = int(math.floor(2.0 / cell)) + 1
    if g > 200:
        g = 200
        cell = 2.0 / (g - 1)
    # neighbor reach in cells
    reach = int(math.ceil(chord_min / cell))
    head = -np.ones(g * g * g, dtype=np.int64)
    nxt = -np.ones(n, dtype=np.int64)
    keep = np.zeros(n, dtype=np.bool_)
    c2 = chord_min * chord_min * (1.0 - 1e-12)
    count = 0
    for i in range(n):
        cx = min(int((vecs[i, 0] + 1.0) / cell), g - 1)
        cy = min(int((vecs[i, 1] + 1.0) / cell), g - 1)
        cz = min(int((vecs[i, 2] + 1.0) / cell), g - 1)
        ok = True
        if i >= n_preset:
            for dx in range(-reach, reach + 1):
                if not ok:
                    break
                x = cx + dx
                if x < 0 or x >= g:
                    continue
                for dy in range(-reach, reach + 1):
                    if not ok:
                        break
                    y = cy + dy
                    if y < 0 or y >= g:
                        continue
                    for dz in range(-reach, reach + 1):
                        z = cz + dz
                        if z < 0 or z >= g:
                            continue
                        k = head[(x * g + y) * g + z]
                        while k >= 0:
                            d0 = vecs[i, 0] - vecs[k, 0]
                            d1 = vecs[i, 1] - vecs[k, 1]
                            d2 = vecs[i, 2] - vecs[k, 2]
                            if d0 * d0 + d1 * d1 + d2 * d2 < c2:
                                ok = False
                                break
                            k = nxt[k]
                        if not ok:
                            break
        if ok:
            keep[i] = True
            idx = (cx * g + cy) * g + cz
            nxt[i] = head[idx]
            head[idx] = i
            count += 1
            if count > cap:
                return keep, count
    return keep, count


@dataclass
class EpsilonNet:
    points: SpherePoints
    separation: float
    delta_exponent: float | None = None
    seed: dict = field(default_factory=dict)

    @property
    def cardinality(self) -> int:
        return len(self.points)

    def min_separation(self) -> float:
        """Exact minimum pairwise geodesic distance (nearest neighbours via k-d tree)."""
        if self.cardinality < 2:
            return math.pi
        v = self.points.unit_vectors
        d, _ = cKDTree(v).query(v, k=2)
        return float(2.0 * np.arcsin(min(1.0, d[:, 1].min() / 2.0)))

    def covering_radius_estimate(self, n_probes: int = 20000, stream: RNGStream | None = None) -> float:
        """Largest distance from random probe points to the nearest net point."""
        rng = (stream or RNGStream(0)).generator(PURPOSE_PROBE)
        probes = rng.standard_normal((n_probes, 3))
        probes /= np.linalg.norm(probes, axis=1)[:, None]
        d, _ = cKDTree(self.points.unit_vectors).query(probes, k=1)
        return float(2.0 * np.arcsin(min(1.0, d.max() / 2.0)))

    def to_dict(self) -> dict:
        return {"separation": self.separation, "delta_exponent": self.delta_exponent,
                "cardinality": self.cardinality, "seed": self.seed}


def save_net(net: EpsilonNet, path) -> tuple[str, str]:
    """Write ``theta,phi`` rows to ``path`` and the net metadata to ``path`` + ``.json``."""
    path = str(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta", "phi"])
        for t, p in zip(net.points.theta, net.points.phi):
            w.writerow([repr(float(t)), repr(float(p))])
    side = path + ".json"
    with open(side, "w") as fh:
        json.dump({"separation": net.separation, "delta_exponent": net.delta_exponent,
                   "seed": net.seed}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path, side


def load_net(path, sidecar=None) -> EpsilonNet:
    """Inverse of :func:`save_net`; ``#`` comment lines before the header are skipped.

    The sidecar defaults to ``path + ".json"``; a report document whose
    metadata sits under a ``report`` key is also accepted.
    """
    path = str(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(line for line in fh if not line.startswith("#")))
    if not rows or rows[0] != ["theta", "phi"]:
        raise ValueError(f"{path}: expected a theta,phi header")
    data = np.array([[float(a), float(b)] for a, b in rows[1:]]).reshape(-1, 2)
    with open(sidecar or path + ".json") as fh:
        meta = json.load(fh)
    meta = meta.get("report", meta)
    return EpsilonNet(SpherePoints(data[:, 0], data[:, 1]), float(meta["separation"]),
                      meta.get("delta_exponent"), meta.get("seed", {}))


def packing_bound(separation: float) -> float:
    """Rigorous upper bound on the size of a ``separation``-separated set."""
    return 2.0 / (1.0 - math.cos(0.5 * separation))


def build_net(separation: float, rng_stream: RNGStream | None = None, *,
              oversample: float = 9.0, cap: int = DEFAULT_NET_CAP,
              delta_exponent: float | None = None) -> EpsilonNet:
    """Separated net by greedy thinning of an oversampled Fibonacci lattice.

    The lattice is randomly rotated when a stream is given.  After thinning, a
    second, denser lattice fills any gaps so that the result is maximal with
    respect to both candidate sets: every sphere point lies within
    ``separation`` plus the fill-lattice spacing of a net point.
    """
    if not 0.0 < separation <= math.pi:
        raise ValueError(f"separation must lie in (0, pi], got {separation}")
    expected = packing_bound(separation)
    if expected > 4 * cap:
        raise CapacityError(
            f"separation {separation:.3g} could need up to {expected:.0f} points, "
            f"beyond the net cap of {cap}; increase the cap or the separation")
    n_cand = int(math.ceil(oversample * 4.0 * math.pi / separation ** 2)) + 12
    cand = fibonacci_lattice(n_cand)
    fill = fibonacci_lattice(4 * n_cand)
    if rng_stream is not None:
        rng = rng_stream.generator(PURPOSE_NET)
        cand = cand @ random_rotation(rng).T
        fill = fill @ random_rotation(rng).T
    else:
        # fixed offset so the fill lattice does not coincide with the first
        c, s = math.cos(0.5), math.sin(0.5)
        fill = fill @ np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]).T
    chord_min = float(chord(separation))
    keep, count = _greedy_thin(np.ascontiguousarray(cand), chord_min, 0, cap)
    if count > cap:
        raise CapacityError(f"net exceeded the cap of {cap} points at separation {separation:.3g}")
    base = cand[keep]
    allv = np.ascontiguousarray(np.vstack([base, fill]))
    keep2, count = _greedy_thin(allv, chord_min, base.shape[0], cap)
    if count > cap:
        raise CapacityError(f"net exceeded the cap of {cap} points at separation {separation:.3g}")
    vecs = allv[keep2]
    vecs /= np.linalg.norm(vecs, axis=1)[:, None]
    pts = SpherePoints.from_vectors(vecs, tol=1e-9)
    seed = rng_stream.identity() if rng_stream is not None else {}
    return EpsilonNet(pts, float(separation), delta_exponent, seed)


def scale_net(cfg: BandConfig, delta_exponent: float, rng_stream: RNGStream | None = None,
              cap: int = DEFAULT_NET_CAP) -> EpsilonNet:
    """Net with separation ``2**(-j (1 - delta))``."""
    if not 0.0 < delta_exponent < 1.0:
        raise ValueError("delta exponent must lie in (0, 1)")
    sep = 2.0 ** (-cfg.j * (1.0 - delta_exponent))
    return build_net(sep, rng_stream, cap=cap, delta_exponent=delta_exponent)


def covering_number(cfg: BandConfig, epsilon: float, covering_constant: float = 1.0) -> int:
    """``max(1, ceil(c ell_j^2 / eps^2))``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return max(1, int(math.ceil(covering_constant * cfg.ell_j ** 2 / epsilon ** 2)))


def dudley_ball_radius(profile, epsilon: float) -> float:
    """Geodesic radius of the d_j-ball of radius ``epsilon`` (first crossing)."""
    hi = 1.0 / profile.scale.ell_j
    while float(profile.dudley(hi)) < epsilon:
        hi *= 1.5
        if hi >= math.pi:
            return math.pi
    lo = 0.0
    # d_j increases on [0, first crossing]; locate it on a grid before bisecting
    grid = np.linspace(0.0, hi, 257)
    vals = profile.dudley(grid)
    k = int(np.argmax(vals >= epsilon))
    lo, hi = grid[k - 1], grid[k]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if float(profile.dudley(mid)) < epsilon:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def greedy_covering_count(profile, epsilon: float, rng_stream: RNGStream | None = None) -> int:
    """Size of a maximal separated set at the d_j-ball radius; covers the sphere."""
    return build_net(dudley_ball_radius(profile, epsilon), rng_stream).cardinality


def calibrate_covering_constant(profile, epsilon: float, rng_stream: RNGStream | None = None) -> float:
    """``c`` such that ``c ell_j^2 / eps^2`` matches the greedy covering count."""
    n = greedy_covering_count(profile, epsilon, rng_stream)
    return n * epsilon ** 2 / profile.scale.ell_j ** 2


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class EntropyReport:
    scale: BandConfig
    delta_upper: float
    covering_constant: float
    integral_value: float
    quadrature_value: float
    bound_value: float
    k_star: float
    mills_upper: float

    @property
    def ratio(self) -> float:
        """Integral over ``sqrt(4 log ell_j)``."""
        return self.integral_value / math.sqrt(4.0 * math.log(self.scale.ell_j))

    @property
    def relative_disagreement(self) -> float:
        if self.integral_value == 0:
            return abs(self.quadrature_value)
        return abs(self.quadrature_value - self.integral_value) / abs(self.integral_value)

    def to_dict(self) -> dict:
        return {"j": self.scale.j, "ell_j": self.scale.ell_j, "delta_upper": self.delta_upper,
                "covering_constant": self.covering_constant, "integral_value": self.integral_value,
                "quadrature_value": self.quadrature_value, "bound_value": self.bound_value,
                "k_star": self.k_star, "mills_upper": self.mills_upper, "ratio": self.ratio}


def dudley_entropy_integral(cfg: BandConfig, delta_upper: float, covering_constant: float = 1.0,
                            k_star: float = 1.0) -> EntropyReport:
    """``int_0^delta sqrt(log N(eps)) d eps`` with ``N(eps) = c ell_j^2 / eps^2``.

    Evaluated by adaptive quadrature in ``eps`` and, independently, through
    the substitution ``eps = L exp(-v^2/2)`` with ``L = sqrt(c) ell_j``,
    which gives ``L int_{v0}^inf v^2 exp(-v^2/2) dv`` in closed form.  Where
    ``N < 1`` the integrand is zero (a single ball covers the sphere).
    """
    if not 0.0 < delta_upper <= math.pi:
        raise ValueError("delta_upper must lie in (0, pi]")
    big_l = math.sqrt(covering_constant) * cfg.ell_j
    top = min(delta_upper, big_l)
    v0 = math.sqrt(2.0 * math.log(big_l / top))
    closed = top * v0 + big_l * math.sqrt(2.0 * math.pi) * gaussian_sf(v0)

    def integrand(eps):
        return math.sqrt(max(0.0, 2.0 * math.log(big_l / eps))) if eps > 0 else 0.0

    quad, err = integrate.quad(integrand, 0.0, top, epsabs=0.0, epsrel=1e-12, limit=500)
    if not err <= 1e-9 * max(abs(quad), 1e-300):
        raise QuadratureError(f"entropy quadrature did not converge: estimated error {err:.3g}")
    mills = top * (v0 + 1.0 / v0) if v0 > 0 else math.inf
    return EntropyReport(cfg, float(delta_upper), float(covering_constant), float(closed),
                         float(quad), float(k_star * closed), float(k_star), float(mills))
