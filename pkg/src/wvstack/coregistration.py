"""Map-coordinate coregistration: amplitude cross-correlation, offset network, timing corrections."""

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import (AllWindowsRejected, DisconnectedNetwork, FlatChip, GridMismatch,
                     InsufficientOverlap, InvalidIncidence, PeakAtBorder, SingularSystem,
                     UsageError)

MIN_WINDOW = 1024
PEAK_FLOOR = 0.05
OVERSAMPLE = 32
TIMING_FLAG_MS = 10.0


# --- correlation ------------------------------------------------------------

def _upsampled_correlation(spectrum, centre, oversample, half_width=1.5):
    """Correlation surface on a fine lattice around ``centre`` (integer lag, rows/cols).

    Evaluates the inverse DFT of ``spectrum`` at fractional lags with two
    matrix products, which is exact band-limited interpolation of the
    circular correlation.
    """
    ny, nx = spectrum.shape
    n_up = int(math.ceil(2 * half_width * oversample)) + 1
    off = (np.arange(n_up) - n_up // 2) / oversample
    ly = centre[0] + off
    lx = centre[1] + off
    fy = np.fft.fftfreq(ny)
    fx = np.fft.fftfreq(nx)
    ey = np.exp(2j * np.pi * np.outer(ly, fy))
    ex = np.exp(2j * np.pi * np.outer(fx, lx))
    surf = (ey @ spectrum @ ex).real / (ny * nx)
    return surf, ly, lx


def amplitude_cross_correlate(chip_a, chip_b, max_shift, oversample=OVERSAMPLE):
    """Shift of ``chip_b`` relative to ``chip_a`` by normalised cross-correlation.

    Returns ``(dx, dy, peak_correlation, snr)``: dx along columns, dy along
    rows, such that chip_b(r, c) ~ chip_a(r - dy, c - dx).
    """
    a = np.asarray(chip_a, dtype=float)
    b = np.asarray(chip_b, dtype=float)
    if a.shape != b.shape or a.ndim != 2:
        raise UsageError("chips must be 2-D and the same size")
    side = min(a.shape)
    if side < 64:
        raise UsageError("chips must be at least 64 px on a side")
    if not 0 < max_shift < side / 4:
        raise UsageError("max_shift must be positive and below side/4")
    a = a - a.mean()
    b = b - b.mean()
    na, nb = np.sqrt(np.sum(a * a)), np.sqrt(np.sum(b * b))
    if na == 0 or nb == 0:
        raise FlatChip("chip has zero variance")
    spectrum = np.conj(np.fft.fft2(a)) * np.fft.fft2(b) / (na * nb)
    surface = np.fft.ifft2(spectrum).real

    ny, nx = a.shape
    lags = np.arange(-max_shift, max_shift + 1)
    sub = surface[np.ix_(lags % ny, lags % nx)]
    iy, ix = np.unravel_index(np.argmax(sub), sub.shape)
    py, px = int(lags[iy]), int(lags[ix])
    if abs(py) > max_shift - 2 or abs(px) > max_shift - 2:
        raise PeakAtBorder(f"correlation peak at ({px}, {py}) is within 2 px of the search limit")

    fine, ly, lx = _upsampled_correlation(spectrum, (py, px), oversample)
    jy, jx = np.unravel_index(np.argmax(fine), fine.shape)
    peak = float(fine[jy, jx])
    fy = _vertex(fine[jy - 1:jy + 2, jx]) if 0 < jy < fine.shape[0] - 1 else 0.0
    fx = _vertex(fine[jy, jx - 1:jx + 2]) if 0 < jx < fine.shape[1] - 1 else 0.0

    guard = np.ones(surface.shape, dtype=bool)
    near = np.arange(-3, 4)
    guard[np.ix_((py + near) % ny, (px + near) % nx)] = False
    snr = peak / float(np.mean(np.abs(surface[guard])))
    step = 1.0 / oversample
    # snap away float noise so integer shifts come back exact
    return round(float(lx[jx] + fx * step), 9), round(float(ly[jy] + fy * step), 9), peak, snr


def _vertex(c):
    # offset of a parabola's vertex through three equally spaced samples
    den = c[0] - 2 * c[1] + c[2]
    return 0.0 if den >= 0 else float(np.clip(0.5 * (c[0] - c[2]) / den, -0.5, 0.5))


# --- pair measurement -------------------------------------------------------

@dataclass
class OffsetMeasurement:
    scene_a: str
    scene_b: str
    d_east: float
    d_north: float
    peak_correlation: float
    snr: float
    window_center: tuple
    window_size: int
    n_windows: int = 1

    @property
    def usable(self):
        return self.peak_correlation >= PEAK_FLOOR and self.snr > 0


def weighted_median(values, weights):
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    order = np.argsort(values, kind="stable")
    v, w = values[order], weights[order]
    cum = np.cumsum(w)
    half = 0.5 * cum[-1]
    k = int(np.searchsorted(cum, half))
    if np.isclose(cum[k], half) and k + 1 < len(v):
        return 0.5 * (v[k] + v[k + 1])
    return float(v[k])


def place_windows(valid, size, stride=None, min_valid=0.9):
    """Top-left corners of ``size`` windows over the common valid area."""
    stride = stride or size // 2
    rows = np.flatnonzero(valid.any(axis=1))
    cols = np.flatnonzero(valid.any(axis=0))
    if rows.size == 0 or rows[-1] - rows[0] + 1 < size or cols[-1] - cols[0] + 1 < size:
        return []
    r_lo, r_hi = rows[0], rows[-1] + 1 - size
    c_lo, c_hi = cols[0], cols[-1] + 1 - size
    rs = _positions(r_lo, r_hi, stride)
    cs = _positions(c_lo, c_hi, stride)
    out = []
    for r in rs:
        for c in cs:
            if valid[r:r + size, c:c + size].mean() >= min_valid:
                out.append((int(r), int(c)))
    return out


def _positions(lo, hi, stride):
    n = int((hi - lo) // stride) + 1
    span = hi - lo
    if n == 1:
        return [lo + span // 2]
    # spread windows evenly so the outermost touch both ends
    return [lo + int(round(i * span / (n - 1))) for i in range(n)]


def measure_pair(raster_a, raster_b, windows=None, window_size=MIN_WINDOW, max_shift=None,
                 scene_a="a", scene_b="b", allow_small_window=False):
    """Bulk map offset of ``raster_b`` relative to ``raster_a`` (metres east/north).

    Per-window shifts are fused with an snr-weighted median. ``windows`` is a
    list of (row, col) top-left corners; by default windows tile the common
    valid area at half-window stride.
    """
    if raster_a.grid != raster_b.grid:
        raise GridMismatch("rasters are not on the same grid")
    if window_size < MIN_WINDOW and not allow_small_window:
        raise UsageError(f"correlation window must be at least {MIN_WINDOW} px")
    grid = raster_a.grid
    valid = raster_a.mask & raster_b.mask
    if windows is None:
        windows = place_windows(valid, window_size)
    if not windows:
        raise InsufficientOverlap("common valid area is smaller than one correlation window")
    if max_shift is None:
        max_shift = window_size // 4 - 1
    amp_a, amp_b = raster_a.amplitude, raster_b.amplitude
    results = []
    for r, c in windows:
        sl = (slice(r, r + window_size), slice(c, c + window_size))
        v = valid[sl]
        if v.shape != (window_size, window_size):
            continue
        ca, cb = amp_a[sl].astype(float), amp_b[sl].astype(float)
        if not v.all():
            ca = np.where(v, ca, ca[v].mean() if v.any() else 0.0)
            cb = np.where(v, cb, cb[v].mean() if v.any() else 0.0)
        try:
            dx, dy, peak, snr = amplitude_cross_correlate(ca, cb, max_shift)
        except (FlatChip, PeakAtBorder):
            continue
        if peak < PEAK_FLOOR:
            continue
        centre = (r + 0.5 * (window_size - 1), c + 0.5 * (window_size - 1))
        results.append((dx, dy, peak, snr, centre))
    if not results:
        raise AllWindowsRejected("no correlation window produced a usable peak")
    dx, dy, peak, snr, centres = zip(*results)
    w = np.asarray(snr)
    row_c = float(np.sum(w * [c[0] for c in centres]) / w.sum())
    col_c = float(np.sum(w * [c[1] for c in centres]) / w.sum())
    return OffsetMeasurement(
        scene_a, scene_b,
        d_east=weighted_median(dx, w) * grid.posting,
        d_north=-weighted_median(dy, w) * grid.posting,
        peak_correlation=weighted_median(peak, w), snr=float(np.median(snr)),
        window_center=(float(grid.east(col_c)), float(grid.north(row_c))),
        window_size=int(window_size), n_windows=len(results))


# --- network ----------------------------------------------------------------

@dataclass
class OffsetNetwork:
    nodes: list
    edges: list
    reference: str

    def __post_init__(self):
        if self.reference not in self.nodes:
            raise UsageError(f"reference {self.reference!r} is not a network node")
        if len(set(self.nodes)) != len(self.nodes):
            raise UsageError("duplicate network nodes")

    def usable_edges(self):
        return [e for e in self.edges if e.usable]

    def components(self):
        pos = {n: i for i, n in enumerate(self.nodes)}
        edges = self.usable_edges()
        n = len(self.nodes)
        if edges:
            i = [pos[e.scene_a] for e in edges]
            j = [pos[e.scene_b] for e in edges]
            g = csr_matrix((np.ones(len(edges)), (i, j)), shape=(n, n))
        else:
            g = csr_matrix((n, n))
        _, labels = connected_components(g, directed=False)
        comps = {}
        for node, lab in zip(self.nodes, labels):
            comps.setdefault(lab, []).append(node)
        return list(comps.values())


@dataclass
class SceneOffset:
    scene: str
    d_east: float
    d_north: float
    residual: float = 0.0
    dt_azimuth: float = 0.0  # ms
    d_range: float = 0.0  # m
    flags: list = field(default_factory=list)


def invert_network(network, weights="snr"):
    """Per-scene map offsets from pairwise measurements by weighted least squares.

    Minimises sum_i w_i |(x_b - x_a) - m_i|^2 with the reference pinned to
    zero. The per-scene residual is the RMS edge misclosure (metres) over
    the edges touching that scene.
    """
    comps = network.components()
    if len(comps) > 1:
        raise DisconnectedNetwork(comps)
    nodes = list(network.nodes)
    edges = network.usable_edges()
    if len(nodes) == 1:
        return [SceneOffset(nodes[0], 0.0, 0.0, 0.0)]
    free = [n for n in nodes if n != network.reference]
    col = {n: k for k, n in enumerate(free)}
    a = np.zeros((len(edges), len(free)))
    obs = np.zeros((len(edges), 2))
    for i, e in enumerate(edges):
        if e.scene_b in col:
            a[i, col[e.scene_b]] += 1.0
        if e.scene_a in col:
            a[i, col[e.scene_a]] -= 1.0
        obs[i] = (e.d_east, e.d_north)
    if weights == "snr":
        w = np.array([e.snr for e in edges], dtype=float)
    elif weights is None:
        w = np.ones(len(edges))
    else:
        w = np.asarray(weights, dtype=float)
    if np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise SingularSystem("edge weights must be finite and positive")
    sw = np.sqrt(w)[:, None]
    x, _, rank, _ = np.linalg.lstsq(a * sw, obs * sw, rcond=None)
    if rank < len(free):
        raise SingularSystem("offset network is rank deficient")
    sol = {network.reference: np.zeros(2)}
    sol.update({n: x[col[n]] for n in free})
    resid = obs - a @ x
    sq = {n: [] for n in nodes}
    for e, r in zip(edges, resid):
        sq[e.scene_a].append(float(r @ r))
        sq[e.scene_b].append(float(r @ r))
    out = []
    for n in nodes:
        rms = math.sqrt(sum(sq[n]) / len(sq[n])) if sq[n] else 0.0
        out.append(SceneOffset(n, float(sol[n][0]), float(sol[n][1]), rms))
    return out


def select_pairs(times, k=3, reference=0):
    """Pairs (i, j), i < j: each scene to its k nearest neighbours in time plus the reference."""
    times = [float(t) for t in times]
    n = len(times)
    pairs = set()
    for i in range(n):
        others = sorted((abs(times[j] - times[i]), j) for j in range(n) if j != i)
        for _, j in others[:k]:
            pairs.add((min(i, j), max(i, j)))
        if i != reference:
            pairs.add((min(i, reference), max(i, reference)))
    return sorted(pairs)


# --- radar conversion -------------------------------------------------------

def map_to_radar(d_east, d_north, heading, incidence, ground_speed):
    """Rotate a map offset into along-track time (ms) and slant-range (m) offsets."""
    if not 0 < incidence < 90:
        raise InvalidIncidence(f"incidence {incidence} outside (0, 90) deg")
    if not ground_speed > 0:
        raise UsageError("ground speed must be positive")
    h = math.radians(heading)
    d_along = d_east * math.sin(h) + d_north * math.cos(h)
    d_ground_range = d_east * math.cos(h) - d_north * math.sin(h)
    return 1000.0 * d_along / ground_speed, d_ground_range * math.sin(math.radians(incidence))


def radar_to_map(dt_azimuth, d_range, heading, incidence, ground_speed):
    """Inverse of :func:`map_to_radar`."""
    if not 0 < incidence < 90:
        raise InvalidIncidence(f"incidence {incidence} outside (0, 90) deg")
    h = math.radians(heading)
    d_along = dt_azimuth * ground_speed / 1000.0
    d_ground_range = d_range / math.sin(math.radians(incidence))
    return (d_along * math.sin(h) + d_ground_range * math.cos(h),
            d_along * math.cos(h) - d_ground_range * math.sin(h))


def to_radar_offset(offset, heading, incidence, ground_speed):
    dt, dr = map_to_radar(offset.d_east, offset.d_north, heading, incidence, ground_speed)
    flags = list(offset.flags)
    if abs(dt) > TIMING_FLAG_MS:
        flags.append("timing-offset-above-10ms")
    return replace(offset, dt_azimuth=dt, d_range=dr, flags=flags)


def apply_offsets(geom, offset):
    """Correct radar metadata by a solved scene offset."""
    return replace(geom, azimuth_start=geom.azimuth_start - offset.dt_azimuth / 1000.0,
                   near_range=geom.near_range - offset.d_range)


# --- tables -----------------------------------------------------------------

EDGE_COLUMNS = ["scene_a", "scene_b", "d_east", "d_north", "peak", "snr"]
OFFSET_COLUMNS = ["scene", "dt_azimuth_ms", "d_range_m", "d_east_m", "d_north_m", "residual_m"]


def write_edge_table(path, edges):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(EDGE_COLUMNS)
        for e in edges:
            w.writerow([e.scene_a, e.scene_b, repr(e.d_east), repr(e.d_north),
                        repr(e.peak_correlation), repr(e.snr)])


def read_edge_table(path):
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    return [OffsetMeasurement(r["scene_a"], r["scene_b"], float(r["d_east"]), float(r["d_north"]),
                              float(r["peak"]), float(r["snr"]), (math.nan, math.nan), 0)
            for r in rows]


def write_offset_table(path, offsets):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(OFFSET_COLUMNS)
        for o in offsets:
            w.writerow([o.scene, repr(o.dt_azimuth), repr(o.d_range), repr(o.d_east),
                        repr(o.d_north), repr(o.residual)])


def read_offset_table(path):
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    return [SceneOffset(r["scene"], float(r["d_east_m"]), float(r["d_north_m"]),
                        float(r["residual_m"]), float(r["dt_azimuth_ms"]), float(r["d_range_m"]))
            for r in rows]
