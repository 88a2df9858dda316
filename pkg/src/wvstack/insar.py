"""Interferograms, coherence-based point selection and small-baseline time series."""

import csv
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import uniform_filter
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components, minimum_spanning_tree

from .constants import phase_to_mm
from .errors import DisconnectedEpochs, EmptyStack, GridMismatch, UsageError
from .geometry.geocode import GeocodedRaster
from .timeutil import format_time

MAX_BASELINE_DAYS = 48.0
DEFAULT_LOOKS = (5, 5)
UNWRAP_RMS_LIMIT = 1.0  # rad; larger weighted misclosure means the wrap assumption failed
GAMMA_CLIP = (1e-3, 0.9999)


def downsample_grid(raster, factor):
    """Complex block mean over valid cells; a coarse cell is valid when at least half its block is."""
    factor = int(factor)
    if factor < 1:
        raise UsageError("downsample factor must be >= 1")
    if factor == 1:
        return GeocodedRaster(raster.grid, raster.samples.copy(), raster.mask.copy())
    grid = raster.grid.coarsen(factor)
    nn, ne = grid.n_north * factor, grid.n_east * factor
    data = np.zeros((nn, ne), dtype=np.complex128)
    mask = np.zeros((nn, ne), dtype=bool)
    h, w = raster.samples.shape
    data[:h, :w] = np.where(raster.mask, raster.samples, 0)
    mask[:h, :w] = raster.mask
    blocks = lambda a: a.reshape(grid.n_north, factor, grid.n_east, factor).sum(axis=(1, 3))  # noqa: E731
    total = blocks(data)
    count = blocks(mask.astype(np.int64))
    valid = count * 2 >= factor * factor
    out = np.where(valid, total / np.maximum(count, 1), 0).astype(np.complex64)
    return GeocodedRaster(grid, out, valid)


@dataclass
class Interferogram:
    pair: tuple  # (member_a, member_b)
    samples: np.ndarray  # coherence-normalised complex cross product
    coherence: np.ndarray
    mask: np.ndarray
    temporal_baseline: float  # days
    looks: tuple = DEFAULT_LOOKS

    @property
    def phase(self):
        return np.angle(self.samples)

    @property
    def n_looks(self):
        return int(self.looks[0] * self.looks[1])


def form_interferogram(a, b, looks=DEFAULT_LOOKS, pair=("a", "b"), temporal_baseline=0.0):
    """Multilooked a·conj(b) and coherence over a boxcar ``looks`` window.

    Output cells are valid only where the whole window is valid in both
    inputs.
    """
    if a.grid != b.grid:
        raise GridMismatch("interferogram inputs are on different grids")
    looks = (int(looks[0]), int(looks[1]))
    m = a.mask & b.mask
    za = np.where(m, a.samples, 0).astype(np.complex128)
    zb = np.where(m, b.samples, 0).astype(np.complex128)
    box = lambda x: uniform_filter(x, size=looks, mode="constant", cval=0.0)  # noqa: E731
    cross = za * np.conj(zb)
    num = box(cross.real) + 1j * box(cross.imag)
    pa = box(np.abs(za) ** 2)
    pb = box(np.abs(zb) ** 2)
    full = box(m.astype(float)) > 1.0 - 1e-9
    den = np.sqrt(pa * pb)
    valid = full & (den > 0)
    samples = np.zeros(num.shape, dtype=np.complex128)
    samples[valid] = num[valid] / den[valid]
    # numerical guard: Cauchy-Schwarz bounds the ratio by one
    mag = np.abs(samples)
    over = mag > 1.0
    samples[over] /= mag[over]
    coh = np.abs(samples)
    return Interferogram(tuple(pair), samples.astype(np.complex64), coh.astype(np.float32), valid,
                         float(temporal_baseline), looks)


def sbas_pairs(days, max_baseline=MAX_BASELINE_DAYS):
    """All epoch pairs (i, j), i < j, with temporal baseline <= ``max_baseline`` days."""
    days = [float(d) for d in days]
    return [(i, j) for i in range(len(days)) for j in range(i + 1, len(days))
            if abs(days[j] - days[i]) <= max_baseline + 1e-9]


@dataclass
class CoherencePointSet:
    rows: np.ndarray
    cols: np.ndarray
    mean_coherence: np.ndarray
    cutoff: float
    n_valid: int

    @property
    def fraction(self):
        return self.rows.size / self.n_valid if self.n_valid else 0.0

    def __len__(self):
        return int(self.rows.size)


def select_points(coherence_stack, cutoff):
    """Cells whose mean coherence over the stack is >= ``cutoff``.

    ``coherence_stack`` is a list of :class:`Interferogram` or of
    ``(coherence, mask)`` pairs on one grid; only cells valid in every
    layer are candidates.
    """
    layers = [(i.coherence, i.mask) if isinstance(i, Interferogram) else i for i in coherence_stack]
    if not layers:
        raise EmptyStack("no coherence rasters")
    shapes = {c.shape for c, _ in layers}
    if len(shapes) != 1:
        raise GridMismatch("coherence rasters differ in shape")
    valid = np.logical_and.reduce([m for _, m in layers])
    mean = np.mean([np.where(valid, c, 0.0) for c, _ in layers], axis=0)
    sel = valid & (mean >= cutoff)
    rows, cols = np.nonzero(sel)
    return CoherencePointSet(rows, cols, mean[rows, cols].astype(float), float(cutoff),
                             int(valid.sum()))


@dataclass
class DeformationSeries:
    point: tuple  # (row, col)
    epochs: list
    los_mm: np.ndarray
    sigma_mm: np.ndarray


@dataclass
class SeriesSet:
    """Time series of many points held as arrays; iterating yields :class:`DeformationSeries`."""

    rows: np.ndarray
    cols: np.ndarray
    epochs: list
    los_mm: np.ndarray  # (points, epochs)
    sigma_mm: np.ndarray
    failed: list = field(default_factory=list)  # (row, col, rms misclosure rad)

    def __len__(self):
        return int(self.rows.size)

    def __getitem__(self, k):
        return DeformationSeries((int(self.rows[k]), int(self.cols[k])), self.epochs,
                                 self.los_mm[k], self.sigma_mm[k])

    def __iter__(self):
        return (self[k] for k in range(len(self)))


def phase_variance(coherence, looks):
    g = np.clip(coherence, *GAMMA_CLIP)
    return (1.0 - g * g) / (2.0 * looks * g * g)


def _spanning_tree(n, pairs, days):
    # prefer the shortest temporal baselines when integrating wrapped phase
    i, j = np.array(pairs).T
    w = np.abs(np.asarray(days)[j] - np.asarray(days)[i]) + 1.0
    g = minimum_spanning_tree(csr_matrix((w, (i, j)), shape=(n, n)))
    g = g + g.T
    order, pred = breadth_first_order(g, 0, directed=False)
    return order, pred


def invert_time_series(interferograms, epochs, points, pairs=None, batch=20000):
    """Per-point LOS history (mm, relative to epoch 0) with 1-sigma uncertainties.

    ``interferograms[k]`` relates epochs ``pairs[k] = (i, j)``, its phase
    being phi_i - phi_j. Wrapped phases are integrated along a spanning
    tree of short baselines; every interferogram is then unwrapped against
    that estimate and the network solved by weighted least squares with
    phase variance from coherence. Points whose weighted misclosure is too
    large are dropped and listed in ``failed``.
    """
    n = len(epochs)
    if pairs is None:
        pairs = [ifg.pair for ifg in interferograms]
    pairs = [tuple(int(x) for x in p) for p in pairs]
    if not pairs:
        raise DisconnectedEpochs("no interferograms")
    i_idx, j_idx = np.array(pairs).T
    ncomp, _ = connected_components(csr_matrix((np.ones(len(pairs)), (i_idx, j_idx)), shape=(n, n)),
                                    directed=False)
    if ncomp > 1:
        raise DisconnectedEpochs(f"interferogram network splits epochs into {ncomp} groups")
    days = [(e - epochs[0]).total_seconds() / 86400.0 for e in epochs]
    order, pred = _spanning_tree(n, pairs, days)
    lookup = {p: k for k, p in enumerate(pairs)}

    # design: phase(i, j) = x_i - x_j, x_0 = 0
    a = np.zeros((len(pairs), n))
    a[np.arange(len(pairs)), i_idx] = 1.0
    a[np.arange(len(pairs)), j_idx] = -1.0
    a = a[:, 1:]

    rows, cols = np.asarray(points.rows), np.asarray(points.cols)
    los = np.zeros((rows.size, n))
    sig = np.zeros((rows.size, n))
    keep = np.ones(rows.size, dtype=bool)
    rms_all = np.zeros(rows.size)
    for s in range(0, rows.size, batch):
        r, c = rows[s:s + batch], cols[s:s + batch]
        phi = np.stack([np.angle(ifg.samples[r, c]).astype(float) for ifg in interferograms], axis=0)
        gam = np.stack([ifg.coherence[r, c].astype(float) for ifg in interferograms], axis=0)
        var = np.stack([phase_variance(gam[k], ifg.n_looks) for k, ifg in enumerate(interferograms)])
        x0 = np.zeros((n, r.size))
        for node in order[1:]:
            p = pred[node]
            if (p, node) in lookup:
                x0[node] = x0[p] - phi[lookup[(p, node)]]
            else:
                x0[node] = x0[p] + phi[lookup[(node, p)]]
        model = x0[i_idx] - x0[j_idx]
        unw = phi + 2 * np.pi * np.rint((model - phi) / (2 * np.pi))
        w = 1.0 / var  # (pairs, pts)
        normal = np.einsum("ki,kp,kj->pij", a, w, a)
        rhs = np.einsum("ki,kp->pi", a, w * unw)
        cov = np.linalg.inv(normal)
        x = np.einsum("pij,pj->pi", cov, rhs)
        resid = unw - (a @ x.T)
        rms = np.sqrt(np.mean(resid ** 2, axis=0))
        rms_all[s:s + batch] = rms
        keep[s:s + batch] = rms <= UNWRAP_RMS_LIMIT
        los[s:s + batch, 1:] = phase_to_mm(x)
        sig[s:s + batch, 1:] = phase_to_mm(np.sqrt(np.diagonal(cov, axis1=1, axis2=2)))
    failed = [(int(r), int(c), float(m)) for r, c, m in zip(rows[~keep], cols[~keep], rms_all[~keep])]
    return SeriesSet(rows[keep], cols[keep], list(epochs), los[keep], sig[keep], failed)


def cumulative_deformation(series, grid=None):
    """Last-epoch LOS value per point, with map coordinates when ``grid`` is given."""
    if len(series) == 0:
        raise EmptyStack("no time series")
    cum = series.los_mm[:, -1].copy()
    table = {"row": series.rows.copy(), "col": series.cols.copy(), "cumulative_mm": cum}
    if grid is not None:
        table["east"] = grid.east(series.cols)
        table["north"] = grid.north(series.rows)
    return table


def linear_rate(series):
    """Least-squares LOS rate (mm/yr) per point, weighted by the per-epoch sigmas."""
    t = np.array([(e - series.epochs[0]).total_seconds() / (365.25 * 86400.0) for e in series.epochs])
    design = np.stack([np.ones_like(t), t], axis=1)
    coef, *_ = np.linalg.lstsq(design, series.los_mm.T, rcond=None)
    return coef[1]


# --- exports ----------------------------------------------------------------

def write_points(path, table):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["east", "north", "cumulative_mm"])
        for e, n, c in zip(table["east"], table["north"], table["cumulative_mm"]):
            w.writerow([f"{e:.3f}", f"{n:.3f}", f"{c:.4f}"])


def write_series(path, s):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "los_mm", "sigma_mm"])
        for e, d, sg in zip(s.epochs, s.los_mm, s.sigma_mm):
            w.writerow([format_time(e), f"{d:.4f}", f"{sg:.4f}"])


def sample_points(n, count):
    """Evenly spaced indices of ``count`` points out of ``n`` (all when n <= count)."""
    if n <= count:
        return np.arange(n)
    return np.unique(np.linspace(0, n - 1, count).round().astype(int))


def write_series_files(directory, series, count=64):
    os.makedirs(directory, exist_ok=True)
    written = []
    for k in sample_points(len(series), count):
        s = series[int(k)]
        name = f"point_r{s.point[0]:05d}_c{s.point[1]:05d}.csv"
        write_series(os.path.join(directory, name), s)
        written.append(name)
    return written


# --- stack driver -----------------------------------------------------------

@dataclass
class TimeSeriesResult:
    grid: object  # analysis MapGrid
    epochs: list
    ids: list
    interferograms: list
    points: CoherencePointSet
    series: SeriesSet


def stack_time_series(stack, factor=2, looks=DEFAULT_LOOKS, cutoff=0.5,
                      max_baseline=MAX_BASELINE_DAYS, jobs=1):
    """Downsample the stack, form the small-baseline network and invert every selected point."""
    from concurrent.futures import ThreadPoolExecutor

    ids = stack.ids
    epochs = [m.sensing_start for m in stack.members]
    coarse = [downsample_grid(stack.raster(v), factor) for v in ids]
    days = [(e - epochs[0]).total_seconds() / 86400.0 for e in epochs]
    pairs = sbas_pairs(days, max_baseline)

    def one(p):
        i, j = p
        return form_interferogram(coarse[i], coarse[j], looks, (i, j), days[j] - days[i])

    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            ifgs = list(ex.map(one, pairs))
    else:
        ifgs = [one(p) for p in pairs]
    if not ifgs:
        raise DisconnectedEpochs("no interferogram within the maximum temporal baseline")
    points = select_points(ifgs, cutoff)
    series = invert_time_series(ifgs, epochs, points, pairs)
    return TimeSeriesResult(coarse[0].grid, epochs, ids, ifgs, points, series)
