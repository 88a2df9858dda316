"""Direct geocoding of complex SLC rasters onto a map grid."""

from dataclasses import dataclass

import numba
import numpy as np

from ..errors import GridDisjoint, GridMismatch
from .radar import radar_coordinates

KERNEL_HALF = 4  # 8-point kernel: taps -3 .. +4 around floor(x)


@dataclass
class GeocodedRaster:
    grid: object  # MapGrid
    samples: np.ndarray  # complex64, shape grid.shape
    mask: np.ndarray  # bool, True where valid

    def __post_init__(self):
        if self.samples.shape != self.grid.shape or self.mask.shape != self.grid.shape:
            raise GridMismatch(f"raster shape {self.samples.shape} does not match grid {self.grid.shape}")

    @property
    def amplitude(self):
        return np.abs(self.samples)


KAISER_BETA = 4.5
TABLE_STEPS = 2048


def _kernel_table(beta=KAISER_BETA, steps=TABLE_STEPS):
    """Kaiser-windowed sinc weights for fractional offsets 0..1, rows normalised to unit sum."""
    frac = np.linspace(0.0, 1.0, steps + 1)[:, None]
    x = frac - (np.arange(2 * KERNEL_HALF) - KERNEL_HALF + 1)[None, :]
    u = np.clip(1.0 - (x / KERNEL_HALF) ** 2, 0.0, None)
    w = np.sinc(x) * np.i0(beta * np.sqrt(u)) / np.i0(beta)
    return w / w.sum(axis=1, keepdims=True)


_TABLE = _kernel_table()


@numba.njit(cache=True)
def _kernel_weights(frac, table, w):
    pos = frac * (table.shape[0] - 1)
    i = int(pos)
    if i >= table.shape[0] - 1:
        i = table.shape[0] - 2
    t = pos - i
    for j in range(2 * KERNEL_HALF):
        w[j] = (1.0 - t) * table[i, j] + t * table[i + 1, j]


@numba.njit(cache=True)
def _resample_sinc8(data, lines, samples, table, out, valid):
    nl, ns = data.shape
    wl = np.empty(2 * KERNEL_HALF)
    ws = np.empty(2 * KERNEL_HALF)
    for k in range(lines.size):
        li = lines[k]
        si = samples[k]
        if not (li >= 0.0 and li <= nl - 1 and si >= 0.0 and si <= ns - 1):
            out[k] = 0.0
            valid[k] = False
            continue
        l0 = int(np.floor(li))
        s0 = int(np.floor(si))
        _kernel_weights(li - l0, table, wl)
        _kernel_weights(si - s0, table, ws)
        acc_re = 0.0
        acc_im = 0.0
        wsum = 0.0
        for a in range(2 * KERNEL_HALF):
            ll = l0 + a - KERNEL_HALF + 1
            if ll < 0 or ll >= nl:
                continue
            for b in range(2 * KERNEL_HALF):
                ss = s0 + b - KERNEL_HALF + 1
                if ss < 0 or ss >= ns:
                    continue
                w = wl[a] * ws[b]
                v = data[ll, ss]
                acc_re += w * v.real
                acc_im += w * v.imag
                wsum += w
        # taps falling off the raster edge are dropped and the rest renormalised
        out[k] = complex(acc_re / wsum, acc_im / wsum)
        valid[k] = True


def _resample_nearest(data, lines, samples):
    nl, ns = data.shape
    li = np.rint(lines)
    si = np.rint(samples)
    valid = (li >= 0) & (li <= nl - 1) & (si >= 0) & (si <= ns - 1)
    out = np.zeros(lines.shape, dtype=data.dtype)
    out[valid] = data[li[valid].astype(np.int64), si[valid].astype(np.int64)]
    return out, valid


def resample(data, lines, samples, kernel="sinc8", carrier=None):
    """Sample ``data`` at fractional (line, sample) positions.

    ``carrier`` = (rad/line, rad/sample) removes a linear phase carrier before
    interpolating and restores it afterwards, so off-baseband data keeps its phase.
    """
    lines = np.ascontiguousarray(lines, dtype=np.float64)
    samples = np.ascontiguousarray(samples, dtype=np.float64)
    if kernel == "nearest":
        return _resample_nearest(data, lines, samples)
    if kernel != "sinc8":
        raise ValueError(f"unknown kernel {kernel!r}")
    src = np.ascontiguousarray(data, dtype=np.complex128)
    if carrier is not None:
        al, rs = carrier
        ll, ss = np.meshgrid(np.arange(src.shape[0]), np.arange(src.shape[1]), indexing="ij")
        src = src * np.exp(-1j * (al * ll + rs * ss))
    out = np.empty(lines.size, dtype=np.complex128)
    valid = np.empty(lines.size, dtype=np.bool_)
    _resample_sinc8(src, lines.ravel(), samples.ravel(), _TABLE, out, valid)
    out = out.reshape(lines.shape)
    valid = valid.reshape(lines.shape)
    if carrier is not None:
        out = out * np.exp(1j * (al * lines + rs * samples))
    return out, valid


def grid_radar_coordinates(grid, geom, orbit, height=0.0, rows=None):
    """Fractional (line, sample) of every cell centre of ``grid`` (or of selected rows)."""
    rows = np.arange(grid.n_north) if rows is None else np.asarray(rows)
    east = grid.east(np.arange(grid.n_east))
    north = grid.north(rows)
    ee, nn = np.meshgrid(east, north)
    xyz = grid.frame.to_ecef(ee, nn, height)
    return radar_coordinates(geom, orbit, xyz)


def geocode(slc, geom, orbit, grid, height=0.0, kernel="sinc8", carrier=None, chunk_rows=128):
    """Resample an SLC onto ``grid`` by solving zero-Doppler for every cell.

    Cells that map outside the radar raster are masked. Raises
    :class:`GridDisjoint` when no cell lands inside the raster.
    """
    slc = np.asarray(slc)
    if slc.shape != (geom.n_lines, geom.n_samples):
        raise GridMismatch(f"SLC shape {slc.shape} does not match geometry "
                           f"({geom.n_lines}, {geom.n_samples})")
    out = np.zeros(grid.shape, dtype=np.complex64)
    mask = np.zeros(grid.shape, dtype=bool)
    for r0 in range(0, grid.n_north, chunk_rows):
        rows = np.arange(r0, min(r0 + chunk_rows, grid.n_north))
        lines, samples = grid_radar_coordinates(grid, geom, orbit, height, rows)
        vals, valid = resample(slc, lines, samples, kernel, carrier)
        out[rows] = np.where(valid, vals, 0)
        mask[rows] = valid
    if not mask.any():
        raise GridDisjoint("map grid does not overlap the radar raster")
    return GeocodedRaster(grid, out, mask)
