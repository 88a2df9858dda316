"""Orbit state vectors and piecewise Hermite interpolation."""

from datetime import datetime

import numba
import numpy as np

from ..errors import DataError, TimeOutOfRange
from ..timeutil import format_time, parse_time

_DEG = 7  # pos + vel at four knots


class OrbitModel:
    """Time-ordered ECEF state vectors.

    Times are seconds relative to ``epoch`` (a UTC datetime); keeping them
    small preserves sub-nanosecond resolution in double precision.

    Between knots i and i+1 the position is the degree-7 polynomial that
    matches position and velocity at the four bracketing knots
    (i-1 .. i+2, shifted inward at the ends). Velocity and acceleration are
    its derivatives.
    """

    def __init__(self, epoch, t, position, velocity):
        self.epoch = epoch if isinstance(epoch, datetime) else parse_time(epoch)
        self.t = np.asarray(t, dtype=float)
        self.position = np.asarray(position, dtype=float).reshape(-1, 3)
        self.velocity = np.asarray(velocity, dtype=float).reshape(-1, 3)
        n = len(self.t)
        if n < 4:
            raise DataError("orbit needs at least 4 state vectors")
        if self.position.shape != (n, 3) or self.velocity.shape != (n, 3):
            raise DataError("state vector arrays have inconsistent shapes")
        dt = np.diff(self.t)
        if np.any(dt <= 0):
            raise DataError("state vector times must be strictly increasing")
        if np.any(dt > 30.0):
            raise DataError("state vector spacing exceeds 30 s")
        self._coef = self._fit()

    @property
    def valid_interval(self):
        return float(self.t[0]), float(self.t[-1])

    def _fit(self):
        n = len(self.t)
        coef = np.empty((n - 1, _DEG + 1, 3))
        self._h = np.diff(self.t)
        powers = np.arange(_DEG + 1)
        for i in range(n - 1):
            j0 = min(max(i - 1, 0), n - 4)
            h = self._h[i]
            s = (self.t[j0:j0 + 4] - self.t[i]) / h
            rows, rhs = [], []
            for k in range(4):
                rows.append(s[k] ** powers)
                rhs.append(self.position[j0 + k])
                d = np.zeros(_DEG + 1)
                d[1:] = powers[1:] * s[k] ** (powers[1:] - 1)
                rows.append(d / h)
                rhs.append(self.velocity[j0 + k])
            coef[i] = np.linalg.solve(np.array(rows), np.array(rhs))
        return coef

    def _locate(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.valid_interval
        if np.any(t < lo) or np.any(t > hi) or np.any(np.isnan(t)):
            raise TimeOutOfRange(f"time outside orbit interval [{lo}, {hi}]")
        idx = np.clip(np.searchsorted(self.t, t, side="right") - 1, 0, len(self.t) - 2)
        return t, idx

    def interpolate(self, t, accel=False):
        """Position and velocity (and optionally acceleration) at times ``t``."""
        t, idx = self._locate(t)
        shape = t.shape
        tf = np.ascontiguousarray(t.ravel())
        pos = np.empty((tf.size, 3))
        vel = np.empty((tf.size, 3))
        acc = np.empty((tf.size, 3))
        _hermite_eval(self._coef, self.t, self._h, self.position, self.velocity,
                      tf, np.ascontiguousarray(idx.ravel()), pos, vel, acc)
        pos, vel, acc = (a.reshape(shape + (3,)) for a in (pos, vel, acc))
        if accel:
            return pos, vel, acc
        return pos, vel

    def to_dict(self):
        return {"epoch": format_time(self.epoch),
                "state_vectors": [[float(t), *map(float, p), *map(float, v)]
                                  for t, p, v in zip(self.t, self.position, self.velocity)]}

    @classmethod
    def from_dict(cls, d):
        sv = np.asarray(d["state_vectors"], dtype=float)
        return cls(d["epoch"], sv[:, 0], sv[:, 1:4], sv[:, 4:7])

    def shifted(self, epoch):
        """Same relative state vectors referenced to a different epoch."""
        return OrbitModel(epoch, self.t, self.position, self.velocity)


@numba.njit(cache=True)
def _hermite_eval(coef, knots, steps, kpos, kvel, t, idx, pos, vel, acc):
    for m in range(t.size):
        i = idx[m]
        h = steps[i]
        s = (t[m] - knots[i]) / h
        for ax in range(3):
            p = coef[i, _DEG, ax]
            v = _DEG * coef[i, _DEG, ax]
            a = _DEG * (_DEG - 1) * coef[i, _DEG, ax]
            for k in range(_DEG - 1, -1, -1):
                p = p * s + coef[i, k, ax]
                if k >= 1:
                    v = v * s + k * coef[i, k, ax]
                if k >= 2:
                    a = a * s + k * (k - 1) * coef[i, k, ax]
            pos[m, ax] = p
            vel[m, ax] = v / h
            acc[m, ax] = a / (h * h)
        # knots are returned verbatim
        for j in (i, i + 1):
            if t[m] == knots[j]:
                for ax in range(3):
                    pos[m, ax] = kpos[j, ax]
                    vel[m, ax] = kvel[j, ax]
