"""Reference implementations used as test oracles.

Everything here is written from first principles with plain Python or
dense numpy, deliberately sharing no code with the package.
"""

import math

import numpy as np

GM = 3.986004418e14
A_WGS84 = 6378137.0
B_WGS84 = 6378137.0 * (1 - 1 / 298.257223563)


# --- planar polygons ----------------------------------------------------------

def _orient(a, b, c):
    v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    return 0 if v == 0 else (1 if v > 0 else -1)


def _on_segment(a, b, p):
    return (min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= p[1] <= max(a[1], b[1]))


def segments_intersect(p1, p2, q1, q2):
    o1, o2 = _orient(p1, p2, q1), _orient(p1, p2, q2)
    o3, o4 = _orient(q1, q2, p1), _orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    return ((o1 == 0 and _on_segment(p1, p2, q1)) or (o2 == 0 and _on_segment(p1, p2, q2))
            or (o3 == 0 and _on_segment(q1, q2, p1)) or (o4 == 0 and _on_segment(q1, q2, p2)))


def point_in_polygon(pt, ring):
    x, y = pt
    inside = False
    n = len(ring)
    for i in range(n):
        (x1, y1), (x2, y2) = ring[i], ring[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xc:
                inside = not inside
    return inside


def polygons_intersect(a, b):
    """True when two simple polygons (lists of (x, y)) share at least one point."""
    na, nb = len(a), len(b)
    for i in range(na):
        for j in range(nb):
            if segments_intersect(a[i], a[(i + 1) % na], b[j], b[(j + 1) % nb]):
                return True
    return point_in_polygon(a[0], b) or point_in_polygon(b[0], a)


def shoelace(ring):
    s = 0.0
    for i in range(len(ring)):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % len(ring)]
        s += x1 * y2 - x2 * y1
    return 0.5 * s


def clip_convex(subject, clip):
    """Sutherland-Hodgman clipping of ``subject`` by the convex polygon ``clip``."""
    if shoelace(clip) < 0:
        clip = clip[::-1]
    out = list(subject)
    for i in range(len(clip)):
        a, b = clip[i], clip[(i + 1) % len(clip)]
        inp, out = out, []
        if not inp:
            break

        def inside(p):
            return (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0

        def cross_point(p, q):
            dx1, dy1 = q[0] - p[0], q[1] - p[1]
            dx2, dy2 = b[0] - a[0], b[1] - a[1]
            den = dx1 * dy2 - dy1 * dx2
            t = ((a[0] - p[0]) * dy2 - (a[1] - p[1]) * dx2) / den
            return (p[0] + t * dx1, p[1] + t * dy1)

        for k in range(len(inp)):
            p, q = inp[k], inp[(k + 1) % len(inp)]
            if inside(q):
                if not inside(p):
                    out.append(cross_point(p, q))
                out.append(q)
            elif inside(p):
                out.append(cross_point(p, q))
    return out


def overlap_area(a, b):
    c = clip_convex(a, b)
    return abs(shoelace(c)) if len(c) >= 3 else 0.0


def brute_query(records, aoi, start=None, end=None, beam=None, relative_orbit=None, pass_direction=None):
    out = []
    for r in records:
        if start is not None and r.sensing_start < start:
            continue
        if end is not None and r.sensing_start > end:
            continue
        if beam is not None and r.beam != beam:
            continue
        if relative_orbit is not None and r.relative_orbit != relative_orbit:
            continue
        if pass_direction is not None and r.pass_direction != pass_direction:
            continue
        if polygons_intersect(list(r.footprint), aoi):
            out.append(r)
    return sorted(out, key=lambda r: (r.sensing_start, r.vignette_id))


def brute_stacks(records, min_overlap, min_count):
    """Earliest unassigned record anchors a group; members overlap the anchor by >= min_overlap of its area."""
    groups = {}
    for r in sorted(records, key=lambda r: (r.sensing_start, r.vignette_id)):
        groups.setdefault((r.relative_orbit, r.beam, r.pass_direction), []).append(r)
    out = []
    for key in sorted(groups):
        pending = list(groups[key])
        while pending:
            anchor = pending[0]
            area = abs(shoelace(list(anchor.footprint)))
            members = [r for r in pending
                       if overlap_area(list(r.footprint), list(anchor.footprint)) >= min_overlap * area - 1e-15]
            ids = {r.vignette_id for r in members}
            pending = [r for r in pending if r.vignette_id not in ids]
            if len(members) >= min_count:
                out.append((key, sorted(ids)))
    return sorted(out)


# --- least squares --------------------------------------------------------------

def normal_equations(nodes, edges, weights, reference):
    """Dense normal-equation solution of the pinned-reference weighted network."""
    free = [n for n in nodes if n != reference]
    col = {n: i for i, n in enumerate(free)}
    m = len(edges)
    a = np.zeros((m, len(free)))
    b = np.zeros((m, 2))
    for i, (na, nb, de, dn) in enumerate(edges):
        if nb in col:
            a[i, col[nb]] += 1
        if na in col:
            a[i, col[na]] -= 1
        b[i] = (de, dn)
    w = np.diag(weights)
    x = np.linalg.solve(a.T @ w @ a, a.T @ w @ b)
    sol = {reference: (0.0, 0.0)}
    sol.update({n: tuple(x[col[n]]) for n in free})
    return sol


# --- orbits -------------------------------------------------------------------

def circle_state(t, radius, inclination_deg, raan_deg, u0_deg):
    """Analytic circular Keplerian orbit in an inertial = Earth-fixed frame."""
    n = math.sqrt(GM / radius ** 3)
    inc, om = math.radians(inclination_deg), math.radians(raan_deg)
    u = math.radians(u0_deg) + n * np.asarray(t, float)
    cu, su = np.cos(u), np.sin(u)
    x = radius * (cu * math.cos(om) - su * math.cos(inc) * math.sin(om))
    y = radius * (cu * math.sin(om) + su * math.cos(inc) * math.cos(om))
    z = radius * su * math.sin(inc)
    vx = radius * n * (-su * math.cos(om) - cu * math.cos(inc) * math.sin(om))
    vy = radius * n * (-su * math.sin(om) + cu * math.cos(inc) * math.cos(om))
    vz = radius * n * cu * math.sin(inc)
    return np.stack([x, y, z], -1), np.stack([vx, vy, vz], -1)


def geodetic_point(lat_deg, lon_deg, h=0.0):
    lat, lon = math.radians(lat_deg), math.radians(lon_deg)
    e2 = 1 - (B_WGS84 / A_WGS84) ** 2
    nrad = A_WGS84 / math.sqrt(1 - e2 * math.sin(lat) ** 2)
    return np.array([(nrad + h) * math.cos(lat) * math.cos(lon),
                     (nrad + h) * math.cos(lat) * math.sin(lon),
                     (nrad * (1 - e2) + h) * math.sin(lat)])


# --- signals ------------------------------------------------------------------

def band_limited_texture(n, fraction, rng, offset=3.0):
    """Real random texture whose spectrum is confined to |f| < fraction/2 on both axes."""
    f = np.fft.fftfreq(n)
    keep = (np.abs(f)[:, None] < fraction / 2) & (np.abs(f)[None, :] < fraction / 2)
    return np.fft.ifft2(np.fft.fft2(rng.standard_normal((n, n))) * keep).real + offset


def fourier_shift(img, dx, dy):
    """img(r - dy, c - dx) by the Fourier shift theorem (exact for band-limited input)."""
    fy = np.fft.fftfreq(img.shape[0])[:, None]
    fx = np.fft.fftfreq(img.shape[1])[None, :]
    return np.fft.ifft2(np.fft.fft2(img) * np.exp(-2j * np.pi * (fx * dx + fy * dy))).real


def analytic_coherence(snr_a, snr_b=None):
    """Coherence of two looks of one signal carrying independent noise at the given SNRs (linear)."""
    if snr_b is None:
        return 1.0 / math.sqrt(1.0 + 1.0 / snr_a)
    return 1.0 / math.sqrt((1.0 + 1.0 / snr_a) * (1.0 + 1.0 / snr_b))
