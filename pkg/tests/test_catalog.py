import json
from datetime import timedelta

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wvstack.catalog import (GranuleManifest, VignetteIndex, coverage_stats, discover_stacks,
                             group_stacks, parse_manifest, query, serialize_manifest)
from wvstack.errors import (InvalidFootprint, InvalidPolygon, MalformedManifest, MissingField,
                            UsageError)

from helpers import T0, manifest, random_records, record, square_footprint
from oracles import brute_query, brute_stacks, polygons_intersect


def _doc(records, **extra):
    d = {"granule_id": "G1", "vignettes": [r.to_dict() for r in records]}
    d.update(extra)
    return json.dumps(d).encode("utf-8")


def _line(n, spacing_deg=0.9):
    return [record(f"v{i:03d}", 10.0, -20.0 + spacing_deg * i, T0 + timedelta(seconds=14 * i))
            for i in range(n)]


# --- manifests ----------------------------------------------------------------

def test_manifest_with_30_vignettes_is_nominal():
    m = parse_manifest(_doc(_line(30)))
    assert m.count == 30
    assert m.flags == []


def test_empty_manifest_is_flagged():
    m = parse_manifest(_doc([]))
    assert m.count == 0
    assert "vignette-count-out-of-nominal-range" in m.flags


def test_manifest_with_200_vignettes_is_flagged():
    m = parse_manifest(_doc(_line(200, 0.2)))
    assert m.count == 200
    assert "vignette-count-out-of-nominal-range" in m.flags


def test_count_envelope_boundaries():
    assert parse_manifest(_doc(_line(15))).flags == []
    assert parse_manifest(_doc(_line(160, 0.2))).flags == []
    assert parse_manifest(_doc(_line(14))).flags == ["vignette-count-out-of-nominal-range"]
    assert parse_manifest(_doc(_line(161, 0.2))).flags == ["vignette-count-out-of-nominal-range"]


def test_bounding_box_recomputed_and_encloses_members():
    m = parse_manifest(_doc(_line(20)))
    lons = [p[0] for r in m.vignettes for p in r.footprint]
    lats = [p[1] for r in m.vignettes for p in r.footprint]
    (x0, y0), _, (x1, y1), _ = m.bounding_box
    assert (x0, y0, x1, y1) == (min(lons), min(lats), max(lons), max(lats))


def test_member_outside_declared_bounding_box_is_flagged():
    recs = _line(20)
    box = [[9.0, -21.0], [11.0, -21.0], [11.0, -19.0], [9.0, -19.0]]
    m = parse_manifest(_doc(recs, bounding_box=box))
    assert "footprint-outside-bounding-box" in m.flags


def test_malformed_documents():
    with pytest.raises(MalformedManifest):
        parse_manifest(b"{not json")
    with pytest.raises(MalformedManifest):
        parse_manifest(b"\xff\xfe")
    with pytest.raises(MalformedManifest):
        parse_manifest(b"[]")
    with pytest.raises(MissingField) as err:
        parse_manifest(b'{"granule_id": "x"}')
    assert err.value.field == "vignettes"


def test_missing_record_field_is_named():
    d = _line(1)[0].to_dict()
    del d["beam"]
    with pytest.raises(MissingField) as err:
        parse_manifest(json.dumps({"granule_id": "g", "vignettes": [d]}))
    assert err.value.field == "beam"


def test_bad_enums_and_extra_keys():
    d = _line(1)[0].to_dict()
    for key, bad in (("beam", "WV3"), ("satellite", "C"), ("polarization", "VH"),
                     ("pass_direction", "north"), ("relative_orbit", 176)):
        e = dict(d, **{key: bad})
        with pytest.raises(MalformedManifest):
            parse_manifest(json.dumps({"granule_id": "g", "vignettes": [e]}))
    with pytest.raises(MalformedManifest):
        parse_manifest(json.dumps({"granule_id": "g", "vignettes": [dict(d, extra=1)]}))


def test_self_intersecting_and_degenerate_footprints():
    d = _line(1)[0].to_dict()
    a, b, c, e = d["footprint"]
    bowtie = dict(d, footprint=[a, c, b, e])
    with pytest.raises(InvalidFootprint):
        parse_manifest(json.dumps({"granule_id": "g", "vignettes": [bowtie]}))
    flat = dict(d, footprint=[[0, 0], [1, 0], [2, 0], [3, 0]])
    with pytest.raises(InvalidFootprint):
        parse_manifest(json.dumps({"granule_id": "g", "vignettes": [flat]}))
    tri = dict(d, footprint=[a, b, c])
    with pytest.raises(InvalidFootprint):
        parse_manifest(json.dumps({"granule_id": "g", "vignettes": [tri]}))


def test_footprint_size_flag():
    small = record("s", size_km=5.0)
    m = parse_manifest(_doc([small] + _line(20)))
    assert "footprint-size-out-of-nominal-range" in m.flags
    assert 20 <= record("n").diagonal_km() <= 45


def test_manifest_roundtrip_identity():
    recs = random_records(80, seed=3)
    m = GranuleManifest("G", (), recs)
    doc = serialize_manifest(m)
    back = parse_manifest(doc)
    assert back.vignettes == recs
    assert serialize_manifest(back) == serialize_manifest(parse_manifest(serialize_manifest(back)))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(-60, 60), st.floats(-170, 170), st.integers(0, 10 ** 9)),
                min_size=0, max_size=12))
def test_manifest_roundtrip_property(items):
    recs = [record(f"p{i}", lon, lat, T0 + timedelta(microseconds=us))
            for i, (lat, lon, us) in enumerate(items)]
    back = parse_manifest(serialize_manifest(manifest(recs)))
    assert back.vignettes == recs


# --- queries ------------------------------------------------------------------

def test_disjoint_aoi_returns_nothing():
    idx = VignetteIndex(_line(10))
    assert idx.query([(100, 50), (101, 50), (101, 51), (100, 51)]) == []


def test_universal_aoi_returns_everything():
    recs = random_records(300, seed=1)
    idx = VignetteIndex(recs)
    world = [(-90, -89), (90, -89), (90, 89), (-90, 89)]
    got = idx.query(world)
    assert [r.vignette_id for r in got] == [r.vignette_id for r in sorted(recs, key=lambda r: (r.sensing_start, r.vignette_id))]


def test_query_matches_brute_force_with_filters():
    recs = random_records(2000, seed=5)
    idx = VignetteIndex(recs)
    aoi = [(0, -10), (20, -12), (25, 8), (3, 10)]
    start, end = T0 + timedelta(days=30), T0 + timedelta(days=200)
    for kw in ({}, {"beam": "WV2"}, {"relative_orbit": 17}, {"pass_direction": "ascending"}):
        got = query(idx, aoi, (start, end), **kw)
        want = brute_query(recs, aoi, start, end, **kw)
        assert [r.vignette_id for r in got] == [r.vignette_id for r in want]


def test_touching_footprint_counts_as_intersecting():
    r = record("t", 0.0, 0.0)
    (x0, y0), (x1, _), (_, y2), _ = r.footprint
    aoi = [(x1, y0), (x1 + 1, y0), (x1 + 1, y2), (x1, y2)]
    assert polygons_intersect(list(r.footprint), aoi)
    assert [v.vignette_id for v in VignetteIndex([r]).query(aoi)] == ["t"]


def test_query_contract_errors():
    idx = VignetteIndex(_line(3))
    with pytest.raises(InvalidPolygon):
        idx.query([(0, 0), (1, 1), (0, 1), (1, 0)])
    with pytest.raises(InvalidPolygon):
        idx.query([(0, 0), (1, 1)])
    with pytest.raises(UsageError):
        idx.query([(0, 0), (1, 0), (1, 1)], (T0 + timedelta(days=1), T0))


def test_insert_is_idempotent():
    recs = _line(5)
    idx = VignetteIndex(recs)
    for r in recs:
        idx.add(r)
    assert len(idx) == 5


def test_index_persistence_roundtrip(tmp_path):
    recs = random_records(500, seed=11)
    idx = VignetteIndex(recs)
    idx.save(tmp_path / "index.jsonl")
    back = VignetteIndex.load(tmp_path / "index.jsonl")
    aoi = [(0, 0), (30, 0), (30, 30), (0, 30)]
    assert back.query(aoi) == idx.query(aoi)


# --- stacks -------------------------------------------------------------------

def _repeats(n, lon=5.0, lat=10.0, orbit=38, beam="WV1"):
    return [record(f"r{orbit}_{beam}_{k:02d}", lon + 0.01 * (k % 3), lat, T0 + timedelta(days=12 * k),
                   beam, orbit) for k in range(n)]


def test_24_repeats_form_one_stack():
    idx = VignetteIndex(_repeats(24))
    found = discover_stacks(idx, [(4, 9), (6, 9), (6, 11), (4, 11)])
    assert len(found) == 1
    key, members = found[0]
    assert len(members) == 24
    assert key.relative_orbit == 38 and key.beam == "WV1"
    assert key.anchor_footprint == members[0].footprint


def test_interleaved_tracks_do_not_mix():
    a = _repeats(6, orbit=38)
    b = [record(f"b{k}", 5.05, 10.0, T0 + timedelta(days=12 * k, hours=3), "WV1", 140)
         for k in range(6)]
    found = discover_stacks(VignetteIndex(a + b), [(4, 9), (6, 9), (6, 11), (4, 11)])
    assert sorted(len(m) for _, m in found) == [6, 6]
    for key, members in found:
        assert {r.relative_orbit for r in members} == {key.relative_orbit}


def test_single_acquisition_gives_no_stack():
    assert discover_stacks(VignetteIndex(_repeats(1)), [(4, 9), (6, 9), (6, 11), (4, 11)]) == []


def test_discover_contract_errors():
    idx = VignetteIndex(_repeats(3))
    aoi = [(4, 9), (6, 9), (6, 11), (4, 11)]
    with pytest.raises(UsageError):
        discover_stacks(idx, aoi, min_overlap=0)
    with pytest.raises(UsageError):
        discover_stacks(idx, aoi, min_count=1)


def test_stacks_partition_and_match_brute_force():
    recs = random_records(3000, seed=9)
    found = group_stacks(recs, 0.5, 2)
    seen = [r.vignette_id for _, m in found for r in m]
    assert len(seen) == len(set(seen))
    got = sorted(((k.relative_orbit, k.beam, k.pass_direction), sorted(r.vignette_id for r in m))
                 for k, m in found)
    assert got == brute_stacks(recs, 0.5, 2)


# --- coverage -----------------------------------------------------------------

def test_coverage_empty_index():
    rows = coverage_stats(VignetteIndex(), {"R1": [(0, 0), (1, 0), (1, 1), (0, 1)]})
    assert rows == [("R1", 0), ("total", 0)]


def test_coverage_constructed_plan():
    r1 = [record(f"a{i}", 10 + 0.3 * (i % 10), 10 + 0.3 * (i // 10)) for i in range(100)]
    r2 = [record(f"b{i}", -40 + 0.3 * (i % 10), -20 + 0.3 * (i // 10)) for i in range(50)]
    regions = {"R1": [(9, 9), (14, 9), (14, 14), (9, 14)],
               "R2": [(-41, -21), (-36, -21), (-36, -16), (-41, -16)]}
    assert coverage_stats(VignetteIndex(r1 + r2), regions) == [("R1", 100), ("R2", 50), ("total", 150)]


def test_coverage_double_counts_overlapping_regions():
    r = [record("x", 0.0, 0.0)]
    regions = {"W": [(-1, -1), (0, -1), (0, 1), (-1, 1)], "E": [(0, -1), (1, -1), (1, 1), (0, 1)]}
    assert coverage_stats(VignetteIndex(r), regions) == [("W", 1), ("E", 1), ("total", 2)]


def test_coverage_invalid_region():
    with pytest.raises(InvalidPolygon):
        coverage_stats(VignetteIndex(), {"bad": [(0, 0), (1, 1), (0, 1), (1, 0)]})


def test_square_footprint_helper_is_20km():
    fp = square_footprint(10.0, 45.0)
    assert 28.0 < record("q", 10.0, 45.0).diagonal_km() < 28.6
    assert len(fp) == 4
