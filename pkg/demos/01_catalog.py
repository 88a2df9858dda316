"""Index a simulated leapfrog archive and query it.

A WV-mode datatake drops a 20 km vignette every 100 km along track while
alternating between the two beams, so scenes from the same beam sit 200 km
apart.  Repeating the datatake every 12 days produces stacks that can be
found with a single spatial query.
"""

import numpy as np

from wvstack.catalog import VignetteIndex, coverage_stats, discover_stacks
from wvstack.simulator import granules, synth_plan

plan = synth_plan({"plan": {"n_vignettes": 8, "repeat_count": 6}})
index = VignetteIndex()
for manifest in granules(plan):
    index.add_manifest(manifest)
print(f"{len(index)} vignettes from {len(granules(plan))} datatakes")

# a box around the third vignette of the first datatake
lon, lat = np.mean(plan[2].record.footprint, axis=0)
aoi = [(lon - 0.2, lat - 0.2), (lon + 0.2, lat - 0.2), (lon + 0.2, lat + 0.2), (lon - 0.2, lat + 0.2)]
hits = index.query(aoi)
print(f"{len(hits)} vignettes intersect the AOI:")
for r in hits:
    print(f"  {r.sensing_start:%Y-%m-%d}  {r.beam}  {r.vignette_id}")

# stacks are same-track, same-beam repeats that overlap the earliest member
for key, members in discover_stacks(index, aoi):
    print(f"stack T{key.relative_orbit:03d} {key.beam} {key.pass_direction}: {len(members)} members")

# regional counts; the last row is the sum over regions
half = [(lon - 5, lat - 5), (lon, lat - 5), (lon, lat + 5), (lon - 5, lat + 5)]
other = [(lon, lat - 5), (lon + 5, lat - 5), (lon + 5, lat + 5), (lon, lat + 5)]
for name, n in coverage_stats(index, {"west": half, "east": other}):
    print(f"  {name:>6}: {n}")
