"""Recover a subsidence history from a 12-epoch stack.

A uniform subsidence of 30 mm over the stack is injected at a coherence of
about 0.8.  Interferograms are formed on a 5 m grid, points above the
coherence cutoff are selected and every point's history is inverted from
the small-baseline network.  Takes about a minute and a half.
"""

import tempfile

import numpy as np

from wvstack import dataset, insar
from wvstack.constants import phase_to_mm
from wvstack.simulator import simulate
from wvstack.stack import generate_stack

days = 11 * 12
root = tempfile.mkdtemp(prefix="wvstack-ts-")
simulate({"seed": 1, "plan": {"n_vignettes": 1, "repeat_count": 12}, "render": {"vignette_index": 0},
          "scene": {"background_correlation": 0.8},
          "deformation": {"rate_mm_per_year": -30.0 / (days / 365.25)}}, root)
recs = dataset.load_records(root, rendered_only=True)
stack = generate_stack(recs, dataset.load_aoi(root), load=lambda r: dataset.load_scene(root, r),
                       out_dir=root + "/stack")
res = insar.stack_time_series(stack)
print(f"{len(res.interferograms)} interferograms, {res.points.fraction:.0%} of cells selected")
print(f"phase to displacement: {phase_to_mm(1.0):.3f} mm/rad")

truth = np.array([float(r["deformation_mm_at_origin"]) for r in dataset.load_truth(root)])
truth -= truth[0]
est = np.median(res.series.los_mm, axis=0)
for e, t, d in zip(res.epochs, truth, est):
    print(f"{e:%Y-%m-%d}  true {t:7.2f} mm  median estimate {d:7.2f} mm")
rate = insar.linear_rate(res.series)
print(f"median rate {np.median(rate):.1f} mm/yr")
