"""
Comparing search strategies
===========================

Five groups of episodes: no hint, random region order, a correct hint,
an object that was moved to an unusual region, and a wrong hint.  The
report lists success counts, how often the first region was right, and
success weighted by path length.
"""

import time

from semovmm.harness import Experiment, compute_spl, run_experiment, scene_map
from semovmm.scene import default_scene

scene = default_scene()
experiment = Experiment(scene, scene_map(scene))

t0 = time.perf_counter()
report = run_experiment(scene, seed=0, experiment=experiment)
print(report.to_text())
print(f"{len(report.results)} episodes in {time.perf_counter() - t0:.2f} s")

# SPL by hand for three episodes: a perfect run, a detour of twice the
# shortest length, and a failure
print("SPL:", compute_spl([(True, 10.0, 10.0), (True, 10.0, 20.0), (False, 10.0, 4.0)]))

# the random baseline gets the first region right about one time in five
big = run_experiment(scene, {"Random": 1000}, seed=1, experiment=experiment)
print("random first-region rate over 1000 episodes:", big.groups["Random"].rate("sft"))

# a moved object costs more than a wrong hint: the robot may check several
# wrong regions before it reaches the one the object was moved to
for r in report.results:
    if r.spec.group in ("ErrantSemantics", "Misleading") and r.spec.index < 3:
        print(f"{r.spec.group:<16} {r.spec.target:<14} visited {len(r.visited)} regions,"
              f" {r.traveled:6.2f} m vs shortest {r.shortest:5.2f} m")
