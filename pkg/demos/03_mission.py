"""
One fetch mission, step by step
===============================

The user asks for the game controller and says it is in the washing
area.  It is not: the robot searches the hinted region first, finds
nothing, moves on to the region the model ranks highest for a
controller, picks it up and drives back.
"""

from semovmm.harness import scene_map
from semovmm.mission import DetectionSimConfig, run_mission
from semovmm.scene import default_scene

scene = default_scene()
smap = scene_map(scene)
mock = scene.mock_backend()

mission = run_mission(scene, smap, "fetch the controller from the washing area", mock)
print("target:", mission.target, " hint:", mission.hint)
print("search order:", " > ".join(mission.regions))

# the trace lists every step; navigation legs carry their length
for e in mission.events:
    if e.kind == "navigate":
        print(f"  drive to ({e.pose[0]:.2f}, {e.pose[1]:.2f}) in {e.region:<18} {e.distance:6.2f} m")
    elif e.kind in ("detect-proposal", "approve", "pick-attempt", "return", "end"):
        print(f"  {e.kind:<16} {e.outcome}")
print(f"traveled {mission.traveled:.2f} m, outcome: {mission.outcome}")

# a noisier robot: the detector hallucinates, the verifier lets some
# hallucinations through and grasps fail half the time
noisy = DetectionSimConfig(ovd_false_positive_rate=0.4, approver_false_accept_rate=0.5,
                           pick_success_rate=0.5)
for seed in range(3):
    m = run_mission(scene, smap, "fetch the controller", mock, cfg=noisy, seed=seed)
    attempts = sum(e.kind == "pick-attempt" for e in m.events)
    print(f"seed {seed}: {' > '.join(m.visited_regions)}  grasp trials={attempts}  {m.outcome}")
