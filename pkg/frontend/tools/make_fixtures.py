"""Regenerate the frozen parity fixtures.

Writes fixtures/calls/<fn>.jsonl (deterministic in the per-function seed) and
produces fixtures/expected/<fn>.jsonl by running the installed groundeval CLI
over each call file. The expected files are committed; the vitest parity suite
replays the calls through the binding and demands exact equality.

    python3 tools/make_fixtures.py        (from frontend/)
"""

from __future__ import annotations

import json
import math
import random
import subprocess
import sys
from pathlib import Path

N_VECTORS = 1000

HERE = Path(__file__).resolve().parent.parent
CALLS_DIR = HERE / "fixtures" / "calls"
EXPECTED_DIR = HERE / "fixtures" / "expected"


def unit_points(rng, lo=1, hi=8):
    return [[rng.uniform(0, 1), rng.uniform(0, 1)] for _ in range(rng.randint(lo, hi))]


def grid_points(rng, lo, hi):
    return [[rng.randint(0, 1000), rng.randint(0, 1000)] for _ in range(rng.randint(lo, hi))]


def convex_polygon(rng, max_vertices=9):
    cx, cy = rng.uniform(0.35, 0.65), rng.uniform(0.35, 0.65)
    rx, ry = rng.uniform(0.08, 0.3), rng.uniform(0.08, 0.3)
    n = rng.randint(3, max_vertices)
    angles = sorted(rng.uniform(0, 2 * math.pi) for _ in range(n))
    return [[cx + rx * math.cos(a), cy + ry * math.sin(a)] for a in angles]


def grid_rect(rng):
    # integer-grid rectangle: axis-aligned or a 3-4-5 rotation, so the corner
    # set survives quantization as an exact rectangle
    cx, cy = rng.randint(300, 700), rng.randint(300, 700)
    if rng.random() < 0.5:
        a, b = rng.randint(30, 120), rng.randint(20, 80)
        u, v = (a, 0), (0, b)
    else:
        k, m = rng.randint(8, 25), rng.randint(5, 15)
        u, v = (3 * k, 4 * k), (-4 * m, 3 * m)
    return [
        [cx - u[0] - v[0], cy - u[1] - v[1]],
        [cx + u[0] - v[0], cy + u[1] - v[1]],
        [cx + u[0] + v[0], cy + u[1] + v[1]],
        [cx - u[0] + v[0], cy - u[1] + v[1]],
    ]


def unit_rect(rng):
    cx, cy = rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7)
    w, h = rng.uniform(0.05, 0.25), rng.uniform(0.03, 0.15)
    t = rng.uniform(0, math.pi)
    ux, uy = math.cos(t) * w / 2, math.sin(t) * w / 2
    vx, vy = -math.sin(t) * h / 2, math.cos(t) * h / 2
    return [
        [cx - ux - vx, cy - uy - vy],
        [cx + ux - vx, cy + uy - vy],
        [cx + ux + vx, cy + uy + vy],
        [cx - ux + vx, cy - uy + vy],
    ]


def frames_for(rng, payload_fn, n_frames_hi=3):
    frames = {}
    for k in rng.sample(range(0, 6), rng.randint(1, n_frames_hi)):
        frames[str(k)] = payload_fn()
    return frames


def pick_frame(rng, frames):
    keys = [int(k) for k in frames]
    if rng.random() < 0.85:
        return rng.choice(keys)
    return max(keys) + rng.randint(1, 3)  # deliberate frame miss


def gen_reward_trajectory(rng):
    pins = [
        {"pred": [[0.1, 0.1], [0.4, 0.8], [0.9, 0.2]],
         "truth": [[0.1, 0.1], [0.4, 0.8], [0.9, 0.2]]},
        {"pred": [[0.0, 0.0], [1.0, 0.0]], "truth": [[0.0, 0.2], [1.0, 0.2]]},
    ]
    for args in pins:
        yield args
    while True:
        args = {"pred": unit_points(rng, 2, 10), "truth": unit_points(rng, 2, 10)}
        if rng.random() < 0.4:
            args["decay"] = rng.uniform(0.2, 3.0)
        if rng.random() < 0.2:
            args["n_points"] = rng.randint(2, 25)
        yield args


def gen_reward_affordance(rng):
    yield {"pred": [[0.0, 0.0]], "truth": [[1.0, 0.0]]}
    while True:
        args = {"pred": unit_points(rng, 1, 6), "truth": unit_points(rng, 1, 6)}
        if rng.random() < 0.4:
            args["decay"] = rng.uniform(0.2, 3.0)
        yield args


def gen_reward_area(rng):
    yield {"pred": [[0.5, 0.5], [1.5, 0.5]],
           "truth": [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]}
    while True:
        yield {"pred": unit_points(rng, 1, 10), "truth": convex_polygon(rng)}


def gen_group_advantages(rng):
    yield {"rewards": [1, 0, 0, 0, 0]}
    yield {"rewards": [1, 0]}
    yield {"rewards": [0.7, 0.7, 0.7, 0.7, 0.7]}
    while True:
        args = {"rewards": [rng.random() for _ in range(rng.randint(2, 8))]}
        if rng.random() < 0.25:
            args["epsilon_std"] = rng.uniform(1e-6, 0.1)
        yield args


def gen_grpo_surrogate(rng):
    yield {"ratios": [2.0], "advantages": [1.0], "kl_terms": [0.0], "beta": 0.0}
    yield {"ratios": [0.5], "advantages": [-1.0], "kl_terms": [0.0], "beta": 0.0}
    while True:
        n = rng.randint(1, 8)
        args = {
            "ratios": [rng.uniform(0.3, 3.0) for _ in range(n)],
            "advantages": [rng.uniform(-2, 2) for _ in range(n)],
        }
        if rng.random() < 0.6:
            args["kl_terms"] = [rng.uniform(0, 0.5) for _ in range(n)]
        if rng.random() < 0.3:
            args["beta"] = rng.uniform(0, 0.1)
        if rng.random() < 0.2:
            args["eps_low"] = rng.uniform(0.05, 0.3)
            args["eps_high"] = rng.uniform(0.05, 0.4)
        yield args


def gen_score_grounding(rng):
    yield {"pred": {"frame": 0, "coords": [[0, 0], [500, 500]]},
           "truth": {"frames": {"0": [0.0, 0.0, 0.5, 0.5]}}}
    yield {"pred": {"frame": 0, "coords": [[0, 0], [500, 250]]},
           "truth": {"frames": {"0": [0.0, 0.0, 0.5, 0.5]}}}
    while True:
        def box():
            x0, y0 = rng.uniform(0, 0.6), rng.uniform(0, 0.6)
            return [x0, y0, x0 + rng.uniform(0.05, 0.4), y0 + rng.uniform(0.05, 0.4)]
        frames = frames_for(rng, box)
        yield {"pred": {"frame": pick_frame(rng, frames), "coords": grid_points(rng, 2, 2)},
               "truth": {"frames": frames}}


def gen_score_area(rng):
    yield {"pred": {"frame": 0, "coords": [[500, 500], [990, 500]]},
           "truth": {"frames": {"0": [[0.0, 0.0], [0.98, 0.0], [0.98, 0.98], [0.0, 0.98]]}}}
    while True:
        frames = frames_for(rng, lambda: convex_polygon(rng))
        yield {"pred": {"frame": pick_frame(rng, frames), "coords": grid_points(rng, 1, 6)},
               "truth": {"frames": frames}}


def gen_score_affordance(rng):
    yield {"pred": {"frame": 0, "coords": [[600, 500]]},
           "truth": {"frames": {"0": [[0.5, 0.5]]}}}
    while True:
        # framed affordance spans carry exactly one point
        frames = frames_for(rng, lambda: unit_points(rng, 1, 5))
        args = {"pred": {"frame": pick_frame(rng, frames), "coords": grid_points(rng, 1, 1)},
                "truth": {"frames": frames}}
        if rng.random() < 0.3:
            args["decay"] = rng.uniform(0.2, 3.0)
        yield args


def gen_score_trajectory(rng):
    yield {"pred": {"frame": 0, "coords": [[0, 0], [400, 300], [1000, 1000]]},
           "truth": {"frames": {"0": [[0.0, 0.0], [0.4, 0.3], [1.0, 1.0]]}}}
    # frame miss in distance mode: the +inf sentinel must survive the wire
    yield {"pred": {"frame": 7, "coords": [[0, 0], [1000, 1000]]},
           "truth": {"frames": {"0": [[0.0, 0.0], [1.0, 1.0]]}}, "mode": "distance"}
    while True:
        frames = frames_for(rng, lambda: unit_points(rng, 2, 10))
        args = {"pred": {"frame": pick_frame(rng, frames), "coords": grid_points(rng, 2, 10)},
                "truth": {"frames": frames}}
        if rng.random() < 0.25:
            args["mode"] = "distance"
        if rng.random() < 0.4:
            args["decay"] = rng.uniform(0.2, 3.0)
        yield args


def gen_score_grasp(rng):
    yield {"pred": {"coords": [[300, 300], [400, 300], [400, 360], [300, 360]]},
           "truth": {"rects": [[[0.3, 0.3], [0.4, 0.3], [0.4, 0.36], [0.3, 0.36]]]}}
    yield {"pred": {"coords": [[300, 300], [400, 300], [400, 360], [300, 360]]},
           "truth": {"rects": [[[0.33, 0.27], [0.39, 0.27], [0.39, 0.37], [0.33, 0.37]]]}}
    while True:
        args = {"pred": {"coords": grid_rect(rng)},
                "truth": {"rects": [unit_rect(rng) for _ in range(rng.randint(1, 3))]}}
        if rng.random() < 0.2:
            args["iou_threshold"] = rng.uniform(0.1, 0.6)
        if rng.random() < 0.2:
            args["angle_threshold"] = rng.uniform(0.2, 1.2)
        yield args


GENERATORS = {
    "reward_trajectory": gen_reward_trajectory,
    "reward_affordance": gen_reward_affordance,
    "reward_area": gen_reward_area,
    "group_advantages": gen_group_advantages,
    "grpo_surrogate": gen_grpo_surrogate,
    "score_grounding": gen_score_grounding,
    "score_area": gen_score_area,
    "score_affordance": gen_score_affordance,
    "score_trajectory": gen_score_trajectory,
    "score_grasp": gen_score_grasp,
}


def main():
    CALLS_DIR.mkdir(parents=True, exist_ok=True)
    EXPECTED_DIR.mkdir(parents=True, exist_ok=True)
    for fn, make_gen in GENERATORS.items():
        rng = random.Random(f"groundeval-parity:{fn}")
        gen = make_gen(rng)
        calls_path = CALLS_DIR / f"{fn}.jsonl"
        with calls_path.open("w", encoding="utf-8") as fh:
            for i in range(N_VECTORS):
                call = {"id": f"{fn}-{i:04d}", "fn": fn, "args": next(gen)}
                fh.write(json.dumps(call) + "\n")
        expected_path = EXPECTED_DIR / f"{fn}.jsonl"
        subprocess.run(
            [sys.executable, "-m", "groundeval.cli", "batch",
             "--calls", str(calls_path), "--out", str(expected_path)],
            check=True,
        )
        print(f"{fn}: {N_VECTORS} vectors")


if __name__ == "__main__":
    main()
