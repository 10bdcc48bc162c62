"""Smoke test for the sixpack extension module.

Build first, e.g. `pip install --no-build-isolation -e crates/py` or
`maturin develop -m crates/py/Cargo.toml`, then run `python python/smoke_test.py`.
"""

import math
import os
import tempfile

import sixpack


def check(cond, msg):
    if not cond:
        raise SystemExit(f"FAIL {msg}")
    print(f"ok   {msg}")


def main():
    check(set(sixpack.categories()) == {"bottle", "bowl", "camera", "can", "laptop", "mug"}, "categories")

    p = sixpack.Pose.from_axis_angle([0, 0, 1], math.pi / 2, [0.1, 0.0, 0.5])
    src = [[0.0, 0.0, 0.0], [0.1, 0.0, 0.0], [0.0, 0.2, 0.0], [0.0, 0.0, 0.3]]
    est = sixpack.align(src, p.transform(src))
    r_deg, t_cm = sixpack.pose_error(est, p)
    check(r_deg < 1e-6 and t_cm < 1e-6, "align recovers a known transform")
    ident = p.compose(p.inverse())
    check(max(abs(x) for x in ident.translation) < 1e-12, "pose composed with its inverse")

    data = sixpack.Dataset.generate("bowl", count=2, length=8, seed=3, occlusion=0.2, noise_sigma=0.002)
    check(len(data) == 2 and data.frame_count(0) == 8, "dataset generation")
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "bowl.jsonl")
        data.save(path)
        again = sixpack.Dataset.load(path)
        check(again.points(1, 4) == data.points(1, 4), "dataset round trip")

    tracks = sixpack.track(data, "oracle", init_noise=0.0)
    metrics = dict(sixpack.evaluate(data, tracks))
    check(metrics["5deg5cm"] == 100.0 and metrics["translation_cm"] < 1e-6, "oracle tracking is exact")

    model = sixpack.Model("bowl", seed=1)
    trainer = sixpack.Trainer(model, data, steps=3, batch=2)
    losses = [dict(trainer.step()) for _ in range(3)]
    check(all(math.isfinite(l["total"]) for l in losses) and trainer.steps_done == 3, "training steps run")
    trained = trainer.model()
    kps = trained.infer(data.points(0, 0), data.gt_poses(0)[0])
    check(len(kps) == trained.keypoints, "inference returns one point per keypoint")

    learned = sixpack.track(data, "6pack", model=trained)
    check(len(learned) == 2 and len(learned[0]) == 8, "learned tracking shape")

    try:
        sixpack.track(data, "6pack")
    except ValueError:
        check(True, "6pack without a model is rejected")
    else:
        check(False, "6pack without a model is rejected")

    print("all smoke checks passed")


if __name__ == "__main__":
    main()
