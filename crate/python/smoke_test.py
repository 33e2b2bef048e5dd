"""Smoke test for the kneerehab_py extension.

Build and install first:
    maturin build --release -m crates/py/Cargo.toml -o dist && pip install dist/kneerehab_py-*.whl
"""

import json
import math
import tempfile
from pathlib import Path

import kneerehab_py as kr


def main():
    assert abs(kr.knee_angle((1, 0, 0), (0, 0, 0), (0, 1, 0)) - 90.0) < 1e-9
    assert abs(kr.knee_angle((1, 0, 5), (0, 0, 0), (-1, 0, -5), use_z=False) - 180.0) < 1e-9

    a, g = math.radians(30), math.radians(40)
    folded = kr.knee_angle_decomposed(
        (0, 1, 0), (math.sin(a) * math.cos(a), math.cos(a) ** 2, 0),
        (0, -1, 0), (math.sin(g) * math.cos(g), -math.cos(g) ** 2, 0),
        (0, 0, 0),
    )
    assert abs(folded - 110.0) < 1e-6, folded

    angles, troughs = kr.synth_angles(5, period_s=5.0, noise_sigma_deg=2.0, seed=7)
    reps = kr.count_reps(angles)
    assert len(reps) == 5, reps
    assert all(abs(r.frame_index - t) <= 10 for r, t in zip(reps, troughs))

    assert abs(kr.accuracy(11, 12) - 91.6667) < 0.01

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        pose, metrics, truth = kr.write_synth(tmp, "clip", 4, period_s=5.0, seed=3)
        report = kr.analyze(pose, tmp / "out")
        assert report.count == 4, report
        assert report.count == json.loads(truth.read_text())["reps"]
        loaded = kr.Report.load(tmp / "out" / "clip_report.json")
        assert loaded.count == report.count
        assert len(report.trim_commands("clip.mp4")) == 4

        (tmp / "labels.csv").write_text("source_id,camera_view,exercise_total\nclip.mp4,sagittal,4\n")
        ev = json.loads(kr.evaluate(tmp / "labels.csv", tmp))
        assert ev["weighted_accuracy_pct"] == 100.0, ev

        try:
            kr.analyze(tmp / "missing.csv", tmp)
        except OSError:
            pass
        else:
            raise AssertionError("missing input should raise OSError")

    try:
        kr.count_reps(angles, fps=0.0)
    except ValueError:
        pass
    else:
        raise AssertionError("fps=0 should raise ValueError")

    print("kneerehab_py smoke test: ok")


if __name__ == "__main__":
    main()
