"""Smoke test for the tagwatch_py extension.

Build first, from the repository root:

    cargo build --release -p tagwatch-py --features extension-module
    cp target/release/libtagwatch_py.so python/tagwatch_py.so

or `maturin develop -m crates/python/Cargo.toml`.
"""

import math
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import tagwatch_py as tw


def main():
    assert tw.bitwise_vote([12, 5, 15]) == 13
    assert abs(tw.ewma_alpha(10) - 0.0670) < 1e-3
    w = tw.tag_weights([[0.0, 0.0], [1.0, 1.0]])
    assert abs(sum(w) - 1.0) < 1e-12 and abs(w[0] - 0.5) < 1e-12

    windows = [(100, 149), (400, 459)]
    assert tw.nab_score(1000, windows, []) == 0.0
    assert tw.nab_score(1000, windows, [100, 400]) == 100.0
    assert tw.nab_score(1000, windows, [700]) < 0.0

    train, test = tw.synth_demo(seed=3, length=1500, train_length=4000)
    assert len(test) == 1500 and len(train.tag_names) == 8
    assert test.attacks, "demo test split carries attacks"

    det, losses = tw.Detector.fit(train, hidden=[32], epochs=3, seed=3)
    assert losses[-1] < losses[0]
    assert abs(sum(det.weights) - 1.0) < 1e-9
    result = det.analyze(test, top_k=3)
    assert len(result["series"]) == len(test)
    assert all(math.isfinite(v) for v in result["series"])

    with tempfile.TemporaryDirectory() as tmp:
        det.save(tmp)
        again = tw.Detector.load(tmp)
        assert again.threshold == det.threshold
        assert again.analyze(test, top_k=3)["series"] == result["series"]

    flags = result["flags"]
    onsets = [e["start"] for e in result["events"]]
    report = tw.score([(a[0], a[1]) for a in test.attacks], onsets, flags)
    print(
        f"events={len(result['events'])} nab={report['nab']:.2f} "
        f"f1={report['f1']:.3f} threshold={det.threshold:.4g}"
    )
    print("smoke test passed")


if __name__ == "__main__":
    main()
