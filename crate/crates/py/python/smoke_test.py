"""Smoke test for the streamst extension module.

Build and install first, e.g. `maturin develop` or
`maturin build && pip install target/wheels/streamst-*.whl`, then run
`python crates/py/python/smoke_test.py` from the repository root.
"""

import json
import math
import os
import sys

import streamst

DATA = os.path.join(os.path.dirname(__file__), "..", "..", "..", "data")


def main():
    assert streamst.allowed_output_count(10, 3, 4) == 3
    assert streamst.allowed_output_count(2, 5, 0) == 0

    cfg = streamst.PolicyConfig(3, 640)
    rule = streamst.check_truncation(["I like", "I like cats."], "I like cats. The", 3, 0, cfg)
    assert rule == ("sentence", 2, True), rule

    fixtures = streamst.Fixture.load_manifest(os.path.join(DATA, "manifest.jsonl"))
    for f in fixtures:
        run = streamst.run_scripted(f, streamst.PolicyConfig(1, f.chunk_ms))
        assert run.hypothesis == f.reference, (run.hypothesis, f.reference)
        assert run.segments[-1][2] == "end_of_stream"
        assert streamst.replay(run.trace_jsonl, streamst.PolicyConfig(1, f.chunk_ms)) == run.segments
        lat = run.latency()
        assert lat["al_ms"] >= 0
        print(f"{f.source_id}: AL {lat['al_ms']:.1f} ms  {run.hypothesis}")

    wait = streamst.run_scripted(fixtures[0], streamst.PolicyConfig(1, 640, policy="wait_k"))
    assert len(wait.segments) == 1

    offline = streamst.average_lagging([1000.0] * 3, 1000.0)
    assert offline["al_ms"] == 1000.0 and offline["tau"] == 1

    bleu = streamst.corpus_bleu(["the cat sat on the mat today"], ["the cat sat on a mat today"])
    expected = 100 * (6 / 7 * 4 / 6 * 2 / 5 * 1 / 4) ** 0.25
    assert math.isclose(bleu["score"], expected, abs_tol=1e-6), bleu

    ends, cost = streamst.mwer_segment("a b c d".split(), ["a b", "c d"])
    assert ends == [2, 4] and cost == 0

    laal = streamst.stream_laal(
        [("a", 500), ("b", 900), ("c", 950), ("d", 2500)],
        3000,
        [(0, 1000, "a b"), (1000, 3000, "c d")],
    )
    assert math.isclose(laal["mean_ms"], 337.5), laal

    records = [json.loads(line) for line in streamst.build_cot(fixtures, 0.5, 7).splitlines()]
    assert len(records) == len(fixtures)
    assert records == [json.loads(line) for line in streamst.build_cot(fixtures, 0.5, 7).splitlines()]

    try:
        streamst.PolicyConfig(0, 640)
    except ValueError:
        pass
    else:
        raise AssertionError("k=0 accepted")

    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
