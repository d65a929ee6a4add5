import json
import random
import statistics

import pytest

import strata


def window(seed, n=40):
    rng = random.Random(seed)
    return [[rng.gauss(0.5, 2.0) for _ in range(9)] for _ in range(n)]


def test_features_match_python_reference():
    w = window(1)
    got = strata.extract_features(w)
    assert len(got) == strata.FEATURE_DIM == 36
    for c in range(9):
        col = [row[c] for row in w]
        mu = statistics.fmean(col)
        assert got[4 * c] == pytest.approx(mu, abs=1e-12)
        assert got[4 * c + 1] == pytest.approx(statistics.median(col), abs=1e-12)
        assert got[4 * c + 2] == pytest.approx(statistics.pvariance(col), abs=1e-12)
        crossings = sum((a - mu) * (b - mu) < 0 for a, b in zip(col, col[1:]))
        assert got[4 * c + 3] == crossings
    assert len(strata.project_27(got)) == strata.DENSITY_DIM


def test_bad_window_raises_argument_error():
    with pytest.raises(strata.ArgumentError):
        strata.extract_features([[0.0] * 8] * 40)
    assert issubclass(strata.ArgumentError, strata.StrataError)


def test_vote_buffer_and_majority():
    assert strata.majority_vote(["a", "b", "b", "a"]) == "a"
    buf = strata.VoteBuffer(3)
    assert buf.push("x") is None
    assert buf.push("y") is None
    assert buf.push("y") == "y"
    assert len(buf) == 3
    assert strata.bow(["a", "c", "a"], ["a", "b", "c"]) == [2, 0, 1]


def test_train_and_replay_round_trip(tmp_path):
    import csv

    frames = strata.synthesize(mode="corpus", seconds=270, seed=3)
    data = tmp_path / "corpus.csv"
    names = ["acc_x", "acc_y", "acc_z", "gyro_x", "gyro_y", "gyro_z", "roll", "pitch", "yaw"]
    with data.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t_ms", *names, "pattern"])
        for r in frames:
            w.writerow([r["t_ms"], *r["channels"], r["pattern"]])
    profiles = json.loads(strata.starter_profiles())
    assert len(profiles["patterns"]) == 9

    snap = strata.train(str(data), seed=2, trees=20)
    assert len(snap.patterns) == 9
    assert snap.theta_new < snap.theta_match
    again = strata.Snapshot.loads(snap.dumps())
    assert again.dumps() == snap.dumps()

    path = tmp_path / "snap.json"
    snap.save(str(path))
    lines = strata.replay(str(data), strata.Snapshot.load(str(path)))
    kinds = {json.loads(l)["kind"] for l in lines}
    assert "unit_event" in kinds


def test_missing_snapshot_raises_io_error(tmp_path):
    with pytest.raises(strata.IoError):
        strata.Snapshot.load(str(tmp_path / "absent.json"))
