import json
import random

import numpy as np
import pytest

from touchintent.models import ConfusionMatrix
from touchintent.traces import (
    AssemblyError, EvalReport, TraceFile, TraceFrame, TraceOrderError, TraceTruncatedError,
    TraceVersionError, assemble_dataset, file_digest, format_row, make_header, pooled_accuracy,
    read_trace, write_trace,
)


def frames_equal(a, b):
    return a.to_dict() == b.to_dict()


def test_empty_trace_round_trip(env, tmp_path):
    tr = TraceFile(make_header(env), [])
    p = tmp_path / "empty.jsonl"
    write_trace(p, tr)
    back = read_trace(p)
    assert back.frames == [] and back.header == tr.header


def test_corpus_round_trip_bit_exact(env, corpus, tmp_path):
    traces = corpus[2]
    total = 0
    for i, tr in enumerate(traces):
        p = tmp_path / f"t{i}.jsonl"
        write_trace(p, tr)
        back = read_trace(p)
        assert back.header == tr.header
        assert len(back.frames) == len(tr.frames)
        for a, b in zip(tr.frames, back.frames):
            assert frames_equal(a, b)
            assert np.array_equal(np.asarray(a.q), np.asarray(b.q))
        # rewriting gives identical bytes
        p2 = tmp_path / f"u{i}.jsonl"
        write_trace(p2, back)
        assert file_digest(p) == file_digest(p2)
        total += len(back.frames)
    assert total >= 2990


def small_trace(env, corpus, n=5):
    tr = corpus[2][0]
    return TraceFile(dict(tr.header), list(tr.frames[:n]))


def test_corrupted_header(env, corpus, tmp_path):
    p = tmp_path / "t.jsonl"
    write_trace(p, small_trace(env, corpus))
    lines = p.read_text().split("\n")
    hdr = json.loads(lines[0])
    hdr["format_version"] = 99
    p.write_text("\n".join([json.dumps(hdr)] + lines[1:]))
    with pytest.raises(TraceVersionError):
        read_trace(p)
    p.write_text("not json\n" + "\n".join(lines[1:]))
    with pytest.raises(TraceVersionError):
        read_trace(p)


def test_truncated_trace(env, corpus, tmp_path):
    p = tmp_path / "t.jsonl"
    write_trace(p, small_trace(env, corpus))
    text = p.read_text()
    p.write_text(text[:-40])
    with pytest.raises(TraceTruncatedError):
        read_trace(p)


def test_non_monotone_timestamps(env, corpus, tmp_path):
    tr = small_trace(env, corpus)
    tr.frames[2], tr.frames[3] = tr.frames[3], tr.frames[2]
    with pytest.raises(TraceOrderError):
        write_trace(tmp_path / "t.jsonl", tr)
    good = tmp_path / "g.jsonl"
    write_trace(good, small_trace(env, corpus))
    lines = good.read_text().split("\n")
    lines[2], lines[3] = lines[3], lines[2]
    good.write_text("\n".join(lines))
    with pytest.raises(TraceOrderError):
        read_trace(good)


def test_unlabeled_trace_rejected(env, corpus):
    tr = small_trace(env, corpus)
    f = tr.frames[1]
    tr.frames[1] = TraceFrame(f.t, f.gamma, f.keypoints, f.gaze, f.q, None)
    with pytest.raises(AssemblyError):
        assemble_dataset([tr], env)


def test_assembly_rows_and_stream_reset(env, corpus):
    data, scaling, traces, _ = corpus
    a, b = traces[0], traces[1]
    ds, _ = assemble_dataset([a], env, scaling)
    assert ds.n_samples == len(a.frames)
    ds2, _ = assemble_dataset([a, b], env, scaling)
    first_b = ds2.X[len(a.frames)]
    # HS and GS are the speed columns; the stream restarts for every trace
    assert first_b[2] == 0.0 and first_b[4] == 0.0
    assert np.array_equal(ds2.X[: len(a.frames)], ds.X)


def test_assembly_order_invariance(env, corpus):
    data, scaling, traces, _ = corpus
    sub = traces[:6]
    ds1, _ = assemble_dataset(sub, env, scaling)
    shuffled = list(sub)
    random.Random(3).shuffle(shuffled)
    ds2, _ = assemble_dataset(shuffled, env, scaling)

    def rows(ds):
        return sorted(map(tuple, np.column_stack([ds.X, ds.y]).tolist()))

    assert rows(ds1) == rows(ds2)


def test_format_row_example():
    line = format_row("TS,HP,HS,GA,GS", pooled_accuracy(607, 2145, 163, 87), 607, 2145, 163, 87)
    assert "0.9167" in line
    assert line.split()[-4:] == ["607", "2145", "163", "87"]


def test_report_accuracy_identity(corpus):
    from touchintent.models import FeatureMask, KnnSpec, cross_validate

    data = corpus[0]
    res = cross_validate(data, FeatureMask.parse("TS,HP"), KnnSpec(11), folds=5, seed=0)
    rep = EvalReport.from_results([res], 5, 0)
    row = rep.to_dict()["rows"][0]
    c = ConfusionMatrix(row["TP"], row["TN"], row["FP"], row["FN"])
    assert abs(row["accuracy"] - (c.tp + c.tn) / (c.tp + c.tn + c.fp + c.fn)) <= 1e-12
    assert c.tp + c.tn + c.fp + c.fn == data.n_samples
