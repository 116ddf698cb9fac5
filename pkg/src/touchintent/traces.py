"""Trace files, dataset assembly and evaluation reports.

A trace is JSON Lines: the first line is the header object, every further
line one frame. Frame fields (units in brackets):

``t``         timestamp [s], strictly increasing
``gamma``     list of 0/1 per sensor id (zero-order held scan state)
``keypoints`` ``{name: [u px, v px, confidence, depth m or null]}``
``gaze``      ``{"origin": [u, v], "direction": [du, dv]}`` or null
``q``         robot joint vector [rad]
``label``     1 intentional, 0 unintentional, or null when unlabeled
``tau_ext``   external joint torques [N m] or null
``extra``     free-form per-frame annotations (feature/intention columns of replay logs)

Floats are written with Python's shortest round-trip repr, so reading a
written trace reproduces every numeric field exactly.
"""

from dataclasses import dataclass, field, asdict
import hashlib
import json

import numpy as np

TRACE_FORMAT_VERSION = 1


class TraceError(ValueError):
    pass


class TraceVersionError(TraceError):
    pass


class TraceTruncatedError(TraceError):
    pass


class TraceOrderError(TraceError):
    pass


class AssemblyError(TraceError):
    pass


@dataclass
class TraceFrame:
    t: float
    gamma: list
    keypoints: dict
    gaze: dict
    q: list
    label: int = None
    tau_ext: list = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(t=d["t"], gamma=d["gamma"], keypoints=d["keypoints"], gaze=d.get("gaze"),
                   q=d["q"], label=d.get("label"), tau_ext=d.get("tau_ext"),
                   extra=d.get("extra") or {})


@dataclass
class TraceFile:
    header: dict
    frames: list = field(default_factory=list)

    def check_order(self):
        prev = None
        for i, f in enumerate(self.frames):
            if prev is not None and not f.t > prev:
                raise TraceOrderError(f"frame {i}: timestamp {f.t} does not follow {prev}")
            prev = f.t

    @property
    def labeled(self):
        return all(f.label is not None for f in self.frames)


def make_header(env, **extra):
    h = {"format_version": TRACE_FORMAT_VERSION,
         "chain": env.identifier("robot"),
         "layout": env.identifier("sensors"),
         "intrinsics": env.identifier("camera"),
         "pois": [p.name for p in env.pois.pois]}
    h.update(extra)
    return h


def write_trace(path, trace):
    trace.check_order()
    header = dict(trace.header)
    header["format_version"] = TRACE_FORMAT_VERSION
    with open(path, "w") as f:
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for fr in trace.frames:
            f.write(json.dumps(fr.to_dict(), sort_keys=True, allow_nan=False) + "\n")


def read_trace(path):
    with open(path) as f:
        text = f.read()
    lines = text.split("\n")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError:
        raise TraceVersionError(f"{path}: header is not a recognisable trace header") from None
    if not isinstance(header, dict) or header.get("format_version") != TRACE_FORMAT_VERSION:
        version = header.get("format_version") if isinstance(header, dict) else None
        raise TraceVersionError(f"{path}: unsupported trace format_version {version!r}")
    if not text.endswith("\n"):
        raise TraceTruncatedError(f"{path}: last record is incomplete")
    frames = []
    for n, line in enumerate(lines[1:-1], start=2):
        try:
            frames.append(TraceFrame.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise TraceTruncatedError(f"{path}:{n}: damaged frame record ({e})") from None
    trace = TraceFile(header, frames)
    trace.check_order()
    return trace


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------- datasets

def trace_geometries(trace, env, gated=True):
    from .pipeline import observe

    return [observe(fr, env, gated=gated).geometry for fr in trace.frames]


def assemble_dataset(traces, env, scaling=None):
    """Extract features from labeled traces (stream state reset per trace).

    ``traces`` are :class:`TraceFile` objects or paths. Scaling is fitted on
    the gated geometry of these traces unless given. Returns the dataset and
    the scaling used; the dataset carries both gated and ungated rows.
    """
    from .features import FeatureStreamState, features_from_geometry, fit_scaling
    from .models import LabeledDataset

    traces = [read_trace(t) if not isinstance(t, TraceFile) else t for t in traces]
    for i, tr in enumerate(traces):
        if not tr.labeled:
            raise AssemblyError(f"trace {i} has unlabeled frames")
    both = [trace_geometries(tr, env, (True, False)) for tr in traces]
    gated = [[g for g, _ in geo] for geo in both]
    ungated = [[u for _, u in geo] for geo in both]
    if scaling is None:
        scaling = fit_scaling(gated)
    X, Xu, y, groups = [], [], [], []
    for i, (tr, g_geo, u_geo) in enumerate(zip(traces, gated, ungated)):
        sg, su = FeatureStreamState(), FeatureStreamState()
        for fr, g, u in zip(tr.frames, g_geo, u_geo):
            X.append(features_from_geometry(g, sg, scaling).as_array())
            Xu.append(features_from_geometry(u, su, scaling).as_array())
            y.append(fr.label)
            groups.append(i)
    ds = LabeledDataset(np.array(X).reshape(-1, 5), np.array(y, dtype=np.int64),
                        np.array(Xu).reshape(-1, 5), np.array(groups))
    return ds, scaling


# ---------------------------------------------------------------- reports

REPORT_COLUMNS = ("model", "features", "accuracy", "TP", "TN", "FP", "FN")


@dataclass
class EvalReport:
    rows: list
    folds: int
    seed: int
    provenance: dict = field(default_factory=dict)

    @classmethod
    def from_results(cls, results, folds, seed, provenance=None):
        # "accuracy" is the pooled (TP+TN)/total; the fold mean is kept separately
        rows = [{"model": r.model, "features": str(r.mask), "accuracy": r.confusion.accuracy,
                 "mean_fold_accuracy": r.accuracy,
                 "TP": r.confusion.tp, "TN": r.confusion.tn, "FP": r.confusion.fp,
                 "FN": r.confusion.fn, "fold_accuracies": list(r.fold_accuracies)}
                for r in results]
        return cls(rows, folds, seed, provenance or {})

    def to_dict(self):
        return {"format_version": TRACE_FORMAT_VERSION, "folds": self.folds, "seed": self.seed,
                "provenance": self.provenance, "rows": self.rows}

    def write(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=1, sort_keys=True)
            f.write("\n")


def pooled_accuracy(tp, tn, fp, fn):
    return (tp + tn) / (tp + tn + fp + fn)


def format_row(features, accuracy, tp, tn, fp, fn, model=""):
    """One results-table line: features, accuracy, then TP TN FP FN."""
    flags = " ".join(("*" if n in features.split(",") else ".").rjust(2)
                     for n in ("TS", "HP", "HS", "GA", "GS"))
    return f"{model:<14} {flags}  {accuracy:.4f}  {tp:>5} {tn:>5} {fp:>5} {fn:>5}"


def format_report(report, title=""):
    lines = []
    if title:
        lines.append(title)
    lines.append(f"{'model':<14} TS HP HS GA GS  acc     TP    TN    FP    FN")
    for r in report.rows:
        lines.append(format_row(r["features"], r["accuracy"], r["TP"], r["TN"], r["FP"], r["FN"],
                                model=r["model"]))
    lines.append(f"folds={report.folds} seed={report.seed}")
    return "\n".join(lines)
