"""Metrics, the mean baseline, tracking traces, and comparison tables.

Per component the report carries MAE, the population standard deviation
of the absolute errors (the "±" column), RMSE, and MSE = RMSE². The mean
baseline predicts the training set's componentwise mean regardless of
its input, which is the reference every learned pipeline must beat.
"""

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .kinematics import COMPONENT_NAMES


def _as_config_matrix(rows, label):
    a = np.asarray(rows, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != 6:
        raise ValidationError(f"{label} must be (n, 6), got shape {a.shape}")
    return a


@dataclass(frozen=True)
class MetricsReport:
    mae: np.ndarray  # (6,)
    std_abs: np.ndarray  # (6,) population std of |error|
    rmse: np.ndarray  # (6,)
    mse: np.ndarray  # (6,)
    overall_mse: float
    count: int


def compute_metrics(preds, truths):
    preds = _as_config_matrix(preds, "predictions")
    truths = _as_config_matrix(truths, "truths")
    if preds.shape[0] != truths.shape[0]:
        raise ValidationError(f"{preds.shape[0]} predictions vs {truths.shape[0]} truths")
    if preds.shape[0] == 0:
        raise ValidationError("cannot compute metrics over zero samples")
    err = preds - truths
    abs_err = np.abs(err)
    mae = abs_err.mean(axis=0)
    std_abs = abs_err.std(axis=0)
    mse = (err ** 2).mean(axis=0)
    rmse = np.sqrt(mse)
    return MetricsReport(mae, std_abs, rmse, mse, float(mse.mean()), preds.shape[0])


class MeanBaseline:
    """Constant predictor: the componentwise mean of its training targets."""

    def __init__(self, train_targets):
        targets = _as_config_matrix(train_targets, "train targets")
        if targets.shape[0] == 0:
            raise ValidationError("mean baseline needs at least one training target")
        self.mean = targets.mean(axis=0)

    def predict(self, latents):
        n = 1 if np.asarray(latents).ndim == 1 else len(latents)
        out = np.tile(self.mean, (n, 1))
        return out[0] if np.asarray(latents).ndim == 1 else out

    def predict_frames(self, frames):
        return np.tile(self.mean, (len(frames), 1))


def mean_baseline(train_targets):
    return MeanBaseline(train_targets)


@dataclass(frozen=True)
class TrackingTrace:
    """Ordered per-frame ground truth, model predictions, and marker counts."""

    frame_keys: tuple  # (traj_id, frame_idx) per row
    truth: np.ndarray  # (n, 6)
    preds: dict  # model name -> (n, 6)
    visible_counts: np.ndarray  # (n,)


def track(pipelines, frames):
    """Run every pipeline over an ordered test split.

    ``pipelines`` maps model name to an object with
    ``predict_frames(frames) -> (n, 6)``.
    """
    if not frames:
        raise ValidationError("cannot track over an empty split")
    truth = np.stack([f.config for f in frames])
    visible = np.array([sum(d.visible for d in f.detections) for f in frames])
    preds = {}
    for name, pipe in pipelines.items():
        p = _as_config_matrix(pipe.predict_frames(frames), f"{name} predictions")
        if p.shape[0] != len(frames):
            raise ValidationError(f"{name}: {p.shape[0]} predictions for {len(frames)} frames")
        preds[name] = p
    keys = tuple((f.traj_id, f.frame_idx) for f in frames)
    return TrackingTrace(keys, truth, preds, visible)


def plot_traces(trace, components=COMPONENT_NAMES, models=None):
    """One SVG line chart per component; ground truth black, ≤ 2 models."""
    from .plotting import render_trace_chart

    models = list(trace.preds) if models is None else list(models)
    if len(models) > 2:
        raise ValidationError(f"at most 2 model tracks per chart, requested {len(models)}")
    missing = [m for m in models if m not in trace.preds]
    if missing:
        raise ValidationError(f"unknown models {missing}; trace has {sorted(trace.preds)}")
    out = {}
    for comp in components:
        if comp not in COMPONENT_NAMES:
            raise ValidationError(f"unknown component {comp!r}; expected one of {COMPONENT_NAMES}")
        out[comp] = render_trace_chart(trace, comp, models)
    return out


_REPORT_COLUMNS = ("component", "mae", "std_abs_err", "rmse", "mse")


def report_to_csv(report, meta=None):
    """CSV text for one report; '# key = value' comment lines carry meta."""
    buf = io.StringIO()
    for key, value in (meta or {}).items():
        buf.write(f"# {key} = {value}\n")
    buf.write("# std_abs_err is the population standard deviation of |error|\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_REPORT_COLUMNS)
    for i, name in enumerate(COMPONENT_NAMES):
        writer.writerow([name] + [f"{v:.17g}" for v in
                                  (report.mae[i], report.std_abs[i], report.rmse[i], report.mse[i])])
    writer.writerow(["overall", "", "", "", f"{report.overall_mse:.17g}"])
    return buf.getvalue()


def compare_models(reports, meta=None):
    """Comparison CSV: one row per model, per-component MSE/MAE/RMSE columns.

    The per-column minimum is marked with '*'; ties are all marked.
    """
    if not reports:
        raise ValidationError("compare_models needs at least one report")
    names = list(reports)
    columns = []
    for metric in ("mse", "mae", "rmse"):
        for i, comp in enumerate(COMPONENT_NAMES):
            columns.append((f"{metric}_{comp}", lambda r, m=metric, j=i: getattr(r, m)[j]))
    columns.append(("overall_mse", lambda r: r.overall_mse))
    table = np.array([[get(reports[n]) for _, get in columns] for n in names])
    best = table.min(axis=0)
    buf = io.StringIO()
    for key, value in (meta or {}).items():
        buf.write(f"# {key} = {value}\n")
    buf.write("# '*' marks the per-column minimum\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model"] + [c for c, _ in columns])
    for r, name in enumerate(names):
        cells = []
        for c in range(len(columns)):
            text = f"{table[r, c]:.17g}"
            if table[r, c] == best[c]:
                text += "*"
            cells.append(text)
        writer.writerow([name] + cells)
    return buf.getvalue()


# --- trace persistence -------------------------------------------------------


def trace_to_csv(trace):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    model_names = list(trace.preds)
    header = ["traj_id", "frame_idx", "visible"]
    header += [f"gt_{c}" for c in COMPONENT_NAMES]
    for m in model_names:
        header += [f"{m}_{c}" for c in COMPONENT_NAMES]
    writer.writerow(header)
    for i, (traj, idx) in enumerate(trace.frame_keys):
        row = [traj, idx, int(trace.visible_counts[i])]
        row += [f"{v:.17g}" for v in trace.truth[i]]
        for m in model_names:
            row += [f"{v:.17g}" for v in trace.preds[m][i]]
        writer.writerow(row)
    return buf.getvalue()


def trace_from_csv(text):
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if not header or header[:3] != ["traj_id", "frame_idx", "visible"]:
        raise ValidationError("not a tracking trace CSV")
    gt_cols = [f"gt_{c}" for c in COMPONENT_NAMES]
    if header[3:9] != gt_cols:
        raise ValidationError("trace CSV is missing ground-truth columns")
    model_names = []
    for col in header[9::6]:
        if not col.endswith("_" + COMPONENT_NAMES[0]):
            raise ValidationError(f"unexpected trace column {col!r}")
        model_names.append(col[:-len("_" + COMPONENT_NAMES[0])])
    keys, truth, visible = [], [], []
    preds = {m: [] for m in model_names}
    for row in reader:
        keys.append((int(row[0]), int(row[1])))
        visible.append(int(row[2]))
        truth.append([float(v) for v in row[3:9]])
        for k, m in enumerate(model_names):
            base = 9 + 6 * k
            preds[m].append([float(v) for v in row[base:base + 6]])
    if not keys:
        raise ValidationError("empty tracking trace")
    return TrackingTrace(tuple(keys), np.array(truth),
                         {m: np.array(v) for m, v in preds.items()}, np.array(visible))
