"""Configuration regressor: width -> 64 -> 64 -> 6 MLP with early stopping.

The same architecture serves every encoder; only the input width varies.
Training holds out a validation fraction, runs Adam on minibatch MSE,
and returns the parameters of the best-validation epoch. When trajectory
ids accompany the samples, whole trajectories are held out: adjacent
frames of one trajectory are near-duplicates, so a frame-level split
would leak and overstate validation accuracy. Predictions are clamped
to [0,1] so they are always valid configurations; raw outputs stay
available for diagnostics.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import CheckpointError, TrainingError, ValidationError
from . import tensorcore as tc


@dataclass
class TrainingConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 300
    patience: int = 20
    val_fraction: float = 0.2
    weight_decay: float = 0.0
    seed: int = 0
    standardize: bool = False

    def __post_init__(self):
        if not 0.0 < self.val_fraction < 1.0:
            raise ValidationError(f"val_fraction must be in (0,1), got {self.val_fraction}")
        if self.patience < 1:
            raise ValidationError(f"patience must be >= 1, got {self.patience}")


@dataclass
class RegressorModel:
    """Two hidden layers of 64 and a 6-wide linear output."""

    input_width: int
    stack: tc.Sequential
    z_mean: np.ndarray = None  # set when trained with standardization
    z_scale: np.ndarray = None


def build_regressor(input_width, seed):
    rng = np.random.default_rng(seed)
    stack = tc.Sequential([
        tc.Dense(input_width, 64, rng=rng, name="fc0"), tc.LeakyReLU(),
        tc.Dense(64, 64, rng=rng, name="fc1"), tc.LeakyReLU(),
        tc.Dense(64, 6, rng=rng, name="fc2"),
    ])
    return RegressorModel(int(input_width), stack)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    is_best: bool


def split_train_val(n, val_fraction, rng, traj_ids=None):
    """Index arrays (train, val) holding out about val_fraction of n samples.

    With trajectory ids, validation is carved at trajectory granularity:
    shuffled trajectories join the holdout until it reaches the target
    fraction, always leaving at least one trajectory to train on. Without
    ids (or with a single trajectory) the split is a plain permutation.
    """
    if traj_ids is not None:
        ids = np.asarray([int(t) for t in traj_ids])
        if ids.shape != (n,):
            raise ValidationError(f"expected {n} trajectory ids, got shape {ids.shape}")
        uniq = np.unique(ids)
        if len(uniq) >= 2:
            target = max(1, int(round(n * val_fraction)))
            held = []
            count = 0
            for t in rng.permutation(uniq)[:-1]:
                held.append(t)
                count += int(np.sum(ids == t))
                if count >= target:
                    break
            val_mask = np.isin(ids, held)
            return rng.permutation(np.flatnonzero(~val_mask)), np.flatnonzero(val_mask)
    order = rng.permutation(n)
    n_val = max(1, int(round(n * val_fraction)))
    return order[:n - n_val], order[n - n_val:]


def _as_latents(model_width, z):
    z = np.asarray(z, dtype=tc.real_dtype())
    single = z.ndim == 1
    if single:
        z = z[None]
    if z.ndim != 2 or z.shape[1] != model_width:
        raise ValidationError(f"latents must be width {model_width}, got shape {z.shape}")
    return z, single


def train_regressor(latents, targets, cfg=None, traj_ids=None):
    """Fit the MLP on (latent, configuration) pairs.

    Returns (model, log). The model carries the parameters of the epoch
    with the lowest validation loss, not necessarily the last one. Pass
    the samples' trajectory ids to hold out validation trajectories
    instead of validation frames.
    """
    cfg = cfg or TrainingConfig()
    z = np.asarray(latents, dtype=tc.real_dtype())
    y = np.asarray(targets, dtype=tc.real_dtype())
    if z.ndim != 2:
        raise ValidationError(f"latents must be 2-D (n, width), got shape {z.shape}")
    if y.ndim != 2 or y.shape[1] != 6:
        raise ValidationError(f"targets must be (n, 6), got shape {y.shape}")
    if z.shape[0] != y.shape[0]:
        raise ValidationError(f"{z.shape[0]} latents vs {y.shape[0]} targets")
    n = z.shape[0]
    if n < 50:
        raise ValidationError(f"training needs >= 50 samples, got {n}")
    if not (np.isfinite(z).all() and np.isfinite(y).all()):
        raise ValidationError("non-finite training data")

    model = build_regressor(z.shape[1], cfg.seed)
    if cfg.standardize:
        model.z_mean = z.mean(axis=0)
        scale = z.std(axis=0)
        model.z_scale = np.where(scale > 1e-12, scale, 1.0)
        z = (z - model.z_mean) / model.z_scale

    rng = np.random.default_rng(cfg.seed)
    train_idx, val_idx = split_train_val(n, cfg.val_fraction, rng, traj_ids)
    zt, yt = z[train_idx], y[train_idx]
    zv, yv = z[val_idx], y[val_idx]

    params = model.stack.params()
    opt = tc.Adam(params, learning_rate=cfg.learning_rate, weight_decay=cfg.weight_decay)
    best_val = np.inf
    best_state = [p.value.copy() for p in params]
    since_best = 0
    log = []
    for epoch in range(cfg.max_epochs):
        perm = rng.permutation(len(zt))
        total = 0.0
        for lo in range(0, len(zt), cfg.batch_size):
            idx = perm[lo:lo + cfg.batch_size]
            tc.zero_grads(params)
            pred = model.stack.forward(zt[idx])
            loss, dloss = tc.mse_loss(pred, yt[idx])
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite training loss at epoch {epoch}")
            model.stack.backward(dloss)
            opt.step()
            total += loss * len(idx)
        val_loss, _ = tc.mse_loss(model.stack.forward(zv), yv)
        if not np.isfinite(val_loss):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        is_best = val_loss < best_val
        if is_best:
            best_val = val_loss
            best_state = [p.value.copy() for p in params]
            since_best = 0
        else:
            since_best += 1
        log.append(EpochRecord(epoch, total / len(zt), float(val_loss), is_best))
        if since_best >= cfg.patience:
            break
    for p, v in zip(params, best_state):
        p.value = v
    return model, log


def predict(model, z):
    """Clamped configuration estimates, one row per latent."""
    return np.clip(predict_raw(model, z), 0.0, 1.0)


def predict_raw(model, z):
    """Pre-clamp network outputs, for diagnostics."""
    z, single = _as_latents(model.input_width, z)
    if model.z_mean is not None:
        z = (z - model.z_mean) / model.z_scale
    out = model.stack.forward(z)
    return out[0] if single else out


def write_training_log(path, log):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss", "is_best"])
        for rec in log:
            writer.writerow([rec.epoch, f"{rec.train_loss:.17g}", f"{rec.val_loss:.17g}",
                             int(rec.is_best)])


# --- regressor persistence ---------------------------------------------------

_MAGIC_LINE = "proprio-regressor v1"


def save_regressor(path, model):
    fields = [f"width={model.input_width}"]
    if model.z_mean is not None:
        fields.append("z_mean=" + ",".join(f"{v:.17g}" for v in model.z_mean))
        fields.append("z_scale=" + ",".join(f"{v:.17g}" for v in model.z_scale))
    with open(path, "wb") as fh:
        fh.write((_MAGIC_LINE + " " + " ".join(fields) + "\n").encode("ascii"))
        fh.write(tc.save_params(model.stack.params()))


def load_regressor(path):
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").strip()
        blob = fh.read()
    parts = header.split()
    if parts[:2] != _MAGIC_LINE.split():
        raise CheckpointError(f"{path}: not a regressor checkpoint")
    fields = dict(p.split("=", 1) for p in parts[2:])
    model = build_regressor(int(fields["width"]), seed=0)
    tc.load_params(model.stack.params(), blob)
    if "z_mean" in fields:
        model.z_mean = np.array([float(v) for v in fields["z_mean"].split(",")])
        model.z_scale = np.array([float(v) for v in fields["z_scale"].split(",")])
    return model
