"""Latent encoders: fiducial bag, conv-VAE, and frozen backbone + reductor.

Each encoder maps one observation to a fixed-width latent vector (width
128 or 256). ``encode_fiducial`` packs simulated marker detections;
``train_conv_vae`` learns an image autoencoder whose mean head becomes
the latent; ``build_backbone`` + ``train_reductor`` realize a frozen
generic feature stack whose dense projection is tuned on a disposable
configuration-regression head and then kept.

All encoders are deterministic at inference time; randomness only enters
training through explicit seeds.
"""

from dataclasses import dataclass

import numpy as np

from .errors import CheckpointError, ProtocolError, TrainingError, ValidationError
from .regressor import split_train_val
from . import tensorcore as tc

FIDUCIAL_WIDTH = 128
LATENT_WIDTHS = (128, 256)
IMAGE_HW = (64, 64)
BACKBONE_FEATURES = 1024


def _check_width(width):
    if width not in LATENT_WIDTHS:
        raise ValidationError(f"latent width must be one of {LATENT_WIDTHS}, got {width}")


# --- fiducial bag ----------------------------------------------------------


def encode_fiducial(detections):
    """Pack 10 marker detections into the zero-padded 128 latent.

    Marker i occupies slots [9i, 9i+9): its 8 normalized corner
    coordinates (x1, y1, ..., x4, y4) followed by the 0/1 visibility
    flag. Slots 90..127 stay exactly zero.
    """
    if len(detections) != 10:
        raise ValidationError(f"expected 10 detections, got {len(detections)}")
    z = np.zeros(FIDUCIAL_WIDTH)
    for i, det in enumerate(detections):
        if det.marker_id != i:
            raise ValidationError(f"detections out of order: slot {i} holds marker {det.marker_id}")
        z[9 * i:9 * i + 8] = det.coords
        z[9 * i + 8] = det.visible
    return z


# --- shared conv stacks ----------------------------------------------------


def _conv_stack(rng):
    """64x64x1 -> 4x4x64 feature pyramid (4 stride-2 convs)."""
    chans = (1, 8, 16, 32, 64)
    layers = []
    for i in range(4):
        layers.append(tc.Conv2d(chans[i], chans[i + 1], 3, stride=2, padding=1,
                                rng=rng, name=f"conv{i}"))
        layers.append(tc.LeakyReLU())
    layers.append(tc.Flatten())
    return tc.Sequential(layers)


def _deconv_stack(width, rng):
    chans = (64, 32, 16, 8)
    layers = [tc.Dense(width, BACKBONE_FEATURES, rng=rng, name="dec_in"),
              tc.LeakyReLU(), tc.Reshape((64, 4, 4))]
    for i in range(3):
        layers.append(tc.ConvTranspose2d(chans[i], chans[i + 1], 3, stride=2, padding=1,
                                         output_padding=1, rng=rng, name=f"deconv{i}"))
        layers.append(tc.LeakyReLU())
    layers.append(tc.ConvTranspose2d(8, 1, 3, stride=2, padding=1, output_padding=1,
                                     rng=rng, name="deconv3"))
    layers.append(tc.Sigmoid())
    return tc.Sequential(layers)


def _as_image_batch(images):
    x = np.asarray(images, dtype=tc.real_dtype())
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or x.shape[1:] != IMAGE_HW:
        raise ValidationError(f"expected {IMAGE_HW} grayscale images, got shape {x.shape}")
    return x[:, None]


# --- conv-VAE ---------------------------------------------------------------


@dataclass
class VAETrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 300
    beta: float = 1e-3
    seed: int = 0


@dataclass
class VAEEncoderModel:
    """Conv encoder with mu/logvar heads; decoder kept for diagnostics only."""

    width: int
    encoder: tc.Sequential
    mu_head: tc.Dense
    logvar_head: tc.Dense
    decoder: tc.Sequential = None
    deployed: bool = False  # True once the decoder no longer ships

    def inference_params(self):
        return self.encoder.params() + self.mu_head.params() + self.logvar_head.params()


def build_vae(width, seed):
    _check_width(width)
    rng = np.random.default_rng(seed)
    encoder = _conv_stack(rng)
    mu_head = tc.Dense(BACKBONE_FEATURES, width, rng=rng, name="mu")
    logvar_head = tc.Dense(BACKBONE_FEATURES, width, rng=rng, name="logvar")
    decoder = _deconv_stack(width, rng)
    return VAEEncoderModel(width, encoder, mu_head, logvar_head, decoder)


def vae_objective(model, batch):
    """Diagnostic forward pass: (recon MSE, mean KL) without gradients."""
    feats = model.encoder.forward(batch)
    mu = model.mu_head.forward(feats)
    logvar = model.logvar_head.forward(feats)
    recon = model.decoder.forward(mu)
    recon_mse, _ = tc.mse_loss(recon, batch)
    kl, _, _ = tc.kl_diag_gaussian(mu, logvar)
    return recon_mse, kl / batch.shape[0]


def train_conv_vae(images, width, cfg=None):
    """Train the conv-VAE on an unsupervised image split.

    Minimizes per-pixel reconstruction MSE plus beta times the mean
    per-sample KL to the unit Gaussian, sampling z = mu + sigma * eps
    during training only. Returns the model (decoder retained, flagged
    non-deployed) and a per-epoch log of (epoch, recon, kl).
    """
    cfg = cfg or VAETrainConfig()
    x = _as_image_batch(images)
    n = x.shape[0]
    if n < 100:
        raise ValidationError(f"VAE training needs >= 100 images, got {n}")
    model = build_vae(width, cfg.seed)
    params = (model.inference_params() + model.decoder.params())
    opt = tc.Adam(params, learning_rate=cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed + 1)
    log = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        recon_sum = kl_sum = 0.0
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            batch = x[idx]
            tc.zero_grads(params)
            feats = model.encoder.forward(batch)
            mu = model.mu_head.forward(feats)
            logvar = model.logvar_head.forward(feats)
            eps = rng.standard_normal(mu.shape).astype(mu.dtype)
            sigma = np.exp(0.5 * logvar)
            z = mu + sigma * eps
            recon = model.decoder.forward(z)
            recon_mse, d_recon = tc.mse_loss(recon, batch)
            kl, d_mu_kl, d_logvar_kl = tc.kl_diag_gaussian(mu, logvar)
            bsz = batch.shape[0]
            loss = recon_mse + cfg.beta * kl / bsz
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite VAE loss at epoch {epoch}")
            dz = model.decoder.backward(d_recon)
            d_mu = dz + (cfg.beta / bsz) * d_mu_kl
            d_logvar = dz * (0.5 * sigma * eps) + (cfg.beta / bsz) * d_logvar_kl
            d_feats = model.mu_head.backward(d_mu) + model.logvar_head.backward(d_logvar)
            model.encoder.backward(d_feats)
            opt.step()
            recon_sum += recon_mse * bsz
            kl_sum += kl
        log.append((epoch, recon_sum / n, kl_sum / n))
    return model, log


def encode_vae(model, image):
    """Deterministic latent mu(o) for one image (no sampling)."""
    x = _as_image_batch(image)
    return model.mu_head.forward(model.encoder.forward(x))[0]


def encode_vae_batch(model, images, chunk=64):
    x = _as_image_batch(images)
    outs = [model.mu_head.forward(model.encoder.forward(x[lo:lo + chunk]))
            for lo in range(0, x.shape[0], chunk)]
    return np.concatenate(outs, axis=0)


def vae_reconstruct(model, images):
    """Diagnostic reconstruction through the retained decoder."""
    x = _as_image_batch(images)
    return model.decoder.forward(model.mu_head.forward(model.encoder.forward(x)))[:, 0]


# --- frozen backbone + reductor ---------------------------------------------


@dataclass
class BackboneModel:
    """Frozen random conv feature stack; identified by its creation seed."""

    seed: int
    feature_width: int
    stack: tc.Sequential

    def features(self, images, chunk=64):
        x = _as_image_batch(images)
        return np.concatenate([self.stack.forward(x[lo:lo + chunk])
                               for lo in range(0, x.shape[0], chunk)], axis=0)


def build_backbone(seed, feature_width=BACKBONE_FEATURES):
    if feature_width != BACKBONE_FEATURES:
        raise ValidationError(
            f"conv stack emits {BACKBONE_FEATURES} features, got feature_width={feature_width}")
    return BackboneModel(int(seed), feature_width, _conv_stack(np.random.default_rng(seed)))


@dataclass
class ReductorTrainConfig:
    hidden: tuple = (512,)
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 60
    weight_decay: float = 0.0
    seed: int = 0
    patience: int = 15
    val_fraction: float = 0.2


@dataclass
class ReductorModel:
    """Dense projection from backbone features to the latent width."""

    width: int
    hidden: tuple
    backbone_seed: int
    feature_width: int
    stack: tc.Sequential

    def project(self, features):
        return self.stack.forward(np.asarray(features, dtype=tc.real_dtype()))


def build_reductor(width, cfg_hidden, backbone, rng):
    dims = (backbone.feature_width,) + tuple(cfg_hidden) + (width,)
    layers = []
    for i in range(len(dims) - 1):
        layers.append(tc.Dense(dims[i], dims[i + 1], rng=rng, name=f"red{i}"))
        if i < len(dims) - 2:
            layers.append(tc.LeakyReLU())
    return ReductorModel(width, tuple(cfg_hidden), backbone.seed,
                         backbone.feature_width, tc.Sequential(layers))


def train_reductor(backbone, images, targets, width, cfg=None,
                   traj_ids=None, forbidden_traj_ids=()):
    """Tune the reductor through a disposable configuration head.

    Extends reductor(features) with a width -> 64 -> 16 -> 6 head, trains
    both end-to-end on configuration MSE with the backbone frozen, and
    keeps the reductor parameters of the best-validation epoch before
    discarding the head. Returns (reductor, per-epoch (train, val) log).
    When trajectory ids are supplied, validation holds out whole
    trajectories, and any overlap with ``forbidden_traj_ids`` (the
    regression split) is a protocol error.
    """
    _check_width(width)
    cfg = cfg or ReductorTrainConfig()
    if traj_ids is not None:
        clash = sorted(set(int(t) for t in traj_ids) & set(int(t) for t in forbidden_traj_ids))
        if clash:
            raise ProtocolError(f"fine-tune split shares trajectories {clash} with the regression split")
    targets = np.asarray(targets, dtype=tc.real_dtype())
    if targets.ndim != 2 or targets.shape[1] != 6:
        raise ValidationError(f"targets must be (n, 6), got {targets.shape}")
    feats = backbone.features(images)
    if feats.shape[0] != targets.shape[0]:
        raise ValidationError(f"{feats.shape[0]} images vs {targets.shape[0]} targets")
    rng = np.random.default_rng(cfg.seed)
    reductor = build_reductor(width, cfg.hidden, backbone, rng)
    head = tc.Sequential([
        tc.Dense(width, 64, rng=rng, name="head0"), tc.LeakyReLU(),
        tc.Dense(64, 16, rng=rng, name="head1"), tc.LeakyReLU(),
        tc.Dense(16, 6, rng=rng, name="head2"),
    ])
    params = reductor.stack.params() + head.params()
    opt = tc.Adam(params, learning_rate=cfg.learning_rate, weight_decay=cfg.weight_decay)
    n = feats.shape[0]
    train_idx, val_idx = split_train_val(n, cfg.val_fraction, rng, traj_ids)
    ft, yt = feats[train_idx], targets[train_idx]
    fv, yv = feats[val_idx], targets[val_idx]
    best_val = np.inf
    best_state = [p.value.copy() for p in params]
    since_best = 0
    log = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(ft))
        total = 0.0
        for lo in range(0, len(ft), cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            tc.zero_grads(params)
            pred = head.forward(reductor.stack.forward(ft[idx]))
            loss, dloss = tc.mse_loss(pred, yt[idx])
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite reductor loss at epoch {epoch}")
            reductor.stack.backward(head.backward(dloss))
            opt.step()
            total += loss * len(idx)
        val_loss, _ = tc.mse_loss(head.forward(reductor.stack.forward(fv)), yv)
        if val_loss < best_val:
            best_val = val_loss
            best_state = [p.value.copy() for p in params]
            since_best = 0
        else:
            since_best += 1
        log.append((epoch, total / len(ft), float(val_loss)))
        if since_best >= cfg.patience:
            break
    for p, v in zip(params, best_state):
        p.value = v
    return reductor, log


def encode_backbone(backbone, reductor, image):
    """reductor(backbone(image)); the pairing must match by creation seed."""
    if (reductor.backbone_seed, reductor.feature_width) != (backbone.seed, backbone.feature_width):
        raise ValidationError(
            f"reductor was tuned for backbone seed {reductor.backbone_seed}"
            f"/{reductor.feature_width}, got seed {backbone.seed}/{backbone.feature_width}")
    z = reductor.project(backbone.features(image))
    return z[0] if np.asarray(image).ndim == 2 else z


# --- encoder persistence -----------------------------------------------------

_MAGIC_LINE = "proprio-encoder v1"


@dataclass
class EncoderBundle:
    """A deployable encoder: kind + width + whatever models it needs."""

    kind: str
    width: int
    vae: VAEEncoderModel = None
    backbone: BackboneModel = None
    reductor: ReductorModel = None

    def encode_image_batch(self, images):
        if self.kind == "vae":
            return encode_vae_batch(self.vae, images)
        if self.kind == "backbone":
            return self.reductor.project(self.backbone.features(images))
        raise ValidationError(f"encoder kind {self.kind!r} does not consume images")


def save_encoder(path, bundle):
    """Descriptor line + tensorcore parameter records.

    The VAE decoder never ships; the backbone ships as its creation seed
    and is rebuilt bit-exactly on load.
    """
    fields = [f"kind={bundle.kind}", f"width={bundle.width}"]
    params = []
    if bundle.kind == "fiducial":
        pass
    elif bundle.kind == "vae":
        params = bundle.vae.inference_params()
    elif bundle.kind == "backbone":
        fields.append(f"backbone_seed={bundle.backbone.seed}")
        fields.append(f"features={bundle.backbone.feature_width}")
        fields.append("hidden=" + ",".join(str(h) for h in bundle.reductor.hidden))
        params = bundle.reductor.stack.params()
    else:
        raise ValidationError(f"unknown encoder kind {bundle.kind!r}")
    with open(path, "wb") as fh:
        fh.write((_MAGIC_LINE + " " + " ".join(fields) + "\n").encode("ascii"))
        fh.write(tc.save_params(params))


def load_encoder(path):
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").strip()
        blob = fh.read()
    parts = header.split()
    if parts[:2] != _MAGIC_LINE.split():
        raise CheckpointError(f"{path}: not an encoder checkpoint")
    fields = dict(p.split("=", 1) for p in parts[2:])
    kind = fields.get("kind")
    width = int(fields.get("width", 0))
    if kind == "fiducial":
        if width != FIDUCIAL_WIDTH:
            raise CheckpointError(f"{path}: fiducial encoder must be width {FIDUCIAL_WIDTH}")
        return EncoderBundle("fiducial", FIDUCIAL_WIDTH)
    _check_width(width)
    if kind == "vae":
        model = build_vae(width, seed=0)
        tc.load_params(model.inference_params(), blob)
        model.decoder = None
        model.deployed = True
        return EncoderBundle("vae", width, vae=model)
    if kind == "backbone":
        backbone = build_backbone(int(fields["backbone_seed"]), int(fields["features"]))
        hidden = tuple(int(h) for h in fields["hidden"].split(",") if h)
        reductor = build_reductor(width, hidden, backbone, np.random.default_rng(0))
        tc.load_params(reductor.stack.params(), blob)
        return EncoderBundle("backbone", width, backbone=backbone, reductor=reductor)
    raise CheckpointError(f"{path}: unknown encoder kind {kind!r}")
