"""Skip-connection denoising autoencoder: architecture, objectives,
training loop, inference, and checkpoint I/O.

The encoder and decoder are sigmoid MLPs; the normalized center frame is
concatenated onto the input of the second encoder layer and the second
decoder layer.  Objectives optionally penalize (one minus the) distance
correlation between the clean target and, respectively, the latent code
and the reconstruction, linearly and squared.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass

import numpy as np

from . import dcor, nn
from .errors import (
    CheckpointError,
    ConfigError,
    ContractError,
    DegenerateGradientError,
    DimensionMismatchError,
    TrainingDivergedError,
)
from .features import (
    CONTEXT_FRAMES,
    ContextWindowBatch,
    FeatureMatrix,
    context_windows,
    merge_batches,
)

logger = logging.getLogger(__name__)

VARIANTS = ("SK-DAE", "CDSK-DAE", "CDESK-DAE")
VARIANT_DEFAULTS = {
    "SK-DAE": (0.0, 0.0),
    "CDSK-DAE": (0.01, 0.0),
    "CDESK-DAE": (0.01, 0.01),
}

_LAYER_NAMES = ("enc1", "enc2", "enc3", "dec1", "dec2", "dec3", "out")


@dataclass
class TrainConfig:
    """Training hyperparameters and the objective variant selector."""

    variant: str = "SK-DAE"
    beta: float = 0.0
    sigma: float = 0.0
    lr: float = 0.001
    batch_size: int = 500
    epochs: int = 16
    seed: int = 0

    @classmethod
    def for_variant(cls, variant: str, **overrides) -> "TrainConfig":
        """Config with the variant's default penalty weights filled in."""
        if variant not in VARIANT_DEFAULTS:
            raise ConfigError(f"unknown variant {variant!r} (expected one of {VARIANTS})")
        beta, sigma = VARIANT_DEFAULTS[variant]
        if variant == "SK-DAE":
            # The plain-MSE variant has no penalty terms by definition.
            overrides.pop("beta", None)
            overrides.pop("sigma", None)
        beta = overrides.pop("beta", beta)
        sigma = overrides.pop("sigma", sigma)
        return cls(variant=variant, beta=beta, sigma=sigma, **overrides)

    def problems(self) -> list[str]:
        out = []
        if self.variant not in VARIANTS:
            out.append(f"unknown variant {self.variant!r} (expected one of {VARIANTS})")
        if self.beta < 0:
            out.append(f"beta must be >= 0, got {self.beta}")
        if self.sigma < 0:
            out.append(f"sigma must be >= 0, got {self.sigma}")
        if self.lr < 0:
            out.append(f"lr must be >= 0, got {self.lr}")
        if self.batch_size < 2:
            out.append(f"batch_size must be >= 2, got {self.batch_size}")
        if self.epochs < 1:
            out.append(f"epochs must be >= 1, got {self.epochs}")
        if self.variant == "SK-DAE" and (self.beta != 0 or self.sigma != 0):
            out.append("SK-DAE requires beta = sigma = 0")
        if self.variant == "CDSK-DAE" and (self.beta <= 0 or self.sigma != 0):
            out.append("CDSK-DAE requires beta > 0 and sigma = 0")
        if self.variant == "CDESK-DAE" and (self.beta <= 0 or self.sigma <= 0):
            out.append("CDESK-DAE requires beta > 0 and sigma > 0")
        return out

    def validate(self) -> None:
        problems = self.problems()
        if problems:
            raise ConfigError(problems)


@dataclass
class EpochReport:
    """Batch-averaged diagnostics for one training epoch."""

    epoch: int
    loss: float
    mse: float
    dcor_latent: float
    dcor_output: float


class SkDaeModel:
    """Three-layer encoder and mirrored decoder with center-frame skips.

    ``forward`` maps a batch of stacked context windows to the latent
    code ``z`` and the enhanced center frame ``x_hat``:

        h1 = enc1(X);  h2 = enc2([h1, c]);  z = enc3(h2)
        d1 = dec1(z);  d2 = dec2([d1, c]);  x_hat = out(dec3(d2))

    where ``c`` is the normalized center frame of each window.
    """

    def __init__(self, layers: dict, feature_dim: int, context_frames: int):
        missing = [name for name in _LAYER_NAMES if name not in layers]
        if missing:
            raise DimensionMismatchError(f"missing layers: {missing}")
        self.layers = {name: layers[name] for name in _LAYER_NAMES}
        self.feature_dim = feature_dim
        self.context_frames = context_frames
        self._check_dimension_chain()

    def _check_dimension_chain(self) -> None:
        f = self.feature_dim
        lay = self.layers
        chain = [
            (lay["enc1"].fan_in, self.context_frames * f, "enc1 input"),
            (lay["enc2"].fan_in, lay["enc1"].fan_out + f, "enc2 input (skip)"),
            (lay["enc3"].fan_in, lay["enc2"].fan_out, "enc3 input"),
            (lay["dec1"].fan_in, lay["enc3"].fan_out, "dec1 input"),
            (lay["dec2"].fan_in, lay["dec1"].fan_out + f, "dec2 input (skip)"),
            (lay["dec3"].fan_in, lay["dec2"].fan_out, "dec3 input"),
            (lay["out"].fan_in, lay["dec3"].fan_out, "output input"),
            (lay["out"].fan_out, f, "output width"),
        ]
        for got, want, what in chain:
            if got != want:
                raise DimensionMismatchError(f"{what}: expected {want}, got {got}")

    @classmethod
    def create(
        cls,
        feature_dim: int = 40,
        context_frames: int = CONTEXT_FRAMES,
        encoder_units: tuple = (512, 256, 128),
        seed=0,
    ) -> "SkDaeModel":
        """Xavier-initialized model; the decoder mirrors ``encoder_units``."""
        u1, u2, u3 = encoder_units
        f = feature_dim
        rng = np.random.default_rng(seed)
        shapes = {
            "enc1": (u1, context_frames * f),
            "enc2": (u2, u1 + f),
            "enc3": (u3, u2),
            "dec1": (u3, u3),
            "dec2": (u2, u3 + f),
            "dec3": (u1, u2),
            "out": (f, u1),
        }
        layers = {name: nn.xavier_init(shapes[name], rng) for name in _LAYER_NAMES}
        return cls(layers, feature_dim, context_frames)

    @property
    def latent_dim(self) -> int:
        return self.layers["enc3"].fan_out

    def parameters(self) -> list[nn.Tensor]:
        out = []
        for name in _LAYER_NAMES:
            out.extend(self.layers[name].parameters())
        return out

    def forward_tape(self, inputs, center_frames) -> tuple[nn.Tensor, nn.Tensor]:
        """Forward pass returning tape nodes for ``z`` and ``x_hat``."""
        lay = self.layers
        x = nn.Tensor(inputs)
        c = nn.Tensor(center_frames)
        h1 = lay["enc1"](x)
        h2 = lay["enc2"](nn.concat(h1, c))
        z = lay["enc3"](h2)
        d1 = lay["dec1"](z)
        d2 = lay["dec2"](nn.concat(d1, c))
        x_hat = lay["out"](lay["dec3"](d2))
        return z, x_hat

    def forward(self, batch: ContextWindowBatch) -> tuple[np.ndarray, np.ndarray]:
        """Latent codes (n x latent) and enhanced frames (n x feature)."""
        z, x_hat = self.forward_tape(batch.inputs, batch.center_frames)
        return z.data, x_hat.data


def loss_mse(x_hat, x) -> float:
    """Batch mean of the squared Euclidean reconstruction error."""
    return nn.mse(nn.Tensor(x_hat), np.asarray(x, dtype=np.float64)).item()


def _penalty_dcor(y, x, what: str) -> float | None:
    """Distance correlation for a penalty term, or None (logged) when the
    batch is degenerate and the term must be skipped."""
    try:
        value, _ = dcor.dcor_with_gradient(x, np.asarray(y, dtype=np.float64))
        return value
    except DegenerateGradientError:
        logger.warning("degenerate distance variance: skipping %s penalty term", what)
        return None


def loss_cdsk(x_hat, z, x, beta: float) -> float:
    """MSE plus a linear distance-correlation penalty on the latent code
    and the reconstruction.  ``beta = 0`` reduces exactly to the MSE."""
    total = loss_mse(x_hat, x)
    if beta == 0.0:
        return total
    penalty = 0.0
    for y, what in ((z, "latent"), (x_hat, "output")):
        r = _penalty_dcor(y, x, what)
        if r is not None:
            penalty += 1.0 - r
    return total + beta * penalty


def loss_cdesk(x_hat, z, x, beta: float, sigma: float) -> float:
    """CDSK objective plus squared penalty terms.  ``sigma = 0`` reduces
    exactly to :func:`loss_cdsk`."""
    total = loss_cdsk(x_hat, z, x, beta)
    if sigma == 0.0:
        return total
    penalty = 0.0
    for y, what in ((z, "latent"), (x_hat, "output")):
        r = _penalty_dcor(y, x, what)
        if r is not None:
            penalty += (1.0 - r) ** 2
    return total + sigma * penalty


def _batch_loss_graph(model: SkDaeModel, inputs, centers, targets, beta, sigma, where=""):
    """Assemble the variant loss on the tape.

    Returns ``(loss_node, mse_value, dcor_latent, dcor_output)``; the
    dcor values are reported for every variant (zero-variance batches
    report 0, matching the zero branch of the statistic).
    """
    z, x_hat = model.forward_tape(inputs, centers)
    loss = nn.mse(x_hat, targets)
    mse_value = loss.item()
    if not np.isfinite(mse_value):
        raise TrainingDivergedError(
            f"non-finite reconstruction loss{where}: mse={mse_value}"
        )

    r_latent = r_output = None
    if beta > 0.0 or sigma > 0.0:
        terms = []
        for node, what in ((z, "latent"), (x_hat, "output")):
            try:
                terms.append(nn.dcor_penalty(node, targets))
            except DegenerateGradientError:
                logger.warning(
                    "degenerate distance variance: skipping %s penalty term", what
                )
                terms.append(None)
        r_latent = terms[0].item() if terms[0] is not None else None
        r_output = terms[1].item() if terms[1] is not None else None
        if beta > 0.0:
            for term in terms:
                if term is not None:
                    loss = loss + beta * (1.0 - term)
        if sigma > 0.0:
            for term in terms:
                if term is not None:
                    loss = loss + sigma * nn.square(1.0 - term)

    if r_latent is None:
        r_latent = dcor.dcor(targets, z.data) if z.data.shape[0] >= 2 else 0.0
    if r_output is None:
        r_output = dcor.dcor(targets, x_hat.data) if x_hat.data.shape[0] >= 2 else 0.0
    return loss, mse_value, r_latent, r_output


def train(model: SkDaeModel, dataset, cfg: TrainConfig):
    """Train in place over shuffled minibatches; one report per epoch.

    ``dataset`` is a ContextWindowBatch or a sequence of them (merged).
    Partial trailing batches are used when they have at least two rows.
    """
    cfg.validate()
    if isinstance(dataset, ContextWindowBatch):
        pool = dataset
    else:
        pool = merge_batches(dataset)
    n = pool.n
    if n < 2:
        raise ConfigError("training pool needs at least 2 rows")

    optimizer = nn.Adam(model.parameters(), lr=cfg.lr)
    rng = np.random.default_rng(cfg.seed)
    reports = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        sums = np.zeros(4)
        batches = 0
        for start in range(0, n, cfg.batch_size):
            rows = order[start : start + cfg.batch_size]
            if rows.size < 2:
                continue
            loss, mse_value, r_latent, r_output = _batch_loss_graph(
                model,
                pool.inputs[rows],
                pool.center_frames[rows],
                pool.targets[rows],
                cfg.beta,
                cfg.sigma,
                where=f" at epoch {epoch}, batch {batches}",
            )
            if not np.isfinite(loss.data):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {batches}: "
                    f"loss={loss.item()}, mse={mse_value}, "
                    f"dcor_latent={r_latent}, dcor_output={r_output}"
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            sums += (loss.item(), mse_value, r_latent, r_output)
            batches += 1
        means = sums / max(batches, 1)
        reports.append(EpochReport(epoch, *(float(v) for v in means)))
    return model, reports


def enhance(model: SkDaeModel, noisy: FeatureMatrix) -> FeatureMatrix:
    """Enhance every frame of a normalized feature matrix.

    Each frame is processed with its replicated-edge context window; the
    output keeps the input's normalization metadata so it can be
    inverted downstream.
    """
    if not noisy.normalized:
        raise ContractError("enhance expects normalized features")
    if noisy.n_dims != model.feature_dim:
        raise DimensionMismatchError(
            f"model expects {model.feature_dim}-dim features, got {noisy.n_dims}"
        )
    windows, centers = context_windows(noisy, model.context_frames)
    _, x_hat = model.forward_tape(windows, centers)
    return FeatureMatrix(
        x_hat.data,
        norm_min=None if noisy.norm_min is None else noisy.norm_min.copy(),
        norm_max=None if noisy.norm_max is None else noisy.norm_max.copy(),
        normalized=True,
    )


# Checkpoint format (little endian):
#   magic    4 bytes  b"SKDA"
#   version  u32      currently 1
#   cfg      variant (u32 length + utf-8), beta f64, sigma f64, lr f64,
#            batch_size u32, epochs u32, seed i64
#   geometry feature_dim u32, context_frames u32, layer count u32
#   layers   name (u32 length + utf-8), out u32, in u32,
#            weights out*in f32 row-major, bias out f32
CHECKPOINT_MAGIC = b"SKDA"
CHECKPOINT_VERSION = 1


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.blob):
            raise CheckpointError(f"{self.path}: truncated checkpoint")
        out = self.blob[self.pos : self.pos + count]
        self.pos += count
        return out

    def unpack(self, fmt: str):
        size = struct.calcsize(fmt)
        return struct.unpack(fmt, self.take(size))

    def take_str(self) -> str:
        (length,) = self.unpack("<I")
        return self.take(length).decode("utf-8")


def save_checkpoint(model: SkDaeModel, cfg: TrainConfig, path) -> None:
    """Serialize the model and its training config (float32 payloads)."""
    parts = [
        CHECKPOINT_MAGIC,
        struct.pack("<I", CHECKPOINT_VERSION),
        _pack_str(cfg.variant),
        struct.pack("<dddIIq", cfg.beta, cfg.sigma, cfg.lr, cfg.batch_size, cfg.epochs, cfg.seed),
        struct.pack("<III", model.feature_dim, model.context_frames, len(_LAYER_NAMES)),
    ]
    for name in _LAYER_NAMES:
        layer = model.layers[name]
        parts.append(_pack_str(name))
        parts.append(struct.pack("<II", layer.fan_out, layer.fan_in))
        parts.append(layer.w.data.astype("<f4").tobytes())
        parts.append(layer.b.data.astype("<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_checkpoint(path) -> tuple[SkDaeModel, TrainConfig]:
    """Load a checkpoint written by :func:`save_checkpoint`."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    reader = _Reader(blob, path)
    if reader.take(4) != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a checkpoint file")
    (version,) = reader.unpack("<I")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint version {version} "
            f"(expected {CHECKPOINT_VERSION})"
        )
    variant = reader.take_str()
    beta, sigma, lr, batch_size, epochs, seed = reader.unpack("<dddIIq")
    cfg = TrainConfig(
        variant=variant, beta=beta, sigma=sigma, lr=lr,
        batch_size=batch_size, epochs=epochs, seed=seed,
    )
    feature_dim, context_frames, n_layers = reader.unpack("<III")
    layers = {}
    for _ in range(n_layers):
        name = reader.take_str()
        n_out, n_in = reader.unpack("<II")
        w = np.frombuffer(reader.take(4 * n_out * n_in), dtype="<f4")
        b = np.frombuffer(reader.take(4 * n_out), dtype="<f4")
        layers[name] = nn.DenseLayer(
            w.astype(np.float64).reshape(n_out, n_in), b.astype(np.float64)
        )
    if reader.pos != len(blob):
        raise CheckpointError(f"{path}: trailing bytes after checkpoint payload")
    try:
        model = SkDaeModel(layers, feature_dim, context_frames)
    except DimensionMismatchError as exc:
        raise CheckpointError(f"{path}: inconsistent layer shapes: {exc}") from exc
    return model, cfg
