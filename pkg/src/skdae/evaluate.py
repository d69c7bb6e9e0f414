"""Enhancement metrics, dependency diagnostics, and report files."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import dcor
from .errors import DegenerateSampleError, DimensionMismatchError
from .features import FeatureMatrix

# Corpus-level dcor is O(n^2); frames are subsampled to this many rows.
DEFAULT_DCOR_ROWS = 500


def frame_mse(a, b) -> float:
    """Mean over frames of the squared Euclidean error per frame."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean(np.sum((a - b) ** 2, axis=1)))


def _subsample_indices(n: int, n_rows: int, seed) -> np.ndarray:
    if n <= n_rows:
        return np.arange(n)
    rng = np.random.default_rng(seed)
    rows = rng.choice(n, size=n_rows, replace=False)
    rows.sort()
    return rows


def subsample_rows(matrix, n_rows: int, seed) -> np.ndarray:
    """Seeded without-replacement row subsample (all rows when short)."""
    matrix = np.asarray(matrix, dtype=np.float64)
    return matrix[_subsample_indices(matrix.shape[0], n_rows, seed)]


@dataclass
class ConditionRow:
    """Per-(noise type, SNR) aggregate of the feature-space metrics."""

    noise_type: str
    snr_db: float
    mse_enhanced: float
    mse_noisy: float
    dcor_enhanced_clean: float
    n_frames: int


@dataclass
class EvalReport:
    rows: list[ConditionRow] = field(default_factory=list)
    checkpoint_id: str = ""
    corpus_id: str = ""

    def write_json(self, path) -> None:
        payload = {
            "checkpoint": self.checkpoint_id,
            "corpus": self.corpus_id,
            "rows": [asdict(row) for row in self.rows],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["noise_type", "snr_db", "mse_enhanced", "mse_noisy",
                 "dcor_enhanced_clean", "n_frames"]
            )
            for row in self.rows:
                writer.writerow(
                    [row.noise_type, f"{row.snr_db:.12g}", f"{row.mse_enhanced:.12g}",
                     f"{row.mse_noisy:.12g}", f"{row.dcor_enhanced_clean:.12g}",
                     row.n_frames]
                )


def feature_mse_report(
    items,
    checkpoint_id: str = "",
    corpus_id: str = "",
    dcor_rows: int = DEFAULT_DCOR_ROWS,
    seed: int = 0,
) -> EvalReport:
    """Aggregate enhanced-vs-clean and noisy-vs-clean errors per condition.

    ``items`` yields ``(noise_type, snr_db, enhanced, noisy_center, clean)``
    with aligned frame counts; the three feature arguments may be
    FeatureMatrix or plain arrays.  Frame-weighted means per condition,
    plus a corpus-level dcor(enhanced, clean) on a seeded row subsample.
    """
    grouped: dict[tuple, list] = {}
    for noise_type, snr_db, enhanced, noisy, clean in items:
        enhanced = enhanced.frames if isinstance(enhanced, FeatureMatrix) else np.asarray(enhanced, dtype=np.float64)
        noisy = noisy.frames if isinstance(noisy, FeatureMatrix) else np.asarray(noisy, dtype=np.float64)
        clean = clean.frames if isinstance(clean, FeatureMatrix) else np.asarray(clean, dtype=np.float64)
        if enhanced.shape != clean.shape or noisy.shape != clean.shape:
            raise DimensionMismatchError(
                f"misaligned frames in condition ({noise_type}, {snr_db})"
            )
        grouped.setdefault((noise_type, float(snr_db)), []).append((enhanced, noisy, clean))

    rows = []
    for (noise_type, snr_db), triples in sorted(grouped.items()):
        enhanced = np.concatenate([t[0] for t in triples], axis=0)
        noisy = np.concatenate([t[1] for t in triples], axis=0)
        clean = np.concatenate([t[2] for t in triples], axis=0)
        if enhanced.shape[0] >= 2:
            # The same frame subsample on both sides keeps pairs aligned.
            take = _subsample_indices(enhanced.shape[0], dcor_rows, [seed, 0])
            r = dcor.dcor(enhanced[take], clean[take])
        else:
            r = 0.0
        rows.append(
            ConditionRow(
                noise_type=noise_type,
                snr_db=snr_db,
                mse_enhanced=frame_mse(enhanced, clean),
                mse_noisy=frame_mse(noisy, clean),
                dcor_enhanced_clean=r,
                n_frames=enhanced.shape[0],
            )
        )
    return EvalReport(rows=rows, checkpoint_id=checkpoint_id, corpus_id=corpus_id)


@dataclass
class DcorTable:
    """Matrix of distance correlations between two sets of signals."""

    row_names: list[str]
    col_names: list[str]
    values: np.ndarray

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([""] + self.col_names)
            for name, row in zip(self.row_names, self.values):
                writer.writerow([name] + [f"{v:.12g}" for v in row])


def signal_dcor_table(
    set_a,
    set_b,
    dcor_rows: int = DEFAULT_DCOR_ROWS,
    seed: int = 0,
) -> DcorTable:
    """Pairwise dcor between two named sets of feature matrices.

    ``set_a``/``set_b`` are sequences of ``(name, FeatureMatrix)``.  All
    matrices are subsampled (seeded) to a common row count before the
    statistic, so the pairings are well defined; passing the same
    sequence twice therefore yields a symmetric table.
    """
    set_a = [(name, fm.frames if isinstance(fm, FeatureMatrix) else np.asarray(fm, dtype=np.float64)) for name, fm in set_a]
    set_b = [(name, fm.frames if isinstance(fm, FeatureMatrix) else np.asarray(fm, dtype=np.float64)) for name, fm in set_b]
    counts = [m.shape[0] for _, m in set_a + set_b]
    if min(counts) < 2:
        raise DegenerateSampleError("every signal needs at least 2 frames")
    common = min(dcor_rows, min(counts))
    # Same per-position seed on both sides keeps A == B tables symmetric.
    subs_a = [(name, subsample_rows(m, common, [seed, i])) for i, (name, m) in enumerate(set_a)]
    subs_b = [(name, subsample_rows(m, common, [seed, i])) for i, (name, m) in enumerate(set_b)]
    values = np.zeros((len(subs_a), len(subs_b)))
    for i, (_, a) in enumerate(subs_a):
        for j, (_, b) in enumerate(subs_b):
            values[i, j] = dcor.dcor(a, b)
    return DcorTable(
        row_names=[name for name, _ in subs_a],
        col_names=[name for name, _ in subs_b],
        values=values,
    )


def training_trajectory_csv(reports, path) -> None:
    """One CSV line per epoch: epoch, loss, mse, dcor_latent, dcor_output."""
    reports = list(reports)
    if not reports:
        raise ValueError("no epoch reports to write")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss", "mse", "dcor_latent", "dcor_output"])
        for r in reports:
            writer.writerow(
                [r.epoch, f"{r.loss:.12g}", f"{r.mse:.12g}",
                 f"{r.dcor_latent:.12g}", f"{r.dcor_output:.12g}"]
            )
