"""Parametric generator of heart-rate-like signals with known ground truth.

Normal records are a baseline with smooth accelerations/decelerations, Gaussian
noise, and sensor dropouts (zero samples). Abnormal records additionally carry
sustained bradycardia segments (baseline dip of at least 20 bpm for at least
3 minutes) and halved noise variability. Metadata is written so the labeling
rule agrees with the generator's ground truth.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .ingest import ClassLabel, ClinicalMetadata, LabeledRecord, SignalRecord

SAMPLE_RATE_HZ = 4.0

# metadata written per class so assign_label reproduces the ground truth
ABNORMAL_METADATA = ClinicalMetadata(ph=7.00, apgar1=4)
NORMAL_METADATA = ClinicalMetadata(ph=7.35, apgar1=9)


@dataclass(frozen=True)
class SynthParams:
    baseline_bpm: float = 135.0
    n_accels: int = 3
    n_decels: int = 2
    accel_amplitude_bpm: float = 15.0
    accel_duration_s: float = 40.0
    decel_amplitude_bpm: float = 12.0
    decel_duration_s: float = 45.0
    noise_std: float = 4.0
    dropout_rate: float = 0.02
    duration_min: float = 20.0
    abnormal: bool = False

    def __post_init__(self):
        if not 110.0 <= self.baseline_bpm <= 160.0:
            raise ConfigError(f"baseline_bpm {self.baseline_bpm} outside [110, 160]")
        if not 0.0 <= self.dropout_rate <= 1.0:
            raise ConfigError(f"dropout_rate {self.dropout_rate} outside [0, 1]")
        if self.duration_min <= 0 or self.accel_duration_s <= 0 or self.decel_duration_s <= 0:
            raise ConfigError("durations must be positive")
        if self.n_accels < 0 or self.n_decels < 0:
            raise ConfigError("event counts must be nonnegative")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be nonnegative")


def _add_bump(signal: np.ndarray, center: int, half_width: int, amplitude: float) -> None:
    """Superimpose a raised-cosine bump in place."""
    lo = max(0, center - half_width)
    hi = min(signal.size, center + half_width)
    t = np.arange(lo, hi) - center
    signal[lo:hi] += amplitude * 0.5 * (1.0 + np.cos(np.pi * t / half_width))


def _add_plateau(signal: np.ndarray, start: int, length: int, depth: float, ramp: int) -> None:
    """Superimpose a sustained dip with cosine ramps in place."""
    end = min(signal.size, start + length)
    for i in range(start, end):
        into = i - start
        left = end - 1 - i
        scale = 1.0
        if into < ramp:
            scale = 0.5 * (1.0 - np.cos(np.pi * into / ramp))
        if left < ramp:
            scale = min(scale, 0.5 * (1.0 - np.cos(np.pi * left / ramp)))
        signal[i] -= depth * scale


def generate_record(params: SynthParams, seed) -> tuple[SignalRecord, ClassLabel]:
    """One synthetic record, deterministic per seed; label follows params.abnormal."""
    rng = np.random.default_rng(seed)
    n = int(round(params.duration_min * 60.0 * SAMPLE_RATE_HZ))
    signal = np.full(n, params.baseline_bpm)

    events = [(params.n_accels, params.accel_amplitude_bpm, params.accel_duration_s, +1.0),
              (params.n_decels, params.decel_amplitude_bpm, params.decel_duration_s, -1.0)]
    for count, amplitude, duration_s, sign in events:
        for _ in range(count):
            center = int(rng.integers(0, n))
            half_width = max(2, int(duration_s * SAMPLE_RATE_HZ * rng.uniform(0.8, 1.2) / 2))
            _add_bump(signal, center, half_width, sign * amplitude * rng.uniform(0.8, 1.2))

    noise_std = params.noise_std * (0.5 if params.abnormal else 1.0)
    if params.abnormal:
        n_segments = int(rng.integers(1, 3))
        for _ in range(n_segments):
            minutes = rng.uniform(3.0, 6.0)
            length = int(minutes * 60.0 * SAMPLE_RATE_HZ)
            depth = rng.uniform(20.0, 35.0)
            start = int(rng.integers(0, max(1, n - length)))
            _add_plateau(signal, start, length, depth, ramp=int(15 * SAMPLE_RATE_HZ))

    signal += rng.normal(0.0, noise_std, size=n) if noise_std > 0 else 0.0

    dropped = rng.random(n) < params.dropout_rate
    signal[dropped] = 0.0

    record = SignalRecord(
        record_id="synthetic",
        fhr=signal,
        sample_rate_hz=SAMPLE_RATE_HZ,
        metadata=ABNORMAL_METADATA if params.abnormal else NORMAL_METADATA,
    )
    label = ClassLabel.ABNORMAL if params.abnormal else ClassLabel.NORMAL
    return record, label


def generate_dataset(
    n_normal: int,
    n_abnormal: int,
    base_params: SynthParams | None = None,
    seed: int = 0,
) -> list[LabeledRecord]:
    """n_normal + n_abnormal records with per-record derived seeds; exact class counts.

    Baselines are jittered around the base parameter so records differ beyond
    their noise realizations.
    """
    if n_normal < 0 or n_abnormal < 0:
        raise ConfigError("record counts must be nonnegative")
    base = base_params or SynthParams()
    out: list[LabeledRecord] = []
    total = n_normal + n_abnormal
    for i in range(total):
        abnormal = i >= n_normal
        rng = np.random.default_rng([seed, i, 0])
        baseline = float(np.clip(base.baseline_bpm + rng.uniform(-10.0, 10.0), 110.0, 160.0))
        params = replace(base, baseline_bpm=baseline, abnormal=abnormal)
        record, label = generate_record(params, seed=[seed, i, 1])
        record.record_id = f"syn{i:04d}"
        out.append(LabeledRecord(record, label))
    return out


def write_dataset(records: list[LabeledRecord], out_dir: str | Path) -> tuple[Path, Path]:
    """Write signal CSVs plus metadata.csv in the ingestion schema.

    Returns (signals_dir, metadata_file).
    """
    out_dir = Path(out_dir)
    signals_dir = out_dir / "signals"
    signals_dir.mkdir(parents=True, exist_ok=True)
    metadata_file = out_dir / "metadata.csv"
    with metadata_file.open("w", newline="", encoding="utf-8") as meta_fh:
        writer = csv.writer(meta_fh)
        writer.writerow(["record_id", "ph", "apgar1", "pco2", "po2", "bdecf"])
        for item in records:
            record = item.record
            meta = record.metadata
            writer.writerow([record.record_id, meta.ph, meta.apgar1, "", "", ""])
            with (signals_dir / f"{record.record_id}.csv").open(
                "w", newline="", encoding="utf-8"
            ) as sig_fh:
                sig_writer = csv.writer(sig_fh)
                sig_writer.writerow(["time_s", "fhr_bpm"])
                for i, v in enumerate(record.fhr):
                    sig_writer.writerow([repr(i / record.sample_rate_hz), repr(float(v))])
    return signals_dir, metadata_file
