"""Recording ingestion: per-record signal CSVs, clinical metadata, and class labels.

Wire formats:
    signal CSV    header ``time_s,fhr_bpm``, one row per sample, UTF-8, ``.`` decimal.
    metadata CSV  header ``record_id,ph,apgar1[,pco2,po2,bdecf]``, empty cell = missing.

Zero-valued heart-rate samples mean sensor dropout and are passed through verbatim;
the preprocessing stage treats them as missing.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import (
    EmptyInputError,
    FetalGuardError,
    LabelingError,
    ParseError,
    StructureError,
)

logger = logging.getLogger(__name__)

PH_ABNORMAL_BELOW = 7.20
APGAR1_ABNORMAL_BELOW = 7

_SIGNAL_HEADER = ("time_s", "fhr_bpm")
_METADATA_COLUMNS = ("record_id", "ph", "apgar1", "pco2", "po2", "bdecf")


class ClassLabel(IntEnum):
    """Binary class of a recording; ABNORMAL is the positive class."""

    NORMAL = 0
    ABNORMAL = 1


@dataclass
class ClinicalMetadata:
    """Outcome measurements attached to one recording.

    BDecf, pCO2 and pO2 are carried for completeness but unused by labeling.
    """

    ph: float | None = None
    apgar1: int | None = None
    pco2: float | None = None
    po2: float | None = None
    bdecf: float | None = None

    def __post_init__(self):
        if self.ph is not None and not (6.5 <= self.ph <= 7.8):
            raise ValueError(f"ph {self.ph} outside physiological range [6.5, 7.8]")
        if self.apgar1 is not None and not (0 <= self.apgar1 <= 10):
            raise ValueError(f"apgar1 {self.apgar1} outside [0, 10]")


@dataclass
class SignalRecord:
    """Raw heart-rate time series for one recording."""

    record_id: str
    fhr: np.ndarray
    sample_rate_hz: float
    metadata: ClinicalMetadata = field(default_factory=ClinicalMetadata)

    def __post_init__(self):
        self.fhr = np.asarray(self.fhr, dtype=float)
        if self.fhr.size == 0:
            raise ValueError("fhr must be non-empty")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")


@dataclass
class LabeledRecord:
    record: SignalRecord
    label: ClassLabel


@dataclass
class SkippedRecord:
    record_id: str
    reason: str


@dataclass
class LoadResult:
    """Outcome of loading a directory of recordings: kept records plus a skip report."""

    records: list[LabeledRecord]
    skipped: list[SkippedRecord]


def parse_record_csv(text: str | io.TextIOBase, record_id: str) -> SignalRecord:
    """Parse one signal CSV into a SignalRecord.

    The sample rate is inferred from the median time delta between consecutive
    rows. Raises ParseError (with line number) on malformed cells, StructureError
    on non-increasing time, EmptyInputError on a header-only file.
    """
    if isinstance(text, str):
        text = io.StringIO(text)
    reader = csv.reader(text)

    try:
        header = next(reader)
    except StopIteration:
        raise EmptyInputError(f"record {record_id}: file is empty") from None
    if [c.strip().lower() for c in header] != list(_SIGNAL_HEADER):
        raise ParseError(
            f"expected header '{','.join(_SIGNAL_HEADER)}', got '{','.join(header)}'", line=1
        )

    times: list[float] = []
    values: list[float] = []
    for line_no, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 2:
            raise ParseError(f"expected 2 columns, got {len(row)}", line=line_no)
        try:
            t = float(row[0])
            v = float(row[1])
        except ValueError:
            raise ParseError(f"non-numeric cell in row {row!r}", line=line_no) from None
        if times and t <= times[-1]:
            raise StructureError(
                f"record {record_id}: time not strictly increasing at line {line_no} "
                f"({times[-1]} -> {t})"
            )
        times.append(t)
        values.append(v)

    if not values:
        raise EmptyInputError(f"record {record_id}: no data rows")
    if len(values) < 2:
        raise StructureError(
            f"record {record_id}: need at least two samples to infer the sample rate"
        )

    median_delta = float(np.median(np.diff(times)))
    return SignalRecord(record_id=record_id, fhr=np.array(values), sample_rate_hz=1.0 / median_delta)


def assign_label(meta: ClinicalMetadata) -> ClassLabel:
    """Label a recording from its clinical outcome.

    Abnormal requires both pH < 7.20 and Apgar1 < 7 (strict on both); anything
    else is Normal. Raises LabelingError when either value is missing.
    """
    if meta.ph is None or meta.apgar1 is None:
        missing = [n for n, v in (("ph", meta.ph), ("apgar1", meta.apgar1)) if v is None]
        raise LabelingError(f"cannot label record: missing {', '.join(missing)}")
    if meta.ph < PH_ABNORMAL_BELOW and meta.apgar1 < APGAR1_ABNORMAL_BELOW:
        return ClassLabel.ABNORMAL
    return ClassLabel.NORMAL


def _parse_optional_float(cell: str, name: str, line: int) -> float | None:
    cell = cell.strip()
    if not cell:
        return None
    try:
        return float(cell)
    except ValueError:
        raise ParseError(f"non-numeric {name} {cell!r}", line=line) from None


def read_metadata_csv(path: str | Path) -> dict[str, ClinicalMetadata]:
    """Read the metadata table into a mapping record_id -> ClinicalMetadata.

    Accepts the minimal 3-column layout or the full 6-column one.
    """
    path = Path(path)
    out: dict[str, ClinicalMetadata] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [c.strip().lower() for c in next(reader)]
        except StopIteration:
            raise EmptyInputError(f"{path}: metadata file is empty") from None
        if tuple(header) not in (_METADATA_COLUMNS[:3], _METADATA_COLUMNS):
            raise ParseError(
                f"{path}: expected header '{','.join(_METADATA_COLUMNS[:3])}' or "
                f"'{','.join(_METADATA_COLUMNS)}', got '{','.join(header)}'",
                line=1,
            )
        for line_no, row in enumerate(reader, start=2):
            if not row or not row[0].strip():
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: expected {len(header)} columns, got {len(row)}", line=line_no)
            record_id = row[0].strip()
            if record_id in out:
                raise StructureError(f"{path}: duplicate record_id {record_id!r} at line {line_no}")
            ph = _parse_optional_float(row[1], "ph", line_no)
            apgar_raw = _parse_optional_float(row[2], "apgar1", line_no)
            apgar1 = None if apgar_raw is None else int(apgar_raw)
            extras = {}
            if len(header) == 6:
                extras = {
                    name: _parse_optional_float(row[i], name, line_no)
                    for i, name in ((3, "pco2"), (4, "po2"), (5, "bdecf"))
                }
            out[record_id] = ClinicalMetadata(ph=ph, apgar1=apgar1, **extras)
    return out


def load_collection(signal_dir: str | Path, metadata_file: str | Path) -> LoadResult:
    """Load every ``<record_id>.csv`` under signal_dir, attach metadata, assign labels.

    Per-record problems (orphan signal, unparseable file, missing pH/Apgar1) are
    collected into the skip report; the call fails only if zero records load.
    """
    signal_dir = Path(signal_dir)
    metadata = read_metadata_csv(metadata_file)

    signal_files = sorted(signal_dir.glob("*.csv"))
    if not signal_files:
        raise EmptyInputError(f"no signal CSV files in {signal_dir}")

    records: list[LabeledRecord] = []
    skipped: list[SkippedRecord] = []
    for path in signal_files:
        record_id = path.stem
        meta = metadata.get(record_id)
        if meta is None:
            skipped.append(SkippedRecord(record_id, "no metadata row"))
            continue
        try:
            record = parse_record_csv(path.read_text(encoding="utf-8"), record_id)
            record.metadata = meta
            label = assign_label(meta)
        except (FetalGuardError, ValueError) as exc:
            skipped.append(SkippedRecord(record_id, str(exc)))
            continue
        records.append(LabeledRecord(record, label))

    if not records:
        raise EmptyInputError(
            f"no records loaded from {signal_dir} ({len(skipped)} skipped)"
        )

    n_abnormal = sum(1 for r in records if r.label is ClassLabel.ABNORMAL)
    logger.info(
        "loaded %d records: %d normal, %d abnormal (%d skipped)",
        len(records), len(records) - n_abnormal, n_abnormal, len(skipped),
    )
    return LoadResult(records=records, skipped=skipped)
