"""On-disk formats.

Dataset (``.irbm``), all integers little-endian::

    b"IRBM" | u32 version | u32 L | u32 N_temp | u32 N_conf | u64 base_seed
    | u32 len | PRNG identifier (utf-8, len bytes)
    then N_temp blocks of N_conf records; a record is one configuration
    packed 1 bit per spin in row-major site order (bit 0 of byte 0 is
    site 0; 1 -> +1, 0 -> -1), padded to a whole byte.

Model checkpoint (``.rbmw``)::

    b"RBMW" | u32 version | u32 N_v | u32 N_h
    | f64 W (row-major N_v x N_h) | f64 b_v | f64 b_h

Everything else is CSV with a header row, or binary PGM (P5) images.
Writers go through a temporary file and ``os.replace``.
"""

from __future__ import annotations

import csv
import io
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .flow import FlowTrajectory, SweepResult
from .rbm import RbmModel, TrainReport
from .sampler import Dataset, temperature_grid
from .spectral import SpectralReport
from .thermometer import CalibrationCurve

DATASET_MAGIC = b"IRBM"
MODEL_MAGIC = b"RBMW"
FORMAT_VERSION = 1


class FormatError(ValueError):
    pass


def atomic_write(path, data: bytes | str):
    """Write ``data`` to ``path`` via a temporary file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode()
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# binary formats

def pack_spins(spins: np.ndarray) -> np.ndarray:
    """Pack +-1 spins along the last axis, one bit each (little bit order)."""
    return np.packbits(np.asarray(spins) > 0, axis=-1, bitorder="little")


def unpack_spins(packed: np.ndarray, n_sites: int) -> np.ndarray:
    bits = np.unpackbits(packed, axis=-1, count=n_sites, bitorder="little")
    return (2 * bits.astype(np.int8) - 1).astype(np.int8)


def dataset_bytes(ds: Dataset) -> bytes:
    prng = ds.prng.encode()
    head = DATASET_MAGIC + struct.pack("<IIIIQI", FORMAT_VERSION, ds.side_length, ds.n_temp,
                                       ds.n_conf, ds.base_seed, len(prng)) + prng
    return head + pack_spins(ds.configs).tobytes()


def write_dataset(path, ds: Dataset):
    atomic_write(path, dataset_bytes(ds))


def read_dataset(path) -> Dataset:
    raw = Path(path).read_bytes()
    if raw[:4] != DATASET_MAGIC:
        raise FormatError(f"{path}: not a dataset file")
    version, L, n_temp, n_conf, seed, n = struct.unpack_from("<IIIIQI", raw, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    off = 4 + struct.calcsize("<IIIIQI")
    prng = raw[off:off + n].decode()
    off += n
    n_sites = L * L
    rec = (n_sites + 7) // 8
    body = np.frombuffer(raw, dtype=np.uint8, offset=off)
    if body.size != n_temp * n_conf * rec:
        raise FormatError(f"{path}: truncated or oversized body")
    configs = unpack_spins(body.reshape(n_temp, n_conf, rec), n_sites)
    return Dataset(L, temperature_grid(n_temp), configs, seed, prng)


def model_bytes(model: RbmModel) -> bytes:
    head = MODEL_MAGIC + struct.pack("<III", FORMAT_VERSION, model.n_visible, model.n_hidden)
    body = np.concatenate([model.weights.ravel(), model.visible_bias, model.hidden_bias])
    return head + body.astype("<f8").tobytes()


def write_model(path, model: RbmModel):
    atomic_write(path, model_bytes(model))


def read_model(path) -> RbmModel:
    raw = Path(path).read_bytes()
    if raw[:4] != MODEL_MAGIC:
        raise FormatError(f"{path}: not a model checkpoint")
    version, n_v, n_h = struct.unpack_from("<III", raw, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    body = np.frombuffer(raw, dtype="<f8", offset=16)
    if body.size != n_v * n_h + n_v + n_h:
        raise FormatError(f"{path}: wrong parameter count")
    w = body[:n_v * n_h].reshape(n_v, n_h)
    return RbmModel(w.copy(), body[n_v * n_h:n_v * n_h + n_v].copy(), body[n_v * n_h + n_v:].copy())


# ---------------------------------------------------------------------------
# CSV

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return "" if np.isnan(x) else repr(float(x))
    return str(x)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def write_csv(path, header, rows):
    atomic_write(path, csv_text(header, rows))


def read_csv(path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def _num(s: str) -> float:
    return float("nan") if s == "" else float(s)


CURVE_HEADER = ("T", "mean_energy", "std_energy")
REPORT_HEADER = ("epoch", "train_err", "test_err")
FLOW_HEADER = ("iter", "mean_E", "std_E", "T_est", "T_spread")
SWEEP_HEADER = ("N_h", "E_star", "T_star", "converged", "iters")
SPECTRUM_HEADER = ("rank", "eigenvalue", "S_statistic", "class")
FIT_HEADER = ("a", "b", "rss", "n_points", "cutoff")


def write_curve(path, curve: CalibrationCurve):
    write_csv(path, CURVE_HEADER, zip(curve.temperatures, curve.mean_energy, curve.std_energy))


def read_curve(path, side_length: int) -> CalibrationCurve:
    rows = read_csv(path)
    cols = [np.array([_num(r[k]) for r in rows]) for k in CURVE_HEADER]
    return CalibrationCurve(side_length, *cols)


def write_train_report(path, report: TrainReport):
    write_csv(path, REPORT_HEADER, zip(report.epochs, report.train_err, report.test_err))


def write_trajectory(path, traj: FlowTrajectory):
    write_csv(path, FLOW_HEADER, zip(traj.iterations, traj.mean_energy, traj.std_energy,
                                     traj.temperature, traj.temperature_spread))


def read_trajectory(path, ensemble_size: int = 0, seed: int = 0) -> FlowTrajectory:
    rows = read_csv(path)
    cols = [np.array([_num(r[k]) for r in rows]) for k in FLOW_HEADER[1:]]
    return FlowTrajectory(*cols, ensemble_size=ensemble_size, seed=seed)


def sweep_rows(result: SweepResult):
    for p in result.points:
        fp = p.fixed_point
        if fp is None:
            yield (p.n_hidden, float("nan"), float("nan"), False, -1)
        else:
            yield (p.n_hidden, fp.energy, fp.temperature, fp.converged, fp.iterations)


def write_sweep(path, result: SweepResult):
    write_csv(path, SWEEP_HEADER, sweep_rows(result))


def write_spectrum(path, report: SpectralReport):
    stats = report.statistics if report.statistics is not None else [float("nan")] * report.n_visible
    classes = report.classes if report.classes is not None else [""] * report.n_visible
    write_csv(path, SPECTRUM_HEADER,
              zip(range(1, report.n_visible + 1), report.eigenvalues, stats, classes))


def pgm_bytes(image: np.ndarray) -> bytes:
    """8-bit binary graymap; values mapped affinely from [min, max] to [0, 255]."""
    img = np.asarray(image, dtype=float)
    lo, hi = img.min(), img.max()
    scaled = np.zeros(img.shape) if hi == lo else (img - lo) / (hi - lo) * 255.0
    pixels = np.rint(scaled).astype(np.uint8)
    h, w = pixels.shape
    return f"P5\n{w} {h}\n255\n".encode() + pixels.tobytes()


def write_pgm(path, image: np.ndarray):
    atomic_write(path, pgm_bytes(image))


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if parts[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM")
    w, h = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w)
