"""File formats: coefficient CSV, binary field maps with JSON sidecars,
time-change sample CSV, spectrum report CSV, and run manifests with content
hashes.  All writers emit deterministic bytes for fixed inputs (floats via
repr, JSON with sorted keys, no timestamps).
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .sphere import HarmonicCoeffs
from .spectrum import SpectrumReport
from .timechange import TimeChangeSample

__all__ = [
    "coeffs_to_csv",
    "coeffs_from_csv",
    "field_to_binary",
    "field_from_binary",
    "samples_to_csv",
    "spectrum_report_to_csv",
    "write_manifest",
    "file_sha256",
]


def _fmt(x: float) -> str:
    return repr(float(x))


def coeffs_to_csv(coeffs: HarmonicCoeffs, path) -> None:
    """Write coefficients as rows `l,m,re,im` over the full truncation."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["l", "m", "re", "im"])
        for l in range(coeffs.lmax + 1):
            for m in range(-l, l + 1):
                v = coeffs.get(l, m)
                w.writerow([l, m, _fmt(v.real), _fmt(v.imag)])


def coeffs_from_csv(path, real_field: bool = False) -> HarmonicCoeffs:
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            rows.append((int(row["l"]), int(row["m"]),
                         float(row["re"]), float(row["im"])))
    if not rows:
        raise ValueError(f"{path} holds no coefficients")
    lmax = max(r[0] for r in rows)
    out = HarmonicCoeffs(lmax, real_field=real_field)
    for l, m, re, im in rows:
        out.set(l, m, complex(re, im))
    return out


def field_to_binary(values: np.ndarray, path, sidecar: dict) -> None:
    """Row-major (theta-major) float64 map plus a JSON sidecar `<path>.json`."""
    path = Path(path)
    arr = np.ascontiguousarray(np.asarray(values, dtype=np.float64))
    path.write_bytes(arr.tobytes())
    meta = dict(sidecar)
    meta.setdefault("n_theta", arr.shape[0])
    meta.setdefault("n_phi", arr.shape[1])
    with Path(str(path) + ".json").open("w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
        fh.write("\n")


def field_from_binary(path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    with Path(str(path) + ".json").open() as fh:
        meta = json.load(fh)
    raw = np.frombuffer(path.read_bytes(), dtype=np.float64)
    values = raw.reshape(meta["n_theta"], meta["n_phi"])
    return values, meta


def samples_to_csv(samples: list[TimeChangeSample], path) -> None:
    """Time-change batches export with header `t,L,tau,seed`."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "L", "tau", "seed"])
        for s in samples:
            w.writerow([_fmt(s.t), _fmt(s.L), _fmt(s.tau), s.seed])


def spectrum_report_to_csv(report: SpectrumReport, path) -> None:
    """CSV `l,C_l,C_l_t,C_star_l_t,bound,empirical` plus a metadata sidecar."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["l", "C_l", "C_l_t", "C_star_l_t", "bound", "empirical"])
        for i, l in enumerate(report.ls):
            w.writerow([int(l), _fmt(report.cl[i]), _fmt(report.cl_t[i]),
                        _fmt(report.cstar_t[i]), _fmt(report.bound[i]),
                        _fmt(report.empirical[i])])
    with Path(str(path) + ".json").open("w") as fh:
        json.dump(report.metadata, fh, sort_keys=True, indent=2)
        fh.write("\n")


def file_sha256(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def write_manifest(path, command: str, config: dict, outputs: list) -> None:
    """Manifest JSON: command, full config echo, package version, and
    per-file content hashes."""
    from . import __version__
    entries = [{"path": str(Path(p).name), "sha256": file_sha256(p),
                "bytes": Path(p).stat().st_size} for p in outputs]
    doc = {"command": command, "config": config,
           "versions": {"fracsphere": __version__}, "outputs": entries}
    with Path(path).open("w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")
