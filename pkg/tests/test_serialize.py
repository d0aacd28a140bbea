import json

import numpy as np

from fracsphere.fields import IsotropicSpectrum, SolutionParams, sample_gaussian_field
from fracsphere.serialize import (coeffs_from_csv, coeffs_to_csv, field_from_binary,
                                  field_to_binary, file_sha256, samples_to_csv,
                                  spectrum_report_to_csv, write_manifest)
from fracsphere.spectrum import build_report
from fracsphere.timechange import TimeChangeSample
import fracsphere.symbols as sym


def test_coeffs_round_trip(tmp_path):
    c = sample_gaussian_field(IsotropicSpectrum.power_law(1.0, 3.0), 6, 3)
    p = tmp_path / "coeffs.csv"
    coeffs_to_csv(c, p)
    back = coeffs_from_csv(p, real_field=True)
    assert back.lmax == 6
    assert np.abs(back.a - c.a).max() == 0.0
    header = p.read_text().splitlines()[0]
    assert header == "l,m,re,im"


def test_field_binary_round_trip(tmp_path):
    values = np.arange(12.0).reshape(3, 4)
    p = tmp_path / "map.f64"
    field_to_binary(values, p, {"lmax": 2, "t": 0.5, "seed": 9})
    back, meta = field_from_binary(p)
    assert np.array_equal(back, values)
    assert meta["n_theta"] == 3 and meta["n_phi"] == 4
    assert meta["t"] == 0.5


def test_samples_csv(tmp_path):
    rows = [TimeChangeSample(t=1.0, L=0.5, tau=0.25, seed=7)]
    p = tmp_path / "samples.csv"
    samples_to_csv(rows, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "t,L,tau,seed"
    assert lines[1].split(",")[3] == "7"


def test_spectrum_report_csv(tmp_path):
    spec = IsotropicSpectrum.power_law(1.0, 4.0)
    params = SolutionParams(phi=sym.stable(0.5),
                            psi=sym.SpectralSymbol(bernstein=sym.stable(0.5)),
                            gamma=0.0, t=1.0)
    r = build_report(spec, params, 4, n_realizations=8, rng_seed=0)
    p = tmp_path / "report.csv"
    spectrum_report_to_csv(r, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "l,C_l,C_l_t,C_star_l_t,bound,empirical"
    assert len(lines) == 6
    sidecar = json.loads((tmp_path / "report.csv.json").read_text())
    assert sidecar["lmax"] == 4


def test_manifest_hashes(tmp_path):
    p = tmp_path / "data.bin"
    p.write_bytes(b"hello")
    m = tmp_path / "manifest.json"
    write_manifest(m, "simulate", {"seed": 1}, [p])
    doc = json.loads(m.read_text())
    assert doc["command"] == "simulate"
    assert doc["outputs"][0]["sha256"] == file_sha256(p)
    assert doc["outputs"][0]["bytes"] == 5
