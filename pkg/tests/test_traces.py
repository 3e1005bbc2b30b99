"""Golden tests pinning the on-disk formats documented in docs/formats.md."""
import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given
from hypothesis import strategies as st

from chsplice.eval_harness import ScenarioConfig, run_scenario, two_path_scenario
from chsplice.ofdm_link import CfrMeasurement, build_band_plan, subcarrier_freqs
from chsplice.traces import (
    ECDF_COLUMNS,
    ESTIMATE_COLUMNS,
    PEAK_COLUMNS,
    TRACE_COLUMNS,
    TRACE_MAGIC,
    ConfigError,
    CfrTrace,
    TraceFormatError,
    TraceGridError,
    config_to_text,
    estimate_rows,
    parse_config,
    read_trace,
    write_ecdf,
    write_estimates,
    write_peaks,
    write_trace,
)

GOLDEN_TRACE = """\
# chsplice cfr trace v1
# total_bw_hz=6.0
# sub_bw_hz=3.0
# center_hz=100.0
# spacing_hz=1.0
# packets=1
# bands=0,1
# sparsity=2
packet,band,subcarrier,real,imag
0,0,-1,1.0,0.0
0,0,0,0.5,-0.25
0,0,1,0.0,1.0
0,1,-1,-1.0,0.0
0,1,0,1e-17,2.5
0,1,1,0.125,-0.125
"""


def _golden_trace():
    plan = build_band_plan(6.0, 3.0, 100.0, 1.0)
    vals = [[1, 0.5 - 0.25j, 1j], [-1, 1e-17 + 2.5j, 0.125 - 0.125j]]
    meas = [CfrMeasurement(m, subcarrier_freqs(plan, m), np.array(v, dtype=complex))
            for m, v in enumerate(vals)]
    return CfrTrace(6.0, 3.0, 100.0, 1.0, (0, 1), [meas], 2)


def test_column_constants():
    assert TRACE_MAGIC == "# chsplice cfr trace v1"
    assert ",".join(TRACE_COLUMNS) == "packet,band,subcarrier,real,imag"
    assert ",".join(ESTIMATE_COLUMNS) == "packet,rank,delay_ns,gain_abs,gain_phase_rad"
    assert ",".join(PEAK_COLUMNS) == (
        "packet,path,true_delay_ns,est_delay_ns,error_samples,missed,ref_delay_ns")
    assert ",".join(ECDF_COLUMNS) == "path,true_delay_ns,delay_ns,probability"


def test_trace_golden_bytes(tmp_path):
    path = tmp_path / "t.csv"
    write_trace(path, _golden_trace())
    assert path.read_text() == GOLDEN_TRACE


def test_trace_golden_read(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text(GOLDEN_TRACE)
    tr = read_trace(path)
    assert tr.bands == (0, 1) and tr.sparsity == 2 and len(tr.packets) == 1
    np.testing.assert_array_equal(tr.packets[0][1].samples, [-1, 1e-17 + 2.5j, 0.125 - 0.125j])
    np.testing.assert_array_equal(tr.packets[0][0].freqs, [97.5, 98.5, 99.5])


@given(st.lists(st.complex_numbers(max_magnitude=1e6, allow_nan=False, allow_infinity=False),
                min_size=6, max_size=6))
def test_trace_roundtrip_bit_exact(tmp_path_factory, values):
    tr = _golden_trace()
    tr.packets[0][0] = replace(tr.packets[0][0], samples=np.array(values[:3]))
    tr.packets[0][1] = replace(tr.packets[0][1], samples=np.array(values[3:]))
    path = tmp_path_factory.mktemp("rt") / "t.csv"
    write_trace(path, tr)
    back = read_trace(path)
    for a, b in zip(tr.packets[0], back.packets[0]):
        assert a.samples.tobytes() == b.samples.tobytes()


def _broken(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    return path


@pytest.mark.parametrize("edit, exc, match", [
    (lambda t: t.replace("v1", "v9"), TraceFormatError, "line 1"),
    (lambda t: t.replace("0,0,0,0.5,-0.25\n", ""), TraceFormatError,
     "packet 0 band 0: missing row.*subcarrier 0"),
    (lambda t: t + "0,0,0,0.5,-0.25\n", TraceFormatError, "duplicate"),
    (lambda t: t.replace("0,1,1,0.125,-0.125", "0,1,1,abc,-0.125"), TraceFormatError, "line 15"),
    (lambda t: t.replace("0,1,1,0.125,-0.125", "0,1,1,0.125"), TraceFormatError, "fields"),
    (lambda t: t.replace("# packets=1\n", ""), TraceFormatError, "packets"),
    (lambda t: t.replace("0,1,1,0.125", "0,1,2,0.125"), TraceGridError, "subcarrier 2"),
    (lambda t: t.replace("# bands=0,1", "# bands=0"), TraceGridError, "band 1"),
    (lambda t: t.replace("# bands=0,1", "# bands=0,2"), TraceGridError, "header bands"),
    (lambda t: t.replace("0,1,1,0.125", "3,1,1,0.125"), TraceGridError, "packet 3"),
])
def test_trace_validation(tmp_path, edit, exc, match):
    with pytest.raises(exc, match=match):
        read_trace(_broken(tmp_path, edit(GOLDEN_TRACE)))


def test_estimate_rows_golden(tmp_path):
    path = tmp_path / "e.csv"
    write_estimates(path, estimate_rows(4, [(0.0, 1 + 0j), (18.75e-9, -2j)]))
    assert path.read_text() == (
        "packet,rank,delay_ns,gain_abs,gain_phase_rad\n"
        "4,0,0.0,1.0,0.0\n"
        "4,1,18.75,2.0,-1.5707963267948966\n")


def test_peaks_and_ecdf_golden_noiseless(tmp_path):
    cfg = ScenarioConfig(snr_db=None, packets=1, delays=(0.0,), powers_db=(0.0,))
    rep = run_scenario(cfg)
    write_peaks(tmp_path / "p.csv", rep)
    write_ecdf(tmp_path / "c.csv", rep)
    assert (tmp_path / "p.csv").read_text() == (
        "packet,path,true_delay_ns,est_delay_ns,error_samples,missed,ref_delay_ns\n"
        "0,0,0.0,0.0,0.0,0,0.0\n")
    assert (tmp_path / "c.csv").read_text() == (
        "path,true_delay_ns,delay_ns,probability\n"
        "0,0.0,0.0,1.0\n")


def test_peaks_rows_per_packet(tmp_path):
    rep = run_scenario(two_path_scenario(40e6, packets=3, seed=1))
    write_peaks(tmp_path / "p.csv", rep)
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert len(lines) == 1 + 3 * 2


# ---------------------------------------------------------------- configs

@pytest.mark.parametrize("cfg", [
    ScenarioConfig(),
    two_path_scenario(40e6, 0.5, seed=7, snr_db=None),
    ScenarioConfig(subset_policy="explicit", subset_bands=(1, 5), sparsity=3, tol=1e-4,
                   delays=(0.0, 18.75e-9, 200e-9), powers_db=(0.0, -2.0, -3.5)),
])
def test_config_text_roundtrip(cfg):
    assert parse_config(config_to_text(cfg)) == cfg


def test_config_defaults_and_units():
    cfg = parse_config("[band_plan]\nsub_bw_mhz = 40\n[channel]\ndelays_ns = 0, 18.75\n")
    assert cfg.sub_bw == 40e6
    assert cfg.delays == (0.0, 18.75e-9)
    assert cfg.powers_db == (0.0, 0.0)
    assert parse_config("[noise]\nsnr_db = none\n").snr_db is None


@pytest.mark.parametrize("text", [
    "[bogus]\nx = 1\n",
    "[run]\npackets = lots\n",
    "[run]\nspeed = 3\n",
    "[channel]\ngain_mode = rician\n",
    "[channel]\ndelays_ns = 0, 1\npowers_db = 0\n",
    "not a config",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_shipped_configs_parse():
    from pathlib import Path
    cfgs = sorted((Path(__file__).parents[1] / "configs").glob("*.ini"))
    assert len(cfgs) >= 9
    for p in cfgs:
        cfg = parse_config(p.read_text())
        assert cfg.band_plan().num_bands * cfg.sub_bw == pytest.approx(cfg.total_bw)
