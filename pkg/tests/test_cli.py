import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from ethemit.cli import main
from ethemit.harness import parse_csv
from ethemit.sinks import read_trace

GOLDEN = Path(__file__).parent / "golden"
SMALL = ["--sample-rate", "64000", "--window-size", "64", "--offset", "4000"]  # 100 windows/bit at 10 bit/s


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_help(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--help"])
    assert exc.value.code == 0
    assert "--snr" in capsys.readouterr().out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ethemit", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "evaluate" in proc.stdout


def test_usage_errors_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["tx", "--rate", "-3", "--message", "x"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 1
    assert run(capsys, "tx", "--message", "")[0] == 1


def test_toggle_rate_rejected_on_pc(capsys):
    code, _, err = run(capsys, "tx", "--method", "toggle", "--rate", "10", "--message", "DATA")
    assert code == 1 and "0.1246" in err


def test_tx_trace_bursts_in_on_chips(capsys, tmp_path):
    code, _, _ = run(capsys, "tx", "--method", "udp", "--rate", "10", "--message", "DATA",
                     "--record", tmp_path / "out.trace")
    assert code == 0
    trace = read_trace(tmp_path / "out.trace")
    from ethemit.framing import build_frame
    from ethemit.linecode import manchester_encode
    chips = [0] * 6 + list(manchester_encode(build_frame(b"DATA").to_bits()).chips) + [0] * 6
    assert trace and all(chips[int(t / 0.05 + 1e-9)] == 1 for t, _ in trace)
    assert len(trace) == 48 * 5


def test_tx_simulate_rx_pipeline(capsys, tmp_path):
    assert run(capsys, "tx", "--message", "DATA", "--report", tmp_path / "tx.json")[0] == 0
    cap = tmp_path / "cap.cu8"
    assert run(capsys, "simulate", "--report", tmp_path / "tx.json", "--out", cap, "--format", "cu8",
               "--snr", "24", "--seed", "3", *SMALL)[0] == 0
    code, out, _ = run(capsys, "rx", cap, "--window-size", "64", "--report", tmp_path / "rx.json")
    assert code == 0 and out.split() == ["44415441"]
    assert (tmp_path / "rx.json").exists()


def test_multi_frame_message_through_files(capsys, tmp_path):
    msg = "exfil"
    run(capsys, "tx", "--message", msg, "--record", tmp_path / "t")
    run(capsys, "simulate", "--trace", tmp_path / "t", "--out", tmp_path / "c.cf32", *SMALL)
    code, out, _ = run(capsys, "rx", tmp_path / "c.cf32", "--window-size", "64")
    assert code == 0
    assert bytes.fromhex("".join(out.split())).rstrip(b"\0") == msg.encode()


def test_rx_noise_only_exit_2(capsys, tmp_path):
    run(capsys, "tx", "--message", "DATA", "--report", tmp_path / "tx.json")
    run(capsys, "simulate", "--report", tmp_path / "tx.json", "--out", tmp_path / "n.cf32", "--snr", "-40",
        *SMALL)
    code, out, _ = run(capsys, "rx", tmp_path / "n.cf32", "--window-size", "64")
    assert code == 2 and out == ""


def test_rx_truncated_file(capsys, tmp_path):
    run(capsys, "tx", "--message", "DATAMORE", "--report", tmp_path / "tx.json")
    cap = tmp_path / "c.cf32"
    run(capsys, "simulate", "--report", tmp_path / "tx.json", "--out", cap, *SMALL)
    raw = cap.read_bytes()
    cap.write_bytes(raw[: len(raw) * 6 // 10 + 3])
    code, out, _ = run(capsys, "rx", cap, "--window-size", "64")
    assert code == 0 and out.split() == ["44415441"]


def test_rx_missing_sidecar(capsys, tmp_path):
    (tmp_path / "x.cu8").write_bytes(b"\x80" * 100)
    code, _, err = run(capsys, "rx", tmp_path / "x.cu8")
    assert code == 1 and "sidecar" in err


def test_simulate_deterministic(capsys, tmp_path):
    run(capsys, "tx", "--message", "DATA", "--report", tmp_path / "tx.json")
    for name in ("a", "b"):
        run(capsys, "simulate", "--report", tmp_path / "tx.json", "--out", tmp_path / f"{name}.cu8",
            "--format", "cu8", "--snr", "10", "--seed", "9", *SMALL)
    assert (tmp_path / "a.cu8").read_bytes() == (tmp_path / "b.cu8").read_bytes()


def test_evaluate_golden(capsys):
    code, out, _ = run(capsys, "evaluate", "--preset", "pc", "--method", "udp", "--rates", "1,5,10",
                       "--snrs", "5,13,24", "--seed", "7")
    assert code == 0
    assert out == (GOLDEN / "evaluate_pc_udp_seed7.csv").read_text()
    assert len(parse_csv(out).cells) == 9


def test_evaluate_rejects_infeasible(capsys):
    code, _, err = run(capsys, "evaluate", "--method", "toggle", "--rates", "1", "--snrs", "10")
    assert code == 1 and "toggle limit" in err


def test_detect_link(capsys, tmp_path):
    assert run(capsys, "tx", "--method", "toggle", "--preset", "embedded", "--rate", "1", "--message", "DATA",
               "--events", tmp_path / "events.log")[0] == 0
    code, out, _ = run(capsys, "detect", "--link", tmp_path / "events.log")
    assert code == 0 and "ALERT link-toggling" in out
    (tmp_path / "one.log").write_text("12.0 up 1000\n")
    assert "no alerts" in run(capsys, "detect", "--link", tmp_path / "one.log")[1]


def test_detect_traffic(capsys, tmp_path):
    run(capsys, "tx", "--message", "a longer secret message", "--record", tmp_path / "t")
    code, out, _ = run(capsys, "detect", "--traffic", tmp_path / "t")
    assert code == 0 and "ALERT ook-traffic" in out
    (tmp_path / "short").write_text("0.0 10\n0.05 10\n")
    assert run(capsys, "detect", "--traffic", tmp_path / "short")[0] == 2


def test_jam(capsys, tmp_path):
    for name in ("a", "b"):
        assert run(capsys, "jam", "--duration", "5", "--seed", "4", "--size", "100,200",
                   "--out", tmp_path / name)[0] == 0
    a = read_trace(tmp_path / "a")
    assert a == read_trace(tmp_path / "b") and all(100 <= n <= 200 for _, n in a)
    assert run(capsys, "jam", "--duration", "1", "--size", "300,200")[0] == 1


def test_simulate_with_jam_trace(capsys, tmp_path):
    run(capsys, "tx", "--message", "DATA", "--report", tmp_path / "tx.json")
    run(capsys, "jam", "--duration", "5", "--seed", "1", "--out", tmp_path / "j")
    assert run(capsys, "simulate", "--report", tmp_path / "tx.json", "--out", tmp_path / "c.cf32",
               "--jam-trace", tmp_path / "j", *SMALL)[0] == 0
    x = np.fromfile(tmp_path / "c.cf32", dtype="<f4")
    assert np.isfinite(x).all()
