import csv
import json
import os
import signal
import subprocess
import sys
import time

import numpy as np
import pytest

from viewsim.cli import main
from viewsim.imageio import load_png, read_flo

from tests.wire_client import WireAgent

# one static slab watched by a motionless camera: every flow image is black
STATIC_DOC = {
    "name": "static_slab",
    "seed": 5,
    "categories": [{"id": 1, "name": "slab"}],
    "objects": [
        {
            "name": "slab",
            "primitive": {"kind": "box", "size": [2.0, 0.5, 2.0]},
            "albedo": [0.3, 0.6, 0.9],
            "pose": {"position": [0.0, 0.5, 0.0], "euler_deg": [0.0, 25.0, 0.0]},
            "category": 1,
            "static": True,
        }
    ],
    "mover": {
        "waypoints": [{"position": [0.0, 1.0, 4.0], "euler_deg": [0.0, 0.0, 0.0]}],
        "total_time": 4.0,
    },
}


def run(*argv):
    return main(list(argv))


def test_help_exits_zero(capsys):
    assert run("--help") == 0
    assert "serve" in capsys.readouterr().out


def test_usage_errors_exit_one(capsys):
    assert run() == 1
    assert run("frobnicate") == 1
    assert run("dump", "no_such_scene") == 1
    assert run("dump", "optical", "--resolution", "banana") == 1
    assert run("dump", "optical", "--seconds", "-1") == 1
    assert run("bench", "--scene", "no_such_scene", "--samples", "3") == 1
    assert capsys.readouterr().err.count("error:") == 6


def test_runtime_errors_exit_two(tmp_path, capsys):
    missing = tmp_path / "missing.json"
    assert run("dump", str(missing)) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("serve", "--scene", str(bad)) == 2
    assert capsys.readouterr().err.count("error:") == 2


def test_dump_writes_expected_files(tmp_path, capsys):
    out = tmp_path / "frames"
    assert run("dump", "optical", "--seconds", "1", "--fps", "10",
               "--resolution", "96x72", "--outdir", str(out)) == 0
    flo = sorted(out.glob("*_flow.flo"))
    assert len(flo) == 10
    for suffix in ("main", "category", "object", "depth", "flow_hsv"):
        assert len(list(out.glob(f"*_{suffix}.png"))) == 10
    # ticks sampled every round(60/10)=6 steps, names carry the tick index
    assert (out / "t000000_main.png").exists()
    assert (out / "t000054_main.png").exists()
    img = load_png(out / "t000000_main.png")
    assert img.shape == (72, 96, 3)
    field = read_flo(flo[-1])
    assert field.shape == (72, 96, 2)
    assert np.abs(field).max() > 0  # spinning solids produce motion


def test_dump_is_deterministic(tmp_path):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    for out in (out_a, out_b):
        assert run("dump", "room_simple", "--seconds", "0.5", "--fps", "4",
                   "--resolution", "64x48", "--outdir", str(out), "--seed", "77") == 0
    names = sorted(p.name for p in out_a.iterdir())
    assert names == sorted(p.name for p in out_b.iterdir())
    for name in names:
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_dump_static_scene_has_black_flow_images(tmp_path):
    doc = tmp_path / "static.json"
    doc.write_text(json.dumps(STATIC_DOC))
    out = tmp_path / "frames"
    assert run("dump", str(doc), "--seconds", "0.3", "--fps", "10",
               "--resolution", "64x48", "--outdir", str(out)) == 0
    hsv_files = list(out.glob("*_flow_hsv.png"))
    assert len(hsv_files) == 3
    for path in hsv_files:
        assert not load_png(path).any()
    for path in out.glob("*_flow.flo"):
        assert not read_flo(path).any()


def test_bench_writes_csv(tmp_path, capsys):
    out = tmp_path / "timings.csv"
    assert run("bench", "--resolution", "64x48", "--resolution", "96x72",
               "--samples", "2", "--warmup", "1", "--out", str(out)) == 0
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["resolution", "method", "mean_s", "ci95_s", "n"]
    assert [(r[0], r[1]) for r in rows[1:]] == [
        ("64x48", "engine"), ("64x48", "block_match"),
        ("96x72", "engine"), ("96x72", "block_match"),
    ]
    assert all(float(r[2]) > 0 for r in rows[1:])
    assert "wrote" in capsys.readouterr().out


@pytest.fixture
def serve_proc():
    env = dict(os.environ, VIEWSIM_PORT="0")
    proc = subprocess.Popen(
        [sys.executable, "-m", "viewsim", "serve"],
        stdout=subprocess.PIPE, stderr=subprocess.DEVNULL, text=True, env=env,
    )
    try:
        banner = proc.stdout.readline().strip()
        assert banner.startswith("listening on 127.0.0.1:")
        yield proc, int(banner.rsplit(":", 1)[1])
    finally:
        if proc.poll() is None:
            proc.kill()
            proc.wait()


def test_serve_honors_port_env_and_talks_protocol(serve_proc):
    proc, port = serve_proc
    agent = WireAgent(port)
    try:
        reply = agent.register(64, 48)
        assert reply.scene_names == ("room_simple", "optical")
        frame = agent.get_frame()
        assert sorted(frame) == ["category", "depth", "flow", "main", "object"]
        assert frame["main"].shape == (48, 64, 3)
    finally:
        agent.sock.close()


def test_serve_stops_cleanly_on_sigint(serve_proc):
    proc, _port = serve_proc
    time.sleep(0.2)
    proc.send_signal(signal.SIGINT)
    assert proc.wait(timeout=10) == 0
