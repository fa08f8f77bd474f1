import json
import socket
import subprocess
import sys
import time

import numpy as np
import pytest
import requests

from bbrobust.cli import main
from bbrobust.imgcore import load_image, save_image
from bbrobust.synthetic import class_dataset, fusion_background, natural_fixture, write_dataset


@pytest.fixture
def dataset(tmp_path):
    return write_dataset(tmp_path / "data", class_dataset(2, seed=3, size=40))


def _json_lines(capsys):
    return [json.loads(line) for line in capsys.readouterr().out.splitlines() if line.strip()]


def test_perturb_and_metrics(tmp_path, capsys):
    save_image(natural_fixture(1, 32), tmp_path / "in.png")
    rc = main(["perturb", str(tmp_path / "in.png"), "--attack", "saltpepper:amount=0.1",
               "--seed", "4", "--out", str(tmp_path / "adv.ppm"), "--format", "ppm"])
    assert rc == 0
    info = _json_lines(capsys)[0]
    assert info["attack"] == "saltpepper:amount=0.1"
    assert load_image(tmp_path / "adv.ppm").shape == (32, 32, 3)
    assert main(["metrics", str(tmp_path / "in.png"), str(tmp_path / "adv.ppm")]) == 0
    assert _json_lines(capsys)[0] == info["quality"]
    assert main(["metrics", str(tmp_path / "in.png"), str(tmp_path / "in.png")]) == 0
    assert _json_lines(capsys)[0]["psnr"] == "inf"


def test_exit_codes(tmp_path, capsys):
    save_image(natural_fixture(1, 16), tmp_path / "in.png")
    assert main(["perturb", str(tmp_path / "in.png"), "--attack", "blur:k=3",
                 "--out", str(tmp_path / "x.png")]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["no-such-verb"])
    assert exc.value.code == 1
    assert main(["metrics", str(tmp_path / "missing.png"), str(tmp_path / "in.png")]) == 2
    (tmp_path / "hello.txt").write_text("hello")
    assert main(["metrics", str(tmp_path / "hello.txt"), str(tmp_path / "in.png")]) == 2


def test_train_predict_ref(tmp_path, dataset, capsys):
    model = tmp_path / "model.json"
    assert main(["train-ref", "--manifest", str(dataset), "--out", str(model)]) == 0
    assert _json_lines(capsys)[0]["classes"] == ["tench", "goldfish", "white shark", "cat"]
    img = dataset.parent / "goldfish_0001.png"
    assert main(["predict-ref", str(img), "--backend", f"ref:{model}"]) == 0
    assert _json_lines(capsys)[0]["labels"][0]["name"] == "goldfish"
    assert main(["train-ref", "--manifest", str(dataset), "--augment", "--passes", "1",
                 "--out", str(tmp_path / "aug.json")]) == 0


def test_defend(tmp_path, capsys):
    noisy = np.array(natural_fixture(2, 32))
    noisy[5, 5] = 255
    save_image(noisy, tmp_path / "n.png")
    mono = np.zeros((20, 20, 3), np.uint8)
    mono[..., 2] = 99
    save_image(mono, tmp_path / "m.png")
    rc = main(["defend", str(tmp_path / "n.png"), str(tmp_path / "m.png"),
               "--defense", "median:ksize=3,rejectmono", "--out", str(tmp_path / "out")])
    assert rc == 0
    rows = _json_lines(capsys)
    assert rows[0]["out"].endswith("n.png") and rows[1]["rejected"] == "single_channel(blue)"
    assert main(["defend", str(tmp_path / "n.png"), "--defense", "median:ksize=4",
                 "--out", str(tmp_path / "o2")]) == 1


def test_sweep_and_plot_data(tmp_path, dataset, capsys):
    model = tmp_path / "model.json"
    main(["train-ref", "--manifest", str(dataset), "--out", str(model)])
    capsys.readouterr()
    out = tmp_path / "sweep"
    rc = main(["sweep", "--manifest", str(dataset), "--backend", f"ref:{model}",
               "--grid", "gaussian:var=0.05;gray", "--defense", "none",
               "--defense", "median:ksize=3", "--out", str(out), "--seed", "1"])
    assert rc == 0
    assert _json_lines(capsys)[0]["records"] == 2 * 8 * 3
    assert len((out / "records.jsonl").read_text().splitlines()) == 48
    assert main(["plot-data", str(out / "records.jsonl"), "--figure", "defense_by_ksize",
                 "--out", str(tmp_path / "k.csv")]) == 0
    assert (tmp_path / "k.csv").read_text().startswith("series,x,y\n")

    save_image(fusion_background(2, 64), tmp_path / "bg.png")
    rc = main(["sweep", "--manifest", str(dataset), "--backend", f"ref:{model}", "--grid", "fusion",
               "--background", str(tmp_path / "bg.png"), "--out", str(tmp_path / "f"),
               "--format", "jsonl"])
    assert rc == 0
    main(["plot-data", str(tmp_path / "f" / "records.jsonl"), "--figure", "psnr_by_alpha",
          "--out", str(tmp_path / "p.csv")])
    assert (tmp_path / "p.csv").read_text().splitlines()[-1] == "psnr,1.0,40.0"


def test_sweep_strict_unavailable(tmp_path, dataset, stub, capsys):
    stub.fail_status, stub.fail_count = 500, -1

    rc = main(["sweep", "--manifest", str(dataset), "--backend", stub.url, "--grid", "gray",
               "--strict", "--out", str(tmp_path / "s")])
    assert rc == 3


def _free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def test_stub_serve_subprocess(tmp_path):
    fixture = tmp_path / "fx.json"
    fixture.write_text(json.dumps({"default": {"labels": [{"name": "Egyptian cat", "confidence": 0.9}]}}))
    port = _free_port()
    proc = subprocess.Popen([sys.executable, "-m", "bbrobust.cli", "stub-serve", "--port", str(port),
                             "--fixture", str(fixture)], stdout=subprocess.PIPE, text=True)
    try:
        assert proc.stdout.readline().startswith("serving on")
        from bbrobust.classifier import RemoteBackend

        cls = RemoteBackend(f"http://127.0.0.1:{port}").classify(natural_fixture(0, 16))
        assert cls.top1().name == "Egyptian cat"
        assert requests.get(f"http://127.0.0.1:{port}/v1/stats").json() == {"calls": 1}
    finally:
        proc.terminate()
        proc.wait(5)
