import json
import math
import subprocess
import sys

import pytest

from isocone import cli
from isocone.spherical_domain import DomainSpec, triangulate

CAP = {"kind": "cap", "center": [0, 0, 1], "aperture": math.pi / 3}


def run(tmp_path, workflow, config, *extra):
    cfg_path = tmp_path / f"{workflow}.json"
    cfg_path.write_text(json.dumps(config))
    out = tmp_path / f"out_{workflow}"
    code = cli.main([workflow, "--config", str(cfg_path), "--out", str(out), *extra])
    report = json.loads((out / "report.json").read_text()) if (out / "report.json").exists() else None
    return code, report, out


def test_eigen_workflow(tmp_path):
    code, rep, out = run(tmp_path, "eigen", {"workflow": "eigen", "domain": CAP, "h": 0.05})
    assert code == 0
    res = rep["results"]
    assert res["mu1"] > math.sqrt(2) + 0.01
    assert res["oracle_relative_error"] < 0.01
    assert rep["inputs"]["domain"] == CAP and rep["inputs"]["h"] == 0.05
    assert set(rep["versions"]) == {"isocone", "numpy", "scipy", "python"}
    assert rep["wall_time_s"] > 0
    text = (out / "eigenvector.csv").read_bytes()
    assert b"\r" not in text and text.startswith(b"vertex,x1,x2,x3,v\n")
    assert not [p for p in out.iterdir() if p.name.endswith(".tmp")]


def test_report_reproducible_from_echoed_inputs(tmp_path):
    code, rep, _ = run(tmp_path, "eigen", {"workflow": "eigen", "domain": CAP, "h": 0.08})
    again = tmp_path / "again"
    again.mkdir()
    inputs = dict(rep["inputs"], output_dir=str(again / "out"))
    code2, rep2, _ = run(again, "eigen", inputs)
    assert code == code2 == 0
    assert rep["results"] == rep2["results"]


def test_domain_and_mesh_files(tmp_path):
    (tmp_path / "dom.json").write_text(json.dumps(CAP))
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"workflow": "eigen", "domain": "dom.json", "h": 0.08}))
    assert cli.main(["eigen", "--config", str(cfg), "--out", str(tmp_path / "o1")]) == 0
    mesh = triangulate(DomainSpec.cap(1.0), 0.1)
    (tmp_path / "mesh.json").write_text(mesh.to_json())
    code, rep, _ = run(tmp_path, "eigen", {"workflow": "eigen", "mesh": str(tmp_path / "mesh.json")})
    assert code == 0 and rep["results"]["n_vertices"] == mesh.n_vertices


def test_minimize_workflow(tmp_path):
    cfg = {"workflow": "minimize", "domain": CAP, "h": 0.1, "params": {"starts": 3, "amplitude": 0.2}}
    code, rep, out = run(tmp_path, "minimize", cfg)
    assert code == 0
    assert rep["results"]["is_sector"] is True and rep["results"]["all_sector"] is True
    assert len(rep["results"]["stationary_points"]) == 1
    for k in range(3):
        assert (out / f"history_{k}.csv").read_text().startswith("iter,perimeter,volume,grad_norm\n")


def test_minimize_non_convergence_exit_3(tmp_path):
    cfg = {"workflow": "minimize", "domain": CAP, "h": 0.1, "params": {"max_iter": 1}}
    code, rep, _ = run(tmp_path, "minimize", cfg)
    assert code == 3 and rep["status"] == 3


def test_other_workflows(tmp_path):
    code, rep, out = run(
        tmp_path, "sweep", {"workflow": "sweep", "domain": CAP, "h": 0.1, "params": {"family": "mode"}}
    )
    assert code == 0 and rep["results"]["mode"]["delta_increasing_in_epsilon"]
    assert (out / "sweep_mode.csv").read_text().startswith("epsilon,hausdorff,mu1_base,mu1_pert,delta_mu1,h\n")
    code, rep, out = run(tmp_path, "lemma1", {"workflow": "lemma1", "domain": CAP, "h": 0.1, "params": {"n_samples": 20}})
    assert code == 0 and rep["results"]["holds"] == 20
    code, rep, out = run(tmp_path, "inequalities", {"workflow": "inequalities", "params": {"n_samples": 1000}})
    assert code == 0 and all(r["failures"] == 0 for r in rep["results"].values())
    assert (out / "inequalities.csv").exists()
    dumb = {"kind": "dumbbell", "lobe_aperture": 0.5, "separation": 1.4, "neck_halfwidth": 0.05}
    code, rep, _ = run(tmp_path, "dumbbell", {"workflow": "dumbbell", "domain": dumb, "h": 0.05})
    assert code == 0 and rep["results"]["deficit"] < 0


@pytest.mark.parametrize(
    "config, needle",
    [
        ({"workflow": "eigen", "domain": {"kind": "cap", "aperture": "wide"}, "h": 0.05}, "aperture"),
        ({"workflow": "eigen", "domain": {"kind": "cap", "aperture": 2.5}, "h": 0.05}, "aperture"),
        ({"workflow": "eigen", "domain": CAP, "h": -0.1}, "h"),
        ({"workflow": "eigen", "domain": CAP}, "h"),
        ({"workflow": "eigen", "domain": CAP, "h": 0.05, "colour": "red"}, "colour"),
        ({"workflow": "sweep", "domain": CAP, "h": 0.05}, "workflow"),
        ({"workflow": "minimize", "domain": CAP, "h": 0.1, "params": {"amplitude": 2.0}}, "amplitude"),
    ],
)
def test_validation_exit_2(tmp_path, capsys, config, needle):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(config))
    wf = "minimize" if config.get("params", {}).get("amplitude") else "eigen"
    assert cli.main([wf, "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert needle in capsys.readouterr().err


def test_malformed_config_json_exit_2(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"workflow": "eigen", ')
    assert cli.main(["eigen", "--config", str(cfg)]) == 2
    assert "malformed JSON" in capsys.readouterr().err


def test_io_errors_exit_1(tmp_path):
    assert cli.main(["eigen", "--config", str(tmp_path / "missing.json")]) == 1
    (tmp_path / "bad_mesh.json").write_text('{"vertices": [[0, 0, 1]], "triangles": [')
    cfg = {"workflow": "eigen", "mesh": str(tmp_path / "bad_mesh.json")}
    code, rep, _ = run(tmp_path, "eigen", cfg)
    assert code == 1 and rep["status"] == 1
    cfg = {"workflow": "verify", "mesh": str(tmp_path / "bad_mesh.json")}
    code, _, _ = run(tmp_path, "verify", cfg)
    assert code == 1
    assert cli.main(["eigen", "--config", str(tmp_path / "x.json"), "--h", "0.1"]) == 1


def test_cli_overrides(tmp_path):
    code, rep, _ = run(tmp_path, "eigen", {"workflow": "eigen", "domain": CAP, "h": 0.5}, "--h", "0.08", "--seed", "4")
    assert code == 0 and rep["inputs"]["h"] == 0.08 and rep["inputs"]["seed"] == 4


def test_console_script(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"workflow": "inequalities", "params": {"n_samples": 100}}))
    proc = subprocess.run(
        [sys.executable, "-m", "isocone.cli", "inequalities", "--config", str(cfg), "--out", str(tmp_path / "o")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    proc = subprocess.run([sys.executable, "-m", "isocone.cli", "nonsense"], capture_output=True, text=True)
    assert proc.returncode == 2


@pytest.mark.slow
def test_verify_workflow(tmp_path):
    codes = []
    for seed in ("0", "3"):
        out = tmp_path / f"v{seed}"
        codes.append(cli.main(["verify", "--seed", seed, "--out", str(out)]))
        rep = json.loads((out / "report.json").read_text())
        assert rep["results"]["all_passed"]
        assert (out / "verify.csv").read_text().startswith("check,passed,worst_margin,detail\n")
    assert codes == [0, 0]
