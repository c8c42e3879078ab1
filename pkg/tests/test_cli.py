import json

from click.testing import CliRunner

from framepipe.cli import cli
from framepipe.plugin import Param, Plugin, register


def invoke(*args):
    return CliRunner().invoke(cli, [str(a) for a in args])


def make_list(tmp_path, n_theta=10, n_y=4, n_x=8):
    path = tmp_path / "list.json"
    assert invoke("config", "new", path).exit_code == 0
    steps = [
        ("SyntheticTomoLoader", [f"n_theta={n_theta}", f"n_y={n_y}", f"n_x={n_x}"]),
        ("DarkFlatCorrect", ['in_datasets=["tomo","dark","flat"]', 'out_datasets=["tomo"]']),
        ("MinusLog", ['in_datasets=["tomo"]']),
        ("FbpRecon", ['in_datasets=["tomo"]', 'out_datasets=["recon"]']),
        ("ContainerSaver", []),
    ]
    for name, sets in steps:
        args = ["config", "add", path, name]
        for s in sets:
            args += ["--set", s]
        assert invoke(*args).exit_code == 0
    return path


def test_config_new_and_add_defaults(tmp_path):
    path = tmp_path / "l.json"
    invoke("config", "new", path)
    assert json.loads(path.read_text()) == {"plugins": []}
    assert invoke("config", "new", path).exit_code == 1
    result = invoke("config", "add", path, "MinusLog")
    assert result.exit_code == 0
    entry = json.loads(path.read_text())["plugins"][0]
    assert entry["name"] == "MinusLog" and entry["params"]["pattern"] == "SINOGRAM"


def test_set_then_show(tmp_path):
    path = tmp_path / "l.json"
    invoke("config", "new", path)
    invoke("config", "add", path, "SyntheticTomoLoader")
    invoke("config", "add", path, "MinusLog")
    assert invoke("config", "set", path, 2, "in_datasets", '["tomo"]').exit_code == 0
    shown = invoke("config", "show", path).output
    assert '  2  MinusLog' in shown and 'in_datasets = ["tomo"]' in shown


def test_remove_move_and_errors(tmp_path):
    path = make_list(tmp_path)
    assert invoke("config", "move", path, 5, 1).exit_code == 0
    assert invoke("config", "remove", path, 1).exit_code == 0
    names = [p["name"] for p in json.loads(path.read_text())["plugins"]]
    assert names[0] == "SyntheticTomoLoader" and len(names) == 4
    assert invoke("config", "remove", path, 9).exit_code == 1
    assert invoke("config", "add", path, "NoSuchPlugin").exit_code == 1
    assert invoke("config", "set", path, 1, "nope", "1").exit_code == 1
    assert invoke("config", "show", tmp_path / "missing.json").exit_code == 1


def test_toggle_and_plugins(tmp_path):
    path = make_list(tmp_path)
    invoke("config", "toggle", path, 4)
    assert json.loads(path.read_text())["plugins"][3]["active"] is False
    assert "(inactive)" in invoke("config", "show", path).output
    listing = invoke("config", "plugins").output
    assert "FbpRecon" in listing and "loader" in listing
    schema = invoke("config", "plugins", "MedianFilter").output
    assert "frames" in schema and "default=4" in schema


def test_run_valid_chain(tmp_path):
    path = make_list(tmp_path)
    out = tmp_path / "out"
    result = invoke("run", path, out, "--workers", 2)
    assert result.exit_code == 0, result.output
    assert result.output.splitlines()[0] == str(out / "manifest.json")
    assert (out / "run.log").exists() and (out / "p4_recon.cnt").exists()


def test_run_with_inter_dir(tmp_path):
    path = make_list(tmp_path)
    out, inter = tmp_path / "out", tmp_path / "inter"
    assert invoke("run", path, out, "--inter-dir", inter, "--log", tmp_path / "x.log").exit_code == 0
    assert sorted(p.name for p in inter.iterdir()) == ["p1_dark.cnt", "p1_flat.cnt", "p1_tomo.cnt",
                                                      "p2_tomo.cnt", "p3_tomo.cnt"]
    assert {p.name for p in out.iterdir()} == {"manifest.json", "p4_recon.cnt", "p5_dark.cnt", "p5_flat.cnt"}
    assert (tmp_path / "x.log").exists()


def test_run_mismatched_name_exits_2_without_files(tmp_path):
    path = make_list(tmp_path)
    invoke("config", "set", path, 3, "in_datasets", '["tomogram"]')
    out = tmp_path / "out"
    result = invoke("run", path, out)
    assert result.exit_code == 2
    assert "tomogram" in result.output
    assert not out.exists()
    assert invoke("config", "check", path).exit_code == 2


def test_run_usage_errors_exit_1(tmp_path):
    path = make_list(tmp_path)
    assert invoke("run", path, tmp_path / "o", "--workers", 0).exit_code == 1
    assert invoke("run", tmp_path / "nope.json", tmp_path / "o").exit_code == 1
    assert invoke("frobnicate").exit_code == 1


@register
class FailingStep(Plugin):
    parameters = (Param("pattern", "str", "SINOGRAM"),)

    def process(self, blocks):
        raise FloatingPointError("diverged")


def test_run_plugin_failure_exits_3(tmp_path):
    path = make_list(tmp_path)
    invoke("config", "add", path, "FailingStep", "--at", 4, "--set", 'in_datasets=["tomo"]')
    result = invoke("run", path, tmp_path / "out")
    assert result.exit_code == 3 and "diverged" in result.output
    assert json.loads((tmp_path / "out" / "manifest.json").read_text())["status"] == "failed"


def test_bad_parameter_value_is_a_validation_error(tmp_path):
    path = make_list(tmp_path)
    assert invoke("config", "set", path, 4, "out_size", "--", "-1").exit_code == 0
    result = invoke("run", path, tmp_path / "out")
    assert result.exit_code == 2 and "out_size" in result.output


def test_chunks_explain():
    result = invoke("chunks", "explain", "--shape", "180,128,160", "--now", "2,1/0", "--next", "2,0/1")
    assert result.exit_code == 0
    assert "chunk (12, 128, 160)  bytes 983040" in result.output
    assert invoke("chunks", "explain", "--shape", "4,4", "--now", "0,1").exit_code == 1
