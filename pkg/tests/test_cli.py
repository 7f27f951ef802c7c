import io
import json

import pytest

from nilpdiv import cli


def run(*argv, cache=None):
    out, err = io.StringIO(), io.StringIO()
    args = list(argv) + (["--cache-dir", str(cache)] if cache else ["--no-cache"])
    code = cli.run(args, out=out, err=err)
    text = out.getvalue()
    return code, (json.loads(text) if text.strip() else None), err.getvalue()


def test_classify_cm_minus_27():
    code, out, _ = run("classify", "--cm", "-27", "--n", "6")
    assert code == 0
    assert out["nilpotent"] is False and out["reasons"] == ["cm-minus-27"]
    m = out["manifest"]
    assert m["command"] == "classify" and m["engine_version"] == cli.ENGINE_VERSION
    result = {k: v for k, v in out.items() if k != "manifest"}
    assert m["result_digest"] == cli.digest(result)


def test_classify_images_and_flags():
    code, out, _ = run("classify", "--images", "3=ns+,7=ns+", "--n", "21")
    assert code == 0 and out["nilpotent"]
    code, out, _ = run("classify", "--images", "31=ns+", "--n", "31", "--no-assume-conjecture")
    assert out["nilpotent"] and out["conditional"]
    code, out, _ = run("classify", "--2torsion", "--n", "32")
    assert out["nilpotent"]
    code, out, _ = run("classify", "--j0", "2", "--n", "3")
    assert out["nilpotent"]


@pytest.mark.parametrize("argv", [
    ["classify", "--n", "6", "--cm", "-5"],
    ["classify", "--n", "6", "--images", "7"],
    ["classify", "--n", "6", "--cm", "-4", "--j0", "2"],
    ["classify"],
    ["jmap", "--id", "f15", "--t", "1"],
    ["invariants"],
    ["nonsense"],
    ["search-nearco", "--p", "7", "--k", "2"],
])
def test_usage_errors(argv):
    assert run(*argv)[0] == cli.EXIT_USAGE


def test_computation_error_on_pole():
    code, out, err = run("jmap", "--id", "h2", "--t", "0")
    assert code == cli.EXIT_COMPUTE and out["type"] == "Pole" and "pole" in err


def test_jmap_values():
    assert run("jmap", "--id", "f7", "--t", "2")[1]["j"] == "147197952000/62748517"
    assert run("jmap", "--id", "f15", "--x", "-1", "--y", "0")[1]["j"] == "1728"
    assert run("jmap", "--id", "f7", "--t", "inf")[1]["j"] == "8000"


def test_invariants_and_cartan():
    code, out, _ = run("invariants", "--kind", "nonsplit+", "--p", "7")
    assert out["invariants"]["label_prefix"] == "7.21.0" and out["nilpotent"]
    code, out, _ = run("invariants", "--level", "4", "--gens", "1,1,0,1;1,0,0,3")
    assert out["order"] == 8
    code, out, _ = run("cartan", "--D", "-4", "--N", "4")
    assert out["size_tower"] and not out["center_is_scalar"]


def test_fetch_fixture():
    code, out, _ = run("fetch", "1.a1", "--n", "7")
    assert code == 0 and out["descriptor"]["images"] == {"7": "ns+"}
    assert out["verdict"]["nilpotent"]
    assert run("fetch", "99.zz1")[0] == cli.EXIT_COMPUTE


def test_verify_table_2_passes(tmp_path):
    code, out, _ = run("verify", "--table", "2", cache=tmp_path)
    assert code == 0 and out["status"] == "PASS"
    assert len(out["rows"]) == 9 and all(r["citation"] for r in out["rows"])
    assert "35.315.19" in [r["computed"] for r in out["rows"]]


def test_verify_mismatch_exit_code(monkeypatch):
    expected = cli.vf.load_expected()
    expected["table2"]["rows"][0]["label"] = "6.6.2"
    monkeypatch.setattr(cli.vf, "load_expected", lambda path=None: expected)
    code, out, err = run("verify", "--table", "2")
    assert code == cli.EXIT_MISMATCH and out["status"] == "FAIL"
    assert "6.6.2" in out["diff"][0] and err.startswith("- ")


def test_cache_hit_is_identical(tmp_path):
    first = run("search-nilpotent", "--p", "3", cache=tmp_path)[1]
    second = run("search-nilpotent", "--p", "3", cache=tmp_path)[1]
    assert not first["manifest"]["cached"] and second["manifest"]["cached"]
    assert first["manifest"]["result_digest"] == second["manifest"]["result_digest"]
    strip = lambda d: {k: v for k, v in d.items() if k != "manifest"}
    assert strip(first) == strip(second)


def test_version_bump_misses(tmp_path, monkeypatch):
    run("search-nilpotent", "--p", "3", cache=tmp_path)
    monkeypatch.setattr(cli, "ENGINE_VERSION", "0.0.0+other")
    assert not run("search-nilpotent", "--p", "3", cache=tmp_path)[1]["manifest"]["cached"]


def test_stale_entry_is_not_reused(tmp_path):
    cache = cli.ResultCache(tmp_path)
    key = cache.make_key("x", {}, engine="old")
    cache.put(key, {"result": 1, "exit": 0})
    assert cache.get(key) is None
    assert list((tmp_path / "quarantine").iterdir())


@pytest.mark.parametrize("damage", ["truncate", "tamper"])
def test_corrupt_entry_is_quarantined(tmp_path, damage):
    run("search-nilpotent", "--p", "2", cache=tmp_path)
    (entry,) = (tmp_path / "results").iterdir()
    if damage == "truncate":
        entry.write_text(entry.read_text()[:40])
    else:
        data = json.loads(entry.read_text())
        data["result"]["result"]["labels"] = ["9.9.9"]
        entry.write_text(json.dumps(data))
    out = run("search-nilpotent", "--p", "2", cache=tmp_path)[1]
    assert not out["manifest"]["cached"] and out["labels"] == ["2.2.0", "2.3.0"]
    assert len(list((tmp_path / "quarantine").iterdir())) == 1
    assert run("search-nilpotent", "--p", "2", cache=tmp_path)[1]["manifest"]["cached"]


def test_digest_independent_of_jobs(tmp_path):
    one = run("verify", "--table", "2", "--jobs", "1")[1]
    two = run("verify", "--table", "2", "--jobs", "3")[1]
    assert one["manifest"]["result_digest"] == two["manifest"]["result_digest"]
    assert "jobs" not in one["manifest"]["parameters"]


def test_module_entry_point():
    import subprocess
    import sys
    proc = subprocess.run([sys.executable, "-m", "nilpdiv", "classify", "--cm", "-11",
                           "--n", "2", "--no-cache"], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["nilpotent"] is False
