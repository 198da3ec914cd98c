import csv
import json
import subprocess
import sys

import pytest

from lpa.cli import build_parser, main, parse_r
from lpa.errors import InputError
from lpa.fixtures import reviews_corpus
from lpa.ingest import write_jsonl


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "reviews.jsonl"
    write_jsonl(reviews_corpus(24, reviews=(32, 40), seed=3), path)
    return path


def lpa(*argv):
    return main([str(a) for a in argv])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_dvr_writes_csv_and_manifest(corpus, tmp_path):
    assert lpa("dvr", "--input", corpus, "--format", "jsonl_text", "--out", tmp_path) == 0
    rows = read_csv(tmp_path / "dvr.csv")
    assert rows[0] == ["element", "weight"]
    assert sum(float(r[1]) for r in rows[1:]) == pytest.approx(1.0, abs=1e-9)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == "dvr" and manifest["seed"] == 0
    assert "dvr.csv" in manifest["outputs"] and "config_hash" in manifest


def test_detect_frontusers_report(corpus, tmp_path):
    assert lpa("detect-frontusers", "--input", corpus, "--r", "1", "--out", tmp_path, "--no-figures") == 0
    report = json.loads((tmp_path / "report.json").read_text())
    (entry,) = report["reports"]
    assert "threshold" in entry and "flagged" in entry and entry["r"] == 1


def test_unknown_flag_exits_1_with_usage(corpus, capsys):
    assert lpa("dvr", "--input", corpus, "--bogus") == 1
    assert "usage:" in capsys.readouterr().err


def test_missing_input_exits_1(tmp_path, capsys):
    assert lpa("dvr", "--input", tmp_path / "nope.jsonl", "--out", tmp_path) == 1
    assert "nope.jsonl" in capsys.readouterr().err


def test_unknown_entity_exits_1(corpus, tmp_path):
    assert lpa("pvr", "--input", corpus, "--entity", "ghost", "--out", tmp_path) == 1


def test_degenerate_distribution_exits_2(tmp_path):
    path = tmp_path / "same.csv"
    path.write_text("entity_id,element,count\n" + "".join(f"e{i},x,2\ne{i},y,1\n" for i in range(5)))
    code = lpa("compare-metrics", "--input", path, "--format", "csv_counts", "--min-docs", 0, "--min-count", 0,
               "--out", tmp_path, "--no-figures")
    assert code == 2


def test_config_file_merges_with_flags(corpus, tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('n = 40\nseed = 9\nmin_docs = 1\n')
    assert lpa("sign", "--input", corpus, "--config", cfg, "--seed", 4, "--out", tmp_path, "--no-figures") == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["seed"] == 4 and manifest["settings"]["n"] == 40 and manifest["settings"]["min_docs"] == 1
    ranks = [int(r[1]) for r in read_csv(tmp_path / "signatures.csv")[1:]]
    assert max(ranks) == 40


def test_config_file_rejects_unknown_keys(corpus, tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("colour = 'red'\n")
    assert lpa("dvr", "--input", corpus, "--config", cfg, "--out", tmp_path) == 1


def test_parse_r():
    assert parse_r("1..4") == [1, 2, 3, 4]
    assert parse_r("1,3") == [1, 3]
    assert parse_r("2") == [2]
    with pytest.raises(InputError):
        parse_r("0")


def test_figures_rendered(corpus, tmp_path):
    assert lpa("dist", "--input", corpus, "--metric", "kld", "--out", tmp_path) == 0
    assert (tmp_path / "distances.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    assert len(read_csv(tmp_path / "distances.csv")) == 25


def test_activemap_out_names_svg(corpus, tmp_path):
    assert lpa("activemap", "--input", corpus, "--min-posts", 1, "--out", tmp_path / "busy.svg") == 0
    assert (tmp_path / "busy.svg").read_text().startswith("<svg")
    assert (tmp_path / "manifest.json").exists()


def test_export_matrix_shape(corpus, tmp_path):
    assert lpa("export-matrix", "--input", corpus, "--n", 50, "--out", tmp_path) == 0
    rows = read_csv(tmp_path / "matrix.csv")
    assert len(rows) == 25 and all(len(r) == 25 for r in rows)


@pytest.mark.parametrize("command,extra,files", [
    ("detect-sockpuppets", ["--r", "1..2"], ["distances.csv", "report.json"]),
    ("ttest", ["--count", 6, "--docs-min", 30, "--docs-max", 40], ["distances.csv", "report.json"]),
    ("activemap", ["--min-posts", 1], ["map.svg", "report.json"]),
])
def test_reruns_are_byte_identical(corpus, tmp_path, command, extra, files):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert lpa(command, "--input", corpus, "--out", out, "--seed", 3, "--no-figures", *extra) == 0
        outs.append(out)
    for name in files + ["manifest.json"]:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name


def test_console_script_help():
    proc = subprocess.run([sys.executable, "-m", "lpa.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for command in ("dvr", "detect-sockpuppets", "activemap", "export-matrix"):
        assert command in proc.stdout


def test_every_command_has_a_parser():
    names = set(build_parser()._subparsers._group_actions[0].choices)
    assert names == {"ingest", "dvr", "pvr", "dist", "compare-metrics", "sign", "detect-sockpuppets",
                     "detect-frontusers", "make-virtual", "ttest", "activemap", "export-matrix"}
