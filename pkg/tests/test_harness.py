"""Matrix execution, report formats and the command-line front end."""

import json

import pytest

from bstsim.cli import build_parser, main, parse_spec
from bstsim.errors import ConfigError
from bstsim.harness import (
    Report,
    RunSpec,
    SetSpec,
    emit_report,
    execute_matrix,
    load_report,
    parse_report,
    render_report,
    report_body,
)
from bstsim.workload import load_keyset


def run_args(argv):
    return build_parser().parse_args(["run"] + argv)


SMALL_MATRIX = [
    "--height", "6",
    "--variants", "hrz,dup4,hyb4,hyb4q",
    "--sets", "equal:64,random:64:seed=1,split:64:t=4",
]


@pytest.fixture(scope="module")
def report():
    return execute_matrix(parse_spec(run_args(SMALL_MATRIX)))


class TestParseSpec:
    def test_full_paper_matrix_shape(self):
        args = run_args([
            "--height", "15",
            "--variants", "hrz,dup4,dup8,hyb4,hyb4q,hyb8,hyb8q",
            "--sets", "equal:64k,random:64k:seed=1,split:64k",
        ])
        spec = parse_spec(args)
        assert len(spec.variants) == 7
        assert len(spec.sets) == 3
        assert spec.sets[1].seed == 1
        assert spec.sets[0].size == 65536

    def test_invalid_variant_rejected(self):
        with pytest.raises(ConfigError):
            parse_spec(run_args(["--height", "8", "--variants", "hyb3", "--sets", "equal:8"]))

    def test_hrz_baseline_auto_included(self):
        spec = parse_spec(run_args(["--height", "8", "--variants", "dup4", "--sets", "equal:8"]))
        assert spec.variants[0].label == "hrz"

    def test_config_file_provides_defaults(self, tmp_path):
        conf = tmp_path / "run.json"
        conf.write_text(json.dumps({"height": 5, "variants": "hrz,dup4", "sets": "equal:32"}))
        spec = parse_spec(run_args(["--config", str(conf)]))
        assert spec.tree_height == 5
        assert [v.label for v in spec.variants] == ["hrz", "dup4"]

    def test_cli_overrides_config_file(self, tmp_path):
        conf = tmp_path / "run.json"
        conf.write_text(json.dumps({"height": 5, "variants": "hrz", "sets": "equal:32"}))
        spec = parse_spec(run_args(["--config", str(conf), "--height", "7"]))
        assert spec.tree_height == 7

    def test_set_spec_parsing(self):
        spec = SetSpec.parse("split:2k:t=4")
        assert (spec.kind, spec.size, spec.subtrees) == ("split", 2048, 4)
        with pytest.raises(ConfigError):
            SetSpec.parse("equal")
        with pytest.raises(ConfigError):
            SetSpec.parse("zipf:64k")


class TestExecuteMatrix:
    def test_one_row_per_cell(self, report):
        assert len(report.rows) == 4 * 3

    def test_hrz_rows_are_exact_baseline(self, report):
        for row in report.rows:
            if row.variant == "hrz":
                assert row.speedup_vs_hrz == 1.0
            assert row.speedup_vs_hrz > 0

    def test_memory_accounting_columns(self, report):
        by_variant = {}
        for row in report.rows:
            by_variant.setdefault(row.variant, row)
        nodes = 2**7 - 1
        assert by_variant["hrz"].memory_nodes == nodes
        assert by_variant["dup4"].memory_nodes == 4 * nodes
        assert by_variant["hyb4"].memory_nodes == nodes

    def test_row_order_is_variant_major(self, report):
        variants = [row.variant for row in report.rows]
        assert variants == sorted(variants, key=variants.index)
        assert [r.kind for r in report.rows[:3]] == ["equal", "random", "split"]

    def test_seed_and_prng_only_on_random_rows(self, report):
        for row in report.rows:
            if row.kind == "random":
                assert row.seed == 1 and row.prng_name == "pcg64"
            else:
                assert row.seed is None and row.prng_name is None

    def test_empty_variant_list_rejected(self):
        with pytest.raises(ConfigError):
            RunSpec(tree_height=4, variants=[], sets=[SetSpec("equal", 1)])

    def test_single_hrz_cell(self):
        spec = parse_spec(run_args(["--height", "4", "--variants", "hrz",
                                    "--sets", "equal:1"]))
        report = execute_matrix(spec)
        assert len(report.rows) == 1
        assert report.rows[0].speedup_vs_hrz == 1.0

    def test_repetitions_average_random_rows(self):
        args = run_args(["--height", "5", "--variants", "hrz", "--sets",
                         "random:32:seed=1", "--reps", "3"])
        report = execute_matrix(parse_spec(args))
        assert len(report.rows) == 1


class TestReportFormats:
    def test_csv_round_trip(self, report, tmp_path):
        path = tmp_path / "report.csv"
        emit_report(report, "csv", path)
        assert load_report(path) == report

    def test_jsonl_round_trip(self, report, tmp_path):
        path = tmp_path / "report.jsonl"
        emit_report(report, "jsonl", path)
        assert load_report(path) == report

    def test_jsonl_row_count(self, report):
        text = render_report(report, "jsonl")
        rows = [json.loads(line) for line in text.splitlines()[1:]]
        assert len(rows) == len(report.rows) == 12

    def test_csv_header_matches_field_names(self, report):
        lines = render_report(report, "csv").splitlines()
        assert lines[0].startswith("# {")
        assert lines[1] == ("variant,kind,size,total_cycles,throughput,stall_cycles,"
                            "speedup_vs_hrz,memory_nodes,bram_blocks,"
                            "max_buffer_occupancy,seed,prng_name")

    def test_metadata_prologue(self, report):
        meta = json.loads(render_report(report, "csv").splitlines()[0][2:])
        assert meta["tool_version"]
        assert meta["tree_height"] == 6
        assert meta["key_rule"] == "odd-key"
        assert meta["prng_name"] == "pcg64"

    def test_body_is_deterministic_across_runs(self):
        spec_a = parse_spec(run_args(SMALL_MATRIX))
        spec_b = parse_spec(run_args(SMALL_MATRIX))
        body_a = report_body(render_report(execute_matrix(spec_a), "csv"))
        body_b = report_body(render_report(execute_matrix(spec_b), "csv"))
        assert body_a == body_b

    def test_parse_rejects_garbage(self):
        with pytest.raises(ConfigError):
            parse_report("")
        with pytest.raises(ConfigError):
            parse_report('{"rows": []}\n')


class TestCli:
    def test_no_args_prints_help_and_exits_zero(self, capsys):
        assert main([]) == 0
        assert "gen-tree" in capsys.readouterr().out

    def test_usage_error_exits_one(self):
        with pytest.raises(SystemExit) as exc:
            main(["run", "--height", "not-a-number", "--variants", "hrz", "--sets", "equal:8"])
        assert exc.value.code == 1

    def test_bad_variant_exits_one(self, capsys):
        code = main(["run", "--height", "8", "--variants", "hyb3", "--sets", "equal:8"])
        assert code == 1
        assert "power of two" in capsys.readouterr().err

    def test_gen_tree_descriptor(self, capsys):
        assert main(["gen-tree", "--height", "3"]) == 0
        descriptor = json.loads(capsys.readouterr().out)
        assert descriptor["node_count"] == 15
        assert descriptor["key_rule"] == "odd-key"

    def test_gen_keys_writes_loadable_file(self, tmp_path, capsys):
        out = tmp_path / "keys.bin"
        code = main(["gen-keys", "--height", "6", "--kind", "random", "--size", "128",
                     "--seed", "5", "--out", str(out)])
        assert code == 0
        keyset = load_keyset(out)
        assert keyset.size == 128

    def test_run_writes_report(self, tmp_path, capsys):
        out = tmp_path / "report.csv"
        code = main(["run", "--height", "5", "--variants", "hrz,dup4",
                     "--sets", "equal:32", "--out", str(out)])
        assert code == 0
        assert len(load_report(out).rows) == 2

    def test_report_converts_formats(self, tmp_path, capsys):
        csv_path = tmp_path / "report.csv"
        main(["run", "--height", "5", "--variants", "hrz", "--sets", "equal:16",
              "--out", str(csv_path)])
        jsonl_path = tmp_path / "report.jsonl"
        code = main(["report", "--in", str(csv_path), "--format", "jsonl",
                     "--out", str(jsonl_path)])
        assert code == 0
        assert load_report(jsonl_path) == load_report(csv_path)

    def test_out_dir_env_override(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("BSTSIM_OUT_DIR", str(tmp_path / "results"))
        code = main(["run", "--height", "4", "--variants", "hrz",
                     "--sets", "equal:8", "--out", "report.csv"])
        assert code == 0
        assert (tmp_path / "results" / "report.csv").exists()

    def test_missing_report_file_exits_two(self, tmp_path, capsys):
        assert main(["report", "--in", str(tmp_path / "absent.csv")]) == 2
