import hashlib
import json

import pytest

from reefsonics.cli import (
    DATAFRAME_HEADER,
    PipelineConfig,
    build_parser,
    config_digest,
    load_pipeline_config,
    main,
    run_pipeline,
)
from reefsonics.errors import ConfigInvalid, EXIT_CONFIG, EXIT_DATA, EXIT_OK


def _pipeline_config(tmp_path, **overrides):
    config = {
        "workdir": str(tmp_path / "work"),
        "synthetic": {"seed": 7, "n": 60, "blobs": 4},
        "eps": 0.1,
        "n_days": 3,
        "mode": "ad1",
        "render": {"step_seconds": 0.1, "fade_seconds": 0.1,
                   "sample_rate": 44100, "master_seed": 5},
    }
    config.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return path


def _file_digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


class TestConfigLoading:
    def test_default_constants(self):
        config = PipelineConfig(input_csv="x.csv")
        assert config.min_samples == 2
        assert config.n_days == 78
        assert config.render.step_seconds == 1.0
        assert config.render.fade_seconds == 5.0
        assert config.render.sample_rate == 48000

    def test_missing_input_names_the_field(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"workdir": "w"}))
        with pytest.raises(ConfigInvalid, match="input_csv"):
            load_pipeline_config(path)

    def test_unknown_field_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"input_csv": "x", "volume": 11}))
        with pytest.raises(ConfigInvalid, match="volume"):
            load_pipeline_config(path)

    def test_bad_json_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{nope")
        with pytest.raises(ConfigInvalid):
            load_pipeline_config(path)

    def test_digest_stable_and_sensitive(self, tmp_path):
        a = load_pipeline_config(_pipeline_config(tmp_path))
        b = load_pipeline_config(_pipeline_config(tmp_path))
        assert config_digest(a) == config_digest(b)
        c = load_pipeline_config(_pipeline_config(tmp_path, eps=0.2))
        assert config_digest(a) != config_digest(c)


class TestPipeline:
    def test_all_artifacts_produced(self, tmp_path):
        config = load_pipeline_config(_pipeline_config(tmp_path))
        artifacts = run_pipeline(config)
        for name in ("validated_csv", "stats_json", "clusters_csv",
                     "reachability_csv", "dataframe_csv", "ambix_ad1",
                     "stereo_ad1", "report_ad1"):
            assert (tmp_path / "work").joinpath(
                artifacts[name].split("/")[-1]
            ).exists(), name
        report = json.loads((tmp_path / "work" / "reef_ad1_report.json").read_text())
        assert report["duration_s"] == 3 * 0.1 + 0.1
        stats = json.loads((tmp_path / "work" / "stats.json").read_text())
        assert stats["count"] == 60
        # every JSON sidecar carries the same config digest
        meta = json.loads((tmp_path / "work" / "clusters_meta.json").read_text())
        frame_meta = json.loads((tmp_path / "work" / "dataframe_meta.json").read_text())
        digests = {stats["config_digest"], meta["config_digest"],
                   frame_meta["config_digest"], report["config_digest"]}
        assert len(digests) == 1

    def test_rerun_is_idempotent(self, tmp_path):
        config = load_pipeline_config(_pipeline_config(tmp_path))
        first = {name: _file_digest(tmp_path / "work" / path.split("/")[-1])
                 for name, path in run_pipeline(config).items()}
        second = {name: _file_digest(tmp_path / "work" / path.split("/")[-1])
                  for name, path in run_pipeline(config).items()}
        assert first == second

    def test_mode_both_renders_twice(self, tmp_path):
        config = load_pipeline_config(_pipeline_config(tmp_path, mode="both"))
        artifacts = run_pipeline(config)
        assert "ambix_ad1" in artifacts and "ambix_ad2" in artifacts

    def test_stage_errors_carry_stage_name(self, tmp_path):
        config = load_pipeline_config(_pipeline_config(tmp_path))
        config.input_csv = str(tmp_path / "absent.csv")
        config.synthetic = None
        with pytest.raises(Exception, match="ingest"):
            run_pipeline(config)


class TestCommands:
    def test_ingest_synthetic(self, tmp_path, capsys):
        code = main(["ingest", "--synthetic", "40", "--seed", "3",
                     "--out-dir", str(tmp_path)])
        assert code == EXIT_OK
        assert (tmp_path / "validated.csv").exists()
        stats = json.loads((tmp_path / "stats.json").read_text())
        assert stats["count"] == 40

    def test_ingest_requires_a_source(self, tmp_path):
        assert main(["ingest", "--out-dir", str(tmp_path)]) == EXIT_CONFIG

    def test_ingest_bad_rows_fail_by_default(self, tmp_path):
        src = tmp_path / "in.csv"
        src.write_text("lat,lon,depth,bleach,par\n1,2,-3,4,5\n")
        code = main(["ingest", "--input", str(src), "--out-dir", str(tmp_path)])
        assert code == EXIT_DATA

    def test_ingest_skip_bad_rows(self, tmp_path):
        src = tmp_path / "in.csv"
        src.write_text("lat,lon,depth,bleach,par\n1,2,3,4,5\n1,2,-3,4,5\n")
        code = main(["ingest", "--input", str(src), "--skip-bad-rows",
                     "--out-dir", str(tmp_path)])
        assert code == EXIT_OK
        stats = json.loads((tmp_path / "stats.json").read_text())
        assert stats["count"] == 1
        assert stats["skipped_rows"] == 1

    def test_cluster_and_map_commands(self, tmp_path):
        assert main(["ingest", "--synthetic", "50", "--seed", "1",
                     "--out-dir", str(tmp_path)]) == EXIT_OK
        assert main(["cluster", "--input", str(tmp_path / "validated.csv"),
                     "--eps", "0.1", "--out-dir", str(tmp_path)]) == EXIT_OK
        clusters = (tmp_path / "clusters.csv").read_text().splitlines()
        assert clusters[0] == "cluster_id,lat,lon,depth,bleach,par,member_count"
        reach = (tmp_path / "reachability.csv").read_text().splitlines()
        assert reach[0] == "index,point_id,reachability"
        assert len(reach) == 51

        assert main(["map", "--clusters", str(tmp_path / "clusters.csv"),
                     "--stats", str(tmp_path / "stats.json"),
                     "--n-days", "4", "--out-dir", str(tmp_path)]) == EXIT_OK
        dataframe = (tmp_path / "dataframe.csv").read_text().splitlines()
        assert dataframe[0] == ",".join(DATAFRAME_HEADER)

    def test_render_command_with_overrides(self, tmp_path):
        config_path = _pipeline_config(tmp_path)
        main(["pipeline", "--config", str(config_path)])
        layout = tmp_path / "layout.json"
        layout.write_text(json.dumps([
            {"name": "L", "azimuth_deg": 30, "elevation_deg": 0},
            {"name": "R", "azimuth_deg": -30, "elevation_deg": 0},
        ]))
        code = main(["render", "--config", str(config_path), "--mode", "ad2",
                     "--seed", "99", "--workers", "2", "--layout", str(layout)])
        assert code == EXIT_OK
        assert (tmp_path / "work" / "reef_ad2_ambix.wav").exists()
        assert (tmp_path / "work" / "reef_ad2_decoded.wav").exists()

    def test_render_without_dataframe_is_config_error(self, tmp_path):
        code = main(["render", "--out-dir", str(tmp_path)])
        assert code == EXIT_CONFIG

    def test_pipeline_command(self, tmp_path, capsys):
        code = main(["pipeline", "--config", str(_pipeline_config(tmp_path))])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "ambix_ad1" in out

    def test_missing_config_file_is_io_error(self, tmp_path):
        code = main(["pipeline", "--config", str(tmp_path / "missing.json")])
        assert code == 3


class TestHelp:
    @pytest.mark.parametrize("command,flags", [
        ("ingest", ["--input", "--schema", "--synthetic", "--seed", "--blobs",
                    "--skip-bad-rows", "--out-dir"]),
        ("cluster", ["--input", "--eps", "--min-samples", "--out-dir"]),
        ("map", ["--clusters", "--stats", "--n-days", "--depth-boost-db", "--out-dir"]),
        ("render", ["--config", "--dataframe", "--mode", "--seed", "--out-dir",
                    "--solo", "--layout", "--workers"]),
        ("pipeline", ["--config"]),
    ])
    def test_help_lists_documented_flags(self, command, flags, capsys):
        with pytest.raises(SystemExit) as exc:
            main([command, "--help"])
        assert exc.value.code == 0
        text = capsys.readouterr().out
        for flag in flags:
            assert flag in text

    def test_parser_knows_all_subcommands(self):
        parser = build_parser()
        text = parser.format_help()
        for sub in ("ingest", "cluster", "map", "render", "pipeline"):
            assert sub in text
