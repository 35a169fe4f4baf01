import json

import pytest
import yaml

from avdds.cli import main

from conftest import make_clip_dir

TOY_EDIT = {"total_steps": 6, "warmup_steps": 2,
            "video_dds_scale": [2.0, 4.0], "audio_dds_scale": [1.0, 5.0],
            "tau_a": 0.6, "tau_v": 0.6, "grad_clip": None}


@pytest.fixture
def clip_dir(tmp_path):
    # 8 frames at 4 fps = 2 s of audio; divisible by the default 2x2 grid
    return make_clip_dir(tmp_path / "clip", n_frames=8, seconds=2.0)


def _write_config(tmp_path, clip_dir, out_name="out", edit_extra=None, job_extra=None):
    edit = dict(TOY_EDIT)
    edit.update(edit_extra or {})
    job = {"clip": str(clip_dir), "y_trg": "a lion roaring", "y_src": "a dog barking",
           "out": str(tmp_path / out_name)}
    job.update(job_extra or {})
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump({"edit": edit, "jobs": [job]}))
    return path


class TestEditCommand:
    def test_edit_with_flags(self, tmp_path, clip_dir):
        config = _write_config(tmp_path, clip_dir)
        out = tmp_path / "cli_out"
        code = main(["edit", "--config", str(config), "--clip", str(clip_dir),
                     "--y-trg", "a lion roaring", "--y-src", "a dog barking",
                     "--out", str(out), "--seed", "3"])
        assert code == 0
        assert (out / "runlog.jsonl").exists()
        assert (out / "timing.json").exists()
        assert (out / "video.avi").exists()
        header = json.loads((out / "runlog.jsonl").read_text().splitlines()[0])["header"]
        assert header["config"]["seed"] == 3
        assert header["config"]["total_steps"] == 6

    def test_edit_uses_first_job_without_clip_flag(self, tmp_path, clip_dir):
        config = _write_config(tmp_path, clip_dir, out_name="job_out")
        assert main(["edit", "--config", str(config)]) == 0
        assert (tmp_path / "job_out" / "runlog.jsonl").exists()

    def test_steps_flag_overrides(self, tmp_path, clip_dir):
        config = _write_config(tmp_path, clip_dir, out_name="short")
        assert main(["edit", "--config", str(config), "--steps", "3"]) == 0
        lines = (tmp_path / "short" / "runlog.jsonl").read_text().splitlines()
        assert len(lines) == 1 + 3  # header + one record per step

    def test_refuses_nonempty_without_force(self, tmp_path, clip_dir):
        out = tmp_path / "busy"
        out.mkdir()
        (out / "keep.txt").write_text("x")
        config = _write_config(tmp_path, clip_dir)
        code = main(["edit", "--config", str(config), "--clip", str(clip_dir),
                     "--y-trg", "lion", "--out", str(out)])
        assert code == 2
        assert (out / "keep.txt").exists()
        code = main(["edit", "--config", str(config), "--clip", str(clip_dir),
                     "--y-trg", "lion", "--out", str(out), "--force"])
        assert code == 0

    def test_rerun_is_byte_identical(self, tmp_path, clip_dir):
        config = _write_config(tmp_path, clip_dir)
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert main(["edit", "--config", str(config), "--clip", str(clip_dir),
                         "--y-trg", "lion", "--out", str(out), "--seed", "5"]) == 0
        assert (a / "runlog.jsonl").read_bytes() == (b / "runlog.jsonl").read_bytes()
        assert (a / "audio.wav").read_bytes() == (b / "audio.wav").read_bytes()

    def test_debug_relevance_dumps_heatmaps(self, tmp_path, clip_dir):
        config = _write_config(tmp_path, clip_dir, out_name="dbg")
        assert main(["edit", "--config", str(config), "--debug-relevance"]) == 0
        heatmaps = list((tmp_path / "dbg" / "relevance").glob("*.png"))
        assert heatmaps  # audio + per-grid video maps for probed steps

    def test_backend_descriptor_flag(self, tmp_path, clip_dir):
        descriptor = {
            "modality": "audio",
            "driver": "avdds.backends.toy:build",
            "latent_shape": [4, 16, 16],
            "schedule": {"cosine": 500},
            "probe_layers": ["attn0"],
            "options": {"seed": 21, "mel": {"n_mels": 32}},
        }
        desc_path = tmp_path / "audio_backend.json"
        desc_path.write_text(json.dumps(descriptor))
        config = _write_config(tmp_path, clip_dir, out_name="desc_out")
        assert main(["edit", "--config", str(config), "--backend", str(desc_path)]) == 0
        resolved = json.loads((tmp_path / "desc_out" / "config.resolved").read_text())
        assert str(desc_path) in resolved["backends"]


class TestBatchCommand:
    def test_batch_sequential(self, tmp_path):
        clip_a = make_clip_dir(tmp_path / "clip_a", n_frames=8, seconds=2.0, seed=1)
        clip_b = make_clip_dir(tmp_path / "clip_b", n_frames=8, seconds=2.0, seed=2)
        jobs = [{"clip": str(clip_a), "y_trg": "lion", "out": str(tmp_path / "out_a")},
                {"clip": str(clip_b), "y_trg": "tiger", "out": str(tmp_path / "out_b"),
                 "overrides": {"total_steps": 4, "warmup_steps": 1}}]
        config = tmp_path / "batch.yaml"
        config.write_text(yaml.safe_dump({"edit": dict(TOY_EDIT), "jobs": jobs}))
        assert main(["batch", "--config", str(config)]) == 0
        assert (tmp_path / "out_a" / "runlog.jsonl").exists()
        lines_b = (tmp_path / "out_b" / "runlog.jsonl").read_text().splitlines()
        assert len(lines_b) == 1 + 4  # per-job override applied

    def test_batch_parallel_workers(self, tmp_path):
        clips = [make_clip_dir(tmp_path / f"clip{i}", n_frames=4, seconds=1.0, seed=i)
                 for i in range(2)]
        jobs = [{"clip": str(c), "y_trg": "lion", "out": str(tmp_path / f"pout{i}")}
                for i, c in enumerate(clips)]
        config = tmp_path / "batch.yaml"
        config.write_text(yaml.safe_dump(
            {"edit": {**TOY_EDIT, "total_steps": 3, "warmup_steps": 1}, "jobs": jobs}))
        assert main(["batch", "--config", str(config), "--workers", "2"]) == 0
        for i in range(2):
            assert (tmp_path / f"pout{i}" / "runlog.jsonl").exists()


class TestEvalCommand:
    def test_eval_over_finished_outputs(self, tmp_path, clip_dir):
        config = _write_config(tmp_path, clip_dir, out_name="edited")
        assert main(["edit", "--config", str(config)]) == 0
        report_dir = tmp_path / "report"
        assert main(["eval", "--config", str(config), "--out", str(report_dir)]) == 0
        text = (report_dir / "report.csv").read_text()
        assert text.startswith("clip,clip_f,clip_t,obj,dino,clap,lpaps,ib,av_align")
        payload = json.loads((report_dir / "report.json").read_text())
        assert payload["rows"][0]["clip"] == "edited"
        assert payload["config"]["av_align"]["window_s"] == 0.1

    def test_eval_requires_finished_edit(self, tmp_path, clip_dir):
        config = _write_config(tmp_path, clip_dir, out_name="never_ran")
        assert main(["eval", "--config", str(config), "--out", str(tmp_path / "r")]) == 2


class TestSweepCommand:
    def test_tau_sweep_produces_table_and_plot(self, tmp_path, clip_dir):
        config = _write_config(tmp_path, clip_dir, out_name="sweep_job",
                               edit_extra={"total_steps": 4, "warmup_steps": 1})
        sweep_dir = tmp_path / "sweep"
        assert main(["sweep", "--config", str(config), "--out", str(sweep_dir),
                     "--values", "0.5", "0.8"]) == 0
        rows = (sweep_dir / "sweep.csv").read_text().splitlines()
        assert rows[0].startswith("value,")
        assert len(rows) == 3
        assert (sweep_dir / "sweep.png").exists()
        assert (sweep_dir / "tau_0.5" / "runlog.jsonl").exists()


class TestSelftestCommand:
    def test_selftest_passes(self):
        assert main(["selftest"]) == 0
