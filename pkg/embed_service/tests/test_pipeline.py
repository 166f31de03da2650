"""Job-level behavior: scanning, skipping, ids, and EMBV1 outputs."""

import numpy as np
import pytest

from embed_service import DataError, EmbedJob, embed_images

from conftest import save_gradient_png, save_noise_png, save_solid_png


def run_job(tmp_path, backbone, images, **kwargs):
    job = EmbedJob(images=images, out=str(tmp_path / "e.bin"),
                   ids_out=str(tmp_path / "e.ids"), **kwargs)
    return embed_images(job, backbone=backbone), job


def read_rows(job):
    raw = open(job.out, "rb").read()
    header, _, payload = raw.partition(b"\n")
    magic, n, d = header.decode().split()
    assert magic == "EMBV1"
    return np.frombuffer(payload, dtype="<f4").reshape(int(n), int(d))


class TestScanning:
    def test_directory_scan_sorted_and_filtered(self, tmp_path, backbone):
        src = tmp_path / "imgs"
        src.mkdir()
        save_noise_png(src / "b.png", seed=1)
        save_noise_png(src / "a.png", seed=2)
        save_gradient_png(src / "c.webp")
        (src / "notes.txt").write_text("ignored")
        (src / "anim.gif").write_bytes(b"GIF89a")

        report, job = run_job(tmp_path, backbone, [str(src)])
        assert report.ids == ["a", "b", "c"]
        assert open(job.ids_out).read().splitlines() == ["a", "b", "c"]
        assert read_rows(job).shape == (3, 32)

    def test_uppercase_suffix_matches(self, tmp_path, backbone):
        src = tmp_path / "imgs"
        src.mkdir()
        save_noise_png(src / "SHOUT.PNG", seed=3)
        report, _ = run_job(tmp_path, backbone, [str(src)])
        assert report.ids == ["SHOUT"]

    def test_explicit_files_keep_given_order(self, tmp_path, backbone):
        a = save_noise_png(tmp_path / "zz.png", seed=1)
        b = save_noise_png(tmp_path / "aa.png", seed=2)
        report, _ = run_job(tmp_path, backbone, [a, b])
        assert report.ids == ["zz", "aa"]

    def test_explicit_unsupported_suffix_is_reported(self, tmp_path, backbone):
        odd = tmp_path / "photo.tiff"
        odd.write_bytes(b"anything")
        report, _ = run_job(tmp_path, backbone, [str(odd)])
        assert report.ids == []
        assert report.skipped == [(str(odd), "unsupported suffix '.tiff'")]

    def test_missing_input_path(self, tmp_path, backbone):
        with pytest.raises(DataError, match="does not exist"):
            run_job(tmp_path, backbone, [str(tmp_path / "gone")])


class TestSkipsAndEdgeCases:
    def test_corrupt_file_is_skipped_and_listed(self, tmp_path, backbone, caplog):
        src = tmp_path / "imgs"
        src.mkdir()
        save_noise_png(src / "ok1.png", seed=1)
        save_noise_png(src / "ok2.png", seed=2)
        save_noise_png(src / "ok3.png", seed=3)
        (src / "broken.png").write_bytes(b"not really a png")

        report, job = run_job(tmp_path, backbone, [str(src)])
        assert report.ids == ["ok1", "ok2", "ok3"]
        assert [p for p, _ in report.skipped] == [str(src / "broken.png")]
        assert read_rows(job).shape == (3, 32)
        assert any("broken.png" in r.message for r in caplog.records)

    def test_empty_directory_writes_zero_row_file(self, tmp_path, backbone):
        src = tmp_path / "imgs"
        src.mkdir()
        report, job = run_job(tmp_path, backbone, [str(src)])
        assert report.ids == []
        assert open(job.out, "rb").read() == b"EMBV1 0 32\n"

    def test_same_file_twice_gives_identical_rows(self, tmp_path, backbone):
        path = save_noise_png(tmp_path / "dup.png", seed=5)
        report, job = run_job(tmp_path, backbone, [path, path])
        assert report.ids == ["dup", "dup"]
        rows = read_rows(job)
        assert np.array_equal(rows[0], rows[1])

    def test_duplicate_ids_log_a_warning(self, tmp_path, backbone, caplog):
        path = save_noise_png(tmp_path / "dup.png", seed=5)
        run_job(tmp_path, backbone, [path, path])
        assert any("duplicate row ids" in r.message for r in caplog.records)

    def test_batch_boundary_preserves_order(self, tmp_path, backbone):
        src = tmp_path / "imgs"
        src.mkdir()
        colors = [(10, 0, 0), (0, 200, 0), (0, 0, 250), (90, 90, 90), (255, 255, 0)]
        for i, color in enumerate(colors):
            save_solid_png(src / f"s{i}.png", color)
        small_batches, job_a = run_job(tmp_path, backbone, [str(src)], batch_size=2)
        rows_small = read_rows(job_a).copy()
        one_batch, job_b = run_job(tmp_path, backbone, [str(src)], batch_size=16)
        rows_big = read_rows(job_b)
        assert small_batches.ids == one_batch.ids
        # same images, same order; batch split must not reorder rows
        for i in range(len(colors)):
            num = float(rows_small[i] @ rows_big[i])
            den = float(np.linalg.norm(rows_small[i]) * np.linalg.norm(rows_big[i]))
            assert num / den >= 1.0 - 1e-6
