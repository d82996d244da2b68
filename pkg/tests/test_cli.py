import json

import pytest

from adkit.cli import main
from adkit.corpus import TimedSegment, TrackKind, TranscriptTrack, save_wav, write_transcript

from synth import make_aligned_movie


@pytest.fixture(scope="module")
def align_fixture_dir(tmp_path_factory):
    """One movie with one well-aligned clip, laid out for the CLI."""
    root = tmp_path_factory.mktemp("cli_fixture")
    movie_audio, clip_audio, dialogue, clip_tr, ad_track, truth = make_aligned_movie(seed=7)

    merged = TranscriptTrack(
        dialogue.segments + ad_track.segments, "movie-1", TrackKind.MIXED
    )
    save_wav(movie_audio, root / "movie.wav")
    save_wav(clip_audio, root / "clip.wav")
    write_transcript(merged, root / "movie.json")
    write_transcript(clip_tr, root / "clip.json")

    manifest = {
        "movies": [
            {
                "movie_id": "movie-1",
                "audio": "movie.wav",
                "transcript": "movie.json",
                "narrator": "AD",
                "clips": [
                    {"clip_id": "clip-1", "audio": "clip.wav", "transcript": "clip.json"}
                ],
            }
        ]
    }
    (root / "manifest.json").write_text(json.dumps(manifest))
    return root, truth


def test_align_smoke(align_fixture_dir, tmp_path):
    root, truth = align_fixture_dir
    out = tmp_path / "out"
    code = main(
        [
            "align",
            "--manifest",
            str(root / "manifest.json"),
            "--out-dir",
            str(out),
            "--chunk-pad-s",
            "20",
            "--jobs",
            "1",
        ]
    )
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["success_rate"] == 1.0
    assert summary["ads"] > 0
    assert "resolved_config" in summary
    reports = [
        json.loads(line) for line in (out / "alignments.jsonl").read_text().splitlines()
    ]
    assert reports[0]["status"] == "aligned"
    assert abs(reports[0]["fit"]["slope"] - truth["speed"]) <= 0.005
    assert (out / "ad_train.jsonl").read_text().strip()


def test_align_missing_clip_audio_is_isolated(align_fixture_dir, tmp_path):
    root, _ = align_fixture_dir
    manifest = {
        "movies": [
            {
                "movie_id": "movie-1",
                "audio": "movie.wav",
                "transcript": "movie.json",
                "narrator": "AD",
                "clips": [
                    {"clip_id": "ghost", "audio": "nope.wav", "transcript": "clip.json"}
                ],
            }
        ]
    }
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(manifest))
    # relative paths resolve against the manifest directory
    for name in ("movie.wav", "movie.json", "clip.json"):
        (tmp_path / name).symlink_to(root / name)
    out = tmp_path / "out"
    code = main(["align", "--manifest", str(path), "--out-dir", str(out), "--jobs", "1"])
    assert code == 0
    report = json.loads((out / "alignments.jsonl").read_text().splitlines()[0])
    assert report["status"] != "aligned"
    assert "nope.wav" in report["reason"]


def test_align_dry_run_reads_no_audio(align_fixture_dir, tmp_path):
    root, _ = align_fixture_dir
    code = main(
        ["align", "--manifest", str(root / "manifest.json"), "--out-dir", str(tmp_path), "--dry-run"]
    )
    assert code == 0
    assert not (tmp_path / "summary.json").exists()


def test_align_malformed_manifest_exits_1(tmp_path):
    path = tmp_path / "manifest.json"
    path.write_text("{not json")
    assert main(["align", "--manifest", str(path), "--out-dir", str(tmp_path)]) == 1
    path.write_text(json.dumps({"movies": [{"movie_id": "m"}]}))
    assert main(["align", "--manifest", str(path), "--out-dir", str(tmp_path)]) == 1


def test_align_config_file_with_flag_override(align_fixture_dir, tmp_path):
    root, _ = align_fixture_dir
    cfg = tmp_path / "cfg.ini"
    cfg.write_text("[align]\nchunk_pad_s = 20\niterations = 500\n")
    out = tmp_path / "out"
    code = main(
        [
            "align",
            "--manifest",
            str(root / "manifest.json"),
            "--out-dir",
            str(out),
            "--config",
            str(cfg),
            "--iterations",
            "800",  # flag wins over the file value
            "--jobs",
            "1",
        ]
    )
    assert code == 0
    resolved = json.loads((out / "summary.json").read_text())["resolved_config"]
    assert resolved["chunk_pad_s"] == 20.0
    assert resolved["iterations"] == 800


def test_align_bad_config_value_exits_1(align_fixture_dir, tmp_path):
    root, _ = align_fixture_dir
    cfg = tmp_path / "cfg.ini"
    cfg.write_text("[align]\nwindow_frames = fifty\n")
    code = main(
        [
            "align",
            "--manifest",
            str(root / "manifest.json"),
            "--out-dir",
            str(tmp_path),
            "--config",
            str(cfg),
        ]
    )
    assert code == 1


PERFECT = [
    "Jack pours red wine into a glass.",
    "Rose walks across the sunny garden path.",
    "Jack studies a faded photograph closely.",
    "Rose closes the heavy wooden door.",
    "Jack waves goodbye from the platform.",
]


def _write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def test_eval_perfect_predictions(tmp_path):
    preds = tmp_path / "preds.txt"
    refs = tmp_path / "refs.txt"
    _write_lines(preds, PERFECT)
    _write_lines(refs, PERFECT)
    cast = tmp_path / "cast.json"
    cast.write_text(json.dumps([{"character": "Jack"}, {"character": "Rose"}]))
    out = tmp_path / "out"
    code = main(
        [
            "eval",
            "--predictions",
            str(preds),
            "--references",
            str(refs),
            "--metrics",
            "cider,recall,critic",
            "--cast",
            str(cast),
            "--out-dir",
            str(out),
        ]
    )
    assert code == 0
    report = json.loads((out / "eval_report.json").read_text())
    assert report["cider"] == pytest.approx(10.0, abs=1e-6)
    assert report["recall_at_k"] == 100.0
    assert report["critic"] == 1.0


def test_eval_metric_subset_only(tmp_path):
    preds = tmp_path / "p.txt"
    refs = tmp_path / "r.txt"
    _write_lines(preds, PERFECT)
    _write_lines(refs, PERFECT)
    out = tmp_path / "out"
    code = main(
        [
            "eval",
            "--predictions",
            str(preds),
            "--references",
            str(refs),
            "--metrics",
            "cider",
            "--out-dir",
            str(out),
        ]
    )
    assert code == 0
    report = json.loads((out / "eval_report.json").read_text())
    assert "cider" in report
    assert "recall_at_k" not in report
    assert "critic" not in report


def test_eval_misaligned_counts_exit_1(tmp_path):
    preds = tmp_path / "p.txt"
    refs = tmp_path / "r.txt"
    _write_lines(preds, PERFECT)
    _write_lines(refs, PERFECT[:-1])
    assert (
        main(["eval", "--predictions", str(preds), "--references", str(refs)]) == 1
    )


def _ad_track_file(tmp_path, name, texts, times, speaker="AD"):
    segs = tuple(
        TimedSegment(t, lo, hi, speaker) for t, (lo, hi) in zip(texts, times)
    )
    track = TranscriptTrack(segs, name, TrackKind.AD_NARRATION)
    path = tmp_path / f"{name}.json"
    write_transcript(track, path)
    return path


def test_interrater_identical_tracks(tmp_path):
    texts = PERFECT
    times = [(2.0 * i, 2.0 * i + 1.5) for i in range(len(texts))]
    a = _ad_track_file(tmp_path, "a", texts, times)
    # near-identical timing but reworded so the duplicate filter passes
    texts_b = [
        "Jack fills a glass with red wine.",
        "Rose crosses the garden in the sun.",
        "Jack looks hard at an old photograph.",
        "Rose shuts the big wooden door.",
        "Jack waves from the platform edge.",
    ]
    b = _ad_track_file(tmp_path, "b", texts_b, times)
    out = tmp_path / "out"
    code = main(
        [
            "interrater",
            "--track-a",
            str(a),
            "--track-b",
            str(b),
            "--assume-aligned",
            "--tiou",
            "0.9",
            "--out-dir",
            str(out),
        ]
    )
    assert code == 0
    report = json.loads((out / "interrater_report.json").read_text())
    assert report["n_pairs"] == len(texts)
    assert "cider" in report
    assert (out / "pairs.tsv").read_text().count("\n") == len(texts) + 1


def test_interrater_duplicate_versions_skipped(tmp_path):
    texts = PERFECT
    times = [(2.0 * i, 2.0 * i + 1.5) for i in range(len(texts))]
    a = _ad_track_file(tmp_path, "a", texts, times)
    b = _ad_track_file(tmp_path, "b", texts, times)  # verbatim copy
    out = tmp_path / "out"
    code = main(
        [
            "interrater",
            "--track-a",
            str(a),
            "--track-b",
            str(b),
            "--assume-aligned",
            "--out-dir",
            str(out),
        ]
    )
    assert code == 0
    report = json.loads((out / "interrater_report.json").read_text())
    assert report["skipped"] == "duplicate version"
    assert report["duplicate_match_rate"] == 1.0


def test_interrater_audio_alignment_path(tmp_path):
    """Two described versions of one movie, aligned via the audio pipeline."""
    import numpy as np

    from adkit.corpus import AudioBuffer

    from synth import SR, speech_burst, tone_audio

    rng = np.random.default_rng(8)
    base = tone_audio(150.0, rng)

    def version(ad_times, texts, name):
        audio = base.copy()
        segs = []
        for (t0, t1), text in zip(ad_times, texts):
            burst = speech_burst(t1 - t0, rng)
            i = int(t0 * SR)
            audio[i : i + len(burst)] += burst[: len(audio) - i]
            segs.append(TimedSegment(text, t0, t1, "AD"))
        track = TranscriptTrack(tuple(segs), name, TrackKind.AD_NARRATION)
        save_wav(AudioBuffer(audio), tmp_path / f"{name}.wav")
        write_transcript(track, tmp_path / f"{name}.json")

    times_a = [(10.0 + 12.0 * i, 12.0 + 12.0 * i) for i in range(10)]
    times_b = [(lo + rng.uniform(-0.1, 0.1), hi + rng.uniform(-0.1, 0.1)) for lo, hi in times_a]
    version(times_a, [f"alpha text {i} with words" for i in range(10)], "va")
    version(times_b, [f"beta wording {i} differs here" for i in range(10)], "vb")

    out = tmp_path / "out"
    code = main(
        [
            "interrater",
            "--track-a",
            str(tmp_path / "va.json"),
            "--track-b",
            str(tmp_path / "vb.json"),
            "--audio-a",
            str(tmp_path / "va.wav"),
            "--audio-b",
            str(tmp_path / "vb.wav"),
            "--tiou",
            "0.8",
            "--out-dir",
            str(out),
        ]
    )
    assert code == 0
    report = json.loads((out / "interrater_report.json").read_text())
    assert report["fit"]["accepted"]
    assert abs(report["fit"]["slope"] - 1.0) <= 1e-3
    assert report["n_pairs"] >= 8


def test_interrater_threshold_sweep_monotone(tmp_path):
    import numpy as np

    rng = np.random.default_rng(0)
    times_a = [(2.0 * i + 1.0, 2.0 * i + 2.0) for i in range(30)]
    times_b = [
        (lo + rng.uniform(-0.12, 0.12), hi + rng.uniform(-0.12, 0.12)) for lo, hi in times_a
    ]
    texts_a = [f"line number {i} of version a" for i in range(30)]
    texts_b = [f"different wording {i} in version b" for i in range(30)]
    a = _ad_track_file(tmp_path, "a", texts_a, times_a)
    b = _ad_track_file(tmp_path, "b", texts_b, times_b)
    counts = {}
    for threshold in ("0.8", "0.9"):
        out = tmp_path / f"out{threshold}"
        code = main(
            [
                "interrater",
                "--track-a",
                str(a),
                "--track-b",
                str(b),
                "--assume-aligned",
                "--tiou",
                threshold,
                "--out-dir",
                str(out),
            ]
        )
        assert code == 0
        counts[threshold] = json.loads((out / "interrater_report.json").read_text())["n_pairs"]
    assert counts["0.9"] <= counts["0.8"]


CAPTION_ROWS = [
    {
        "video_id": "good-1",
        "text": "a man is pouring wine",
        "start": 0.0,
        "end": 2.0,
        "subject_start": 0,
        "subject_end": 5,
        "unique_name_count": 1,
        "has_face_frame": True,
        "portrait": "good-1.jpg",
    },
    {
        "video_id": "too-many",
        "text": "a man waves",
        "start": 0.0,
        "end": 1.0,
        "subject_start": 0,
        "subject_end": 5,
        "unique_name_count": 6,
        "has_face_frame": True,
    },
    {
        "video_id": "no-subject",
        "text": "cut carrots",
        "start": 0.0,
        "end": 1.0,
        "subject_start": None,
        "subject_end": None,
        "unique_name_count": 0,
        "has_face_frame": True,
    },
    {
        "video_id": "no-face",
        "text": "a man stirs",
        "start": 0.0,
        "end": 1.0,
        "subject_start": 0,
        "subject_end": 5,
        "unique_name_count": 1,
        "has_face_frame": False,
    },
]


def _pseudoad_inputs(tmp_path, rows=None):
    caps = tmp_path / "caps.jsonl"
    caps.write_text("\n".join(json.dumps(r) for r in (rows or CAPTION_ROWS)) + "\n")
    names = tmp_path / "names.txt"
    names.write_text("John\nMary\nAda\n")
    return caps, names


def test_pseudoad_filters_and_stats(tmp_path):
    caps, names = _pseudoad_inputs(tmp_path, rows=CAPTION_ROWS[1:])  # drop the good video
    out = tmp_path / "out"
    code = main(
        ["pseudoad", "--captions", str(caps), "--names", str(names), "--out-dir", str(out)]
    )
    assert code == 0
    stats = json.loads((out / "pseudoad_stats.json").read_text())
    assert stats["videos_kept"] == 0
    assert stats["rejections"] == {"too_many_names": 1, "no_subject": 1, "no_face": 1}


def test_pseudoad_deterministic_reruns(tmp_path):
    caps, names = _pseudoad_inputs(tmp_path)
    out1 = tmp_path / "out1"
    out2 = tmp_path / "out2"
    for out in (out1, out2):
        code = main(
            [
                "pseudoad",
                "--captions",
                str(caps),
                "--names",
                str(names),
                "--seed",
                "9",
                "--out-dir",
                str(out),
            ]
        )
        assert code == 0
    for name in ("pseudo_ad.jsonl", "banks.json", "pseudoad_stats.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_pseudoad_missing_fields_exit_1(tmp_path):
    caps = tmp_path / "caps.jsonl"
    caps.write_text(json.dumps({"video_id": "v", "text": "x"}) + "\n")
    names = tmp_path / "names.txt"
    names.write_text("John\n")
    code = main(
        ["pseudoad", "--captions", str(caps), "--names", str(names), "--out-dir", str(tmp_path)]
    )
    assert code == 1


def test_missing_input_file_exits_2(tmp_path):
    code = main(
        [
            "pseudoad",
            "--captions",
            str(tmp_path / "absent.jsonl"),
            "--names",
            str(tmp_path / "names.txt"),
            "--out-dir",
            str(tmp_path),
        ]
    )
    assert code == 2
