"""Command-line frontend: align, eval, interrater, pseudoad.

Parameters come from an INI config file (one section per command) with
command-line flags taking precedence. Every report embeds the resolved
configuration for provenance. Exit codes: 0 success, 1 configuration
error, 2 I/O error; per-item failures never abort a batch.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

from . import __version__
from .cider import cider_d
from .corpus import (
    TrackKind,
    TranscriptTrack,
    guess_narrator,
    load_cast_list,
    load_wav,
    parse_transcript,
    split_by_narrator,
)
from .critic import ExternalClusterResolver, load_cluster_file, score_movie
from .judge import JudgeConfig, JudgePair, judge_corpus
from .linefit import FitGates, ransac_line_fit, to_time_mapping
from .melalign import DEFAULT_MEL, correlate_windows, mask_ad_regions, mel_spectrogram
from .metrics import (
    DEFAULT_DUPLICATE_COUNT_THRESHOLD,
    detect_duplicate_versions,
    dump_pairs,
    pair_inter_rater,
    recall_at_k,
)
from .pipeline import (
    AlignParams,
    ClipResult,
    SplitManifest,
    align_clip,
    emit_dataset,
    project_ad,
)
from .pseudoad import (
    filter_videos,
    load_caption_file,
    load_name_pool,
    transform_video,
)

logger = logging.getLogger("adkit")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2


class ConfigError(Exception):
    """Bad configuration or inconsistent inputs; maps to exit code 1."""


# ---------------------------------------------------------------------------
# Config plumbing
# ---------------------------------------------------------------------------


def _load_config(path: Optional[str], section: str) -> dict[str, str]:
    if not path:
        return {}
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found or unreadable: {path}")
    if not parser.has_section(section):
        return {}
    return dict(parser.items(section))


def _setting(args, config: dict[str, str], name: str, default=None):
    """Flag value if given, else config-file value, else default."""
    value = getattr(args, name.replace("-", "_"), None)
    if value is not None:
        return value
    if name in config:
        return config[name]
    return default


def _as_float(value, name: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}") from None


def _as_int(value, name: str) -> int:
    try:
        return int(str(value))
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be an integer, got {value!r}") from None


def _write_json(payload: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _read_lines(path: str) -> list[str]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    return lines


# ---------------------------------------------------------------------------
# align
# ---------------------------------------------------------------------------


def _align_params(args, config: dict[str, str]) -> AlignParams:
    params = AlignParams(
        wer_accept_threshold=_as_float(
            _setting(args, config, "wer_accept_threshold", 0.8), "wer_accept_threshold"
        ),
        chunk_pad_s=_as_float(_setting(args, config, "chunk_pad_s", 120.0), "chunk_pad_s"),
        window_frames=_as_int(_setting(args, config, "window_frames", 50), "window_frames"),
        residual_threshold=_as_float(
            _setting(args, config, "residual_threshold", 50.0), "residual_threshold"
        ),
        iterations=_as_int(_setting(args, config, "iterations", 2000), "iterations"),
        seed=_as_int(_setting(args, config, "seed", 0), "seed"),
        gates=FitGates(
            slope_min=_as_float(_setting(args, config, "slope_min", 0.8), "slope_min"),
            slope_max=_as_float(_setting(args, config, "slope_max", 1.25), "slope_max"),
            mse_max=_as_float(_setting(args, config, "mse_max", 100.0), "mse_max"),
            min_inliers=_as_int(_setting(args, config, "min_inliers", 10), "min_inliers"),
        ),
    )
    try:
        params.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return params


def _params_dict(params: AlignParams) -> dict:
    return {
        "wer_accept_threshold": params.wer_accept_threshold,
        "chunk_pad_s": params.chunk_pad_s,
        "window_frames": params.window_frames,
        "residual_threshold": params.residual_threshold,
        "iterations": params.iterations,
        "seed": params.seed,
        "slope_min": params.gates.slope_min,
        "slope_max": params.gates.slope_max,
        "mse_max": params.gates.mse_max,
        "min_inliers": params.gates.min_inliers,
    }


def _load_manifest(path: str) -> tuple[Path, list[dict]]:
    manifest_path = Path(path)
    if not manifest_path.is_file():
        raise ConfigError(f"manifest not found: {path}")
    try:
        data = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"manifest is not valid JSON: {exc}") from None
    movies = data.get("movies")
    if not isinstance(movies, list) or not movies:
        raise ConfigError("manifest must contain a non-empty 'movies' list")
    for movie in movies:
        for key in ("movie_id", "audio", "transcript", "clips"):
            if key not in movie:
                raise ConfigError(f"manifest movie entry missing {key!r}")
        for clip in movie["clips"]:
            for key in ("clip_id", "audio", "transcript"):
                if key not in clip:
                    raise ConfigError(f"manifest clip entry missing {key!r}")
    return manifest_path.parent, movies


def _check_manifest_files(base: Path, movies: list[dict]) -> list[str]:
    missing = []
    for movie in movies:
        for key in ("audio", "transcript"):
            if not (base / movie[key]).is_file():
                missing.append(str(base / movie[key]))
        for clip in movie["clips"]:
            for key in ("audio", "transcript"):
                if not (base / clip[key]).is_file():
                    missing.append(str(base / clip[key]))
    return missing


def _failed_clip(clip_id: str, movie_id: str, reason: str) -> ClipResult:
    from .pipeline import AlignStatus, ClipAlignment

    return ClipResult(
        ClipAlignment(clip_id, movie_id, None, None, None, AlignStatus.STAGE1_FAILED, reason)
    )


def cmd_align(args) -> int:
    config = _load_config(args.config, "align")
    params = _align_params(args, config)
    out_dir = Path(_setting(args, config, "out_dir", "out"))
    jobs = _as_int(_setting(args, config, "jobs", os.cpu_count() or 1), "jobs")
    narrator_default = _setting(args, config, "narrator")
    eval_movies_file = _setting(args, config, "eval_movies")

    base, movies = _load_manifest(args.manifest)
    eval_ids: set[str] = set()
    if eval_movies_file:
        eval_ids = {line.strip() for line in _read_lines(eval_movies_file) if line.strip()}

    if args.dry_run:
        missing = _check_manifest_files(base, movies)
        resolved = {"params": _params_dict(params), "movies": len(movies)}
        if missing:
            print(json.dumps({"missing_files": missing, **resolved}, indent=2))
            return EXIT_CONFIG
        print(json.dumps({"ok": True, **resolved}, indent=2))
        return EXIT_OK

    results: list[ClipResult] = []
    for movie in movies:
        movie_id = movie["movie_id"]
        try:
            movie_track = parse_transcript(base / movie["transcript"], source_id=movie_id)
            narrator = movie.get("narrator") or narrator_default
            if narrator is None:
                raise ConfigError(
                    f"no narrator speaker for movie {movie_id}; pass --narrator or set it in the manifest"
                )
            if narrator == "auto":
                narrator = guess_narrator(movie_track)
            ad_track, dialogue_track = split_by_narrator(movie_track, narrator)
            movie_audio = load_wav(base / movie["audio"])
        except ConfigError:
            raise
        except Exception as exc:
            logger.error("movie %s failed to load: %s", movie_id, exc)
            for clip in movie["clips"]:
                results.append(_failed_clip(clip["clip_id"], movie_id, f"movie inputs: {exc}"))
            continue

        def run_clip(clip: dict) -> ClipResult:
            clip_id = clip["clip_id"]
            try:
                clip_track = parse_transcript(base / clip["transcript"], source_id=clip_id)
                clip_audio = load_wav(base / clip["audio"])
                alignment = align_clip(
                    clip_audio, clip_track, movie_audio, dialogue_track, ad_track, params
                )
                records = ()
                if alignment.mapping is not None:
                    records = tuple(
                        project_ad(
                            ad_track,
                            alignment.mapping,
                            clip_audio.duration,
                            movie_id=movie_id,
                            clip_id=clip_id,
                        )
                    )
                return ClipResult(alignment, records)
            except Exception as exc:
                logger.error("clip %s failed: %s", clip_id, exc)
                return _failed_clip(clip_id, movie_id, str(exc))

        with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
            results.extend(pool.map(run_clip, movie["clips"]))

    results.sort(key=lambda r: (r.alignment.movie_id, r.alignment.clip_id))
    all_ids = {r.alignment.movie_id for r in results}
    manifest = SplitManifest(frozenset(all_ids - eval_ids), frozenset(eval_ids & all_ids))
    try:
        summary = emit_dataset(results, manifest, out_dir)
    except OSError as exc:
        logger.error("cannot write dataset: %s", exc)
        return EXIT_IO

    with open(out_dir / "alignments.jsonl", "w", encoding="utf-8") as fh:
        for res in results:
            fh.write(json.dumps(res.alignment.report(), sort_keys=True) + "\n")
    _write_json(
        {**summary, "resolved_config": _params_dict(params)}, out_dir / "summary.json"
    )
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def _judge_config(args, config: dict[str, str]) -> JudgeConfig:
    return JudgeConfig(
        endpoint=_setting(args, config, "judge_endpoint", "https://api.openai.com/v1"),
        model_name=_setting(args, config, "judge_model", "gpt-3.5-turbo"),
        max_retries=_as_int(_setting(args, config, "judge_retries", 3), "judge_retries"),
        concurrency_limit=_as_int(_setting(args, config, "jobs", 4), "jobs"),
        timeout=_as_float(_setting(args, config, "judge_timeout", 60.0), "judge_timeout"),
        cache_path=_setting(args, config, "judge_cache"),
    )


def _metric_report(
    metrics: set[str],
    predictions: list[str],
    references: list[str],
    args,
    config: dict[str, str],
) -> dict:
    report: dict = {"n_items": len(predictions)}
    if "cider" in metrics:
        result = cider_d(predictions, [[r] for r in references])
        report["cider"] = result.corpus_score
    if "recall" in metrics:
        k = _as_int(_setting(args, config, "recall_k", 1), "recall_k")
        n = _as_int(_setting(args, config, "recall_n", 5), "recall_n")
        try:
            report["recall_at_k"] = recall_at_k(predictions, references, k=k, n=n)
            report["recall_params"] = {"k": k, "n": n, "scorer": "tfidf-cosine"}
        except ValueError as exc:
            report["recall_skipped"] = str(exc)
    if "critic" in metrics:
        cast_path = _setting(args, config, "cast")
        if not cast_path:
            raise ConfigError("critic metric needs --cast")
        cast = load_cast_list(cast_path)
        pred_resolver = ref_resolver = None
        clusters_pred = _setting(args, config, "clusters_pred")
        clusters_ref = _setting(args, config, "clusters_ref")
        if clusters_pred:
            pred_resolver = ExternalClusterResolver(load_cluster_file(clusters_pred)[0])
        if clusters_ref:
            ref_resolver = ExternalClusterResolver(load_cluster_file(clusters_ref)[0])
        critic = score_movie(predictions, references, cast, pred_resolver, ref_resolver)
        report["critic"] = critic.aggregate
        report["critic_pct"] = critic.aggregate_pct
        report["critic_scored_ads"] = critic.n_scored
    if "llm" in metrics:
        judge_cfg = _judge_config(args, config)
        pairs = [
            JudgePair(pair_id=str(i), reference=ref, prediction=pred)
            for i, (pred, ref) in enumerate(zip(predictions, references))
        ]
        try:
            judged = judge_corpus(pairs, judge_cfg)
            report["llm_ad_eval"] = judged.mean
            report["llm_failures"] = len(judged.failures)
        except Exception as exc:
            report["llm_error"] = str(exc)
    return report


def cmd_eval(args) -> int:
    config = _load_config(args.config, "eval")
    out_dir = Path(_setting(args, config, "out_dir", "out"))
    metric_names = _setting(args, config, "metrics", "cider,recall")
    metrics = {m.strip() for m in metric_names.split(",") if m.strip()}
    unknown = metrics - {"cider", "recall", "critic", "llm"}
    if unknown:
        raise ConfigError(f"unknown metrics: {sorted(unknown)}")

    try:
        predictions = _read_lines(args.predictions)
        references = _read_lines(args.references)
    except OSError as exc:
        logger.error("cannot read inputs: %s", exc)
        return EXIT_IO
    if len(predictions) != len(references):
        raise ConfigError(
            f"predictions ({len(predictions)}) and references ({len(references)}) "
            "are not index-aligned"
        )
    if not predictions:
        raise ConfigError("no prediction/reference pairs")

    if args.dry_run:
        print(json.dumps({"ok": True, "n_items": len(predictions), "metrics": sorted(metrics)}))
        return EXIT_OK

    report = _metric_report(metrics, predictions, references, args, config)
    report["metrics"] = sorted(metrics)
    report["resolved_config"] = {k: str(v) for k, v in config.items()}
    _write_json(report, out_dir / "eval_report.json")
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# interrater
# ---------------------------------------------------------------------------


def cmd_interrater(args) -> int:
    config = _load_config(args.config, "interrater")
    out_dir = Path(_setting(args, config, "out_dir", "out"))
    threshold = _as_float(_setting(args, config, "tiou", 0.8), "tiou")
    dup_threshold = _as_int(
        _setting(args, config, "duplicate_count_threshold", DEFAULT_DUPLICATE_COUNT_THRESHOLD),
        "duplicate_count_threshold",
    )
    if not 0.0 < threshold <= 1.0:
        raise ConfigError(f"tiou threshold must be in (0, 1], got {threshold}")

    try:
        track_a = parse_transcript(args.track_a, kind=TrackKind.AD_NARRATION)
        track_b = parse_transcript(args.track_b, kind=TrackKind.AD_NARRATION)
    except OSError as exc:
        logger.error("cannot read tracks: %s", exc)
        return EXIT_IO

    if args.dry_run:
        print(json.dumps({"ok": True, "segments_a": len(track_a), "segments_b": len(track_b)}))
        return EXIT_OK

    report: dict = {"tiou_threshold": threshold}
    duplicate, match_rate = detect_duplicate_versions(track_a, track_b, dup_threshold)
    report["duplicate_match_rate"] = match_rate
    if duplicate:
        report["skipped"] = "duplicate version"
        _write_json(report, out_dir / "interrater_report.json")
        print(json.dumps(report, sort_keys=True))
        return EXIT_OK

    if not args.assume_aligned:
        if not (args.audio_a and args.audio_b):
            raise ConfigError("interrater needs --audio-a/--audio-b or --assume-aligned")
        mel = DEFAULT_MEL
        spec_a = mask_ad_regions(mel_spectrogram(load_wav(args.audio_a), mel), track_a)
        spec_b = mask_ad_regions(mel_spectrogram(load_wav(args.audio_b), mel), track_b)
        matches = correlate_windows(spec_a, spec_b)
        if len(matches) == 0:
            report["skipped"] = "audio alignment failed: all windows masked"
            _write_json(report, out_dir / "interrater_report.json")
            print(json.dumps(report, sort_keys=True))
            return EXIT_OK
        fit = ransac_line_fit(matches, seed=_as_int(_setting(args, config, "seed", 0), "seed"))
        report["fit"] = fit.report()
        if not fit.accepted:
            report["skipped"] = "audio alignment rejected by gates"
            _write_json(report, out_dir / "interrater_report.json")
            print(json.dumps(report, sort_keys=True))
            return EXIT_OK
        mapping = to_time_mapping(fit, mel.seconds_per_frame)
        track_b = TranscriptTrack(
            tuple(
                type(seg)(seg.text, mapping.to_movie(seg.start), mapping.to_movie(seg.end), seg.speaker)
                for seg in track_b.segments
            ),
            track_b.source_id,
            track_b.kind,
        )

    pairs = pair_inter_rater(track_a, track_b, threshold)
    pairs.sort(key=lambda p: p.ad_a.start_ms)  # metrics expect time order
    report["n_pairs"] = len(pairs)
    out_dir.mkdir(parents=True, exist_ok=True)
    dump_pairs(pairs, out_dir / "pairs.tsv")

    if pairs:
        references = [p.ad_a.text for p in pairs]
        predictions = [p.ad_b.text for p in pairs]
        metric_names = _setting(args, config, "metrics", "cider")
        metrics = {m.strip() for m in metric_names.split(",") if m.strip()}
        report.update(_metric_report(metrics, predictions, references, args, config))
    _write_json(report, out_dir / "interrater_report.json")
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# pseudoad
# ---------------------------------------------------------------------------


def cmd_pseudoad(args) -> int:
    config = _load_config(args.config, "pseudoad")
    out_dir = Path(_setting(args, config, "out_dir", "out"))
    seed = _as_int(_setting(args, config, "seed", 0), "seed")
    distractors = _as_int(_setting(args, config, "distractors", 4), "distractors")
    if distractors < 0:
        raise ConfigError("distractors must be non-negative")

    try:
        videos = load_caption_file(args.captions)
        pool = load_name_pool(args.names)
    except FileNotFoundError as exc:
        logger.error("%s", exc)
        return EXIT_IO
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(f"bad caption or name-pool file: {exc}") from None

    if args.dry_run:
        print(json.dumps({"ok": True, "videos": len(videos), "names": len(pool)}))
        return EXIT_OK

    outcome = filter_videos(videos)
    portraits = {
        vid: next((c.portrait for c in videos[vid] if c.portrait), None) or f"{vid}.jpg"
        for vid in outcome.kept
    }

    out_dir.mkdir(parents=True, exist_ok=True)
    banks = {}
    n_records = 0
    with open(out_dir / "pseudo_ad.jsonl", "w", encoding="utf-8") as fh:
        for vid in outcome.kept:
            others = sorted(p for v, p in portraits.items() if v != vid)
            pseudo, bank = transform_video(
                videos[vid], pool, seed, distractor_pool=others, distractors=distractors
            )
            banks[vid] = {
                "name": bank.name,
                "portrait": bank.portrait_ref,
                "distractors": list(bank.distractor_refs),
            }
            for rec in pseudo:
                fh.write(
                    json.dumps(
                        {
                            "video_id": rec.video_id,
                            "text": rec.text,
                            "start": rec.start,
                            "end": rec.end,
                            "name": rec.name,
                        },
                        ensure_ascii=False,
                        sort_keys=True,
                    )
                    + "\n"
                )
                n_records += 1

    _write_json(banks, out_dir / "banks.json")
    stats = {
        "videos_total": len(videos),
        "videos_kept": len(outcome.kept),
        "records": n_records,
        "rejections": outcome.reason_counts,
        "seed": seed,
        "distractors": distractors,
    }
    _write_json(stats, out_dir / "pseudoad_stats.json")
    print(json.dumps(stats, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adkit",
        description="Align AD soundtracks with movie clips, build AD datasets, evaluate AD text.",
    )
    parser.add_argument("--version", action="version", version=f"adkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="INI config file with a section per command")
        p.add_argument("--jobs", type=int, help="worker pool size")
        p.add_argument("--seed", type=int, help="random seed")
        p.add_argument("--out-dir", dest="out_dir", help="output directory")
        p.add_argument("--dry-run", action="store_true", help="validate inputs, do no work")

    p = sub.add_parser("align", help="two-stage clip alignment over a manifest")
    common(p)
    p.add_argument("--manifest", required=True, help="JSON manifest of movies and clips")
    p.add_argument("--narrator", help="diarization label of the AD narrator, or 'auto'")
    p.add_argument("--eval-movies", dest="eval_movies", help="file of movie ids for the eval split")
    p.add_argument("--wer-accept-threshold", dest="wer_accept_threshold", type=float)
    p.add_argument("--chunk-pad-s", dest="chunk_pad_s", type=float)
    p.add_argument("--window-frames", dest="window_frames", type=int)
    p.add_argument("--residual-threshold", dest="residual_threshold", type=float)
    p.add_argument("--iterations", type=int)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("eval", help="score predictions against references")
    common(p)
    p.add_argument("--predictions", required=True, help="text file, one AD per line")
    p.add_argument("--references", required=True, help="text file, one AD per line")
    p.add_argument("--metrics", help="comma list from cider,recall,critic,llm")
    p.add_argument("--cast", help="cast list JSON (critic)")
    p.add_argument("--clusters-pred", dest="clusters_pred", help="external cluster file")
    p.add_argument("--clusters-ref", dest="clusters_ref", help="external cluster file")
    p.add_argument("--recall-k", dest="recall_k", type=int)
    p.add_argument("--recall-n", dest="recall_n", type=int)
    p.add_argument("--judge-endpoint", dest="judge_endpoint")
    p.add_argument("--judge-model", dest="judge_model")
    p.add_argument("--judge-cache", dest="judge_cache")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("interrater", help="pair and score two AD versions of one movie")
    common(p)
    p.add_argument("--track-a", dest="track_a", required=True)
    p.add_argument("--track-b", dest="track_b", required=True)
    p.add_argument("--audio-a", dest="audio_a")
    p.add_argument("--audio-b", dest="audio_b")
    p.add_argument("--assume-aligned", dest="assume_aligned", action="store_true")
    p.add_argument("--tiou", type=float)
    p.add_argument("--duplicate-count-threshold", dest="duplicate_count_threshold", type=int)
    p.add_argument("--metrics", help="comma list from cider,recall,critic,llm")
    p.add_argument("--cast", help="cast list JSON (critic)")
    p.add_argument("--clusters-pred", dest="clusters_pred")
    p.add_argument("--clusters-ref", dest="clusters_ref")
    p.add_argument("--recall-k", dest="recall_k", type=int)
    p.add_argument("--recall-n", dest="recall_n", type=int)
    p.add_argument("--judge-endpoint", dest="judge_endpoint")
    p.add_argument("--judge-model", dest="judge_model")
    p.add_argument("--judge-cache", dest="judge_cache")
    p.set_defaults(func=cmd_interrater)

    p = sub.add_parser("pseudoad", help="transform annotated captions into pseudo-AD")
    common(p)
    p.add_argument("--captions", required=True, help="caption annotation JSONL")
    p.add_argument("--names", required=True, help="name pool, one name per line")
    p.add_argument("--distractors", type=int)
    p.set_defaults(func=cmd_pseudoad)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        logger.error("missing file: %s", exc)
        return EXIT_IO
    except OSError as exc:
        logger.error("I/O error: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
