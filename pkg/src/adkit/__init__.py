"""adkit: align audio-description soundtracks with movie clips and grade AD text.

The toolkit covers three workflows:

* building AD datasets by two-stage alignment of full-movie described
  soundtracks against short clips (text WER localization, then masked
  mel-spectrogram correlation with a robust line fit),
* transforming annotated instructional-video captions into pseudo-AD with
  sampled character names and character banks,
* evaluating generated AD (CRITIC identity IoU, CIDEr-D, Recall@k/N,
  temporal-IoU inter-rater pairing, LLM-as-judge).
"""

from .cider import CiderResult, cider_d
from .corpus import (
    ADRecord,
    AudioBuffer,
    CastList,
    CastMember,
    TimedSegment,
    TrackKind,
    TranscriptTrack,
    load_cast_list,
    load_wav,
    parse_transcript,
    split_by_narrator,
    write_transcript,
)
from .critic import (
    CriticReport,
    ExternalClusterResolver,
    RuleBasedResolver,
    build_paragraph,
    critic_score,
    resolve_identities,
    score_movie,
)
from .judge import (
    JudgeConfig,
    JudgePair,
    JudgeReport,
    build_prompt,
    judge_corpus,
    parse_score,
)
from .linefit import (
    AlignmentFit,
    FitGates,
    TimeMapping,
    evaluate_gates,
    ransac_line_fit,
    to_time_mapping,
)
from .melalign import (
    MatchPointSet,
    MelConfig,
    MelSpectrogram,
    correlate_windows,
    mask_ad_regions,
    mel_spectrogram,
)
from .metrics import (
    InterRaterPair,
    detect_duplicate_versions,
    make_tfidf_scorer,
    pair_inter_rater,
    recall_at_k,
    tiou,
)
from .pipeline import (
    AlignParams,
    AlignStatus,
    ClipAlignment,
    ClipResult,
    SplitManifest,
    align_clip,
    emit_dataset,
    project_ad,
)
from .pseudoad import (
    CaptionRecord,
    CharacterBank,
    filter_videos,
    replace_subject,
    transform_video,
)
from .textalign import TextAlignResult, locate_clip, tokenize, word_error_rate

__version__ = "0.1.0"

__all__ = [
    "ADRecord",
    "AlignParams",
    "AlignStatus",
    "AlignmentFit",
    "AudioBuffer",
    "CaptionRecord",
    "CastList",
    "CastMember",
    "CharacterBank",
    "CiderResult",
    "ClipAlignment",
    "ClipResult",
    "CriticReport",
    "ExternalClusterResolver",
    "FitGates",
    "InterRaterPair",
    "JudgeConfig",
    "JudgePair",
    "JudgeReport",
    "MatchPointSet",
    "MelConfig",
    "MelSpectrogram",
    "RuleBasedResolver",
    "SplitManifest",
    "TextAlignResult",
    "TimeMapping",
    "TimedSegment",
    "TrackKind",
    "TranscriptTrack",
    "align_clip",
    "build_paragraph",
    "build_prompt",
    "cider_d",
    "correlate_windows",
    "critic_score",
    "detect_duplicate_versions",
    "emit_dataset",
    "evaluate_gates",
    "filter_videos",
    "judge_corpus",
    "load_cast_list",
    "load_wav",
    "locate_clip",
    "make_tfidf_scorer",
    "mask_ad_regions",
    "mel_spectrogram",
    "pair_inter_rater",
    "parse_score",
    "parse_transcript",
    "project_ad",
    "ransac_line_fit",
    "recall_at_k",
    "replace_subject",
    "resolve_identities",
    "score_movie",
    "split_by_narrator",
    "tiou",
    "to_time_mapping",
    "tokenize",
    "transform_video",
    "word_error_rate",
    "write_transcript",
]
