"""Character-identification scoring for generated AD.

Both the predicted and the reference AD of a movie are joined into one
paragraph prefixed with the cast-list sentence, so a coreference resolver
can link names and pronouns. Clusters that pin down exactly one cast member
become identities; each AD sentence then carries the set of identities
mentioned in it, and prediction quality is the per-sentence IoU of those
sets against the reference's.

Two resolvers are provided: a deterministic rule-based one (exact and alias
name matching plus nearest-preceding-mention pronoun resolution) and an
adapter for cluster files produced by any off-the-shelf coreference tool.
"""

from __future__ import annotations

import json
import re
from bisect import bisect_right
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from pathlib import Path

from .corpus import CastList, canonical_name

# dropped from every cluster before sentences are mapped to identities
PRONOUNS = frozenset(
    {"he", "she", "they", "him", "her", "them", "his", "hers", "their"}
)
# third-person singular forms the rule-based resolver will try to resolve
RESOLVABLE_PRONOUNS = frozenset({"he", "she", "him", "her", "his", "hers"})

SentenceSpans = tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class Mention:
    """A mention span; surface holds the referenced text.

    For resolved pronouns the surface is the character name the pronoun was
    anchored to, not the pronoun itself, so the mention survives pronoun
    removal and anchors the identity in the pronoun's sentence.
    """

    start: int
    end: int
    surface: str


@dataclass(frozen=True)
class CorefCluster:
    """All mentions of one entity within a paragraph."""

    mentions: tuple[Mention, ...]


Resolver = Callable[[str, SentenceSpans], list[CorefCluster]]


def build_paragraph(
    ads: Sequence[str], cast: CastList
) -> tuple[str, SentenceSpans]:
    """Prefix the AD sentences with the cast sentence "c1, c2, ..., cn.".

    Returns the paragraph and the character spans of each AD sentence
    within it.
    """
    if not ads:
        raise ValueError("no AD sentences")
    if len(cast) == 0:
        raise ValueError("empty cast list")
    prefix = ", ".join(cast.names) + "."
    spans: list[tuple[int, int]] = []
    parts = [prefix]
    pos = len(prefix)
    for ad in ads:
        text = " ".join(ad.split())
        parts.append(text)
        spans.append((pos + 1, pos + 1 + len(text)))
        pos += 1 + len(text)
    return " ".join(parts), tuple(spans)


# ---------------------------------------------------------------------------
# Name matching
# ---------------------------------------------------------------------------


def _alias_map(cast: CastList) -> dict[str, set[str]]:
    """Canonical alias -> canonical full names it may refer to.

    Aliases are the full name plus its first and last tokens; an alias
    shared by several characters stays in the map and marks ambiguity.
    """
    aliases: dict[str, set[str]] = {}
    for member in cast.characters:
        full = canonical_name(member.character)
        tokens = full.split()
        for alias in {full, tokens[0], tokens[-1]}:
            aliases.setdefault(alias, set()).add(full)
    return aliases


def _display_names(cast: CastList) -> dict[str, str]:
    return {canonical_name(m.character): m.character for m in cast.characters}


def _alias_regex(aliases: dict[str, set[str]]) -> re.Pattern[str]:
    ordered = sorted(aliases, key=len, reverse=True)
    return re.compile(
        r"\b(?:" + "|".join(re.escape(a) for a in ordered) + r")\b", re.IGNORECASE
    )


def _cast_names_of_surface(
    surface: str, aliases: dict[str, set[str]], alias_re: re.Pattern[str]
) -> set[str]:
    """All cast members a mention may refer to (empty when it names none).

    Exact alias equality is tried first; otherwise cast names embedded in a
    longer mention ("the two men, Jack and Rose") are picked up by a
    word-boundary scan.
    """
    exact = aliases.get(canonical_name(surface))
    if exact:
        return set(exact)
    found: set[str] = set()
    for match in alias_re.finditer(surface):
        found |= aliases.get(canonical_name(match.group()), set())
    return found


_WORD = re.compile(r"\w+")


def _sentence_of(offset: int, spans: SentenceSpans) -> int:
    """AD sentence index containing the offset; -1 for the cast prefix."""
    starts = [s for s, _ in spans]
    i = bisect_right(starts, offset) - 1
    return i


class RuleBasedResolver:
    """Deterministic coreference over cast-prefixed AD paragraphs.

    Name mentions are found by case-insensitive longest-first matching of
    each character's full name, first token, and last token (mentions whose
    alias is shared by several characters are skipped as unresolvable).
    Third-person singular pronouns are anchored to the nearest preceding
    mention within a sliding window of pronoun_window sentences (the
    pronoun's own sentence counted); mentions in the cast prefix never act
    as anchors. Resolved pronouns are recorded with the character name as
    surface, so chains of pronouns keep the link alive.
    """

    def __init__(self, cast: CastList, pronoun_window: int = 2):
        if pronoun_window < 1:
            raise ValueError("pronoun_window must be at least 1")
        self.cast = cast
        self.pronoun_window = pronoun_window
        self._aliases = _alias_map(cast)
        self._display = _display_names(cast)
        self._name_re = _alias_regex(self._aliases)

    def __call__(self, paragraph: str, sentence_spans: SentenceSpans) -> list[CorefCluster]:
        mentions: dict[str, list[Mention]] = {}  # canonical full name -> mentions

        for match in self._name_re.finditer(paragraph):
            owners = self._aliases.get(canonical_name(match.group()), set())
            if len(owners) != 1:
                continue  # alias shared between characters: skip as ambiguous
            (owner,) = owners
            mentions.setdefault(owner, []).append(
                Mention(match.start(), match.end(), match.group())
            )

        # chronological list of (start, owner) anchor candidates
        anchors = sorted(
            (m.start, owner) for owner, ms in mentions.items() for m in ms
        )

        for word in _WORD.finditer(paragraph):
            token = word.group().casefold()
            if token not in RESOLVABLE_PRONOUNS:
                continue
            sent = _sentence_of(word.start(), sentence_spans)
            if sent < 0:
                continue  # pronoun inside the cast prefix
            earliest = sentence_spans[max(0, sent - self.pronoun_window + 1)][0]
            owner = None
            for start, cand in reversed(anchors):
                if start >= word.start():
                    continue
                if start < earliest or _sentence_of(start, sentence_spans) < 0:
                    break
                owner = cand
                break
            if owner is None:
                continue
            resolved = Mention(word.start(), word.end(), self._display[owner])
            mentions[owner].append(resolved)
            anchors.append((resolved.start, owner))
            anchors.sort()

        return [
            CorefCluster(tuple(sorted(ms, key=lambda m: m.start)))
            for _, ms in sorted(mentions.items())
        ]


class ExternalClusterResolver:
    """Adapter for clusters computed by an external coreference tool.

    Holds the clusters for one paragraph as (start, end) span lists;
    surfaces default to the paragraph slice when not given.
    """

    def __init__(self, clusters: Sequence[Sequence[tuple[int, int]]]):
        self.clusters = [tuple((int(s), int(e)) for s, e in cl) for cl in clusters]

    def __call__(self, paragraph: str, sentence_spans: SentenceSpans) -> list[CorefCluster]:
        out = []
        for spans in self.clusters:
            mentions = []
            for start, end in spans:
                if not (0 <= start < end <= len(paragraph)):
                    raise ValueError(f"cluster span ({start}, {end}) out of bounds")
                mentions.append(Mention(start, end, paragraph[start:end]))
            out.append(CorefCluster(tuple(mentions)))
        return out


def load_cluster_file(path: str | Path) -> list[list[list[tuple[int, int]]]]:
    """Read per-paragraph cluster span lists from a JSON file.

    Layout: a list with one entry per paragraph; each entry is a list of
    clusters; each cluster is a list of [start, end] pairs.
    """
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise ValueError(f"{path}: expected a list of per-paragraph cluster lists")
    return [
        [[(int(s), int(e)) for s, e in cluster] for cluster in paragraph]
        for paragraph in data
    ]


# ---------------------------------------------------------------------------
# Identity extraction and scoring
# ---------------------------------------------------------------------------


def resolve_identities(
    paragraph: str,
    sentence_spans: SentenceSpans,
    cast: CastList,
    resolver: Resolver,
) -> list[set[str]]:
    """Per-sentence sets of canonical cast names.

    Clusters naming zero or two-plus distinct cast members are discarded;
    pronoun mentions are removed from the survivors; a sentence owns an
    identity when the cluster keeps at least one mention starting inside
    the sentence span.
    """
    aliases = _alias_map(cast)
    alias_re = _alias_regex(aliases)
    sets: list[set[str]] = [set() for _ in sentence_spans]
    for cluster in resolver(paragraph, sentence_spans):
        named = set()
        for mention in cluster.mentions:
            named |= _cast_names_of_surface(mention.surface, aliases, alias_re)
        if len(named) != 1:
            continue
        (identity,) = named
        kept = [
            m for m in cluster.mentions if m.surface.casefold() not in PRONOUNS
        ]
        for sent_idx, (lo, hi) in enumerate(sentence_spans):
            if any(lo <= m.start < hi for m in kept):
                sets[sent_idx].add(identity)
    return sets


@dataclass(frozen=True)
class AdScore:
    ad_index: int
    iou: float
    skipped: bool


@dataclass(frozen=True)
class CriticReport:
    per_ad: tuple[AdScore, ...]
    aggregate: float  # mean IoU over non-skipped ADs, in [0, 1]

    @property
    def aggregate_pct(self) -> float:
        return self.aggregate * 100.0

    @property
    def n_scored(self) -> int:
        return sum(1 for s in self.per_ad if not s.skipped)


def critic_score(
    pred_sets: Sequence[set[str]], ref_sets: Sequence[set[str]]
) -> CriticReport:
    """IoU of resolved identity sets, averaged over ADs with a valid reference.

    ADs whose reference set is empty are marked skipped and excluded from
    the aggregate; an empty prediction against a non-empty reference scores
    zero.
    """
    if len(pred_sets) != len(ref_sets):
        raise ValueError(
            f"prediction/reference count mismatch: {len(pred_sets)} vs {len(ref_sets)}"
        )
    scores: list[AdScore] = []
    total = 0.0
    n = 0
    for i, (pred, ref) in enumerate(zip(pred_sets, ref_sets)):
        pred = {canonical_name(p) for p in pred}
        ref = {canonical_name(r) for r in ref}
        if not ref:
            scores.append(AdScore(i, 0.0, skipped=True))
            continue
        iou = len(pred & ref) / len(pred | ref)
        scores.append(AdScore(i, iou, skipped=False))
        total += iou
        n += 1
    return CriticReport(tuple(scores), total / n if n else 0.0)


def score_movie(
    pred_ads: Sequence[str],
    ref_ads: Sequence[str],
    cast: CastList,
    pred_resolver: Resolver | None = None,
    ref_resolver: Resolver | None = None,
) -> CriticReport:
    """Convenience wrapper: build both paragraphs, resolve, and score.

    Resolvers default to the rule-based one over the given cast.
    """
    if len(pred_ads) != len(ref_ads):
        raise ValueError("prediction and reference AD counts differ")
    default = RuleBasedResolver(cast)
    pred_par, pred_spans = build_paragraph(pred_ads, cast)
    ref_par, ref_spans = build_paragraph(ref_ads, cast)
    pred_sets = resolve_identities(pred_par, pred_spans, cast, pred_resolver or default)
    ref_sets = resolve_identities(ref_par, ref_spans, cast, ref_resolver or default)
    return critic_score(pred_sets, ref_sets)
