import pytest

from adkit.corpus import CastList, CastMember
from adkit.critic import (
    ExternalClusterResolver,
    RuleBasedResolver,
    build_paragraph,
    critic_score,
    load_cluster_file,
    resolve_identities,
    score_movie,
)


def _cast(*names):
    return CastList(tuple(CastMember(n) for n in names))


def _spans_of(paragraph, *surfaces):
    """Locate each surface left to right, allowing repeats."""
    spans = []
    cursor = 0
    for surface in surfaces:
        idx = paragraph.index(surface, cursor)
        spans.append((idx, idx + len(surface)))
        cursor = idx + len(surface)
    return spans


def test_build_paragraph_single_ad():
    paragraph, spans = build_paragraph(["Jack runs."], _cast("Jack", "Rose"))
    assert paragraph == "Jack, Rose. Jack runs."
    assert spans == ((12, 22),)
    assert paragraph[spans[0][0] : spans[0][1]] == "Jack runs."


def test_build_paragraph_spans_cover_exactly_the_ads():
    ads = ["One sentence.", "Two sentences.", "Three."]
    paragraph, spans = build_paragraph(ads, _cast("Jack"))
    assert len(spans) == 3
    for ad, (lo, hi) in zip(ads, spans):
        assert paragraph[lo:hi] == ad
    assert spans == tuple(sorted(spans))


def test_build_paragraph_errors():
    with pytest.raises(ValueError):
        build_paragraph([], _cast("Jack"))
    with pytest.raises(ValueError):
        build_paragraph(["x."], CastList(()))


def test_rule_based_pronoun_resolution():
    cast = _cast("Jack", "Rose")
    paragraph, spans = build_paragraph(["Jack pours.", "He drinks."], cast)
    sets = resolve_identities(paragraph, spans, cast, RuleBasedResolver(cast))
    assert sets == [{"jack"}, {"jack"}]


def test_rule_based_unresolvable_pronoun_is_empty():
    cast = _cast("Jack", "Rose")
    paragraph, spans = build_paragraph(["She stirs."], cast)
    sets = resolve_identities(paragraph, spans, cast, RuleBasedResolver(cast))
    assert sets == [set()]


def test_rule_based_pronoun_window_limits_resolution():
    cast = _cast("Jack")
    ads = ["Jack waves.", "The door creaks open.", "Dust settles slowly.", "He leaves."]
    paragraph, spans = build_paragraph(ads, cast)
    sets = resolve_identities(paragraph, spans, cast, RuleBasedResolver(cast))
    # nearest mention is three sentences back, outside the 2-sentence window
    assert sets == [{"jack"}, set(), set(), set()]
    wide = RuleBasedResolver(cast, pronoun_window=4)
    sets = resolve_identities(paragraph, spans, cast, wide)
    assert sets[3] == {"jack"}


def test_rule_based_pronoun_chains_within_window():
    cast = _cast("Jack")
    ads = ["Jack waves.", "He turns.", "He leaves."]
    paragraph, spans = build_paragraph(ads, cast)
    sets = resolve_identities(paragraph, spans, cast, RuleBasedResolver(cast))
    assert sets == [{"jack"}, {"jack"}, {"jack"}]


def test_rule_based_alias_first_and_last_token():
    cast = _cast("Jack Dawson", "Rose Bukater")
    ads = ["Dawson smiles.", "Rose waves."]
    paragraph, spans = build_paragraph(ads, cast)
    sets = resolve_identities(paragraph, spans, cast, RuleBasedResolver(cast))
    assert sets == [{"jack dawson"}, {"rose bukater"}]


def test_rule_based_ambiguous_alias_skipped():
    cast = _cast("Jack Dawson", "Jack Sparrow")
    ads = ["Jack smiles.", "Sparrow nods."]
    paragraph, spans = build_paragraph(ads, cast)
    sets = resolve_identities(paragraph, spans, cast, RuleBasedResolver(cast))
    # bare "Jack" could be either character; only the unambiguous alias counts
    assert sets == [set(), {"jack sparrow"}]


def test_rule_based_case_insensitive():
    cast = _cast("Jack")
    ads = ["JACK runs."]
    paragraph, spans = build_paragraph(ads, cast)
    sets = resolve_identities(paragraph, spans, cast, RuleBasedResolver(cast))
    assert sets == [{"jack"}]


def test_cluster_with_two_cast_names_discarded():
    cast = _cast("Jack", "Rose")
    ads = ["The two men argue."]
    paragraph, spans = build_paragraph(ads, cast)
    the_two_men = _spans_of(paragraph, "two men")[0]
    jack = _spans_of(paragraph, "Jack")[0]
    rose = _spans_of(paragraph, "Rose")[0]
    resolver = ExternalClusterResolver([[the_two_men, jack, rose]])
    sets = resolve_identities(paragraph, spans, cast, resolver)
    assert sets == [set()]


def test_external_mention_containing_name_counts():
    cast = _cast("Jack", "Rose")
    ads = ["Young Jack stands up."]
    paragraph, spans = build_paragraph(ads, cast)
    mention = _spans_of(paragraph, "Young Jack")[0]
    resolver = ExternalClusterResolver([[mention]])
    sets = resolve_identities(paragraph, spans, cast, resolver)
    assert sets == [{"jack"}]


def test_external_pronoun_mentions_removed():
    cast = _cast("Jack")
    ads = ["Jack pours.", "He drinks."]
    paragraph, spans = build_paragraph(ads, cast)
    jack_prefix, jack_ad = _spans_of(paragraph, "Jack", "Jack")
    he = _spans_of(paragraph, "He")[0]
    resolver = ExternalClusterResolver([[jack_prefix, jack_ad, he]])
    sets = resolve_identities(paragraph, spans, cast, resolver)
    # the raw pronoun mention is removed, so sentence 2 keeps no anchor
    assert sets == [{"jack"}, set()]


def test_critic_score_examples():
    report = critic_score([{"Jack"}], [{"Jack"}])
    assert report.per_ad[0].iou == 1.0
    report = critic_score([{"John"}], [{"John", "Mary"}])
    assert report.per_ad[0].iou == 0.5
    report = critic_score([set()], [{"Mary"}])
    assert report.per_ad[0].iou == 0.0
    report = critic_score([{"John"}], [set()])
    assert report.per_ad[0].skipped
    assert report.n_scored == 0


def test_critic_score_aggregate_mean_of_valid():
    report = critic_score(
        [{"a"}, {"a"}, {"a"}, set()],
        [{"a"}, {"a", "b"}, set(), {"b"}],
    )
    ious = [s.iou for s in report.per_ad if not s.skipped]
    assert ious == [1.0, 0.5, 0.0]
    assert report.aggregate == pytest.approx(0.5)
    assert report.aggregate_pct == pytest.approx(50.0)


def test_critic_score_symmetric_per_ad():
    a = [{"x"}, {"x", "y"}]
    b = [{"x", "y"}, {"y"}]
    fw = critic_score(a, b)
    bw = critic_score(b, a)
    assert [s.iou for s in fw.per_ad] == [s.iou for s in bw.per_ad]


def test_critic_score_reorder_invariance():
    pred = [{"a"}, {"b"}, set()]
    ref = [{"a"}, {"a", "b"}, {"c"}]
    base = critic_score(pred, ref).aggregate
    perm = [2, 0, 1]
    again = critic_score([pred[i] for i in perm], [ref[i] for i in perm]).aggregate
    assert again == pytest.approx(base)


def test_critic_score_canonicalization_invariance():
    report = critic_score([{"JACK "}], [{"jack"}])
    assert report.per_ad[0].iou == 1.0


def test_critic_score_length_mismatch_errors():
    with pytest.raises(ValueError):
        critic_score([{"a"}], [{"a"}, {"b"}])


def test_score_movie_end_to_end_rule_based():
    cast = _cast("Jack", "Rose")
    refs = ["Jack opens the door.", "Rose laughs.", "He waves goodbye."]
    preds = ["Jack opens a door.", "Jack laughs.", "He waves."]
    report = score_movie(preds, refs, cast)
    assert [s.iou for s in report.per_ad] == [1.0, 0.0, 0.0]
    # sentence 3: prediction chain resolves He -> Jack, reference He -> Rose


def test_load_cluster_file(tmp_path):
    path = tmp_path / "clusters.json"
    path.write_text("[[[[0, 4], [12, 16]], [[6, 10]]]]")
    paragraphs = load_cluster_file(path)
    assert paragraphs == [[[(0, 4), (12, 16)], [(6, 10)]]]
    resolver = ExternalClusterResolver(paragraphs[0])
    clusters = resolver("Jack, Rose. Jack runs.", ((12, 22),))
    assert clusters[0].mentions[0].surface == "Jack"
    assert clusters[1].mentions[0].surface == "Rose"
