import random

import pytest

from livehost.dialogue import HostResponse, ViewerComment
from livehost.rerank import (
    Candidate,
    RecentHistory,
    RerankWeights,
    ScoreContext,
    fallback_response,
    internal_repetition,
    ngram_overlap,
    rerank,
    score,
)


def _history(*texts):
    h = RecentHistory()
    for t in texts:
        h.add(t)
    return h


def _resp(spoken):
    return HostResponse(spoken=spoken, slogan="屏障修护水润整天",
                        hook_question="你是什么肤质呢？", cta="点击下方链接下单。")


def _ctx(catalogue, lexicons, active_idx=6, comment="主播有什么推荐的面霜吗", history=None):
    return ScoreContext(
        comment=ViewerComment("c1", comment, "viewer-0001"),
        active=catalogue.products[active_idx] if active_idx is not None else None,
        history=history or RecentHistory(),
        catalogue=catalogue,
        lexicons=lexicons,
    )


@pytest.fixture()
def weights(cfg):
    return RerankWeights.from_config(cfg)


# -- n-gram overlap ------------------------------------------------------------


def test_overlap_verbatim_history_is_one():
    assert ngram_overlap("这款面霜很好用", _history("这款面霜很好用")) == 1.0


def test_overlap_empty_history_is_zero():
    assert ngram_overlap("这款面霜很好用", RecentHistory()) == 0.0


def test_overlap_hand_derived_half():
    # grams("abcd") = {abc, bcd}; grams("bcde") = {bcd, cde}; shared 1 of 2
    assert ngram_overlap("abcd", _history("bcde"), n=3) == 0.5


def test_overlap_short_text_is_zero():
    assert ngram_overlap("ab", _history("abcdef"), n=3) == 0.0


def test_overlap_monotone_as_history_grows():
    candidate = "面霜很好用水润不闷痘"
    history = RecentHistory()
    prev = ngram_overlap(candidate, history)
    for text in ("面霜很好用", "水润不闷痘真的", "别的完全无关", "面霜很好用水润"):
        history.add(text)
        cur = ngram_overlap(candidate, history)
        assert 0.0 <= cur <= 1.0
        assert cur >= prev
        prev = cur


def test_history_capacity_is_five_fifo():
    history = RecentHistory()
    for i in range(7):
        history.add(f"text-{i}")
    assert history.texts() == tuple(f"text-{i}" for i in range(2, 7))


def test_internal_repetition():
    assert internal_repetition("abcdef", 3) == 0.0
    # "aaaa": grams aaa, aaa -> 1 unique of 2
    assert internal_repetition("aaaa", 3) == 0.5


# -- scoring -------------------------------------------------------------------


def test_clean_candidate_has_zero_penalties(catalogue, lexicons, weights):
    active = catalogue.products[6]
    cand = Candidate(_resp(f"{active.name}真的好用，神经酰胺修护屏障。"), "", 0)
    s = score(cand, _ctx(catalogue, lexicons), weights)
    assert s.misalignment_penalty == 0.0
    assert s.unsanctioned_penalty == 0.0
    assert s.formulaic_penalty == 0.0
    assert s.overlap_penalty == 0.0
    assert s.relevance > 0.0


def test_other_product_mention_penalised(catalogue, lexicons, weights):
    other = catalogue.products[7]
    cand = Candidate(_resp(f"{other.name}也不错哦。"), "", 0)
    s = score(cand, _ctx(catalogue, lexicons), weights)
    assert s.unsanctioned_penalty >= 1.0


def test_stock_opening_is_formulaic(catalogue, lexicons, weights):
    cand = Candidate(_resp("家人们，这款面霜冲就完了。"), "", 0)
    s = score(cand, _ctx(catalogue, lexicons), weights)
    assert s.formulaic_penalty == 1.0


def test_misalignment_when_active_product_unnamed(catalogue, lexicons, weights):
    cand = Candidate(_resp("今天天气不错呀。"), "", 0)
    s = score(cand, _ctx(catalogue, lexicons), weights)
    assert s.misalignment_penalty == 1.0


def test_total_matches_weight_formula(catalogue, lexicons, weights):
    cand = Candidate(_resp("家人们，这款面霜冲就完了。"), "", 0)
    s = score(cand, _ctx(catalogue, lexicons), weights)
    expected = (weights.relevance * s.relevance
                - weights.misalignment * s.misalignment_penalty
                - weights.unsanctioned * s.unsanctioned_penalty
                - weights.repetition * s.repetition_penalty
                - weights.formulaic * s.formulaic_penalty
                - weights.overlap * s.overlap_penalty)
    assert s.total == pytest.approx(expected)


def test_all_components_non_negative(catalogue, lexicons, weights):
    texts = ["家人们家人们家人们", "这款面霜好用。", "听说深海鱼子酱精华更好", "平平无奇的一句话"]
    ctx = _ctx(catalogue, lexicons, history=_history("这款面霜好用。"))
    for i, t in enumerate(texts):
        s = score(Candidate(_resp(t), "", i), ctx, weights)
        for component in (s.relevance, s.misalignment_penalty, s.unsanctioned_penalty,
                          s.repetition_penalty, s.formulaic_penalty, s.overlap_penalty):
            assert component >= 0.0


# -- reranking -----------------------------------------------------------------


def test_singleton_batch_wins(catalogue, lexicons, weights):
    cand = Candidate(_resp("这款面霜好用。"), "", 0)
    winner, scores = rerank([cand], _ctx(catalogue, lexicons), weights)
    assert winner is cand and len(scores) == 1


def test_clean_twin_beats_unsanctioned_twin(catalogue, lexicons, weights):
    active = catalogue.products[6]
    other = catalogue.products[7]
    clean = Candidate(_resp(f"{active.name}值得入手。"), "", 0)
    dirty = Candidate(_resp(f"{active.name}值得入手，{other.name}也可以。"), "", 1)
    winner, _ = rerank([dirty, clean], _ctx(catalogue, lexicons), weights)
    assert winner is clean


def test_rr_disabled_picks_lowest_index(catalogue, lexicons, weights):
    good = Candidate(_resp(f"{catalogue.products[6].name}真的好用。"), "", 2)
    bad = Candidate(_resp("听说深海鱼子酱精华更好。"), "", 0)
    winner, scores = rerank([bad, good], _ctx(catalogue, lexicons), weights, rr_disabled=True)
    assert winner is bad
    assert len(scores) == 2  # still computed for logging


def test_tie_breaks_to_lowest_index(catalogue, lexicons, weights):
    a = Candidate(_resp("一模一样的句子。"), "", 0)
    b = Candidate(_resp("一模一样的句子。"), "", 1)
    winner, _ = rerank([b, a], _ctx(catalogue, lexicons), weights)
    assert winner is a


def test_empty_batch_rejected(catalogue, lexicons, weights):
    with pytest.raises(ValueError):
        rerank([], _ctx(catalogue, lexicons), weights)


def test_dominance(catalogue, lexicons, weights):
    # A matches the active product (relevance up, misalignment 0); B adds an
    # unsanctioned mention on top of the same text. A must strictly win.
    active = catalogue.products[6]
    other = catalogue.products[7]
    a = Candidate(_resp(f"{active.name}好用。"), "", 0)
    b = Candidate(_resp(f"{active.name}好用，{other.name}也行。"), "", 1)
    ctx = _ctx(catalogue, lexicons)
    sa, sb = score(a, ctx, weights), score(b, ctx, weights)
    assert sa.relevance >= sb.relevance
    assert sa.unsanctioned_penalty < sb.unsanctioned_penalty
    assert sa.total > sb.total


def test_safety_random_batches(catalogue, lexicons, weights):
    rng = random.Random(11)
    active = catalogue.products[6]
    other_names = [p.name for p in catalogue.products if p.routing_id != active.routing_id]
    clean_texts = [f"{active.name}真的值得。", "神经酰胺很安心。", "家人们，冲就完了。",
                   "今天聊聊护肤思路。"]
    for _ in range(300):
        batch = []
        n_clean = rng.randint(1, 3)
        for i in range(n_clean + rng.randint(1, 3)):
            if i < n_clean:
                text = rng.choice(clean_texts)
            else:
                text = f"推荐{rng.choice(other_names)}，{rng.choice(clean_texts)}"
            batch.append(Candidate(_resp(text), "", i))
        rng.shuffle(batch)
        ctx = _ctx(catalogue, lexicons,
                   history=_history(*rng.sample(clean_texts, rng.randint(0, 3))))
        winner, scores = rerank(batch, ctx, weights)
        winner_score = scores[batch.index(winner)]
        assert winner_score.unsanctioned_penalty == 0.0


def test_fallback_response_is_valid_and_catalogue_sourced(catalogue, cfg, lexicons):
    from livehost.dialogue import validate_claims, validate_host_response

    for record in list(catalogue.products) + [None]:
        resp = fallback_response(record, cfg)
        validate_host_response(resp)
        assert validate_claims(resp, record, catalogue, lexicons) == []
        if record is not None:
            assert resp.spoken == record.talking_points[0]
