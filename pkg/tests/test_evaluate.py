import numpy as np
import pytest

from src.data.corpus import Sentence
from src.data.tagging import check_iob2
from src.evaluate.metrics import Counts, EvalReport, aggregate_runs, evaluate_corpus, micro_f1_strict
from src.evaluate.parser import map_spans_to_iob2, match_spans, parse_response
from src.exceptions import LengthMismatch
from src.prompt.template import render_response

EU_RESPONSE = 'EU:organization;German:miscellaneous;British:miscellaneous'


def reference_spans(tags):
    spans = set()
    i = 0
    while i < len(tags):
        if tags[i].startswith('B-'):
            class_name = tags[i][2:]
            j = i + 1
            while j < len(tags) and tags[j] == f'I-{class_name}':
                j += 1
            spans.add((i, j, class_name))
            i = j
        else:
            i += 1
    return spans


def report_with_f1(tp: int, errors: int) -> EvalReport:
    return EvalReport(total=Counts(tp=tp, fp=errors, fn=errors), n_sentences=1)


def test_parse_response_extractions():
    parsed = parse_response(EU_RESPONSE)

    assert parsed.extractions == (
        ('EU', 'organization'), ('German', 'miscellaneous'), ('British', 'miscellaneous')
    )
    assert not parsed.is_na
    assert parsed.usable


def test_parse_response_na():
    parsed = parse_response('NA')

    assert parsed.is_na
    assert parsed.extractions == ()
    assert not parsed.usable


def test_parse_response_first_line_only():
    assert parse_response('a:x\ngarbage:y').extractions == (('a', 'x'),)
    assert parse_response('NA\nEU:organization').is_na


def test_parse_response_counts_bad_pieces(ner_scheme):
    parsed = parse_response('a:b:c;d;;EU:organization;cat:animal', ner_scheme)

    assert parsed.extractions == (('EU', 'organization'),)
    assert parsed.malformed == 3
    assert parsed.invalid == 1

    empty = parse_response('', ner_scheme)
    assert empty.malformed == 1
    assert empty.is_na
    assert not empty.usable


def test_garbage_reads_as_na(ner_scheme):
    parsed = parse_response('a:b:c;;cat:animal', ner_scheme)

    assert parsed.is_na
    assert parsed.extractions == ()
    assert (parsed.malformed, parsed.invalid) == (2, 1)
    assert not parsed.usable


def test_map_eu_example(eu_sentence):
    tags = map_spans_to_iob2(parse_response(EU_RESPONSE), eu_sentence.tokens)

    assert tags == list(eu_sentence.tags)
    assert tags[0] == 'B-organization'
    assert tags[2] == tags[6] == 'B-miscellaneous'


def test_map_na_is_all_outside(eu_sentence):
    tags, fell_back = match_spans(parse_response('NA'), eu_sentence.tokens)

    assert tags == ['O'] * len(eu_sentence)
    assert fell_back


def test_map_skips_missing_span(eu_sentence):
    tags, fell_back = match_spans(parse_response('Paris:location;German:miscellaneous'), eu_sentence.tokens)

    assert tags == ['O', 'O', 'B-miscellaneous', 'O', 'O', 'O', 'O', 'O', 'O']
    assert not fell_back

    tags, fell_back = match_spans(parse_response('Paris:location'), eu_sentence.tokens)
    assert tags == ['O'] * len(eu_sentence)
    assert fell_back


def test_map_multi_token_span(eu_sentence):
    tags = map_spans_to_iob2(parse_response('German call:miscellaneous'), eu_sentence.tokens)

    assert tags[2:4] == ['B-miscellaneous', 'I-miscellaneous']


def test_map_overlap_is_skipped(eu_sentence):
    tags = map_spans_to_iob2(parse_response('EU rejects:organization;rejects:miscellaneous'), eu_sentence.tokens)

    assert tags[:3] == ['B-organization', 'I-organization', 'O']
    assert 'B-miscellaneous' not in tags


def test_map_moves_cursor_forward():
    tags = map_spans_to_iob2(parse_response('a:x;a:y'), ['a', 'b', 'a'])

    assert tags == ['B-x', 'O', 'B-y']


def test_map_does_not_match_out_of_order():
    tags = map_spans_to_iob2(parse_response('c:x;a:y'), ['a', 'b', 'c'])

    assert tags == ['O', 'O', 'B-x']


def test_round_trip_labels(make_sentences, ner_scheme):
    sentences = make_sentences(500, ner_scheme, seed=21)

    for sentence in sentences:
        response = render_response(sentence, sentence.spans)
        tags = map_spans_to_iob2(parse_response(response, ner_scheme), sentence.tokens)
        assert tags == list(sentence.tags)


def test_fuzzed_responses_never_raise(ner_scheme):
    rng = np.random.default_rng(0)
    pieces = ['a', 'b', ' ', ':', ';', '\n', 'NA', 'person', 'animal', 'a b']
    tokens = ['a', 'b', 'a', 'NA', 'b']

    for _ in range(10000):
        text = ''.join(rng.choice(pieces, size=int(rng.integers(0, 12))))
        parsed = parse_response(text, ner_scheme)
        assert parsed.is_na != bool(parsed.extractions)
        tags, _ = match_spans(parsed, tokens)

        assert len(tags) == len(tokens)
        check_iob2(tags)


def test_micro_f1_examples():
    gold = ['B-x', 'I-x', 'O', 'B-y']

    perfect = micro_f1_strict(gold, gold)
    assert (perfect.total.tp, perfect.total.fp, perfect.total.fn) == (2, 0, 0)
    assert perfect.total.f1 == 1.0

    half = micro_f1_strict(['B-x', 'I-x', 'B-y', 'O'], gold)
    assert (half.total.tp, half.total.fp, half.total.fn) == (1, 1, 1)
    assert half.total.precision == half.total.recall == half.total.f1 == 0.5

    nothing = micro_f1_strict(['O'] * 4, gold)
    assert nothing.total.f1 == 0.0


def test_micro_f1_is_strict():
    # a partially overlapping span counts as one false positive and one false negative
    score = micro_f1_strict(['B-x', 'O', 'O'], ['B-x', 'I-x', 'O'])

    assert (score.total.tp, score.total.fp, score.total.fn) == (0, 1, 1)


def test_micro_f1_per_class_sums_to_total(ner_scheme):
    score = micro_f1_strict(
        ['B-person', 'O', 'B-location', 'I-location', 'B-person'],
        ['B-person', 'O', 'B-location', 'O', 'B-organization'],
        ner_scheme
    )

    assert list(score.per_class)[:4] == list(ner_scheme.classes)
    for field in ('tp', 'fp', 'fn'):
        assert sum(getattr(counts, field) for counts in score.per_class.values()) == getattr(score.total, field)


def test_micro_f1_length_mismatch():
    with pytest.raises(LengthMismatch):
        micro_f1_strict(['O'], ['O', 'O'])


def test_micro_f1_matches_reference(ner_scheme, make_sentences):
    gold_sentences = make_sentences(200, ner_scheme, seed=1)
    pred_sentences = make_sentences(200, ner_scheme, seed=2, max_length=10)

    report = EvalReport()
    tp = fp = fn = 0
    for gold_sentence, pred_sentence in zip(gold_sentences, pred_sentences):
        gold = list(gold_sentence.tags)
        # keep the gold length, mixing in the other sentence's tags where they fit
        pred = list(pred_sentence.tags[:len(gold)]) + ['O'] * max(0, len(gold) - len(pred_sentence))
        if pred and pred[0].startswith('I-'):
            pred[0] = 'B-' + pred[0][2:]

        report.add(micro_f1_strict(pred, gold))

        pred_spans, gold_spans = reference_spans(pred), reference_spans(gold)
        tp += len(pred_spans & gold_spans)
        fp += len(pred_spans - gold_spans)
        fn += len(gold_spans - pred_spans)

    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0

    assert (report.total.tp, report.total.fp, report.total.fn) == (tp, fp, fn)
    assert report.f1 == pytest.approx(f1, abs=1e-12)


def test_counts_zero_division():
    assert Counts().f1 == 0.0
    assert Counts(tp=0, fp=3, fn=0).precision == 0.0


def test_evaluate_corpus(ner_scheme, la_sentence, eu_sentence):
    empty = Sentence(id='test-2', tokens=('nothing', 'here'), tags=('O', 'O'))
    gold = [la_sentence, eu_sentence, empty]
    responses = {sentence.id: render_response(sentence, sentence.spans) for sentence in gold}

    report, records = evaluate_corpus(responses, gold, ner_scheme)

    assert report.f1 == 1.0
    assert report.n_sentences == 3
    assert report.fallback_count == 1
    assert [record.pred_tags for record in records] == [list(sentence.tags) for sentence in gold]

    all_na, _ = evaluate_corpus({sentence.id: 'NA' for sentence in gold}, gold, ner_scheme)
    assert all_na.f1 == 0.0
    assert all_na.fallback_count == 3

    missing, _ = evaluate_corpus({}, gold, ner_scheme)
    assert missing.f1 == 0.0
    assert missing.malformed_count == 3


def test_report_round_trip(ner_scheme, eu_sentence):
    report, _ = evaluate_corpus({eu_sentence.id: 'EU:organization;lamb:person'}, [eu_sentence], ner_scheme)

    restored = EvalReport.from_dict(report.to_dict())

    assert restored == report
    frame = report.to_frame()
    assert list(frame.index) == [*ner_scheme.classes, 'micro']
    assert frame.loc['organization', 'tp'] == 1
    assert frame.loc['micro', 'fp'] == 1


def test_aggregate_mean_and_std():
    reports = {seed: report_with_f1(*counts) for seed, counts in enumerate([(9, 1), (9, 1), (8, 2), (8, 2)])}

    aggregate = aggregate_runs(reports)

    assert aggregate.mean_f1 == pytest.approx(0.85)
    assert aggregate.std_f1 == pytest.approx(0.0577, abs=1e-4)
    assert not aggregate.single_seed
    assert aggregate.formatted() == '85.00_{5.77}'
    assert list(aggregate.to_frame().index) == [0, 1, 2, 3]


def test_aggregate_identical_reports():
    aggregate = aggregate_runs({seed: report_with_f1(9, 1) for seed in range(3)})

    assert aggregate.std_f1 == 0.0


def test_aggregate_single_seed():
    aggregate = aggregate_runs({0: report_with_f1(8, 2)})

    assert aggregate.single_seed
    assert aggregate.std_f1 == 0.0
    assert aggregate.to_dict()['single_seed'] is True

    with pytest.raises(ValueError):
        aggregate_runs({})
