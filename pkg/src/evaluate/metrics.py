import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pandas import DataFrame
from tqdm import tqdm

from src.data.corpus import LabelScheme, Sentence
from src.data.tagging import check_iob2, tags_to_spans
from src.evaluate.parser import match_spans, parse_response
from src.exceptions import LengthMismatch

logger = logging.getLogger(__name__)

MICRO = 'micro'


def _ratio(numerator: float, denominator: float) -> float:
    return numerator / denominator if denominator else 0.0


@dataclass
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: 'Counts') -> 'Counts':
        return Counts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    @property
    def precision(self) -> float:
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> float:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def f1(self) -> float:
        precision, recall = self.precision, self.recall
        return _ratio(2 * precision * recall, precision + recall)

    def to_dict(self) -> dict:
        return {
            'tp': self.tp,
            'fp': self.fp,
            'fn': self.fn,
            'precision': self.precision,
            'recall': self.recall,
            'f1': self.f1,
        }


@dataclass
class SentenceScore:
    total: Counts
    per_class: Dict[str, Counts]


def micro_f1_strict(pred: Sequence[str], gold: Sequence[str], scheme: Optional[LabelScheme] = None) -> SentenceScore:
    if len(pred) != len(gold):
        raise LengthMismatch(f'{len(pred)} predicted tags but {len(gold)} gold tags')

    check_iob2(gold)
    pred_spans = {(span.start, span.end, span.class_name) for span in tags_to_spans(pred)}
    gold_spans = {(span.start, span.end, span.class_name) for span in tags_to_spans(gold)}

    classes = list(scheme.classes) if scheme is not None else []
    classes += sorted({span[2] for span in pred_spans | gold_spans} - set(classes))

    per_class = {}
    for class_name in classes:
        pred_class = {span for span in pred_spans if span[2] == class_name}
        gold_class = {span for span in gold_spans if span[2] == class_name}
        per_class[class_name] = Counts(
            tp=len(pred_class & gold_class),
            fp=len(pred_class - gold_class),
            fn=len(gold_class - pred_class)
        )

    total = Counts(
        tp=len(pred_spans & gold_spans),
        fp=len(pred_spans - gold_spans),
        fn=len(gold_spans - pred_spans)
    )
    return SentenceScore(total=total, per_class=per_class)


@dataclass
class PredictionRecord:
    id: str
    response_text: str
    pred_tags: List[str]

    def to_dict(self) -> dict:
        return {'id': self.id, 'response_text': self.response_text, 'pred_tags': self.pred_tags}


@dataclass
class EvalReport:
    total: Counts = field(default_factory=Counts)
    per_class: Dict[str, Counts] = field(default_factory=dict)
    n_sentences: int = 0
    fallback_count: int = 0
    malformed_count: int = 0
    invalid_count: int = 0

    @property
    def precision(self) -> float:
        return self.total.precision

    @property
    def recall(self) -> float:
        return self.total.recall

    @property
    def f1(self) -> float:
        return self.total.f1

    def add(self, score: SentenceScore) -> None:
        self.total = self.total + score.total
        for class_name, counts in score.per_class.items():
            self.per_class[class_name] = self.per_class.get(class_name, Counts()) + counts
        self.n_sentences += 1

    def to_dict(self) -> dict:
        return {
            **self.total.to_dict(),
            'n_sentences': self.n_sentences,
            'fallback_count': self.fallback_count,
            'malformed_count': self.malformed_count,
            'invalid_count': self.invalid_count,
            'per_class': {class_name: counts.to_dict() for class_name, counts in self.per_class.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'EvalReport':
        return cls(
            total=Counts(data['tp'], data['fp'], data['fn']),
            per_class={
                class_name: Counts(counts['tp'], counts['fp'], counts['fn'])
                for class_name, counts in data.get('per_class', {}).items()
            },
            n_sentences=data['n_sentences'],
            fallback_count=data['fallback_count'],
            malformed_count=data.get('malformed_count', 0),
            invalid_count=data.get('invalid_count', 0)
        )

    def to_frame(self) -> DataFrame:
        rows = [{'class': class_name, **counts.to_dict()} for class_name, counts in self.per_class.items()]
        rows.append({'class': MICRO, **self.total.to_dict()})
        return DataFrame(rows).set_index('class')

    def save(self, path: str or Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding='utf-8')

    def to_csv(self, path: str or Path) -> None:
        self.to_frame().to_csv(path)


def evaluate_corpus(
        responses: Mapping[str, str],
        gold: Sequence[Sentence],
        scheme: LabelScheme
) -> Tuple[EvalReport, List[PredictionRecord]]:
    """Scores response texts keyed by sentence id; a missing response counts as an empty one."""
    report = EvalReport(per_class={class_name: Counts() for class_name in scheme.classes})
    records = []

    for sentence in tqdm(gold, leave=False):
        response_text = responses.get(sentence.id, '')
        parsed = parse_response(response_text, scheme)
        pred_tags, fell_back = match_spans(parsed, sentence.tokens)

        report.add(micro_f1_strict(pred_tags, sentence.tags, scheme))
        report.fallback_count += int(fell_back)
        report.malformed_count += parsed.malformed
        report.invalid_count += parsed.invalid

        records.append(PredictionRecord(id=sentence.id, response_text=response_text, pred_tags=pred_tags))

    logger.info(
        '{:5.2f} f1, {:5.2f} precision, {:5.2f} recall, {:d} fallbacks over {:d} sentences'.format(
            report.f1, report.precision, report.recall, report.fallback_count, report.n_sentences
        )
    )

    return report, records


@dataclass
class RunAggregate:
    reports: Dict[int, EvalReport]
    mean_f1: float
    std_f1: float
    # std is reported as 0 when only one seed was run
    single_seed: bool

    def formatted(self, scale: float = 100.0, digits: int = 2) -> str:
        return f'{self.mean_f1 * scale:.{digits}f}_{{{self.std_f1 * scale:.{digits}f}}}'

    def to_frame(self) -> DataFrame:
        rows = [
            {'seed': seed, 'precision': report.precision, 'recall': report.recall, 'f1': report.f1,
             'fallback_count': report.fallback_count}
            for seed, report in sorted(self.reports.items())
        ]
        return DataFrame(rows).set_index('seed')

    def to_dict(self) -> dict:
        return {
            'mean_f1': self.mean_f1,
            'std_f1': self.std_f1,
            'single_seed': self.single_seed,
            'formatted': self.formatted(),
            'seeds': {str(seed): report.to_dict() for seed, report in sorted(self.reports.items())},
        }


def aggregate_runs(reports: Mapping[int, EvalReport]) -> RunAggregate:
    if not reports:
        raise ValueError('At least one report is required')

    f1 = np.array([report.f1 for _, report in sorted(reports.items())], dtype=np.float64)
    single_seed = len(f1) == 1

    return RunAggregate(
        reports=dict(reports),
        mean_f1=float(np.mean(f1)),
        std_f1=0.0 if single_seed else float(np.std(f1, ddof=1)),
        single_seed=single_seed
    )
