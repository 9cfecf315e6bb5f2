import logging
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Set

from pandas import DataFrame

from src.cli.artifacts import ArtifactStore
from src.cli.config import RunConfig
from src.data.corpus import SPLITS, Dataset, Sentence
from src.data.generator import SyntheticTaskGenerator
from src.data.utils import load_dataset
from src.evaluate.metrics import EvalReport, aggregate_runs, evaluate_corpus
from src.exceptions import EmptyDataset, MissingArtifact, SeedMismatch
from src.grammar.automaton import compile_regex
from src.grammar.index import TokenFsmIndex, index_vocabulary
from src.grammar.regex import PRINTABLE_ASCII, build_response_regex, default_alphabet
from src.lossmask.mask import Strategy
from src.lossmask.segments import TokenizedPrompt, tokenize_with_segments
from src.lossmask.tokenizer import TokenizerSpec, build_tokenizer
from src.prompt.sampling import sample_demonstrations
from src.prompt.template import (
    BLOCK_SEPARATOR, CLASS_SEPARATOR, INSTRUCTION_MARKER, NA, OPTIONS_MARKER, OPTIONS_SEPARATOR, RESPONSE_MARKER,
    SENTENCE_MARKER, SPAN_SEPARATOR, VERB_MARKER, Mode, RenderedPrompt, build_prompt
)
from src.test.tester import generate_responses
from src.train.checkpoint import HardCheckpoint
from src.train.trainer import train

logger = logging.getLogger(__name__)

DATASET = 'dataset.json'
TOKENIZER = 'tokenizer.json'
GRAMMAR_INDEX = 'grammar-index.json'
CURVES = 'curves.json'
AGGREGATE = 'aggregate.json'
REPORT_CSV = 'report.csv'


def train_prompts_name(seed: int) -> str:
    return f'prompts/seed-{seed}-train.jsonl'


def eval_prompts_name(seed: int) -> str:
    return f'prompts/seed-{seed}-eval.jsonl'


def checkpoint_name(seed: int) -> str:
    return f'checkpoints/seed-{seed}.pt'


def predictions_name(seed: int) -> str:
    return f'predictions/seed-{seed}.jsonl'


def tags_name(seed: int) -> str:
    return f'predictions/seed-{seed}-tags.jsonl'


def report_name(seed: int) -> str:
    return f'reports/seed-{seed}.json'


def store_for(cfg: RunConfig) -> ArtifactStore:
    return ArtifactStore(cfg.run_dir, cfg.config_hash)


def eval_store_for(cfg: RunConfig) -> ArtifactStore:
    return ArtifactStore(cfg.eval_dir, cfg.eval_hash)


def load_bundle(store: ArtifactStore) -> Dataset:
    return Dataset.from_dict(store.read_json(DATASET))


def cmd_synthesize(cfg: RunConfig, force: bool = False) -> Dict[str, Path]:
    generator = SyntheticTaskGenerator(
        path=cfg.data_dir,
        sizes={'train': cfg.train_size, 'valid': cfg.valid_size, 'test': cfg.test_size},
        seed=cfg.synthetic_seed
    )
    if generator.scheme.classes != cfg.scheme.classes:
        logger.warning(
            'Synthetic classes %s differ from the configured classes %s', generator.scheme.classes, cfg.scheme.classes
        )
    return generator.generate(force=force)


def cmd_ingest(cfg: RunConfig) -> Dataset:
    dataset = load_dataset(cfg.data_dir, cfg.scheme)
    if not dataset.train:
        raise EmptyDataset(f'{cfg.data_dir} has no train split')

    store_for(cfg).write_json(DATASET, dataset.to_dict())
    logger.info('Ingested %s', ', '.join(f'{split}: {size}' for split, size in dataset.sizes().items()))
    return dataset


def build_train_prompts(cfg: RunConfig, dataset: Dataset, seed: int) -> List[RenderedPrompt]:
    return [
        build_prompt(
            cfg.scheme,
            cfg.instruction_variant(Mode.TRAIN),
            sample_demonstrations(dataset.train, sentence.id, cfg.n_shots, seed),
            sentence,
            Mode.TRAIN,
            gold_query_spans=sentence.spans,
            base_instruction=cfg.base_instruction
        )
        for sentence in dataset.train
    ]


def build_eval_prompts(cfg: RunConfig, dataset: Dataset, seed: int) -> List[RenderedPrompt]:
    # evaluation demonstrations come from the train split with the same sampler
    return [
        build_prompt(
            cfg.scheme,
            cfg.instruction_variant(Mode.EVAL),
            sample_demonstrations(dataset.train, sentence.id, cfg.shots_for_eval, seed),
            sentence,
            Mode.EVAL,
            base_instruction=cfg.base_instruction
        )
        for sentence in dataset.split(cfg.eval_split)
    ]


def tokenizer_texts(cfg: RunConfig, dataset: Dataset, train_prompts: List[RenderedPrompt]) -> List[str]:
    # evaluation prompts change without retraining, so the vocabulary covers every piece they are built from
    texts = [prompt.text for prompt in train_prompts]
    texts += [' '.join(sentence.tokens) for split in SPLITS for sentence in dataset.split(split)]
    texts += [cfg.base_instruction, OPTIONS_SEPARATOR.join(cfg.scheme.classes), BLOCK_SEPARATOR]
    texts += [INSTRUCTION_MARKER, OPTIONS_MARKER, SENTENCE_MARKER, VERB_MARKER, RESPONSE_MARKER]
    return texts


def cmd_build(cfg: RunConfig) -> TokenizerSpec:
    store = store_for(cfg)
    eval_store = eval_store_for(cfg)
    dataset = load_bundle(store)

    train_prompts = {seed: build_train_prompts(cfg, dataset, seed) for seed in cfg.seeds}

    texts = tokenizer_texts(cfg, dataset, [prompt for prompts in train_prompts.values() for prompt in prompts])
    # generated responses may need the grammar pieces even when no prompt shows them;
    # single characters back unseen words such as a nonsense instruction
    extra = [NA, CLASS_SEPARATOR, SPAN_SEPARATOR, *cfg.scheme.classes, '\n', *sorted(PRINTABLE_ASCII)]
    tok = build_tokenizer(cfg.tokenizer, texts, extra=extra)

    for seed, prompts in train_prompts.items():
        eval_prompts = build_eval_prompts(cfg, dataset, seed)
        for prompt in prompts + eval_prompts:
            tokenize_with_segments(prompt, tok, cfg.max_length)

        store.write_jsonl(train_prompts_name(seed), (prompt.to_record() for prompt in prompts))
        eval_store.write_jsonl(eval_prompts_name(seed), (prompt.to_record() for prompt in eval_prompts))
        logger.info('Seed %d: %d train prompts, %d eval prompts', seed, len(prompts), len(eval_prompts))

    store.write_json(TOKENIZER, tok.to_dict())
    logger.info('Tokenizer with %d tokens', tok.vocab_size)
    return tok


def load_prompts(store: ArtifactStore, name: str, tok: TokenizerSpec, max_length: int) -> List[TokenizedPrompt]:
    return [
        tokenize_with_segments(RenderedPrompt.from_record(record), tok, max_length)
        for record in store.read_jsonl(name)
    ]


def load_tokenizer(store: ArtifactStore) -> TokenizerSpec:
    return TokenizerSpec.from_dict(store.read_json(TOKENIZER))


def cmd_train(cfg: RunConfig) -> Dict[int, List[float]]:
    store = store_for(cfg)
    tok = load_tokenizer(store)
    dims = cfg.model_dims(tok.vocab_size)

    curves = {}
    for seed in cfg.seeds:
        name = checkpoint_name(seed)
        if store.exists(name):
            # checkpoints are written once; a finished seed is reused as is
            checkpoint = HardCheckpoint.restore(store.path(name), cfg.config_hash)
            logger.info('Seed %d is already trained at %s', seed, checkpoint.path)
        else:
            prompts = load_prompts(store, train_prompts_name(seed), tok, cfg.max_length)
            checkpoint = train(
                prompts,
                tok,
                Strategy(cfg.strategy),
                replace(cfg.train_config(), seeds=(seed,)),
                dims,
                store.path('checkpoints'),
                config_hash=cfg.config_hash
            )[seed]
        curves[seed] = checkpoint.curve

    store.write_json(CURVES, {'curves': {str(seed): curve for seed, curve in curves.items()}})
    return curves


def grammar_index(cfg: RunConfig, store: ArtifactStore, tok: TokenizerSpec, dataset: Dataset) -> TokenFsmIndex:
    if store.exists(GRAMMAR_INDEX):
        return TokenFsmIndex.from_json(store.read_json(GRAMMAR_INDEX))

    regex = build_response_regex(cfg.scheme)
    logger.info('Response grammar: %s', regex.pattern)

    texts = [token for split in SPLITS for sentence in dataset.split(split) for token in sentence.tokens]
    dfa = compile_regex(regex.pattern, default_alphabet(texts), minimize=cfg.minimize_dfa)
    index = index_vocabulary(dfa, tok)

    store.write_json(GRAMMAR_INDEX, index.to_json())
    return index


def cmd_generate(cfg: RunConfig) -> Dict[int, List[dict]]:
    store = store_for(cfg)
    eval_store = eval_store_for(cfg)
    tok = load_tokenizer(store)
    index = grammar_index(cfg, eval_store, tok, load_bundle(store))

    results = {}
    for seed in cfg.seeds:
        checkpoint = HardCheckpoint.restore(store.path(checkpoint_name(seed)), cfg.config_hash)
        prompts = load_prompts(eval_store, eval_prompts_name(seed), tok, cfg.max_length)

        generations = generate_responses(checkpoint.model, prompts, index, tok, cfg.decode_config(seed))

        results[seed] = [generation.to_dict() for generation in generations]
        eval_store.write_jsonl(predictions_name(seed), results[seed])

    return results


def prediction_seeds(store: ArtifactStore) -> Set[int]:
    paths = [path for path in store.glob('predictions/seed-*.jsonl') if not path.stem.endswith('-tags')]
    return {int(path.stem.removeprefix('seed-')) for path in paths}


def cmd_eval(cfg: RunConfig) -> Dict[str, object]:
    eval_store = eval_store_for(cfg)
    dataset = load_bundle(store_for(cfg))
    gold: List[Sentence] = dataset.split(cfg.eval_split)

    found = prediction_seeds(eval_store)
    if found != set(cfg.seeds):
        raise SeedMismatch(f'Predictions exist for seeds {sorted(found)}, config lists {sorted(cfg.seeds)}')

    reports = {}
    for seed in cfg.seeds:
        responses = {record['id']: record['response_text'] for record in eval_store.read_jsonl(predictions_name(seed))}
        report, records = evaluate_corpus(responses, gold, cfg.scheme)

        eval_store.write_json(report_name(seed), report.to_dict())
        eval_store.write_jsonl(tags_name(seed), (record.to_dict() for record in records))
        reports[seed] = report

    aggregate = aggregate_runs(reports)
    eval_store.write_json(AGGREGATE, aggregate.to_dict())
    logger.info('micro F1 over %d seeds: %s', len(reports), aggregate.formatted())

    return {'reports': reports, 'aggregate': aggregate}


def cmd_report(cfg: RunConfig) -> DataFrame:
    store = eval_store_for(cfg)
    if not store.exists(AGGREGATE):
        raise MissingArtifact(f'No evaluation found in {store.root}; run eval first')

    reports = {seed: EvalReport.from_dict(store.read_json(report_name(seed))) for seed in cfg.seeds}
    aggregate = aggregate_runs(reports)

    table = aggregate.to_frame()
    table.loc['mean'] = table.mean()
    table.to_csv(store.path(REPORT_CSV))

    print(table.to_string(float_format=lambda value: f'{value:.4f}'))
    print(f'micro F1: {aggregate.formatted()}')
    if aggregate.single_seed:
        print('single seed: standard deviation reported as 0')

    return table
