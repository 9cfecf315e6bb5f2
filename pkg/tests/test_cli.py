import json
from dataclasses import replace
from pathlib import Path

import pytest

from main import main
from src.cli.artifacts import HASH_KEY, ArtifactStore
from src.cli.commands import (
    AGGREGATE, REPORT_CSV, cmd_build, cmd_eval, cmd_generate, cmd_ingest, cmd_report, cmd_synthesize, cmd_train,
    checkpoint_name, eval_prompts_name, eval_store_for, predictions_name, report_name, store_for, train_prompts_name
)
from src.cli.config import HASH_LENGTH, RunConfig
from src.exceptions import ArtifactMismatch, InsufficientPool, MissingArtifact, SeedMismatch
from src.prompt.template import DEFAULT_NONSENSE, InstructionKind, Mode, render_response

CONFIGS = Path(__file__).resolve().parents[1].joinpath('configs')


@pytest.fixture
def tiny_config(tmp_path) -> RunConfig:
    return RunConfig(
        data_dir=str(tmp_path.joinpath('data')),
        classes=['animal'],
        n_shots=1,
        train_instruction='none',
        embed_dim=4,
        hidden_dim=8,
        window=8,
        learning_rate=1e-2,
        epochs=1,
        seeds=[0, 1],
        max_new_tokens=20,
        train_size=20,
        valid_size=5,
        test_size=10,
        outdir=str(tmp_path.joinpath('runs'))
    )


def run_pipeline(cfg: RunConfig):
    cmd_synthesize(cfg)
    cmd_ingest(cfg)
    cmd_build(cfg)
    cmd_train(cfg)
    cmd_generate(cfg)
    return cmd_eval(cfg)


def test_config_hash():
    cfg = RunConfig()

    assert cfg.config_hash == RunConfig().config_hash
    assert len(cfg.config_hash) == HASH_LENGTH
    assert cfg.with_overrides(outdir='elsewhere').config_hash == cfg.config_hash
    assert cfg.with_overrides(n_shots=1).config_hash != cfg.config_hash
    assert cfg.run_dir == Path('runs', cfg.config_hash)


def test_eval_keys_keep_the_training_run():
    cfg = RunConfig(train_instruction='none')

    for overrides in ({'eval_instruction': 'permuted'}, {'eval_instruction': 'nonsense'}, {'temperature': 0.5},
                      {'eval_n_shots': 5}, {'greedy': True}, {'eval_split': 'valid'}):
        other = cfg.with_overrides(**overrides)

        assert other.config_hash == cfg.config_hash
        assert other.run_dir == cfg.run_dir
        assert other.eval_hash != cfg.eval_hash
        assert other.eval_dir.parent == cfg.eval_dir.parent


def test_training_variant_keeps_its_parameters():
    cfg = RunConfig(train_instruction='permuted', permutation_seed=1)

    assert cfg.with_overrides(permutation_seed=2).config_hash != cfg.config_hash
    assert RunConfig().with_overrides(permutation_seed=2).config_hash == RunConfig().config_hash


def test_overrides_ignore_missing_values():
    cfg = RunConfig()

    assert cfg.with_overrides(strategy=None, seeds=None) is cfg
    assert cfg.with_overrides(seeds=[7]).seeds == [7]


def test_eval_shots_default_to_training_shots():
    cfg = RunConfig(n_shots=5)

    assert cfg.shots_for_eval == 5
    assert replace(cfg, eval_n_shots=0).shots_for_eval == 0


def test_instruction_variants():
    cfg = RunConfig(train_instruction='none', eval_instruction='permuted', permutation_seed=4)

    assert cfg.instruction_variant(Mode.TRAIN).kind == InstructionKind.NONE
    assert cfg.instruction_variant(Mode.EVAL).kind == InstructionKind.PERMUTED
    assert cfg.instruction_variant(Mode.EVAL).permutation_seed == 4


@pytest.mark.parametrize('data', [
    {'learning_rte': 1e-3},
    {'n_shots': 3},
    {'strategy': 'all'},
    {'seeds': []},
    {'seeds': [1, 1]},
    {'eval_split': 'dev'},
    {'temperature': 0.0},
])
def test_config_rejects(data):
    with pytest.raises(ValueError):
        RunConfig.from_dict(data)


def test_config_files_load():
    synthetic = RunConfig.load(CONFIGS.joinpath('synthetic.toml'))
    conll = RunConfig.load(CONFIGS.joinpath('conll03.toml'))

    assert synthetic.classes == ['animal']
    assert synthetic.train_instruction == 'none'
    assert conll.classes == ['person', 'location', 'organization', 'miscellaneous']
    assert conll.train_config().betas == (0.9, 0.95)


def test_artifact_store(tmp_path):
    store = ArtifactStore(tmp_path, 'abc')

    path = store.write_json('report.json', {'f1': 0.5})
    assert json.loads(path.read_text(encoding='utf-8')) == {HASH_KEY: 'abc', 'f1': 0.5}
    assert store.read_json('report.json') == {'f1': 0.5}

    store.write_json('report.json', {'f1': 0.5})
    with pytest.raises(ArtifactMismatch):
        store.write_json('report.json', {'f1': 0.6})

    store.write_jsonl('nested/records.jsonl', [{'id': 'a'}, {'id': 'b'}])
    assert store.read_jsonl('nested/records.jsonl') == [{'id': 'a'}, {'id': 'b'}]

    with pytest.raises(ArtifactMismatch):
        ArtifactStore(tmp_path, 'xyz').read_json('report.json')
    with pytest.raises(MissingArtifact):
        store.read_json('missing.json')


def test_pipeline(tiny_config):
    cfg = tiny_config
    result = run_pipeline(cfg)
    store = store_for(cfg)
    evals = eval_store_for(cfg)

    assert set(result['reports']) == {0, 1}
    assert 0.0 <= result['aggregate'].mean_f1 <= 1.0
    for seed in cfg.seeds:
        assert evals.exists(report_name(seed))
        assert len(evals.read_jsonl(predictions_name(seed))) == cfg.test_size
        assert store.path(checkpoint_name(seed)).exists()

    for record in store.read_jsonl(train_prompts_name(0)):
        assert record['n_shots'] == 1
        assert record['mode'] == 'train'

    table = cmd_report(cfg)
    assert list(table.index) == [0, 1, 'mean']
    assert evals.exists(REPORT_CSV)
    assert evals.exists(AGGREGATE)


def test_pipeline_is_deterministic(tiny_config, tmp_path):
    first = tiny_config
    second = replace(first, outdir=str(tmp_path.joinpath('again')))

    run_pipeline(first)
    run_pipeline(second)

    for name in (AGGREGATE, predictions_name(0), eval_prompts_name(1)):
        assert eval_store_for(first).path(name).read_bytes() == eval_store_for(second).path(name).read_bytes()


def test_build_is_repeatable(tiny_config):
    cfg = tiny_config
    cmd_synthesize(cfg)
    cmd_ingest(cfg)
    cmd_build(cfg)

    path = store_for(cfg).path(train_prompts_name(0))
    before = path.read_bytes()
    cmd_build(cfg)

    assert path.read_bytes() == before


def test_train_without_prompts(tiny_config):
    cfg = tiny_config
    cmd_synthesize(cfg)
    cmd_ingest(cfg)

    with pytest.raises(MissingArtifact):
        cmd_train(cfg)

    cmd_build(cfg)
    store_for(cfg).path(train_prompts_name(1)).unlink()
    with pytest.raises(MissingArtifact):
        cmd_train(cfg)


def test_too_many_shots(tiny_config):
    cfg = replace(tiny_config, n_shots=10, train_size=5)
    cmd_synthesize(cfg)
    cmd_ingest(cfg)

    with pytest.raises(InsufficientPool):
        cmd_build(cfg)


def scored(cfg: RunConfig, respond):
    cmd_synthesize(cfg)
    dataset = cmd_ingest(cfg)

    store = eval_store_for(cfg)
    for seed in cfg.seeds:
        store.write_jsonl(
            predictions_name(seed),
            [{'id': sentence.id, 'response_text': respond(sentence)} for sentence in dataset.test]
        )
    return cmd_eval(cfg)['aggregate']


def test_gold_predictions_score_one(tiny_config):
    cfg = replace(tiny_config, seeds=[0])

    aggregate = scored(cfg, lambda sentence: render_response(sentence, sentence.spans))

    assert aggregate.mean_f1 == 1.0
    assert aggregate.single_seed


def test_na_predictions_score_zero(tiny_config):
    aggregate = scored(tiny_config, lambda sentence: 'NA')

    assert aggregate.mean_f1 == 0.0
    assert aggregate.std_f1 == 0.0


def test_eval_checks_seeds(tiny_config):
    cfg = replace(tiny_config, seeds=[0])
    scored(cfg, lambda sentence: 'NA')

    eval_store_for(cfg).write_jsonl(predictions_name(5), [])
    with pytest.raises(SeedMismatch):
        cmd_eval(cfg)


def test_eval_accepts_negative_seeds(tiny_config):
    cfg = replace(tiny_config, seeds=[-3, 0])

    aggregate = scored(cfg, lambda sentence: 'NA')

    assert set(aggregate.reports) == {-3, 0}
    assert eval_store_for(cfg).exists(report_name(-3))


def test_train_reuses_checkpoints(tiny_config):
    cfg = tiny_config
    cmd_synthesize(cfg)
    cmd_ingest(cfg)
    cmd_build(cfg)

    curves = cmd_train(cfg)
    path = store_for(cfg).path(checkpoint_name(0))
    before = path.read_bytes()

    assert cmd_train(cfg) == curves
    assert path.read_bytes() == before


def test_eval_variant_reuses_training(tiny_config):
    cfg = tiny_config
    run_pipeline(cfg)
    checkpoints = {seed: store_for(cfg).path(checkpoint_name(seed)).read_bytes() for seed in cfg.seeds}

    other = replace(cfg, eval_instruction='nonsense')
    assert other.run_dir == cfg.run_dir
    assert other.eval_dir != cfg.eval_dir

    cmd_build(other)
    cmd_generate(other)
    result = cmd_eval(other)

    assert set(result['reports']) == set(cfg.seeds)
    for seed, data in checkpoints.items():
        assert store_for(other).path(checkpoint_name(seed)).read_bytes() == data

    record = eval_store_for(other).read_jsonl(eval_prompts_name(0))[0]
    assert record['variant'] == 'nonsense'
    assert DEFAULT_NONSENSE in record['text']
    assert eval_store_for(cfg).read_jsonl(eval_prompts_name(0))[0]['variant'] == 'none'


def test_report_before_eval(tiny_config):
    with pytest.raises(MissingArtifact):
        cmd_report(tiny_config)


def write_config(path: Path, data_dir: Path, outdir: Path) -> Path:
    path.write_text(
        f'data_dir = "{data_dir.as_posix()}"\n'
        'classes = ["animal"]\n'
        f'outdir = "{outdir.as_posix()}"\n',
        encoding='utf-8'
    )
    return path


def test_main_ingest(tmp_path):
    data_dir = tmp_path.joinpath('data')
    data_dir.mkdir()
    data_dir.joinpath('train.conll').write_text('cat\tB-animal\nruns\tO\n', encoding='utf-8')
    config = write_config(tmp_path.joinpath('run.toml'), data_dir, tmp_path.joinpath('runs'))

    assert main(['ingest', '--config', str(config)]) == 0
    assert list(tmp_path.joinpath('runs').glob('*/dataset.json'))


def test_main_reports_iob_violation(tmp_path, caplog):
    data_dir = tmp_path.joinpath('data')
    data_dir.mkdir()
    data_dir.joinpath('train.conll').write_text('cat\tB-animal\n\nruns\tI-animal\n', encoding='utf-8')
    config = write_config(tmp_path.joinpath('run.toml'), data_dir, tmp_path.joinpath('runs'))

    assert main(['ingest', '--config', str(config)]) == 1
    assert 'IobViolation' in caplog.text
    assert 'Line 3' in caplog.text


def test_main_rejects_bad_override(tmp_path):
    config = write_config(tmp_path.joinpath('run.toml'), tmp_path, tmp_path.joinpath('runs'))

    assert main(['ingest', '--config', str(config), '--shots', '3']) == 1
