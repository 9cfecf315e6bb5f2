import logging
from pathlib import Path
from typing import Dict

from src.data.corpus import SPLITS, Dataset, LabelScheme, load_split
from src.exceptions import EmptyDataset, SiftError

logger = logging.getLogger(__name__)

CONLL_SUFFIXES = ('.conll', '.tsv', '.txt')


def represents_split(path: Path) -> bool:
    return path.is_file() and path.suffix in CONLL_SUFFIXES and path.stem in SPLITS


def get_split_files(path: Path) -> Dict[str, Path]:
    if not path.is_dir():
        return {}

    files = {}
    for entry in sorted(path.iterdir()):
        if represents_split(entry):
            files.setdefault(entry.stem, entry)
    return files


def load_dataset(paths: str or Path or Dict[str, Path], scheme: LabelScheme) -> Dataset:
    # a directory of <split>.conll files, or an explicit split -> file mapping
    files = paths if isinstance(paths, dict) else get_split_files(Path(paths))
    if not files:
        raise EmptyDataset(f'No CoNLL split files found in {paths}')

    splits = {}
    for split, path in files.items():
        if split not in SPLITS:
            raise ValueError(f'Unknown split {split!r}, expected one of {SPLITS}')
        try:
            splits[split] = load_split(path, scheme, split)
        except SiftError as e:
            if hasattr(e, 'add_note'):
                e.add_note(f'in {path}')
            else:  # Python < 3.11
                e.__notes__ = [*getattr(e, '__notes__', []), f'in {path}']
            raise
        logger.debug('Loaded %d sentences from %s', len(splits[split]), path)

    if not any(splits.values()):
        raise EmptyDataset(f'CoNLL files in {paths} hold no sentences')

    return Dataset(scheme=scheme, **splits)
