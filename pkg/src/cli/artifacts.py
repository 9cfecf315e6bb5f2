import json
import logging
from pathlib import Path
from typing import Iterable, List

from src.exceptions import ArtifactMismatch, MissingArtifact

logger = logging.getLogger(__name__)

HASH_KEY = 'config_hash'


def _dumps(payload) -> str:
    return json.dumps(payload, ensure_ascii=False, sort_keys=True)


class ArtifactStore:
    """Write-once JSON/JSONL artifacts under `<outdir>/<config-hash>/`, each stamped with the hash."""

    def __init__(self, path: str or Path, config_hash: str):
        self.__path = Path(path)
        self.__config_hash = config_hash

    @property
    def root(self) -> Path:
        return self.__path

    @property
    def config_hash(self) -> str:
        return self.__config_hash

    def path(self, name: str) -> Path:
        return self.__path.joinpath(name)

    def exists(self, name: str) -> bool:
        return self.path(name).exists()

    def __write(self, name: str, text: str) -> Path:
        path = self.path(name)
        if path.exists():
            if path.read_text(encoding='utf-8') == text:
                logger.info('%s is up to date', path)
                return path
            raise ArtifactMismatch(f'{path} already exists with different content')

        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding='utf-8')
        logger.info('Wrote %s', path)
        return path

    def write_json(self, name: str, payload: dict) -> Path:
        return self.__write(name, _dumps({HASH_KEY: self.__config_hash, **payload}) + '\n')

    def write_jsonl(self, name: str, records: Iterable[dict]) -> Path:
        lines = [_dumps({HASH_KEY: self.__config_hash, **record}) for record in records]
        return self.__write(name, ''.join(line + '\n' for line in lines))

    def __check(self, name: str, payload: dict) -> dict:
        found = payload.get(HASH_KEY)
        if found != self.__config_hash:
            raise ArtifactMismatch(
                f'{self.path(name)} was written for config {found}, expected {self.__config_hash}'
            )
        payload = dict(payload)
        payload.pop(HASH_KEY)
        return payload

    def read_json(self, name: str) -> dict:
        path = self.path(name)
        if not path.exists():
            raise MissingArtifact(f'Missing artifact {path}')
        return self.__check(name, json.loads(path.read_text(encoding='utf-8')))

    def read_jsonl(self, name: str) -> List[dict]:
        path = self.path(name)
        if not path.exists():
            raise MissingArtifact(f'Missing artifact {path}')
        return [
            self.__check(name, json.loads(line))
            for line in path.read_text(encoding='utf-8').splitlines() if line.strip()
        ]

    def glob(self, pattern: str) -> List[Path]:
        return sorted(self.__path.glob(pattern))
