"""
On-disk memo of scattering runs, keyed by every input that affects the
result.
"""

import json
from pathlib import Path

from diskcache import Cache
from loguru import logger

from . import __version__
from .dynamics import RtaPoint, WavepacketSpec


class ResultCache:
    def __init__(self, directory: Path):
        self.directory = Path(directory)
        self._cache = Cache(str(self.directory))

    @staticmethod
    def rta_key(L: int, q: int, spec: WavepacketSpec, gamma: float, **run_args) -> str:
        payload = {
            "version": __version__,
            "kind": "rta",
            "L": L,
            "q": q,
            "spec": spec.model_dump(),
            "gamma": repr(float(gamma)),
            **{k: repr(v) for k, v in sorted(run_args.items())},
        }
        return json.dumps(payload, sort_keys=True)

    def get_rta(self, L: int, q: int, spec: WavepacketSpec, gamma: float, **run_args) -> RtaPoint | None:
        raw = self._cache.get(self.rta_key(L, q, spec, gamma, **run_args))
        if raw is None:
            return None
        logger.debug(f"cache hit for gamma={gamma:g}")
        return RtaPoint.model_validate_json(raw)

    def set_rta(self, L: int, q: int, spec: WavepacketSpec, gamma: float, point: RtaPoint, **run_args) -> None:
        self._cache.set(self.rta_key(L, q, spec, gamma, **run_args), point.model_dump_json())

    def clear(self) -> int:
        return self._cache.clear()

    def __len__(self) -> int:
        return len(self._cache)

    def close(self) -> None:
        self._cache.close()
