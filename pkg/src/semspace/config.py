"""Run configuration carried into every output artifact."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

from semspace import __version__
from semspace.pooling import STRATEGIES


@dataclass(frozen=True)
class RunConfig:
    """Knobs for one pipeline invocation; echoed into artifacts verbatim.

    Defaults: the demeaning/PCA sample is 100000 vectors, benchmarks
    aggregate 5000 queries over 500 neighbors, and spaces are reduced to
    100 dimensions.
    """

    store: str = ""
    space_id: str = ""
    strategy: str = ""
    mean_sample_n: int = 100000
    n_queries: int = 5000
    k: int = 500
    d_out: int = 100
    seed: int = 0
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.strategy and self.strategy not in STRATEGIES:
            raise ValueError(
                f"unknown pooling strategy {self.strategy!r}; expected one of {', '.join(STRATEGIES)}"
            )

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload["labels"] = list(self.labels)
        return payload


def artifact_json(kind: str, body: dict, config: RunConfig) -> str:
    """Serialize a self-describing artifact deterministically."""
    payload = {
        "kind": kind,
        "tool_version": __version__,
        "config": config.to_dict(),
        **body,
    }
    return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n"
