"""Run manifests: enough recorded state to re-run a command exactly.

Every CLI command drops a ``manifest.json`` next to its outputs holding
the resolved options, the seed, and the input fingerprints.  ``replay``
re-executes the command from that file alone; with the same inputs the
deterministic output files come back byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

MANIFEST_NAME = "manifest.json"


class ManifestError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    options: dict
    seed: int | None = None
    dataset_fingerprint: str | None = None
    inputs: dict = field(default_factory=dict)
    out_dir: str = "."
    outputs: list = field(default_factory=list)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            d = json.load(fh)
        missing = {"command", "options"} - set(d)
        if missing:
            raise ManifestError(f"{path}: missing manifest fields {sorted(missing)}")
        return cls(**d)


def replay(manifest_path, out_dir=None):
    """Re-run the command recorded in a manifest.

    ``out_dir`` defaults to the recorded output directory (overwriting
    the previous outputs); pass a fresh directory to compare runs.
    Returns the new manifest.
    """
    from . import cli  # runners live there; imported late to avoid a cycle

    man = RunManifest.load(manifest_path)
    runner = cli.RUNNERS.get(man.command)
    if runner is None:
        raise ManifestError(f"no runner for command {man.command!r}")
    target = out_dir if out_dir is not None else man.out_dir
    return runner(out_dir=target, **man.options)
