"""Checkpoint directories with a verifiable lineage.

Layout:

    <dir>/manifest.json     stage tag, step, run config snapshot, tensor map,
                            parent checkpoint hash, stage-specific extras
    <dir>/tensors/*.ktns    one tensor per parameter, `/` in names -> `__`

The checkpoint hash is sha256 over the manifest bytes plus every tensor
file's bytes in sorted name order.  A child stage records its parent's hash,
so inference can refuse mismatched lineages outright.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from ..diffcore import ParamStore, Tensor, read_ktns, write_ktns
from .config import PipelineError

STAGES = ("stage1", "sampler", "duration")


def _tensor_filename(name: str) -> str:
    return name.replace("/", "__") + ".ktns"


def save_checkpoint(directory, stage: str, step: int, store: ParamStore,
                    run_config: dict, parent_hash: str | None = None,
                    extra: dict | None = None) -> str:
    if stage not in STAGES:
        raise PipelineError(f"unknown checkpoint stage {stage!r}")
    root = Path(directory)
    (root / "tensors").mkdir(parents=True, exist_ok=True)
    tensors = {}
    for name, t in store.items():
        rel = f"tensors/{_tensor_filename(name)}"
        write_ktns(root / rel, t.data)
        tensors[name] = rel
    manifest = {
        "stage": stage,
        "step": step,
        "run_config": run_config,
        "tensors": tensors,
        "parent_hash": parent_hash,
        "extra": extra or {},
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return compute_checkpoint_hash(root)


def compute_checkpoint_hash(directory) -> str:
    root = Path(directory)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise PipelineError(f"not a checkpoint: missing {manifest_path}")
    h = hashlib.sha256(manifest_path.read_bytes())
    manifest = json.loads(manifest_path.read_text())
    for name in sorted(manifest.get("tensors", {})):
        rel = manifest["tensors"][name]
        tensor_path = root / rel
        if not tensor_path.exists():
            raise PipelineError(f"checkpoint {root}: missing tensor file {rel}")
        h.update(tensor_path.read_bytes())
    return h.hexdigest()


@dataclass
class Checkpoint:
    directory: Path
    manifest: dict
    store: ParamStore
    hash: str

    @property
    def stage(self) -> str:
        return self.manifest["stage"]

    @property
    def extra(self) -> dict:
        return self.manifest["extra"]

    @property
    def run_config(self) -> dict:
        return self.manifest["run_config"]


def load_checkpoint(directory, expect_stage: str | None = None) -> Checkpoint:
    root = Path(directory)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise PipelineError(f"not a checkpoint: missing {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    if expect_stage is not None and manifest.get("stage") != expect_stage:
        raise PipelineError(
            f"checkpoint {root} is stage {manifest.get('stage')!r}, expected {expect_stage!r}"
        )
    store = ParamStore()
    for name in sorted(manifest["tensors"]):
        arr = read_ktns(root / manifest["tensors"][name])
        store.add(name, arr)
    return Checkpoint(directory=root, manifest=manifest, store=store,
                      hash=compute_checkpoint_hash(root))


def verify_parent(child: Checkpoint, parent: Checkpoint):
    """The child must have been trained against exactly this parent."""
    recorded = child.manifest.get("parent_hash")
    if recorded != parent.hash:
        raise PipelineError(
            f"checkpoint lineage mismatch: {child.directory} was trained against "
            f"parent {recorded}, but {parent.directory} hashes to {parent.hash}"
        )
