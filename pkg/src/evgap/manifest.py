"""Sample records and JSONL manifests shared by every pipeline stage."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from typing import Iterable, Optional

import numpy as np

SENSORS = ("DVS", "APS")
LIGHTINGS = ("DAY", "NIGHT")
SPLITS = ("TRAIN", "TEST")
BIAS_SETS = ("DAY_BIASED", "NIGHT_BIASED", "PURE_DAY", "PURE_NIGHT")


class ManifestError(ValueError):
    pass


@dataclass
class Sample:
    sample_id: str
    recording_id: str
    sensor: str
    lighting: Optional[str]
    t: int
    steering_deg: Optional[float] = None
    steering_scaled: Optional[float] = None
    speed_kmh: Optional[float] = None
    frame_path: Optional[str] = None
    split: Optional[str] = None
    bias_set: Optional[str] = None
    # in-memory frame payload, never serialized
    pixels: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.sensor not in SENSORS:
            raise ManifestError(f"{self.sample_id}: unknown sensor {self.sensor!r}")
        if self.lighting is not None and self.lighting not in LIGHTINGS:
            raise ManifestError(f"{self.sample_id}: unknown lighting {self.lighting!r}")
        if self.split is not None and self.split not in SPLITS:
            raise ManifestError(f"{self.sample_id}: unknown split {self.split!r}")
        if self.bias_set is not None and self.bias_set not in BIAS_SETS:
            raise ManifestError(f"{self.sample_id}: unknown bias set {self.bias_set!r}")
        self.t = int(self.t)

    def to_dict(self) -> dict:
        d = asdict(self)
        del d["pixels"]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Sample":
        names = {f.name for f in fields(cls)} - {"pixels"}
        unknown = set(d) - names
        if unknown:
            raise ManifestError(f"unknown manifest fields: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as e:
            raise ManifestError(str(e)) from None

    def replace(self, **changes) -> "Sample":
        d = self.to_dict()
        d.update(changes)
        s = Sample(**{k: v for k, v in d.items() if k != "pixels"})
        s.pixels = changes.get("pixels", self.pixels)
        return s


def dumps_manifest(samples: Iterable[Sample]) -> str:
    return "".join(json.dumps(s.to_dict()) + "\n" for s in samples)


def loads_manifest(text: str) -> list[Sample]:
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            out.append(Sample.from_dict(json.loads(line)))
        except (json.JSONDecodeError, ManifestError) as e:
            raise ManifestError(f"line {lineno}: {e}") from None
    return out


def write_manifest(path, samples):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dumps_manifest(samples))


def read_manifest(path) -> list[Sample]:
    with open(path, encoding="utf-8") as f:
        return loads_manifest(f.read())
