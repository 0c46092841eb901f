"""
Output files for the command-line tools.

Every file is written to a temporary sibling and moved into place with
os.replace, so a reader never sees a half-written artifact. Floats are
rounded to 12 significant digits and JSON keys are sorted, which keeps
reruns byte-identical.
"""

import os
import json
import math
import hashlib
import logging
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from rate_region import RateRegion, RatePoint, frontier, frontier_to_csv


logger = logging.getLogger(__name__)

SIGNIFICANT_DIGITS = 12

PathLike = Union[str, Path]


def round_floats(value: Any, digits: int = SIGNIFICANT_DIGITS) -> Any:
    """
    Recursively round floats to significant digits. Non-finite floats
    become the strings "inf", "-inf" and "nan" (JSON has no literal for them).
    """
    if isinstance(value, dict):
        return {str(k): round_floats(v, digits) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [round_floats(v, digits) for v in value]
    if isinstance(value, np.ndarray):
        return round_floats(value.tolist(), digits)
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        rounded = float(f"{value:.{digits}g}")
        return 0.0 if rounded == 0.0 else rounded
    if isinstance(value, complex):
        return [round_floats(value.real, digits), round_floats(value.imag, digits)]
    return value


def to_json_text(data: Any) -> str:
    return json.dumps(round_floats(data), indent=2, sort_keys=True) + "\n"


def canonical_json(data: Any) -> str:
    """Compact, key-sorted JSON used for digests."""
    return json.dumps(round_floats(data), sort_keys=True, separators=(",", ":"))


def input_digest(data: Any) -> str:
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def write_bytes_atomic(path: PathLike, payload: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_text_atomic(path: PathLike, text: str) -> Path:
    return write_bytes_atomic(path, text.encode("utf-8"))


def write_json_atomic(path: PathLike, data: Any) -> Path:
    return write_text_atomic(path, to_json_text(data))


class ArtifactWriter:
    """Writes the artifacts of one command into a directory and remembers them."""

    def __init__(self, out_dir: PathLike):
        self.out_dir = Path(out_dir)
        self.written: List[Path] = []

    def _target(self, name: str) -> Path:
        return self.out_dir / name

    def _record(self, path: Path) -> Path:
        self.written.append(path)
        logger.debug(f"wrote {path}")
        return path

    def text(self, name: str, text: str) -> Path:
        return self._record(write_text_atomic(self._target(name), text))

    def binary(self, name: str, payload: bytes) -> Path:
        return self._record(write_bytes_atomic(self._target(name), payload))

    def json(self, name: str, data: Any) -> Path:
        return self._record(write_json_atomic(self._target(name), data))

    def region(self, name: str, region: RateRegion) -> Path:
        return self.json(name, region.to_dict(SIGNIFICANT_DIGITS))

    def frontier(self, name: str, region: RateRegion, resolution: int) -> Path:
        points: Sequence[RatePoint] = frontier(region, resolution)
        return self.text(name, frontier_to_csv(points, SIGNIFICANT_DIGITS))

    def names(self) -> List[str]:
        return [p.name for p in self.written]

    def summary(self, extra: Optional[Dict[str, Any]] = None) -> str:
        parts = [f"wrote {len(self.written)} file(s) to {self.out_dir}"]
        for key, value in (extra or {}).items():
            parts.append(f"{key}={value}")
        return "; ".join(parts)
