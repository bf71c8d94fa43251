"""Measured-bitstring sample sets and their on-disk format.

A sample file is UTF-8 text with one 0/1 bitstring per line (site 1 first)
and a JSON metadata sidecar ``<file>.meta.json`` holding at least
``{n_sites, basis, shots, created}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .hilbert import code_to_bitstring


class SampleFileError(ValueError):
    """Malformed sample file; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


@dataclass
class SampleSet:
    """Multiset of measured bitstrings with metadata.

    ``codes`` holds one packed bitstring per shot, in measurement order.
    """

    n: int
    codes: np.ndarray
    basis: str = "z"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.codes = np.asarray(self.codes, dtype=np.int64)
        if self.codes.ndim != 1:
            raise ValueError("codes must be a 1D array")
        if self.codes.size and (self.codes.min() < 0 or self.codes.max() >= (1 << self.n)):
            raise ValueError("sample code out of range for n sites")

    @property
    def shots(self) -> int:
        return int(self.codes.size)

    def bitstrings(self) -> list[str]:
        return [code_to_bitstring(int(c), self.n) for c in self.codes]

    def counts(self) -> tuple[np.ndarray, np.ndarray]:
        """(unique codes, multiplicities), codes ascending."""
        return np.unique(self.codes, return_counts=True)

    def subsample(self, m: int, rng: np.random.Generator) -> "SampleSet":
        idx = rng.choice(self.shots, size=m, replace=True)
        return SampleSet(self.n, self.codes[idx], self.basis, dict(self.meta))

    # -- persistence --------------------------------------------------------

    def write(self, path: str | Path, created: str | None = None) -> None:
        path = Path(path)
        with open(path, "w", encoding="utf-8") as f:
            for c in self.codes:
                f.write(code_to_bitstring(int(c), self.n))
                f.write("\n")
        meta = {
            "n_sites": self.n,
            "basis": self.basis,
            "shots": self.shots,
            "created": created,
        }
        meta.update({k: v for k, v in self.meta.items() if k not in meta})
        with open(path.with_suffix(path.suffix + ".meta.json"), "w", encoding="utf-8") as f:
            json.dump(meta, f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def read(cls, path: str | Path, n: int | None = None) -> "SampleSet":
        """Parse a sample file; malformed lines raise with their line number."""
        path = Path(path)
        meta_path = path.with_suffix(path.suffix + ".meta.json")
        meta: dict = {}
        if meta_path.exists():
            with open(meta_path, encoding="utf-8") as f:
                meta = json.load(f)
            n = n if n is not None else meta.get("n_sites")
        codes = []
        with open(path, encoding="utf-8") as f:
            for lineno, raw in enumerate(f, start=1):
                line = raw.strip()
                if not line:
                    continue
                if any(c not in "01" for c in line):
                    raise SampleFileError(
                        f"{path}:{lineno}: not a 0/1 bitstring: {line!r}", line=lineno
                    )
                if n is None:
                    n = len(line)
                elif len(line) != n:
                    raise SampleFileError(
                        f"{path}:{lineno}: expected {n} sites, got {len(line)}", line=lineno
                    )
                codes.append(int(line, 2))
        if n is None:
            raise SampleFileError(f"{path}: empty sample file and no n_sites metadata")
        return cls(n=n, codes=np.asarray(codes, dtype=np.int64),
                   basis=meta.get("basis", "z"), meta=meta)
