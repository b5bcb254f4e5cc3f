from dataclasses import dataclass, field
from typing import Iterator, List, Optional

import numpy as np


@dataclass(frozen=True)
class HistoryRecord:
    matvecs: int
    relres_recursive: float
    relres_true: Optional[float] = None
    quasi_bound: Optional[float] = None


@dataclass
class ResidualHistory:
    """Convergence record of one system, indexed by matrix-vector products."""

    records: List[HistoryRecord] = field(default_factory=list)

    def append(self, matvecs, relres_recursive, relres_true=None, quasi_bound=None):
        if self.records and matvecs <= self.records[-1].matvecs:
            raise ValueError("matvec count must be strictly increasing")
        self.records.append(HistoryRecord(int(matvecs), float(relres_recursive),
                                          None if relres_true is None else float(relres_true),
                                          None if quasi_bound is None else float(quasi_bound)))

    def __len__(self):
        return len(self.records)

    def __iter__(self) -> Iterator[HistoryRecord]:
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def matvecs(self) -> np.ndarray:
        return np.array([r.matvecs for r in self.records])

    @property
    def relres_recursive(self) -> np.ndarray:
        return np.array([r.relres_recursive for r in self.records])

    @property
    def relres_true(self) -> np.ndarray:
        """True relative residuals, NaN where not sampled."""
        return np.array([np.nan if r.relres_true is None else r.relres_true for r in self.records])
