"""Sampled time series of the decay functionals."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SERIES = ("u_l2sq", "relative_l2", "fisher_g", "fisher_sqrt", "entropy",
          "tau_l2", "low_freq_energy", "coupled_energy")
# Sampled alongside but not part of the CSV layout; NaN when not provided.
EXTRA_SERIES = ("grad_u_l2sq",)


class TraceError(ValueError):
    pass


@dataclass
class DecayTrace:
    times: list = field(default_factory=list)
    values: dict = field(default_factory=lambda: {name: [] for name in SERIES + EXTRA_SERIES})

    def __len__(self) -> int:
        return len(self.times)

    def append(self, t: float, sample: dict) -> None:
        if self.times and not t > self.times[-1]:
            raise TraceError(f"trace times must increase strictly ({t} after {self.times[-1]})")
        missing = [name for name in SERIES if name not in sample]
        if missing:
            raise TraceError(f"sample lacks {missing}")
        for name, value in sample.items():
            if not np.isfinite(value):
                raise TraceError(f"non-finite {name} at t={t}")
        self.times.append(float(t))
        for name in self.values:
            self.values[name].append(float(sample.get(name, np.nan)))

    def series(self, name: str) -> np.ndarray:
        if name not in self.values:
            raise TraceError(f"trace has no series {name!r}")
        return np.asarray(self.values[name], dtype=float)

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self.times, dtype=float)

    def window(self, t0: float, t1: float) -> np.ndarray:
        """Boolean mask of samples with t0 <= t <= t1."""
        t = self.t
        return (t >= t0) & (t <= t1)

    @classmethod
    def from_arrays(cls, times, **series) -> "DecayTrace":
        times = np.asarray(times, dtype=float)
        values = {}
        for name in SERIES + EXTRA_SERIES:
            data = series.get(name)
            fill = np.zeros_like(times) if name in SERIES else np.full_like(times, np.nan)
            values[name] = list(fill if data is None else np.asarray(data, dtype=float))
        extra = set(series) - set(SERIES) - set(EXTRA_SERIES)
        if extra:
            raise TraceError(f"unknown series {sorted(extra)}")
        if np.any(np.diff(times) <= 0):
            raise TraceError("trace times must increase strictly")
        return cls(list(times), values)
