"""Time-series and spectral-function containers shared across the pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class TimeSeries:
    """Complex correlation data C(t) on a uniform time grid."""

    times: np.ndarray
    values: np.ndarray
    stderr: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.times.shape != self.values.shape:
            raise ValueError("times and values must have matching shapes")
        if len(self.times) > 1:
            steps = np.diff(self.times)
            if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
                raise ValueError("time grid must be uniform")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite values in series")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    def with_values(self, values: np.ndarray, **extra_meta) -> "TimeSeries":
        meta = dict(self.metadata)
        meta.update(extra_meta)
        return TimeSeries(self.times.copy(), values, self.stderr, meta)

    def to_csv(self) -> str:
        lines = ["t,re,im,stderr_re,stderr_im"]
        for k, t in enumerate(self.times):
            if self.stderr is not None:
                se = self.stderr[k]
                err = f"{se.real:.8g},{se.imag:.8g}"
            else:
                err = "0,0"
            v = self.values[k]
            lines.append(f"{t:.8g},{v.real:.10g},{v.imag:.10g},{err}")
        return "\n".join(lines) + "\n"


@dataclass
class SpectralFunction:
    """Real frequency transform S(omega) of a correlation series."""

    omegas: np.ndarray
    values: np.ndarray
    window: dict = field(default_factory=dict)

    def __post_init__(self):
        self.omegas = np.asarray(self.omegas, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.omegas.shape != self.values.shape:
            raise ValueError("omega grid and values must match")

    def peaks(self, omega_min: float = 0.0, omega_max: float | None = None,
              min_height: float = 0.0) -> list[tuple[float, float]]:
        """Local maxima of |S(omega)|, sorted by descending amplitude.

        Spectral weight of anti-correlated observable pairs is negative,
        so peaks are identified on the magnitude.
        """
        out = []
        v = np.abs(self.values)
        for k in range(1, len(v) - 1):
            w = self.omegas[k]
            if w < omega_min or (omega_max is not None and w > omega_max):
                continue
            if v[k] > v[k - 1] and v[k] >= v[k + 1] and v[k] >= min_height:
                out.append((float(w), float(v[k])))
        out.sort(key=lambda p: -p[1])
        return out

    def to_csv(self) -> str:
        lines = ["omega,s"]
        for w, s in zip(self.omegas, self.values):
            lines.append(f"{w:.8g},{s:.10g}")
        return "\n".join(lines) + "\n"
