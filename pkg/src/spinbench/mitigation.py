"""Error-mitigation stages and post-processing.

Five stages act at different points of the pipeline: Floquet-style gate
calibration (before compilation), dynamical decoupling (circuit level,
implemented in the pipeline module), readout inversion and symmetry
post-selection (distribution level, here), and reference rescaling plus
the imaginary-part shift (series level, here).  The spectral transform
and thermodynamic observables also live here.

Every stage is a fixed point on noiseless input, so any prefix of the
chain can be run for staged comparisons.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize
import scipy.signal

from .circuits import (
    Circuit,
    Measure,
    NoiseModel,
    PhXZ,
    TwoQubit5Angle,
    output_distribution,
)
from .oracle import EigenSystem, eigensystem
from .pauli import PauliSum, PauliTerm
from .series import SpectralFunction, TimeSeries

RESCALE_FLOOR = 0.02  # reference-denominator magnitude below which f(t) clamps


# ---------------------------------------------------------------------------
# distribution/count-level mitigation


def _as_distribution(counts: dict[str, float]) -> tuple[dict[str, float], float]:
    total = float(sum(counts.values()))
    if total <= 0:
        raise ValueError("empty counts")
    return {b: v / total for b, v in counts.items()}, total


def postselect(counts: dict[str, int], symmetry: PauliTerm, sector: int = +1,
               measured_qubits: tuple[int, ...] | None = None,
               ) -> tuple[dict[str, int], float]:
    """Keep only outcomes in the given Z2 sector of a Z-string symmetry.

    ``measured_qubits[k]`` is the register qubit behind bit k of the
    bitstrings (defaults to 0..n-1).  Returns the filtered counts and the
    retained fraction.
    """
    if any(l not in "IZ" for l in symmetry.letters):
        raise ValueError("post-selection needs a Z-type symmetry string")
    if sector not in (+1, -1):
        raise ValueError("sector must be +1 or -1")
    some = next(iter(counts))
    nbits = len(some)
    if measured_qubits is None:
        measured_qubits = tuple(range(nbits))
    positions = [k for k, q in enumerate(measured_qubits)
                 if q < symmetry.n_qubits and symmetry.letters[q] == "Z"]
    kept = {}
    total = sum(counts.values())
    for bits, c in counts.items():
        parity = sum(int(bits[k]) for k in positions) % 2
        if (1 - 2 * parity) == sector:
            kept[bits] = c
    if not kept:
        raise ValueError("post-selection removed every outcome")
    return kept, sum(kept.values()) / total


def postselect_distribution(dist: dict[str, float], symmetry: PauliTerm,
                            sector: int, measured_qubits: tuple[int, ...],
                            ) -> tuple[dict[str, float], float]:
    kept, retained = postselect(dist, symmetry, sector, measured_qubits)
    norm = sum(kept.values())
    return {b: v / norm for b, v in kept.items()}, retained


def readout_mitigate(counts: dict[str, float], confusion: dict,
                     measured_qubits: tuple[int, ...] | None = None,
                     ) -> dict[str, float]:
    """Invert the tensor-product confusion on an empirical distribution.

    The result is a quasi-distribution: entries may be slightly negative
    and are reported as-is (expectation values remain unbiased).
    """
    dist, _ = _as_distribution(counts)
    some = next(iter(dist))
    nbits = len(some)
    if measured_qubits is None:
        measured_qubits = tuple(range(nbits))
    vec = np.zeros(2 ** nbits)
    for bits, p in dist.items():
        vec[int(bits, 2)] = p
    tensor = vec.reshape((2,) * nbits)
    for k, q in enumerate(measured_qubits):
        conf = confusion.get(q)
        if conf is None:
            continue
        cinv = np.linalg.inv(np.asarray(conf, dtype=float))
        tensor = np.moveaxis(
            np.tensordot(cinv, np.moveaxis(tensor, k, 0), axes=(1, 0)), 0, k)
    flat = tensor.reshape(-1)
    return {format(i, f"0{nbits}b"): float(v) for i, v in enumerate(flat)
            if abs(v) > 1e-15}


def readout_invert_distribution(dist: dict[str, float], confusion: dict,
                                measured_qubits: tuple[int, ...]) -> dict[str, float]:
    return readout_mitigate(dist, confusion, measured_qubits)


# ---------------------------------------------------------------------------
# Floquet-style calibration of the two-qubit gate angles


@dataclass
class CalibrationRecord:
    pair: tuple[int, int]
    angles: tuple[float, float, float, float, float]
    uncertainties: tuple[float, float, float, float, float]
    depol_estimate: float = 0.0
    residual: float = 0.0

    @property
    def as_angle_map(self) -> dict:
        return {self.pair: self.angles}


_H_KW = dict(x_exp=0.5, z_exp=1.0, axis_phase=-0.5)


def _calibration_circuits(k_values) -> list[Circuit]:
    """Repeated-gate sequences with varied preparations and readout bases.

    All circuits act on qubits (0, 1); preparations and measurement
    rotations are single PhXZ layers, so the only two-qubit content is
    the repeated gate under calibration.
    """
    settings = [
        # (prep gates, measurement-rotation gates)
        ([PhXZ(1, x_exp=1.0)], []),                          # |01>, Z readout
        ([PhXZ(1, **_H_KW)], [PhXZ(1, **_H_KW)]),            # 00/01 coherence, X
        ([PhXZ(1, **_H_KW)], [PhXZ(1, z_exp=-0.5), PhXZ(1, **_H_KW)]),  # Y
        ([PhXZ(0, **_H_KW)], [PhXZ(0, **_H_KW)]),            # 00/10 coherence, X
        ([PhXZ(0, **_H_KW)], [PhXZ(0, z_exp=-0.5), PhXZ(0, **_H_KW)]),  # Y
        ([PhXZ(0, **_H_KW), PhXZ(1, **_H_KW)],
         [PhXZ(0, **_H_KW), PhXZ(1, **_H_KW)]),              # XX: |11> phase
        ([PhXZ(0, **_H_KW), PhXZ(1, **_H_KW)],
         [PhXZ(0, z_exp=-0.5), PhXZ(0, **_H_KW), PhXZ(1, **_H_KW)]),    # YX
    ]
    circuits = []
    for k in k_values:
        for prep, meas in settings:
            c = Circuit(2)
            if prep:
                c.append_moment(list(prep))
            for _ in range(k):
                c.append_moment([TwoQubit5Angle(0, 1)])
            for g in meas:
                c.append(g)
            c.append_moment([Measure((0, 1))])
            circuits.append(c)
    return circuits


def _distribution_vector(dist: dict[str, float]) -> np.ndarray:
    v = np.zeros(4)
    for bits, p in dist.items():
        v[int(bits, 2)] = p
    return v


def floquet_calibrate(executor, pair: tuple[int, int],
                      k_values=(1, 2, 3, 5, 8, 12, 17),
                      fit_depol: bool = True,
                      x0_extra=(0.0,)) -> CalibrationRecord:
    """Estimate the five gate angles from repeated-gate sequences.

    ``executor`` receives each calibration circuit (on local qubits 0, 1,
    with ideal-gate requests) and returns the measured distribution over
    the two bits; it owns the true angles and any noise.  A least-squares
    fit against model distributions with a nuisance depolarizing rate
    recovers the angles; sign/branch ambiguity is controlled by bounding
    the fit window around the ideal gate.
    """
    circuits = _calibration_circuits(k_values)
    measured = np.concatenate([_distribution_vector(executor(c)) for c in circuits])

    def model_probs(x):
        theta, phi, zeta, gamma, chi = x[:5]
        p = x[5] if fit_depol else 0.0
        offs = (theta - np.pi / 4, phi, zeta, gamma, chi)
        nm = NoiseModel(depol_p=min(max(p, 0.0), 1.0 / 3.0),
                        gate_angle_offsets={(0, 1): offs})
        out = []
        for c in circuits:
            probs = output_distribution(c, nm)
            out.append(probs)
        return np.concatenate(out)

    def residuals(x):
        return model_probs(x) - measured

    bounds_lo = [np.pi / 4 - 0.4, -0.4, -0.4, -0.4, -0.4]
    bounds_hi = [np.pi / 4 + 0.4, 0.4, 0.4, 0.4, 0.4]
    x0 = [np.pi / 4, 0.0, 0.0, 0.0, 0.0]
    if fit_depol:
        bounds_lo.append(0.0)
        bounds_hi.append(0.05)
        x0.append(0.002)
    best = None
    for trial_shift in (0.0, 0.05, -0.05):
        start = np.array(x0, dtype=float)
        start[0] += trial_shift
        res = scipy.optimize.least_squares(
            residuals, start, bounds=(bounds_lo, bounds_hi),
            xtol=1e-14, ftol=1e-14, gtol=1e-14)
        if best is None or res.cost < best.cost:
            best = res
        if best.cost < 1e-18:
            break
    # 1-sigma estimates from the Gauss-Newton covariance
    jac = best.jac
    dof = max(len(measured) - len(best.x), 1)
    sigma2 = 2.0 * best.cost / dof
    try:
        cov = sigma2 * np.linalg.pinv(jac.T @ jac)
        unc = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        unc = np.full(len(best.x), np.nan)
    angles = tuple(float(v) for v in best.x[:5])
    return CalibrationRecord(
        pair=tuple(pair),
        angles=angles,
        uncertainties=tuple(float(u) for u in unc[:5]),
        depol_estimate=float(best.x[5]) if fit_depol else 0.0,
        residual=float(np.sqrt(2.0 * best.cost / len(measured))),
    )


def make_noisy_executor(nm_true: NoiseModel):
    """Executor closure over the true hardware noise (exact statistics)."""

    def run(circuit: Circuit) -> dict[str, float]:
        probs = output_distribution(circuit, nm_true)
        return {format(k, "02b"): float(p) for k, p in enumerate(probs)}

    return run


# ---------------------------------------------------------------------------
# series-level post-processing


def rescale(series: TimeSeries, ideal_reference: TimeSeries,
            hardware_reference: TimeSeries,
            floor: float = RESCALE_FLOOR) -> TimeSeries:
    """Multiply by f(t) = C_ideal^ref(t) / C_hw^ref(t) per time point.

    Both references must come from the same observable pair and pipeline
    configuration as ``series`` (same ansatz depth, same mitigation); when
    the denominator magnitude drops below ``floor`` the factor is clamped
    to its last valid value and the point is flagged.
    """
    if (len(ideal_reference.times) != len(series.times)
            or len(hardware_reference.times) != len(series.times)):
        raise ValueError("reference series do not cover the time grid")
    if not np.allclose(ideal_reference.times, series.times):
        raise ValueError("reference time grid differs")
    f = np.ones(len(series.times), dtype=complex)
    clamped = np.zeros(len(series.times), dtype=bool)
    last_valid = 1.0 + 0.0j
    for k in range(len(series.times)):
        den = hardware_reference.values[k]
        if abs(den) < floor:
            f[k] = last_valid
            clamped[k] = True
        else:
            f[k] = ideal_reference.values[k] / den
            last_valid = f[k]
    values = f * series.values
    frac = float(np.mean(clamped))
    return series.with_values(values, rescaled=True,
                              rescale_clamped_fraction=frac,
                              rescale_clamped=clamped.tolist())


def shift_imaginary(series: TimeSeries) -> TimeSeries:
    """Remove the time-mean of the imaginary part; real part untouched."""
    shift = float(np.mean(series.values.imag))
    values = series.values - 1j * shift
    return series.with_values(values, imag_shift=shift)


def spectral_transform(series: TimeSeries, window: str = "gaussian",
                       sigma: float | None = None,
                       zero_pad: int = 4) -> SpectralFunction:
    """S(omega) from the hermitian extension C(-t) = C(t)*.

    A Gaussian window (default sigma = one third of the time span) tames
    truncation ringing; zero padding refines the frequency grid.  The
    transform of the hermitian extension is real; the real part is
    returned and the residual imaginary magnitude is recorded.
    """
    n = len(series.times)
    if n < 4:
        raise ValueError("need at least 4 time points")
    dt = series.dt
    span = series.times[-1] - series.times[0]
    c_pos = series.values
    # hermitian extension onto [-T, T]
    ext = np.concatenate([np.conj(c_pos[:0:-1]), c_pos])
    t_ext = np.concatenate([-series.times[:0:-1], series.times])
    if window == "gaussian":
        s = sigma if sigma is not None else span / 3.0
        w = np.exp(-0.5 * (t_ext / s) ** 2)
        win_meta = {"kind": "gaussian", "sigma": float(s)}
    elif window in (None, "none"):
        w = np.ones_like(t_ext)
        win_meta = {"kind": "none"}
    else:
        raise ValueError(f"unknown window {window!r}")
    data = ext * w
    L = len(data) * max(int(zero_pad), 1)
    padded = np.zeros(L, dtype=complex)
    padded[: len(data)] = data
    # S(omega_k) = dt * sum_j C(t_j) e^{i omega_k t_j}
    spec = L * np.fft.ifft(padded)
    omegas = 2.0 * np.pi * np.fft.fftfreq(L, d=dt)
    phase = np.exp(1j * omegas * t_ext[0])
    svals = dt * phase * spec
    order = np.argsort(omegas)
    omegas, svals = omegas[order], svals[order]
    resid = float(np.abs(svals.imag).max())
    return SpectralFunction(omegas, svals.real,
                            window={**win_meta, "zero_pad": int(zero_pad),
                                    "imag_residual": resid})


# ---------------------------------------------------------------------------
# thermodynamics


def thermal_energy_curve(H: PauliSum, T_grid: np.ndarray,
                         method: str = "exact",
                         es: EigenSystem | None = None,
                         **pipeline_kwargs) -> np.ndarray:
    """<E>(T) over an ascending temperature grid.

    ``method='exact'`` evaluates the partition-function average;
    ``'qite'`` runs the thermal-ensemble pipeline (recompiled preps, the
    given noise model / shots) at each temperature.
    """
    T_grid = np.asarray(T_grid, dtype=float)
    if np.any(T_grid <= 0) or np.any(np.diff(T_grid) <= 0):
        raise ValueError("temperature grid must be positive ascending")
    if method == "exact":
        es = es or eigensystem(H)
        return np.array([es.thermal_energy(t) for t in T_grid])
    if method == "qite":
        from .qite import build_ensemble, static_observable

        es = es or eigensystem(H)
        nm = pipeline_kwargs.pop("nm", None)
        shots = pipeline_kwargs.pop("shots", None)
        seed = pipeline_kwargs.pop("seed", 0)
        settings = pipeline_kwargs.pop("settings", None)
        out = []
        for k, T in enumerate(T_grid):
            ens = build_ensemble(H, 1.0 / T, es=es, fixed_depth=True,
                                 seed=seed, **pipeline_kwargs)
            val, _ = static_observable(ens, H, nm=nm, shots=shots,
                                       seed=seed + 7919 * k, settings=settings)
            out.append(val)
        return np.array(out)
    raise ValueError("method must be 'exact' or 'qite'")


def heat_capacity(T_grid: np.ndarray, energies: np.ndarray, n_sites: int,
                  smooth_window: int | None = None,
                  smooth_order: int = 3) -> np.ndarray:
    """c/n = (1/n) dE/dT via central differences.

    Optional Savitzky-Golay smoothing of E(T) before differentiating,
    for noisy pipeline data where the derivative amplifies noise.
    """
    e = np.asarray(energies, dtype=float)
    if smooth_window is not None and smooth_window >= smooth_order + 2:
        window = smooth_window + (1 - smooth_window % 2)  # odd
        window = min(window, len(e) - (1 - len(e) % 2))
        e = scipy.signal.savgol_filter(e, window, smooth_order)
    return np.gradient(e, np.asarray(T_grid, dtype=float)) / n_sites


def local_maxima(x: np.ndarray, y: np.ndarray) -> list[tuple[float, float]]:
    """Interior local maxima of y(x), in x order."""
    out = []
    for k in range(1, len(y) - 1):
        if y[k] > y[k - 1] and y[k] >= y[k + 1]:
            out.append((float(x[k]), float(y[k])))
    return out
