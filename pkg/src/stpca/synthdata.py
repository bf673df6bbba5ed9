"""Seeded generators for the two synthetic benchmark families.

Orbit (slice-wise, real embedded as complex): each sample is a multichannel
time series where the first ``n`` channels trace a great-circle orbit on an
n-sphere whose radius encodes the class, and the remaining ``2n`` channels
are Gaussian noise.  Real-valued data is normalized into ``[-1, 1]`` by the
recorded global scale.

Array Signal (tube-wise, complex): each sample is one snapshot of a uniform
rectangular array with half-wavelength spacing observing a far-field source
whose direction of arrival encodes the class.  Case 1 has no measurement
errors (clustering benchmark); Case 2 perturbs a few units with fixed
complex gain errors laid out in a chosen spatial pattern (selection
benchmark, the perturbed units are the ground truth).

The two cases model different receiver regimes.  Case 1 is a coherent
(phase-locked) acquisition with per-unit receive-gain diversity and a
common-mode baseline drift in the electronics: the drift is the dominant
nuisance, and only the high-gain units ride above it, which is what makes
unit selection pay off for clustering.  Case 2 is an idealized incoherent
acquisition (uniform gains, no drift, snapshot-random source phase) so
that the perturbed units are the only variance anomaly.

Per-element feature indices are flat mode-1-fastest positions: unit
``(u, v)`` of a ``d1 x d2`` grid has index ``v*d1 + u`` (0-based).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .tensor import DenseTensor

__all__ = [
    "OrbitSpec",
    "ArraySignalSpec",
    "LabeledTensorDataset",
    "gen_orbit",
    "gen_array_signal",
    "bcv",
]

ERROR_PATTERNS = ("none", "random", "horizontal", "vertical", "rectangular")

# Default directions of arrival (elevation, azimuth) in degrees; four
# well-separated classes for Case 1, two for Case 2.
CASE1_DOAS = ((20.0, 25.0), (45.0, 115.0), (30.0, 205.0), (60.0, 295.0))
CASE2_DOAS = ((25.0, 40.0), (55.0, 220.0))


@dataclass(frozen=True)
class OrbitSpec:
    """Orbit generator parameters; channels = 3*ambient_dim."""

    ambient_dim: int = 3
    series_len: int = 41
    samples: int = 100
    radii: tuple[float, float] = (4.0, 5.0)
    noise_sigma: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.ambient_dim not in (3, 4, 5):
            raise ValueError(f"ambient_dim must be 3, 4 or 5, got {self.ambient_dim}")
        if len(self.radii) != 2 or any(r <= 0 for r in self.radii):
            raise ValueError("radii must be two positive reals")
        if self.samples < 2 or self.series_len < 1:
            raise ValueError("need at least 2 samples and a positive series length")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")

    @property
    def channels(self) -> int:
        return 3 * self.ambient_dim


@dataclass(frozen=True)
class ArraySignalSpec:
    """Array Signal generator parameters.

    ``gain_range`` (log-uniform per-unit receive gains), ``drift``
    (common-mode baseline drift amplitude) and ``coherent_source`` (source
    phase drawn per class instead of per snapshot) default per case:
    case 1 uses ``(0.1, 1.5)`` / ``0.7`` / ``True``, case 2 the idealized
    ``(1, 1)`` / ``0.0`` / ``False``.
    """

    case: int = 1
    grid: tuple[int, int] = (10, 10)
    samples: int = 800
    doas: Optional[tuple[tuple[float, float], ...]] = None
    error_pattern: str = "none"
    error_units: int = 4
    snr_db: float = 20.0
    gain_range: Optional[tuple[float, float]] = None
    drift: Optional[float] = None
    coherent_source: Optional[bool] = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.case not in (1, 2):
            raise ValueError(f"case must be 1 or 2, got {self.case}")
        if self.error_pattern not in ERROR_PATTERNS:
            raise ValueError(f"unknown error pattern {self.error_pattern!r}")
        if self.case == 1 and self.error_pattern != "none":
            raise ValueError("case 1 has no measurement errors")
        if self.case == 2:
            if self.error_pattern == "none":
                raise ValueError("case 2 requires an error pattern")
            if self.error_units not in (4, 5):
                raise ValueError("case 2 uses 4 or 5 error units")
            if self.error_pattern == "rectangular" and self.error_units != 4:
                raise ValueError("rectangular pattern is a 2x2 block (4 units)")
        if self.doas is not None:
            expected = 4 if self.case == 1 else 2
            if len(self.doas) != expected:
                raise ValueError(f"case {self.case} needs {expected} directions of arrival")
        if min(self.grid) < 1 or self.samples < 2:
            raise ValueError("grid extents must be positive and samples >= 2")
        if self.gain_range is not None and (len(self.gain_range) != 2
                                            or self.gain_range[0] <= 0
                                            or self.gain_range[1] < self.gain_range[0]):
            raise ValueError("gain_range must be positive (lo, hi) with lo <= hi")
        if self.drift is not None and self.drift < 0:
            raise ValueError("drift amplitude must be nonnegative")

    @property
    def resolved_doas(self) -> tuple[tuple[float, float], ...]:
        if self.doas is not None:
            return tuple((float(t), float(p)) for t, p in self.doas)
        return CASE1_DOAS if self.case == 1 else CASE2_DOAS

    @property
    def resolved_gain_range(self) -> tuple[float, float]:
        if self.gain_range is not None:
            return (float(self.gain_range[0]), float(self.gain_range[1]))
        return (0.1, 1.5) if self.case == 1 else (1.0, 1.0)

    @property
    def resolved_drift(self) -> float:
        if self.drift is not None:
            return float(self.drift)
        return 0.7 if self.case == 1 else 0.0

    @property
    def resolved_coherent_source(self) -> bool:
        if self.coherent_source is not None:
            return bool(self.coherent_source)
        return self.case == 1


@dataclass
class LabeledTensorDataset:
    """Data tensor plus per-sample labels and, when known, the flat indices
    of the truly discriminative features."""

    tensor: DenseTensor
    labels: np.ndarray
    true_features: np.ndarray
    scenario: str
    spec: dict = field(default_factory=dict)

    @property
    def n_classes(self) -> int:
        return int(np.unique(self.labels).size)


def _random_two_frame(rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
    # orthonormal 2-frame via QR of a Gaussian n x 2 draw
    g = rng.standard_normal((n, 2))
    q, _ = np.linalg.qr(g)
    return q[:, 0], q[:, 1]


def gen_orbit(spec: OrbitSpec) -> LabeledTensorDataset:
    """Generate one Orbit dataset: ``(3n, series_len, samples)``, 2 classes
    split by radius, signal channels first."""
    rng = np.random.default_rng(spec.seed)
    n = spec.ambient_dim
    d1, d2, t = spec.channels, spec.series_len, spec.samples
    data = np.zeros((d1, d2, t), dtype=np.float64, order="F")
    labels = rng.integers(0, 2, size=t)
    steps = np.arange(d2)
    for s in range(t):
        r = spec.radii[labels[s]]
        u, v = _random_two_frame(rng, n)
        omega = rng.uniform(0.5, 1.5)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        ang = phase + omega * steps
        data[:n, :, s] = r * (np.outer(u, np.cos(ang)) + np.outer(v, np.sin(ang)))
        data[n:, :, s] = rng.normal(0.0, spec.noise_sigma, size=(d1 - n, d2))
    scale = float(np.max(np.abs(data)))
    if scale > 0:
        data = data / scale
    record = asdict(spec)
    record["kind"] = "orbit"
    record["norm_scale"] = scale
    return LabeledTensorDataset(
        tensor=DenseTensor(data),
        labels=labels.astype(np.int64),
        true_features=np.arange(n, dtype=np.int64),
        scenario="slice-wise",
        spec=record,
    )


def _steering(grid: tuple[int, int], theta_deg: float, phi_deg: float) -> np.ndarray:
    d1, d2 = grid
    theta = np.deg2rad(theta_deg)
    phi = np.deg2rad(phi_deg)
    u = np.arange(d1)[:, None]
    v = np.arange(d2)[None, :]
    return np.exp(1j * np.pi * np.sin(theta) * (u * np.cos(phi) + v * np.sin(phi)))


def _error_unit_ids(rng: np.random.Generator, spec: ArraySignalSpec) -> np.ndarray:
    """Flat unit indices (``v*d1 + u``) of the perturbed units, laid out per
    the requested spatial pattern."""
    d1, d2 = spec.grid
    m = spec.error_units
    pat = spec.error_pattern
    if pat == "random":
        return np.sort(rng.choice(d1 * d2, size=m, replace=False))
    if pat == "horizontal":
        # contiguous run within one row: fixed u, consecutive v
        u = int(rng.integers(0, d1))
        v0 = int(rng.integers(0, d2 - m + 1))
        units = [(u, v0 + j) for j in range(m)]
    elif pat == "vertical":
        v = int(rng.integers(0, d2))
        u0 = int(rng.integers(0, d1 - m + 1))
        units = [(u0 + j, v) for j in range(m)]
    else:  # rectangular: 2x2 block
        u0 = int(rng.integers(0, d1 - 1))
        v0 = int(rng.integers(0, d2 - 1))
        units = [(u0 + a, v0 + b) for b in range(2) for a in range(2)]
    return np.sort(np.array([v * d1 + u for u, v in units], dtype=np.int64))


def gen_array_signal(spec: ArraySignalSpec) -> LabeledTensorDataset:
    """Generate one Array Signal dataset: complex ``(d1, d2, samples)``
    snapshots of a half-wavelength uniform rectangular array."""
    rng = np.random.default_rng(spec.seed)
    d1, d2 = spec.grid
    t = spec.samples
    doas = spec.resolved_doas
    steer = np.stack([_steering(spec.grid, th, ph) for th, ph in doas], axis=2)

    labels = rng.integers(0, len(doas), size=t)
    if spec.resolved_coherent_source:
        psi = rng.uniform(0.0, 2.0 * np.pi, size=len(doas))[labels]
    else:
        psi = rng.uniform(0.0, 2.0 * np.pi, size=t)
    glo, ghi = spec.resolved_gain_range
    gains = np.exp(rng.uniform(np.log(glo), np.log(ghi), size=(d1, d2)))
    sigma = 10.0 ** (-spec.snr_db / 20.0)

    data = gains[:, :, None] * steer[:, :, labels] * np.exp(1j * psi)[None, None, :]
    drift = spec.resolved_drift
    if drift > 0:
        data = data + drift * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=t))[None, None, :]
    if np.isfinite(sigma) and sigma > 0:
        noise = rng.standard_normal((d1, d2, t)) + 1j * rng.standard_normal((d1, d2, t))
        data = data + sigma / np.sqrt(2.0) * noise

    true_features = np.empty(0, dtype=np.int64)
    gains_record: list[complex] = []
    if spec.case == 2:
        unit_ids = _error_unit_ids(rng, spec)
        # gain perturbation strong enough to make the units detectable by
        # per-unit variance, weak enough that recovery stays sensitive to the
        # spatial pattern of the perturbed units
        gains = rng.uniform(1.1, 1.4, size=unit_ids.size) * np.exp(
            1j * rng.uniform(0.0, 2.0 * np.pi, size=unit_ids.size)
        )
        flat = data.reshape(d1 * d2, t, order="F")
        flat[unit_ids, :] *= gains[:, None]
        data = flat.reshape(d1, d2, t, order="F")
        true_features = unit_ids
        gains_record = [complex(g) for g in gains]

    record = asdict(spec)
    record["kind"] = "array-signal"
    record["resolved_doas"] = [list(p) for p in doas]
    record["gain_range"] = list(spec.resolved_gain_range)
    record["drift"] = spec.resolved_drift
    record["coherent_source"] = spec.resolved_coherent_source
    if spec.case == 2:
        record["error_gains"] = [[g.real, g.imag] for g in gains_record]
    return LabeledTensorDataset(
        tensor=DenseTensor(data),
        labels=labels.astype(np.int64),
        true_features=true_features,
        scenario="tube-wise",
        spec=record,
    )


def bcv(dataset: LabeledTensorDataset) -> np.ndarray:
    """Per-feature between-class variance of class means (weighted by class
    sizes) around the global mean.

    Element-level values are aggregated per feature: slice-wise data sums
    each mode-1 dimension's row, tube-wise data keeps per-element values in
    flat mode-1-fastest order.
    """
    arr = dataset.tensor.data
    labels = np.asarray(dataset.labels)
    classes = np.unique(labels)
    if classes.size < 2:
        raise ValueError("between-class variance needs at least 2 classes")
    t = arr.shape[-1]
    global_mean = arr.mean(axis=-1)
    element = np.zeros(arr.shape[:-1], dtype=np.float64)
    for c in classes:
        mask = labels == c
        class_mean = arr[..., mask].mean(axis=-1)
        element += (mask.sum() / t) * np.abs(class_mean - global_mean) ** 2
    if dataset.scenario == "slice-wise":
        return element.sum(axis=tuple(range(1, element.ndim)))
    return element.flatten(order="F")
