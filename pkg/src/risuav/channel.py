"""Geometry and random channel realizations for the UAV / RIS / IoT links.

Three links are modelled:

* UAV -> device (direct): Rayleigh fading scaled by ``beta0 * d**-kappa1``.
* UAV -> RIS: deterministic line of sight with a uniform linear array response.
* RIS -> device: Rician fading, LoS array response plus CN(0, 1) scatter.

Large-scale distances are taken from the RIS reference element; the array
only contributes the phase progression (far-field). The array axis is the
world x-axis. Direction cosines are the x-component of the unit vector
pointing *away from the transmitter*: UAV -> RIS for the arrival angle and
RIS -> device for the departure angle.

Complex scalars are Python/numpy ``complex`` values and complex vectors are
1-D ``complex128`` arrays. Phase vectors are real arrays wrapped into
``[0, 2*pi)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import LengthMismatchError, NonpositiveDistanceError, ZeroDistanceError

TWO_PI = 2.0 * math.pi


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(math.isfinite(c) for c in (self.x, self.y, self.z)):
            raise ValueError(f"non-finite coordinate in {self!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @classmethod
    def from_array(cls, a) -> "Vec3":
        return cls(float(a[0]), float(a[1]), float(a[2]))


@dataclass(frozen=True)
class RisGeometry:
    reference_position: Vec3
    element_count: int
    spacing_over_wavelength: float = 0.5

    def __post_init__(self):
        if self.element_count < 1:
            raise ValueError("element_count must be >= 1")
        if not self.spacing_over_wavelength > 0:
            raise ValueError("spacing_over_wavelength must be > 0")


@dataclass(frozen=True)
class PathLossParams:
    """Large-scale and fading parameters. ``beta0`` is linear, ``noise_power`` in watts."""

    beta0: float = db_to_linear(-30.0)
    kappa1: float = 4.0
    kappa2: float = 2.0
    kappa3: float = 2.2
    rician_factor: float = 4.0
    noise_power: float = dbm_to_watts(-134.0)

    def __post_init__(self):
        if not self.beta0 > 0:
            raise ValueError("beta0 must be > 0")
        if min(self.kappa1, self.kappa2, self.kappa3) <= 0:
            raise ValueError("path-loss exponents must be > 0")
        if self.rician_factor < 0:
            raise ValueError("rician_factor must be >= 0")
        if not self.noise_power > 0:
            raise ValueError("noise_power must be > 0")


@dataclass(frozen=True)
class ChannelSet:
    """One time step of channels: ``direct`` (N,), ``uav_ris`` (K,), ``ris_iot`` (N, K)."""

    direct: np.ndarray
    uav_ris: np.ndarray
    ris_iot: np.ndarray

    def __post_init__(self):
        n = self.direct.shape[0]
        k = self.uav_ris.shape[0]
        if self.direct.ndim != 1 or self.uav_ris.ndim != 1 or self.ris_iot.shape != (n, k):
            raise LengthMismatchError(
                f"inconsistent channel shapes: direct {self.direct.shape}, "
                f"uav_ris {self.uav_ris.shape}, ris_iot {self.ris_iot.shape}"
            )

    @property
    def device_count(self) -> int:
        return self.direct.shape[0]

    @property
    def element_count(self) -> int:
        return self.uav_ris.shape[0]


def wrap_phases(theta) -> np.ndarray:
    """Wrap angles into ``[0, 2*pi)``."""
    out = np.mod(np.asarray(theta, dtype=float), TWO_PI)
    # np.mod can return exactly 2*pi for tiny negative inputs
    return np.where(out >= TWO_PI, 0.0, out)


def distance(a: Vec3, b: Vec3) -> float:
    return math.sqrt((a.x - b.x) ** 2 + (a.y - b.y) ** 2 + (a.z - b.z) ** 2)


def _direction_cosine(src: Vec3, dst: Vec3) -> float:
    d = distance(src, dst)
    if d == 0.0:
        raise ZeroDistanceError(f"coincident positions {src} and {dst}")
    return (dst.x - src.x) / d


def aoa_cosine(uav: Vec3, ris: RisGeometry) -> float:
    """Cosine between the UAV -> RIS direction and the array (x) axis."""
    return _direction_cosine(uav, ris.reference_position)


def aod_cosine(ris: RisGeometry, device: Vec3) -> float:
    """Cosine between the RIS -> device direction and the array (x) axis."""
    return _direction_cosine(ris.reference_position, device)


def array_response(cos_angle: float, geometry: RisGeometry) -> np.ndarray:
    """ULA response ``exp(-j 2 pi (d/lambda) k cos)`` for k = 0..K-1."""
    if abs(cos_angle) > 1.0 + 1e-12:
        raise ValueError(f"|cos_angle| > 1: {cos_angle}")
    k = np.arange(geometry.element_count)
    phase = -TWO_PI * geometry.spacing_over_wavelength * cos_angle * k
    out = np.exp(1j * phase)
    out[0] = 1.0 + 0.0j
    return out


def complex_normal(rng: np.random.Generator, size=None):
    """CN(0, 1) samples: independent real/imag parts with variance 1/2."""
    re = rng.standard_normal(size)
    im = rng.standard_normal(size)
    return (re + 1j * im) * math.sqrt(0.5)


def direct_channel(rng: np.random.Generator, d_n: float, params: PathLossParams) -> complex:
    if not d_n > 0:
        raise NonpositiveDistanceError(f"distance must be > 0, got {d_n}")
    return complex(math.sqrt(params.beta0 * d_n ** (-params.kappa1)) * complex_normal(rng))


def uav_ris_channel(uav: Vec3, ris: RisGeometry, params: PathLossParams) -> np.ndarray:
    d = distance(uav, ris.reference_position)
    if d == 0.0:
        raise ZeroDistanceError("UAV coincides with the RIS reference element")
    amp = math.sqrt(params.beta0 * d ** (-params.kappa2))
    return amp * array_response(aoa_cosine(uav, ris), ris)


def rician_weights(rician_factor: float) -> tuple[float, float]:
    """(LoS, NLoS) amplitude weights; their squares sum to one."""
    if math.isinf(rician_factor):
        return 1.0, 0.0
    return (
        math.sqrt(rician_factor / (1.0 + rician_factor)),
        math.sqrt(1.0 / (1.0 + rician_factor)),
    )


def ris_iot_los(ris: RisGeometry, device: Vec3, params: PathLossParams) -> np.ndarray:
    """Deterministic part of the RIS -> device channel, including path loss and Rician weight."""
    d = distance(ris.reference_position, device)
    if d == 0.0:
        raise ZeroDistanceError("device coincides with the RIS reference element")
    w_los, _ = rician_weights(params.rician_factor)
    amp = math.sqrt(params.beta0 * d ** (-params.kappa3))
    return amp * w_los * array_response(aod_cosine(ris, device), ris)


def ris_iot_channel(
    rng: np.random.Generator, ris: RisGeometry, device: Vec3, params: PathLossParams
) -> np.ndarray:
    d = distance(ris.reference_position, device)
    if d == 0.0:
        raise ZeroDistanceError("device coincides with the RIS reference element")
    amp = math.sqrt(params.beta0 * d ** (-params.kappa3))
    w_los, w_nlos = rician_weights(params.rician_factor)
    los = array_response(aod_cosine(ris, device), ris)
    nlos = complex_normal(rng, ris.element_count)
    return amp * (w_los * los + w_nlos * nlos)


def effective_gain(h, H: np.ndarray, phases, g: np.ndarray):
    """Composite gain ``h + sum_k H_k exp(j theta_k) g_k``.

    Broadcasts over leading axes: ``h`` (N,) with ``g`` (N, K) gives (N,).
    """
    H = np.asarray(H)
    phases = np.asarray(phases, dtype=float)
    g = np.asarray(g)
    if H.shape[-1] != phases.shape[-1] or g.shape[-1] != H.shape[-1]:
        raise LengthMismatchError(
            f"H ({H.shape[-1]}), phases ({phases.shape[-1]}) and g ({g.shape[-1]}) must share K"
        )
    reflected = (g * (H * np.exp(1j * phases))).sum(axis=-1)
    return h + reflected


def aligned_phases(h, H: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Phases that co-phase every reflected path with the direct path of one device.

    With ``h == 0`` this reduces to ``-arg(H_k g_k)``.
    """
    ref = np.angle(h) if abs(h) > 0 else 0.0
    return wrap_phases(ref - np.angle(np.asarray(H) * np.asarray(g)))


class ChannelSampler:
    """Draws :class:`ChannelSet` realizations for fixed devices and RIS.

    Direct and RIS -> device fading come from two separate generators so the
    direct-link draws are identical for any RIS size under the same seed.
    """

    def __init__(
        self,
        devices: Sequence[Vec3],
        ris: RisGeometry,
        params: PathLossParams,
        direct_rng: np.random.Generator,
        ris_rng: np.random.Generator,
    ):
        self.devices = tuple(devices)
        self.ris = ris
        self.params = params
        self.direct_rng = direct_rng
        self.ris_rng = ris_rng
        self._device_xyz = np.array([d.as_array() for d in self.devices])
        # RIS -> device geometry is static, so cache amplitude and LoS part
        w_los, w_nlos = rician_weights(params.rician_factor)
        amps, los = [], []
        for dev in self.devices:
            d = distance(ris.reference_position, dev)
            if d == 0.0:
                raise ZeroDistanceError("device coincides with the RIS reference element")
            amps.append(math.sqrt(params.beta0 * d ** (-params.kappa3)))
            los.append(array_response(aod_cosine(ris, dev), ris))
        self._ris_amp = np.array(amps)[:, None]
        self._ris_los = w_los * np.array(los)
        self._w_nlos = w_nlos

    def direct_distances(self, uav: Vec3) -> np.ndarray:
        return np.linalg.norm(self._device_xyz - uav.as_array(), axis=1)

    def sample(self, uav: Vec3) -> ChannelSet:
        n, k = len(self.devices), self.ris.element_count
        d = self.direct_distances(uav)
        if np.any(d <= 0):
            raise NonpositiveDistanceError("UAV coincides with an IoT device")
        direct = np.sqrt(self.params.beta0 * d ** (-self.params.kappa1)) * complex_normal(
            self.direct_rng, n
        )
        nlos = complex_normal(self.ris_rng, (n, k))
        ris_iot = self._ris_amp * (self._ris_los + self._w_nlos * nlos)
        return ChannelSet(direct=direct, uav_ris=uav_ris_channel(uav, self.ris, self.params), ris_iot=ris_iot)
