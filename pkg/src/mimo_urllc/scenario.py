"""Problem-instance data: system constants, per-device parameters and I/O.

Large-scale gains are stored noise-normalized: ``alpha`` already contains the
thermal noise power of the band, so pilot/payload powers are plain watts and
the SINR expressions can assume unit noise variance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

PATHLOSS_INTERCEPT_DB = 35.3
PATHLOSS_SLOPE_DB = 37.6

#: Default uniform-drop geometry (see README for the choice).
DEFAULT_CELL_RADIUS_M = 600.0
DEFAULT_MIN_DISTANCE_M = 50.0


class ScenarioError(ValueError):
    """Raised when a scenario violates its invariants."""


def pathloss_db(distance_m):
    """Path loss ``35.3 + 37.6 log10(d)`` in dB."""
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0):
        raise ScenarioError("distance must be positive")
    return PATHLOSS_INTERCEPT_DB + PATHLOSS_SLOPE_DB * np.log10(d)


def noise_power_dbm(noise_psd_dbm_hz: float, bandwidth_hz: float) -> float:
    if bandwidth_hz <= 0:
        raise ScenarioError("bandwidth must be positive")
    return noise_psd_dbm_hz + 10.0 * math.log10(bandwidth_hz)


def derive_alpha(distance_m, noise_psd_dbm_hz: float = -174.0, bandwidth_hz: float = 2e5):
    """Noise-normalized large-scale gain for a device at ``distance_m``.

    Returns ``10**(-PL/10) / N0`` with ``N0`` the noise power in watts over
    ``bandwidth_hz``. Accepts scalars or arrays.
    """
    pl = pathloss_db(distance_m)
    n0_w = 10.0 ** ((noise_power_dbm(noise_psd_dbm_hz, bandwidth_hz) - 30.0) / 10.0)
    alpha = 10.0 ** (-pl / 10.0) / n0_w
    return float(alpha) if np.ndim(alpha) == 0 else alpha


@dataclass(frozen=True)
class SystemParams:
    M: int
    K: int
    B: float = 2e5
    L: int = 100
    noise_psd_dbm_hz: float = -174.0

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 2:
            raise ScenarioError(f"system.M: need an integer >= 2, got {self.M}")
        if int(self.K) != self.K or self.K < 1:
            raise ScenarioError(f"system.K: need an integer >= 1, got {self.K}")
        if self.M <= self.K:
            raise ScenarioError(f"system.M: need M > K (ZF undefined), got M={self.M}, K={self.K}")
        if int(self.L) != self.L or self.L <= self.K:
            raise ScenarioError(f"system.blocklength: need an integer L > K, got {self.L}")
        if not self.B > 0:
            raise ScenarioError(f"system.bandwidth_hz: must be positive, got {self.B}")

    @property
    def l_p(self) -> int:
        return self.K

    @property
    def l_d(self) -> int:
        return self.L - self.K

    @property
    def beta(self) -> float:
        return self.K / self.L


@dataclass(frozen=True)
class DeviceParams:
    alpha: float
    weight: float = 1.0
    epsilon: float = 1e-9
    energy: float = 2.0
    rate_req: float = 1.0

    def __post_init__(self):
        self.check()

    def check(self, index: int | None = None):
        where = "device" if index is None else f"devices[{index}]"
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ScenarioError(f"{where}.alpha: must be positive and finite, got {self.alpha}")
        if not 0.0 <= self.weight <= 1.0:
            raise ScenarioError(f"{where}.weight: must lie in [0, 1], got {self.weight}")
        if not 0.0 < self.epsilon < 0.5:
            raise ScenarioError(f"{where}.epsilon: must lie in (0, 0.5), got {self.epsilon}")
        if not (self.energy >= 0 and math.isfinite(self.energy)):
            raise ScenarioError(f"{where}.energy: must be >= 0, got {self.energy}")
        if not (self.rate_req >= 0 and math.isfinite(self.rate_req)):
            raise ScenarioError(f"{where}.rate_req: must be >= 0, got {self.rate_req}")


@dataclass(frozen=True)
class Scenario:
    system: SystemParams
    devices: tuple[DeviceParams, ...]
    seed: int = 0
    distances: tuple[float, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "devices", tuple(self.devices))
        self.validate()

    def validate(self):
        if len(self.devices) != self.system.K:
            raise ScenarioError(
                f"devices: expected K={self.system.K} entries, got {len(self.devices)}")
        for k, dev in enumerate(self.devices):
            dev.check(k)

    # array views used throughout the numerical code
    @property
    def K(self) -> int:
        return self.system.K

    @property
    def M(self) -> int:
        return self.system.M

    @property
    def L(self) -> int:
        return self.system.L

    @property
    def beta(self) -> float:
        return self.system.beta

    @property
    def alphas(self) -> np.ndarray:
        return np.array([d.alpha for d in self.devices])

    @property
    def weights(self) -> np.ndarray:
        return np.array([d.weight for d in self.devices])

    @property
    def epsilons(self) -> np.ndarray:
        return np.array([d.epsilon for d in self.devices])

    @property
    def energies(self) -> np.ndarray:
        return np.array([d.energy for d in self.devices])

    @property
    def rate_reqs(self) -> np.ndarray:
        return np.array([d.rate_req for d in self.devices])

    def with_devices(self, **overrides) -> "Scenario":
        """Copy with the same field override applied to every device."""
        devices = tuple(replace(d, **overrides) for d in self.devices)
        return replace(self, devices=devices)

    def with_system(self, **overrides) -> "Scenario":
        return replace(self, system=replace(self.system, **overrides))

    def energy_coefficients(self) -> tuple[int, int]:
        """Coefficients (pilot, payload) of the per-frame energy budget."""
        return self.system.l_p, self.system.l_d


def random_scenario(
    rng_seed: int,
    K: int = 10,
    cell_radius_m: float = DEFAULT_CELL_RADIUS_M,
    *,
    M: int = 100,
    L: int = 100,
    bandwidth_hz: float = 2e5,
    noise_psd_dbm_hz: float = -174.0,
    epsilon: float = 1e-9,
    energy: float = 2.0,
    rate_req: float = 1.0,
    min_distance_m: float = DEFAULT_MIN_DISTANCE_M,
) -> Scenario:
    """Drop ``K`` devices uniformly in a disc of radius ``cell_radius_m``.

    Weights are uniform on [0, 1]. The draw depends only on ``rng_seed``.
    """
    if K < 1:
        raise ScenarioError("K must be >= 1")
    if not 0 < min_distance_m < cell_radius_m:
        raise ScenarioError("need 0 < min_distance_m < cell_radius_m")
    rng = np.random.default_rng(np.random.SeedSequence(rng_seed))
    # uniform over the annulus area; path loss is isotropic so azimuth is not drawn
    r2 = rng.uniform(min_distance_m**2, cell_radius_m**2, size=K)
    dist = np.sqrt(r2)
    weights = rng.uniform(0.0, 1.0, size=K)
    alphas = np.atleast_1d(derive_alpha(dist, noise_psd_dbm_hz, bandwidth_hz))
    system = SystemParams(M=M, K=K, B=bandwidth_hz, L=L, noise_psd_dbm_hz=noise_psd_dbm_hz)
    devices = tuple(
        DeviceParams(alpha=float(a), weight=float(w), epsilon=epsilon,
                     energy=energy, rate_req=rate_req)
        for a, w in zip(alphas, weights))
    return Scenario(system, devices, seed=int(rng_seed), distances=tuple(map(float, dist)))


# --- JSON schema -----------------------------------------------------------

_SYSTEM_KEYS = {"M", "K", "bandwidth_hz", "blocklength", "noise_psd_dbm_hz"}
_DEVICE_KEYS = {"distance_m", "alpha", "weight", "epsilon", "energy", "rate_req"}
_TOP_KEYS = {"system", "devices", "seed"}


def _number(obj, key, where, default=None):
    if key not in obj:
        if default is None:
            raise ScenarioError(f"{where}.{key}: missing")
        return default
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ScenarioError(f"{where}.{key}: expected a number, got {val!r}")
    return val


def scenario_from_dict(doc: dict) -> Scenario:
    """Build and validate a Scenario from the documented JSON structure."""
    if not isinstance(doc, dict):
        raise ScenarioError("top level must be an object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ScenarioError(f"unknown top-level keys: {sorted(unknown)}")
    sysdoc = doc.get("system")
    if not isinstance(sysdoc, dict):
        raise ScenarioError("system: missing or not an object")
    unknown = set(sysdoc) - _SYSTEM_KEYS
    if unknown:
        raise ScenarioError(f"system: unknown keys {sorted(unknown)}")
    M = _number(sysdoc, "M", "system")
    K = _number(sysdoc, "K", "system")
    B = _number(sysdoc, "bandwidth_hz", "system", 2e5)
    L = _number(sysdoc, "blocklength", "system", 100)
    psd = _number(sysdoc, "noise_psd_dbm_hz", "system", -174.0)
    for name, v in (("M", M), ("K", K), ("blocklength", L)):
        if int(v) != v:
            raise ScenarioError(f"system.{name}: expected an integer, got {v}")
    system = SystemParams(M=int(M), K=int(K), B=float(B), L=int(L), noise_psd_dbm_hz=float(psd))

    devdocs = doc.get("devices")
    if not isinstance(devdocs, list):
        raise ScenarioError("devices: missing or not an array")
    devices, distances = [], []
    for k, dd in enumerate(devdocs):
        where = f"devices[{k}]"
        if not isinstance(dd, dict):
            raise ScenarioError(f"{where}: not an object")
        unknown = set(dd) - _DEVICE_KEYS
        if unknown:
            raise ScenarioError(f"{where}: unknown keys {sorted(unknown)}")
        has_d, has_a = "distance_m" in dd, "alpha" in dd
        if has_d == has_a:
            raise ScenarioError(f"{where}: give exactly one of distance_m or alpha")
        if has_d:
            d = _number(dd, "distance_m", where)
            if d <= 0:
                raise ScenarioError(f"{where}.distance_m: must be positive, got {d}")
            alpha = derive_alpha(d, system.noise_psd_dbm_hz, system.B)
            distances.append(float(d))
        else:
            alpha = _number(dd, "alpha", where)
            distances.append(float("nan"))
        try:
            dev = DeviceParams(
                alpha=float(alpha),
                weight=float(_number(dd, "weight", where, 1.0)),
                epsilon=float(_number(dd, "epsilon", where)),
                energy=float(_number(dd, "energy", where)),
                rate_req=float(_number(dd, "rate_req", where, 0.0)),
            )
        except ScenarioError as exc:
            raise ScenarioError(str(exc).replace("device.", f"{where}.", 1)) from None
        devices.append(dev)
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ScenarioError(f"seed: expected an integer, got {seed!r}")
    return Scenario(system, tuple(devices), seed=seed, distances=tuple(distances))


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})") from exc
    return scenario_from_dict(doc)


def scenario_to_dict(sc: Scenario) -> dict:
    """Inverse of :func:`scenario_from_dict`; gains are written as ``alpha``."""
    return {
        "system": {
            "M": sc.system.M,
            "K": sc.system.K,
            "bandwidth_hz": sc.system.B,
            "blocklength": sc.system.L,
            "noise_psd_dbm_hz": sc.system.noise_psd_dbm_hz,
        },
        "devices": [
            {"alpha": d.alpha, "weight": d.weight, "epsilon": d.epsilon,
             "energy": d.energy, "rate_req": d.rate_req}
            for d in sc.devices
        ],
        "seed": sc.seed,
    }


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(sc), indent=2) + "\n")


def defaults_path() -> Path:
    """Path of the bundled scenario with the reference simulation settings."""
    return Path(__file__).with_name("data") / "defaults.json"

