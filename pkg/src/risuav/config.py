"""Flat ``key = value`` configuration files.

Lines are ``key = value``; ``#`` starts a comment. Every key has a default
(the values below, which follow the simulation table of the reference
setup), so a config file only lists what it overrides. Unknown keys are an
error. Values are parsed with the type of their default; tuples are written
comma separated (``hidden = 128, 128``).
"""
from __future__ import annotations

from pathlib import Path
from typing import Any, Optional

from .channel import PathLossParams, RisGeometry, Vec3, db_to_linear, dbm_to_watts
from .ddpg import DdpgConfig
from .env import NetworkConfig
from .errors import ConfigError
from .ppo import PpoConfig

DEFAULTS: dict[str, Any] = {
    # network
    "n_devices": 10,
    "k_elements": 20,
    "spacing_over_wavelength": 0.5,
    "device_region_radius": 100.0,
    "cluster_x": 0.0,
    "cluster_y": 0.0,
    "uav_x": 0.0,
    "uav_y": 0.0,
    "uav_altitude": 200.0,
    "ris_x": 200.0,
    "ris_y": 0.0,
    "ris_z": 50.0,
    "beta0_db": -30.0,
    "kappa1": 4.0,
    "kappa2": 2.0,
    "kappa3": 2.2,
    "rician_factor": 4.0,
    "noise_power_dbm": -134.0,
    "tx_power": 5.0,
    "eh_efficiency": 0.5,
    "bandwidth": 1e6,
    "x_min": -500.0,
    "x_max": 500.0,
    "y_min": -500.0,
    "y_max": 500.0,
    "z_min": 50.0,
    "z_max": 300.0,
    "v_max": 20.0,
    "motion_noise_std": 0.0,
    "frozen_channels": False,
    "tau_margin": 1e-3,
    # experiment
    "episodes": 1000,
    "steps": 100,
    "seeds": (0,),
    "tail_fraction": 0.2,
    "rss_per_episode": False,
    "oracle_phase_grid": 16,
    "oracle_tau_grid": 100,
    # shared agent settings
    "hidden": (128, 128),
    "hidden_activation": "tanh",
    "optimizer": "adam",
    "discount": 0.9,
    # ddpg
    "ddpg_actor_lr": 1e-4,
    "ddpg_critic_lr": 1e-3,
    "ddpg_soft_rate": 0.01,
    "ddpg_noise_scale": 0.1,
    "ddpg_noise_decay": 0.999,
    "ddpg_batch_size": 32,
    "ddpg_buffer_capacity": 100_000,
    "ddpg_warmup": 1000,
    # ppo
    "ppo_policy_lr": 1e-4,
    "ppo_value_lr": 1e-3,
    "ppo_clip_epsilon": 0.2,
    "ppo_epochs": 4,
    "ppo_rollout_length": 32,
    "ppo_minibatch_size": 32,
    "ppo_init_std": 0.3,
    "ppo_normalize_advantages": True,
    "ppo_entropy_coef": 0.0,
}


def _parse_value(key: str, raw: str) -> Any:
    default = DEFAULTS[key]
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, tuple):
            return tuple(int(v) for v in raw.replace(" ", "").split(",") if v)
        if isinstance(default, int):
            return int(float(raw)) if float(raw).is_integer() else int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc


def parse_config(text: str, source: str = "<string>") -> dict[str, Any]:
    cfg = dict(DEFAULTS)
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        cfg[key] = _parse_value(key, raw)
    return cfg


def load_config(path: Optional[str | Path] = None) -> dict[str, Any]:
    if path is None:
        return dict(DEFAULTS)
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path))


def format_value(v: Any) -> str:
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def dump_config(cfg: dict[str, Any]) -> str:
    return "".join(f"{k} = {format_value(cfg[k])}\n" for k in DEFAULTS)


def network_config(cfg: dict[str, Any], n_devices: int, k_elements: int, mobile: bool) -> NetworkConfig:
    return NetworkConfig(
        device_count=n_devices,
        device_region_radius=cfg["device_region_radius"],
        cluster_center=(cfg["cluster_x"], cfg["cluster_y"]),
        uav_initial=Vec3(cfg["uav_x"], cfg["uav_y"], cfg["uav_altitude"]),
        uav_altitude=cfg["uav_altitude"],
        ris=RisGeometry(Vec3(cfg["ris_x"], cfg["ris_y"], cfg["ris_z"]), k_elements, cfg["spacing_over_wavelength"]),
        pathloss=PathLossParams(
            beta0=db_to_linear(cfg["beta0_db"]),
            kappa1=cfg["kappa1"],
            kappa2=cfg["kappa2"],
            kappa3=cfg["kappa3"],
            rician_factor=cfg["rician_factor"],
            noise_power=dbm_to_watts(cfg["noise_power_dbm"]),
        ),
        tx_power=cfg["tx_power"],
        eh_efficiency=cfg["eh_efficiency"],
        bandwidth=cfg["bandwidth"],
        flight_bounds=((cfg["x_min"], cfg["x_max"]), (cfg["y_min"], cfg["y_max"]), (cfg["z_min"], cfg["z_max"])),
        v_max=cfg["v_max"],
        motion_noise_std=cfg["motion_noise_std"],
        episode_length=cfg["steps"],
        mobile=mobile,
        frozen_channels=cfg["frozen_channels"] and not mobile,
        tau_margin=cfg["tau_margin"],
    )


def ddpg_config(cfg: dict[str, Any]) -> DdpgConfig:
    return DdpgConfig(
        hidden=tuple(cfg["hidden"]),
        hidden_activation=cfg["hidden_activation"],
        actor_lr=cfg["ddpg_actor_lr"],
        critic_lr=cfg["ddpg_critic_lr"],
        optimizer=cfg["optimizer"],
        discount=cfg["discount"],
        soft_rate=cfg["ddpg_soft_rate"],
        noise_scale=cfg["ddpg_noise_scale"],
        noise_decay=cfg["ddpg_noise_decay"],
        batch_size=cfg["ddpg_batch_size"],
        buffer_capacity=cfg["ddpg_buffer_capacity"],
        warmup=cfg["ddpg_warmup"],
    )


def ppo_config(cfg: dict[str, Any]) -> PpoConfig:
    return PpoConfig(
        hidden=tuple(cfg["hidden"]),
        hidden_activation=cfg["hidden_activation"],
        policy_lr=cfg["ppo_policy_lr"],
        value_lr=cfg["ppo_value_lr"],
        optimizer=cfg["optimizer"],
        discount=cfg["discount"],
        clip_epsilon=cfg["ppo_clip_epsilon"],
        epochs=cfg["ppo_epochs"],
        rollout_length=cfg["ppo_rollout_length"],
        minibatch_size=cfg["ppo_minibatch_size"],
        init_std=cfg["ppo_init_std"],
        normalize_advantages=cfg["ppo_normalize_advantages"],
        entropy_coef=cfg["ppo_entropy_coef"],
    )
