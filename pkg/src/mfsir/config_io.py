"""Configuration documents: strict JSON parsing, canonical hashing.

Unknown keys are rejected with the offending path; invariant violations
report the failing field.  The canonical hash is computed over a
key-sorted, repr-formatted JSON encoding, so it is stable under key
reordering of the source document.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .model import (
    DiffusionSpec,
    DriftSpec,
    GaussianMixture,
    InitialLawSpec,
    KernelSpec,
    ModelConfig,
)

__all__ = ["ConfigError", "parse_config", "config_to_dict", "config_from_dict",
           "config_hash", "canonical_json"]


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.field_path = path


def _require_keys(obj: dict, path: str, required, optional=()):
    missing = [k for k in required if k not in obj]
    if missing:
        raise ConfigError(path, f"missing key(s) {missing}")
    unknown = [k for k in obj if k not in (*required, *optional)]
    if unknown:
        raise ConfigError(path, f"unknown key(s) {unknown}")


def _mixture_from(doc: dict, path: str) -> GaussianMixture:
    _require_keys(doc, path, ("weights", "means", "covs"))
    try:
        return GaussianMixture(tuple(doc["weights"]),
                               tuple(map(tuple, doc["means"])),
                               tuple(doc["covs"]))
    except (ValueError, TypeError) as exc:
        raise ConfigError(path, str(exc)) from exc


def config_from_dict(doc: dict, path: str = "config") -> ModelConfig:
    _require_keys(doc, path, ("d", "gamma", "kernel", "drift", "diffusion", "initial"))

    k = doc["kernel"]
    _require_keys(k, f"{path}.kernel", ("family", "beta"), ("scale",))
    try:
        kernel = KernelSpec(k["family"], float(k["beta"]), float(k.get("scale", 1.0)))
    except ValueError as exc:
        raise ConfigError(f"{path}.kernel", str(exc)) from exc

    v = doc["drift"]
    _require_keys(v, f"{path}.drift", ("family",), ("a", "ell", "weights"))
    try:
        drift = DriftSpec(v["family"], float(v.get("a", 0.0)), float(v.get("ell", 1.0)),
                          tuple(map(tuple, v.get("weights", ()))) if v.get("weights") else ())
    except ValueError as exc:
        raise ConfigError(f"{path}.drift", str(exc)) from exc

    s = doc["diffusion"]
    _require_keys(s, f"{path}.diffusion", ("family", "values"))
    try:
        diffusion = DiffusionSpec(s["family"], tuple(s["values"]))
    except ValueError as exc:
        raise ConfigError(f"{path}.diffusion", str(exc)) from exc

    init = doc["initial"]
    _require_keys(init, f"{path}.initial", ("state_probs", "mixtures"))
    if len(init["mixtures"]) != 3:
        raise ConfigError(f"{path}.initial.mixtures", "need one mixture per state (S, I, R)")
    mixtures = tuple(
        _mixture_from(m, f"{path}.initial.mixtures[{i}]")
        for i, m in enumerate(init["mixtures"])
    )
    try:
        initial = InitialLawSpec(tuple(init["state_probs"]), mixtures)
    except ValueError as exc:
        raise ConfigError(f"{path}.initial.state_probs", str(exc)) from exc

    try:
        return ModelConfig(int(doc["d"]), float(doc["gamma"]), kernel, drift,
                           diffusion, initial)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


def parse_config(path) -> ModelConfig:
    """Load and validate a model configuration document."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(str(path), "top level must be an object")
    return config_from_dict(doc)


def config_to_dict(config: ModelConfig) -> dict:
    """Resolved (fully explicit) document for echoing and hashing."""
    drift = {"family": config.drift.family}
    if config.drift.family != "zero":
        drift["a"] = config.drift.a
        drift["ell"] = config.drift.ell
    if config.drift.family == "state_modulated":
        drift["weights"] = [list(r) for r in config.drift.weights]
    return {
        "d": config.d,
        "gamma": config.gamma,
        "kernel": {"family": config.kernel.family, "beta": config.kernel.beta,
                   "scale": config.kernel.scale},
        "drift": drift,
        "diffusion": {"family": config.diffusion.family,
                      "values": [list(map(list, v)) if isinstance(v, tuple) else v
                                 for v in config.diffusion.values]},
        "initial": {
            "state_probs": list(config.initial.state_probs),
            "mixtures": [
                {"weights": list(m.weights),
                 "means": [list(mu) for mu in m.means],
                 "covs": [[list(row) for row in c] for c in m.covs]}
                for m in config.initial.mixtures
            ],
        },
    }


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(config: ModelConfig) -> str:
    return hashlib.sha256(canonical_json(config_to_dict(config)).encode()).hexdigest()
