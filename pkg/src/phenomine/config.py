"""Pipeline settings: defaults, INI files, command-line overrides.

Precedence is flag over file over default. Config files are plain INI
with a single [pipeline] section; unknown keys are rejected so typos
fail loudly instead of silently running with defaults.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
from dataclasses import dataclass
from typing import Dict, Optional

from .errors import ConfigError
from .features import FEATURE_MODES, FEATURE_SOURCES
from .learn import CLASSIFIERS
from .vectorize import WEIGHTINGS

SECTION = "pipeline"


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    min_doc_freq: int = 1
    weighting: str = "tfidf"
    k_diag: int = 6
    k_proc: int = 6
    alpha: Optional[float] = None  # None means 50/k
    beta: float = 0.01
    iterations: int = 1000
    burn_in: int = 800
    foldin_sweeps: int = 100
    top_n: int = 10
    cv_window: int = 110
    scan_measure: str = "cv"
    train_fraction: float = 0.7
    stratified: bool = True
    smote_k: int = 5
    smote_before_split: bool = False
    feature_mode: str = "dominant"
    feature_source: str = "both"
    classifier: str = "knn"

    def validate(self) -> None:
        if self.weighting not in WEIGHTINGS:
            raise ConfigError(f"weighting must be one of {WEIGHTINGS}, got {self.weighting!r}")
        if self.feature_mode not in FEATURE_MODES:
            raise ConfigError(f"feature_mode must be one of {FEATURE_MODES}, got {self.feature_mode!r}")
        if self.feature_source not in FEATURE_SOURCES:
            raise ConfigError(f"feature_source must be one of {FEATURE_SOURCES}, got {self.feature_source!r}")
        if self.classifier not in CLASSIFIERS:
            raise ConfigError(f"classifier must be one of {CLASSIFIERS}, got {self.classifier!r}")
        if self.scan_measure not in ("cv", "umass"):
            raise ConfigError(f"scan_measure must be cv or umass, got {self.scan_measure!r}")
        if self.k_diag < 1 or self.k_proc < 1:
            raise ConfigError(f"topic counts must be >= 1, got {self.k_diag}/{self.k_proc}")
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if not 0 <= self.burn_in < self.iterations:
            raise ConfigError(
                f"burn_in must satisfy 0 <= burn_in < iterations, got {self.burn_in}/{self.iterations}"
            )
        if self.alpha is not None and self.alpha <= 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if self.beta <= 0:
            raise ConfigError(f"beta must be positive, got {self.beta}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.smote_k < 1:
            raise ConfigError(f"smote_k must be >= 1, got {self.smote_k}")
        if self.min_doc_freq < 1:
            raise ConfigError(f"min_doc_freq must be >= 1, got {self.min_doc_freq}")
        if self.foldin_sweeps < 1:
            raise ConfigError(f"foldin_sweeps must be >= 1, got {self.foldin_sweeps}")
        if self.top_n < 1:
            raise ConfigError(f"top_n must be >= 1, got {self.top_n}")
        if self.cv_window < 1:
            raise ConfigError(f"cv_window must be >= 1, got {self.cv_window}")


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(PipelineConfig)}


def _coerce(key: str, raw: str):
    if key == "alpha" and raw.lower() in ("", "none", "auto"):
        return None
    int_keys = {"seed", "min_doc_freq", "k_diag", "k_proc", "iterations", "burn_in",
                "foldin_sweeps", "top_n", "cv_window", "smote_k"}
    float_keys = {"alpha", "beta", "train_fraction"}
    bool_keys = {"stratified", "smote_before_split"}
    try:
        if key in int_keys:
            return int(raw)
        if key in float_keys:
            return float(raw)
        if key in bool_keys:
            lowered = raw.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r}") from None
    return raw


def read_config_file(path: str) -> Dict[str, object]:
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except configparser.Error as exc:
        raise ConfigError(f"config file {path}: {exc}") from None
    if not parser.has_section(SECTION):
        raise ConfigError(f"config file {path} lacks a [{SECTION}] section")
    out: Dict[str, object] = {}
    for key, raw in parser.items(SECTION):
        if key not in _FIELD_TYPES:
            raise ConfigError(f"config file {path}: unknown key {key!r}")
        out[key] = _coerce(key, raw)
    return out


def build_config(file_path: Optional[str] = None,
                 overrides: Optional[Dict[str, object]] = None) -> PipelineConfig:
    """Merge defaults, file values, and flag overrides, then validate."""
    values: Dict[str, object] = {}
    if file_path:
        values.update(read_config_file(file_path))
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown setting {key!r}")
        values[key] = val
    cfg = PipelineConfig(**values)
    cfg.validate()
    return cfg


def derive_seed(seed: int, stage: str) -> int:
    """Stable per-stage seed so stages stay independent of each other."""
    h = hashlib.sha256(f"{seed}:{stage}".encode("utf-8")).digest()
    return int.from_bytes(h[:4], "big")
