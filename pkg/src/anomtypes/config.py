"""Run configuration: one JSON document drives a whole sweep."""

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ._validation import SchemaError
from .features.base import FEATURE_SETS

__all__ = ["MdiConfig", "DampConfig", "FeatureConfig", "ClusterConfig", "SaaiConfig",
           "PipelineConfig", "load_config"]


@dataclass
class MdiConfig:
    L_min: int = 144
    L_max: int = 288
    quantile: float = 0.99
    top_k: int = 10
    proposals: str = "hotellings_t"
    preproc: Optional[str] = "td"
    divergence: str = "kl"
    step: Optional[int] = None


@dataclass
class DampConfig:
    m: int = 288
    t0: int = 2880
    lookahead: int = 0
    k: Optional[int] = None
    threshold: float = 0.98


@dataclass
class FeatureConfig:
    sets: list = field(default_factory=lambda: list(FEATURE_SETS))
    window: int = 5
    n_kernels: int = 1000
    pca_components: int = 10
    catch22_threshold: float = 0.01
    catch22_threshold_multivariate: float = 0.0001
    catch22_registry: str = "catch22"


@dataclass
class ClusterConfig:
    algorithms: list = field(default_factory=lambda: ["KMeans", "HAC"])
    K: Optional[int] = None
    K_min: int = 2
    K_max: int = 20
    max_iter: int = 300
    tol: float = 1e-6
    dba_iter: int = 10
    band: Optional[int] = None
    # consensus for multivariate groups uses a fixed K, SAAI being undefined there
    consensus_K_multivariate: int = 10

    def k_values(self):
        if self.K is not None:
            return [int(self.K)]
        return list(range(int(self.K_min), int(self.K_max) + 1))


@dataclass
class SaaiConfig:
    t_iou: float = 0.3
    lambda1: float = 0.5
    lambda2: float = 0.5


_SECTIONS = {"mdi": MdiConfig, "damp": DampConfig, "features": FeatureConfig,
             "cluster": ClusterConfig, "saai": SaaiConfig}


@dataclass
class PipelineConfig:
    """Everything a run needs.

    `inputs` are CSV paths, each read as one multivariate series whose id is
    the file stem. `groups` optionally names a JSON file mapping a group
    name to a list of ``"series_id"`` or ``"series_id:channel_name"``
    entries; without it every input series forms its own group.
    """

    inputs: list = field(default_factory=list)
    schema: dict = field(default_factory=dict)
    groups: Optional[str] = None
    detectors: list = field(default_factory=lambda: ["MDI", "DAMP"])
    modes: list = field(default_factory=lambda: ["univariate", "multivariate"])
    mdi: MdiConfig = field(default_factory=MdiConfig)
    damp: DampConfig = field(default_factory=DampConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    saai: SaaiConfig = field(default_factory=SaaiConfig)
    seed: int = 42
    jobs: int = 1
    out: str = "run"

    def __post_init__(self):
        for name, cls in _SECTIONS.items():
            val = getattr(self, name)
            if isinstance(val, dict):
                known = {f.name for f in dataclasses.fields(cls)}
                unknown = set(val) - known
                if unknown:
                    raise SchemaError(f"unknown {name} option(s): {sorted(unknown)}")
                setattr(self, name, cls(**val))
        self.validate()

    def validate(self):
        bad = set(self.features.sets) - set(FEATURE_SETS)
        if bad:
            raise SchemaError(f"unknown feature set(s) {sorted(bad)}")
        bad = set(self.cluster.algorithms) - {"KMeans", "HAC"}
        if bad:
            raise SchemaError(f"unknown clustering algorithm(s) {sorted(bad)}")
        bad = set(self.detectors) - {"MDI", "DAMP"}
        if bad:
            raise SchemaError(f"unknown detector(s) {sorted(bad)}")
        bad = set(self.modes) - {"univariate", "multivariate"}
        if bad:
            raise SchemaError(f"unknown mode(s) {sorted(bad)}")
        if self.cluster.K is None and self.cluster.K_min > self.cluster.K_max:
            raise SchemaError("K_min exceeds K_max")
        if abs(self.saai.lambda1 + self.saai.lambda2 - 1) > 1e-12:
            raise SchemaError("SAAI weights must sum to 1")
        if not 0 < self.saai.t_iou <= 1:
            raise SchemaError("t_iou must lie in (0, 1]")
        if int(self.jobs) < 1:
            raise SchemaError("jobs must be >= 1")

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise SchemaError(f"unknown config key(s): {sorted(unknown)}")
        return cls(**d)

    def replace(self, **changes):
        d = self.to_dict()
        d.update({k: v for k, v in changes.items() if v is not None})
        return type(self).from_dict(d)

    def digest_dict(self):
        """Settings that influence numeric outputs (excludes jobs and out)."""
        d = self.to_dict()
        d.pop("jobs")
        d.pop("out")
        return d


def load_config(path):
    """Read a PipelineConfig from JSON.

    Relative `inputs`, `groups` and `out` paths resolve against the
    directory holding the file.
    """
    path = Path(path)
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise SchemaError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(d, dict):
        raise SchemaError("config must be a JSON object")
    base = path.parent
    if "inputs" in d:
        d["inputs"] = [str(p) if Path(p).is_absolute() else str(base / p) for p in d["inputs"]]
    if d.get("groups") and not Path(d["groups"]).is_absolute():
        d["groups"] = str(base / d["groups"])
    out = d.get("out", PipelineConfig.out)
    if not Path(out).is_absolute():
        d["out"] = str(base / out)
    return PipelineConfig.from_dict(d)
