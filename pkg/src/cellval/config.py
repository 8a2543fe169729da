"""Run configuration: one flat record per invocation, loaded from a JSON or
YAML file and overridden by command-line flags.

The worker count is deliberately not part of the record: it never changes
results, so reports from runs that differ only in threads are identical.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import yaml

from .ensemble import WEAK_LEARNERS, EnsembleConfig
from .errors import ConfigError
from .experiments.protocols import STREAM_ENSEMBLE
from .experiments.repair import FIX_MODES, MISSING_POLICIES
from .learners import TreeParams
from .seeding import derive_seed
from .valuation import ScoreFunction

COMMANDS = ("value", "outlier-bench", "fix", "mislabel", "backdoor", "oracle-check")

# commands whose protocol fixes a different default subset ratio
_DEFAULT_FEATURE_RATIO = {"backdoor": 0.25}


@dataclass(frozen=True)
class RunConfig:
    command: str = "value"
    # inputs and outputs; no --data means a synthetic dataset is drawn
    data: str | None = None
    labels: str = "-1"
    out_dir: str = "out"
    seed: int = 0
    # ensemble
    trees: int = 1000
    feature_ratio: float | None = None
    weak_learner: str = "tree"
    score_fn: str = "accuracy"
    max_depth: int | None = None
    min_samples_split: int = 2
    # synthetic tabular data
    n_train: int = 1000
    n_test: int = 3000
    n_features: int = 20
    class_sep: float = 2.0
    # share of a supplied dataset held out for test accuracy
    test_fraction: float = 0.25
    pooled_normalization: bool = False
    # cell outliers and fixation
    row_ratio: float = 0.2
    col_ratio: float = 0.2
    tail_prob: float = 0.01
    budgets: tuple = (0.0, 0.04, 0.1, 1.0)
    fix_mode: str = "ground_truth"
    missing: str = "last"
    # label noise and removal
    flip_ratio: float = 0.1
    max_remove_fraction: float = 0.2
    remove_step: float = 0.01
    # images and triggers
    n_images: int = 1000
    height: int = 16
    width: int = 16
    channels: int = 1
    trigger_size: int = 3
    poison_fraction: float = 0.15
    source_class: int = 0
    target_class: int = 1
    # oracle suite
    oracle_instances: int = 20

    def __post_init__(self):
        try:
            object.__setattr__(self, "budgets", tuple(float(b) for b in self.budgets))
        except (TypeError, ValueError):
            raise ConfigError("budgets", "must be a list of numbers") from None
        if isinstance(self.labels, int) and not isinstance(self.labels, bool):
            object.__setattr__(self, "labels", str(self.labels))
        if not isinstance(self.labels, str):
            raise ConfigError("labels", "must be a column name or index")
        self.validate()

    def validate(self) -> None:
        def need(ok, name, msg):
            if not ok:
                raise ConfigError(name, msg)

        need(self.command in COMMANDS, "command", f"must be one of {COMMANDS}")
        for name in ("seed", "trees", "min_samples_split", "n_train", "n_test",
                     "n_features", "n_images", "height", "width", "channels", "trigger_size",
                     "source_class", "target_class", "oracle_instances"):
            v = getattr(self, name)
            need(isinstance(v, int) and not isinstance(v, bool), name, f"must be an integer, got {v!r}")
        for name in ("trees", "n_train", "n_features", "n_images", "height", "width",
                     "trigger_size", "oracle_instances"):
            need(getattr(self, name) >= 1, name, "must be >= 1")
        need(self.seed >= 0, "seed", "must be >= 0")
        need(self.n_test >= 1, "n_test", "must be >= 1")
        need(self.min_samples_split >= 2, "min_samples_split", "must be >= 2")
        need(self.max_depth is None or (isinstance(self.max_depth, int) and self.max_depth >= 0),
             "max_depth", "must be null or a nonnegative integer")
        if self.feature_ratio is not None:
            need(_real(self.feature_ratio) and 0 < self.feature_ratio <= 1, "feature_ratio",
                 f"must lie in (0, 1], got {self.feature_ratio}")
        need(self.weak_learner in WEAK_LEARNERS, "weak_learner", f"must be one of {WEAK_LEARNERS}")
        try:
            ScoreFunction.parse(self.score_fn)
        except ValueError:
            raise ConfigError("score_fn", f"must be one of {[s.value for s in ScoreFunction]}") from None
        need(_real(self.class_sep) and self.class_sep >= 0, "class_sep", "must be >= 0")
        for name in ("test_fraction", "row_ratio", "col_ratio", "flip_ratio"):
            v = getattr(self, name)
            need(_real(v) and 0 < v < 1, name, f"must lie in (0, 1), got {v}")
        need(_real(self.tail_prob) and 0 < self.tail_prob < 0.5, "tail_prob", "must lie in (0, 0.5)")
        need(len(self.budgets) >= 1 and all(0 <= b <= 1 for b in self.budgets)
             and list(self.budgets) == sorted(self.budgets), "budgets",
             "must be a nonempty ascending list of fractions in [0, 1]")
        need(self.fix_mode in FIX_MODES, "fix_mode", f"must be one of {FIX_MODES}")
        need(self.missing in MISSING_POLICIES, "missing", f"must be one of {MISSING_POLICIES}")
        need(_real(self.max_remove_fraction) and 0 <= self.max_remove_fraction < 1,
             "max_remove_fraction", "must lie in [0, 1)")
        need(_real(self.remove_step) and 0 < self.remove_step < 1, "remove_step", "must lie in (0, 1)")
        need(_real(self.poison_fraction) and 0 <= self.poison_fraction <= 1, "poison_fraction",
             "must lie in [0, 1]")
        need(self.channels in (1, 3), "channels", "must be 1 or 3")
        need(self.source_class != self.target_class, "target_class", "must differ from source_class")
        need(self.height % 2 == 0 and self.width % 2 == 0, "height",
             "image height and width must be even")

    @property
    def effective_feature_ratio(self) -> float:
        if self.feature_ratio is not None:
            return float(self.feature_ratio)
        return _DEFAULT_FEATURE_RATIO.get(self.command, 0.5)

    def ensemble_config(self) -> EnsembleConfig:
        tp = TreeParams(max_depth=self.max_depth, min_samples_split=self.min_samples_split)
        return EnsembleConfig(n_learners=self.trees, feature_ratio=self.effective_feature_ratio,
                              weak_learner=self.weak_learner, tree_params=tp,
                              master_seed=derive_seed(self.seed, STREAM_ENSEMBLE))

    @property
    def score_function(self) -> ScoreFunction:
        return ScoreFunction.parse(self.score_fn)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["budgets"] = list(self.budgets)
        return d

    @classmethod
    def from_mapping(cls, mapping: dict) -> "RunConfig":
        if not isinstance(mapping, dict):
            raise ConfigError("config", "top level must be a mapping")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise ConfigError(unknown[0], "unknown configuration key")
        try:
            return cls(**mapping)
        except TypeError as exc:
            raise ConfigError("config", str(exc)) from None


def _real(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def load_config_file(path) -> dict:
    """Read a JSON or YAML mapping (JSON is parsed as YAML)."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {p}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"cannot parse {p}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a mapping")
    return data


def build_config(command: str, file_path=None, overrides: dict | None = None) -> RunConfig:
    base = load_config_file(file_path) if file_path else {}
    if "command" in base and base["command"] != command:
        raise ConfigError("command", f"file is for {base['command']!r}, invoked as {command!r}")
    base = {**base, "command": command}
    # the file alone may be incomplete or invalid until flags are applied
    merged = {**base, **{k: v for k, v in (overrides or {}).items() if v is not None}}
    return RunConfig.from_mapping(merged)
