"""Experiment configuration, hashing, presets and config-file parsing."""

from __future__ import annotations

import configparser
import hashlib
import itertools
import json
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

from ..errors import ConfigurationError
from ..model import GammaProfile, PartitionScheme

__all__ = [
    "ESTIMATOR_KINDS",
    "LINK_KINDS",
    "TransferBlock",
    "ExperimentConfig",
    "parse_estimator",
    "expand_grid",
    "preset_grid",
    "load_config_file",
    "PROFILES",
]

ESTIMATOR_KINDS = ("replica", "multigroup", "mom", "pairwise", "independent")
LINK_KINDS = ("linear", "logistic", "relu_network")


def parse_estimator(name: str) -> tuple:
    """Split ``"multigroup:6"`` into ``("multigroup", "6")``.

    Accepted forms: ``replica``, ``mom``, ``multigroup`` (g=2),
    ``multigroup:<g>`` with integer ``g >= 2`` or ``g = n``, ``pairwise``
    (uniform weights) and ``independent`` (transfer baseline only).
    """
    name = str(name).strip().lower()
    kind, _, arg = name.partition(":")
    if kind not in ESTIMATOR_KINDS:
        raise ConfigurationError(f"unknown estimator {name!r}; expected one of {ESTIMATOR_KINDS}")
    if kind == "multigroup":
        arg = arg or "2"
        if arg != "n":
            try:
                g = int(arg)
            except ValueError as exc:
                raise ConfigurationError(f"bad group count in {name!r}") from exc
            if g < 2:
                raise ConfigurationError(f"group count must be >= 2 in {name!r}")
            arg = str(g)
    elif kind == "pairwise":
        if arg not in ("", "uniform"):
            raise ConfigurationError(f"pairwise only supports uniform weights, got {name!r}")
        arg = ""
    elif arg:
        raise ConfigurationError(f"{kind} takes no argument, got {name!r}")
    return kind, arg


def _canonical_estimator(name: str) -> str:
    kind, arg = parse_estimator(name)
    return f"{kind}:{arg}" if arg else kind


@dataclass(frozen=True)
class TransferBlock:
    """New-client settings: sample count, optional privacy budget and clip bound."""

    n_new: int = 60
    epsilon: Optional[float] = None
    delta: Optional[float] = None
    clip_bound: float = 10.0

    def __post_init__(self):
        if int(self.n_new) < 1:
            raise ConfigurationError("n_new must be >= 1")
        object.__setattr__(self, "n_new", int(self.n_new))
        if (self.epsilon is None) != (self.delta is None):
            raise ConfigurationError("epsilon and delta must be given together")
        if self.epsilon is not None:
            if not float(self.epsilon) > 0:
                raise ConfigurationError("epsilon must be positive")
            if not 0 < float(self.delta) < 1:
                raise ConfigurationError("delta must lie in (0, 1)")
        if not float(self.clip_bound) > 0:
            raise ConfigurationError("clip_bound must be positive")

    @property
    def private(self) -> bool:
        return self.epsilon is not None


@dataclass(frozen=True)
class ExperimentConfig:
    """One point of an experiment grid.

    The config hash (canonical JSON, SHA-256 truncated to 64 bits) seeds the
    ground truth and partitions, so every repetition shares them while
    ``(master_seed, repetition)`` seeds the sampled data.
    """

    d: int
    k: int
    M: int
    partition_scheme: str = "equal:20"
    gamma_profile: str = "identity"
    estimators: tuple = ("replica", "mom")
    repetitions: int = 10
    master_seed: int = 0
    noise_sigma: float = 1.0
    link: str = "linear"
    transfer: Optional[TransferBlock] = None
    _hash: int = field(default=0, init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("d", "k", "M", "repetitions", "master_seed"):
            object.__setattr__(self, name, int(getattr(self, name)))
        if self.k < 1 or self.d < self.k:
            raise ConfigurationError(f"need 1 <= k <= d, got d={self.d}, k={self.k}")
        if self.M < 1:
            raise ConfigurationError("M must be >= 1")
        if self.repetitions < 1:
            raise ConfigurationError("repetitions must be >= 1")
        if self.master_seed < 0:
            raise ConfigurationError("master_seed must be non-negative")
        if not float(self.noise_sigma) >= 0:
            raise ConfigurationError("noise_sigma must be non-negative")
        object.__setattr__(self, "noise_sigma", float(self.noise_sigma))
        object.__setattr__(self, "partition_scheme", str(PartitionScheme.parse(self.partition_scheme)))
        object.__setattr__(self, "gamma_profile", str(GammaProfile.parse(self.gamma_profile)))
        if self.link not in LINK_KINDS:
            raise ConfigurationError(f"unknown link {self.link!r}; expected one of {LINK_KINDS}")
        if self.link != "linear" and self.gamma_profile != "identity":
            raise ConfigurationError("nonlinear links require the identity covariance profile")
        names = self.estimators
        if isinstance(names, str):
            names = [s for s in names.split(",") if s.strip()]
        names = tuple(_canonical_estimator(e) for e in names)
        if not names:
            raise ConfigurationError("at least one estimator is required")
        if len(set(names)) != len(names):
            raise ConfigurationError(f"duplicate estimators in {names}")
        if "independent" in names and self.transfer is None:
            raise ConfigurationError("the independent baseline needs a transfer block")
        object.__setattr__(self, "estimators", names)
        digest = hashlib.sha256(json.dumps(self.canonical(), sort_keys=True, separators=(",", ":")).encode()).digest()
        object.__setattr__(self, "_hash", int.from_bytes(digest[:8], "big"))

    def canonical(self) -> dict:
        out = {f: getattr(self, f) for f in (
            "d", "k", "M", "partition_scheme", "gamma_profile", "repetitions",
            "master_seed", "noise_sigma", "link",
        )}
        out["estimators"] = list(self.estimators)
        out["transfer"] = None if self.transfer is None else asdict(self.transfer)
        return out

    @property
    def config_hash(self) -> int:
        return self._hash

    @property
    def hash_hex(self) -> str:
        return f"{self._hash:016x}"

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


_GRID_FIELDS = ("d", "k", "M", "partition_scheme", "gamma_profile", "noise_sigma", "link", "master_seed", "repetitions")


def expand_grid(base: ExperimentConfig, **axes) -> list:
    """Cartesian product over ``axes`` (field name -> sequence), first axis slowest."""
    for name in axes:
        if name not in _GRID_FIELDS:
            raise ConfigurationError(f"{name!r} cannot be a grid axis; choose from {_GRID_FIELDS}")
    names = list(axes)
    values = [list(axes[n]) for n in names]
    if any(len(v) == 0 for v in values):
        raise ConfigurationError("grid axes must be non-empty")
    return [replace(base, **dict(zip(names, combo))) for combo in itertools.product(*values)]


# The desk profile runs in seconds, the full-size profile in minutes.
PROFILES = {
    "desk": {"d": 40, "M": 300, "n": 20, "uniform": "uniform:2:78", "k_grid": (5, 10, 15), "M_grid": (100, 300, 1000)},
    "paper": {"d": 120, "M": 1000, "n": 60, "uniform": "uniform:2:118", "k_grid": (5, 10, 15, 20), "M_grid": (300, 1000, 3000)},
}
FIGURES = ("fig2", "fig3", "fig4", "fig5")
_BASELINE_ESTIMATORS = ("replica", "multigroup:2", "multigroup:6", "mom", "pairwise")


def preset_grid(profile: str = "desk", figure: str = "fig2", *, master_seed: int = 0, repetitions: int = 10, setup: int = 1) -> list:
    """Named experiment grids.

    ``fig2``: homogeneous clients, error vs ``k``. ``fig3``: heterogeneous
    diagonal covariances with uniform client sizes, error vs ``k``.
    ``fig4``: error vs ``M`` at ``k = 10``. ``fig5``: new-client parameter
    error vs ``M`` at ``k = 10`` with 60 new-client samples, including
    the independent baseline.
    ``setup`` picks the homogeneous (1) or heterogeneous (2) clients for
    ``fig4`` and ``fig5``.
    """
    if profile not in PROFILES:
        raise ConfigurationError(f"unknown profile {profile!r}; expected one of {tuple(PROFILES)}")
    if figure not in FIGURES:
        raise ConfigurationError(f"unknown figure {figure!r}; expected one of {FIGURES}")
    if setup not in (1, 2):
        raise ConfigurationError("setup must be 1 or 2")
    p = PROFILES[profile]
    if figure == "fig3":
        setup = 2
    elif figure == "fig2":
        setup = 1
    parts = f"equal:{p['n']}" if setup == 1 else p["uniform"]
    gamma = "identity" if setup == 1 else "diagonal"
    base = ExperimentConfig(
        d=p["d"], k=10, M=p["M"], partition_scheme=parts, gamma_profile=gamma,
        estimators=_BASELINE_ESTIMATORS, repetitions=repetitions, master_seed=master_seed,
    )
    if figure in ("fig2", "fig3"):
        return expand_grid(base, k=p["k_grid"])
    if figure == "fig4":
        return expand_grid(base, M=p["M_grid"])
    base = replace(base, estimators=_BASELINE_ESTIMATORS + ("independent",), transfer=TransferBlock(n_new=60))
    return expand_grid(base, M=p["M_grid"])


_INT_FIELDS = ("d", "k", "M", "repetitions", "master_seed")


def _split(key: str, raw: str) -> list:
    # explicit partitions use commas inside a single value, so that axis splits on ';'
    sep = ";" if key == "partition_scheme" else ","
    return [v.strip() for v in raw.split(sep) if v.strip()]


def load_config_file(path, *, master_seed: Optional[int] = None) -> list:
    """Read an INI-style key-value file and return the expanded grid.

    ``[experiment]`` holds ``d, k, M, partition_scheme, gamma_profile,
    noise_sigma, link, repetitions, master_seed, estimators``. A
    comma-separated value (semicolon for ``partition_scheme``) on a grid
    field turns it into a sweep axis. An optional ``[transfer]`` section
    holds ``n_new, epsilon, delta, clip_bound``.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        read = parser.read(path)
    except configparser.Error as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    if not read:
        raise ConfigurationError(f"cannot read config file {path}")
    if "experiment" not in parser:
        raise ConfigurationError(f"{path}: missing [experiment] section")
    sec = dict(parser["experiment"])
    aliases = {"partitions": "partition_scheme", "gamma": "gamma_profile"}
    sec = {aliases.get(k, k): v for k, v in sec.items()}
    unknown = set(sec) - set(_GRID_FIELDS) - {"estimators"}
    if unknown:
        raise ConfigurationError(f"{path}: unknown keys {sorted(unknown)}")
    for req in ("d", "k", "M"):
        if req not in sec:
            raise ConfigurationError(f"{path}: missing required key {req!r}")
    axes = {}
    try:
        for key, raw in sec.items():
            if key == "estimators":
                continue
            vals = _split(key, raw)
            if key in _INT_FIELDS:
                vals = [int(v) for v in vals]
            elif key == "noise_sigma":
                vals = [float(v) for v in vals]
            axes[key] = vals
        transfer = None
        if "transfer" in parser:
            t = parser["transfer"]
            eps = t.get("epsilon")
            delta = t.get("delta")
            transfer = TransferBlock(
                n_new=int(t.get("n_new", 60)),
                epsilon=float(eps) if eps else None,
                delta=float(delta) if delta else None,
                clip_bound=float(t.get("clip_bound", 10.0)),
            )
    except ValueError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    if master_seed is not None:
        axes["master_seed"] = [master_seed]
    first = {k: v[0] for k, v in axes.items()}
    base = ExperimentConfig(estimators=sec.get("estimators", "replica,mom"), transfer=transfer, **first)
    return expand_grid(base, **{k: v for k, v in axes.items() if len(v) > 1})
