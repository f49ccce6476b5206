"""Flat key=value run configuration shared by the CLI subcommands."""

from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import ParseError
from .forest import ForestConfig
from .lasso import LassoConfig
from .panel import MissingPolicy


@dataclass
class RunConfig:
    # lasso
    c: float = 1.1
    gamma: float | None = None
    max_loading_iters: int = 15
    loading_tol: float = 1e-4
    cd_tol: float = 1e-8
    cd_max_iters: int = 10_000
    lasso_method: str = "rigorous"
    # panel
    missing_policy: str = "drop_unit"
    exclude_units: tuple[str, ...] = ()
    # network
    norm_diagnostic: bool = False
    # preprocess
    nzv_freq_ratio: float = 19.0
    nzv_unique_pct: float = 10.0
    corr_cutoff: float = 0.85
    keep_features: tuple[str, ...] = ()
    # forest
    n_trees: int = 1500
    mtry: int | None = None
    min_node_size: int = 1
    stratified: bool = True
    n_runs: int = 2000
    top_k: int = 30
    selection_mode: str = "top_k"
    tune_grid: tuple[int, ...] = ()
    # synth
    synth_kind: str = "panel"
    synth_n_units: int = 30
    synth_n_periods: int = 200
    synth_n_dominant: int = 2
    synth_loading_low: float = 0.8
    synth_loading_high: float = 1.2
    synth_spatial_rho: float = 0.3
    synth_noise_sd: float = 0.5
    synth_n_features: int = 375
    synth_n_informative: int = 3
    synth_effect_size: float = 1.5
    synth_class_ratio: float = 18 / 74
    # misc
    seed: int = 0
    threads: int = 1
    out_dir: str = "."
    svg: bool = True

    def lasso_config(self) -> LassoConfig:
        return LassoConfig(
            c=self.c, gamma=self.gamma,
            max_loading_iters=self.max_loading_iters, loading_tol=self.loading_tol,
            cd_tol=self.cd_tol, cd_max_iters=self.cd_max_iters,
        )

    def forest_config(self) -> ForestConfig:
        return ForestConfig(
            n_trees=self.n_trees, mtry=self.mtry, min_node_size=self.min_node_size,
            stratified=self.stratified, seed=self.seed, n_runs=self.n_runs,
            top_k=self.top_k, selection_mode=self.selection_mode,
        )

    def missing(self) -> MissingPolicy:
        try:
            return MissingPolicy(self.missing_policy)
        except ValueError:
            raise ParseError(f"unknown missing_policy {self.missing_policy!r}") from None


_BOOLS = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _convert(name: str, raw: str, target_type):
    raw = raw.strip()
    if target_type == "bool":
        if raw.lower() not in _BOOLS:
            raise ParseError(f"config key {name}: expected boolean, got {raw!r}")
        return _BOOLS[raw.lower()]
    if target_type == "int":
        return int(raw)
    if target_type == "int | None":
        return None if raw.lower() == "none" else int(raw)
    if target_type == "float":
        return float(raw)
    if target_type == "float | None":
        return None if raw.lower() == "none" else float(raw)
    if target_type == "str":
        return raw
    if target_type == "tuple[str, ...]":
        return tuple(s.strip() for s in raw.split(",") if s.strip())
    if target_type == "tuple[int, ...]":
        return tuple(int(s) for s in raw.split(",") if s.strip())
    raise ParseError(f"config key {name}: unsupported type {target_type}")


def parse_config(path) -> RunConfig:
    """Parse flat ``key = value`` lines with ``#`` comments; unknown keys rejected."""
    field_types = {f.name: f.type for f in fields(RunConfig)}
    overrides = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, raw = (s.strip() for s in line.split("=", 1))
            if key not in field_types:
                raise ParseError(f"{path}:{lineno}: unknown config key {key!r}")
            try:
                overrides[key] = _convert(key, raw, field_types[key])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: bad value {raw!r} for {key}") from None
    return RunConfig(**overrides)
