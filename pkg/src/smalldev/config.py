"""Run configuration: an INI file with ``[model]``, ``[weights]`` and ``[run]``.

Example::

    [model]
    kind = ar1
    rho = 0.5

    [weights]
    p = 1
    d_plus = 1
    d_minus = 1

    [run]
    N = 500, 2000
    eps = 0.2, 0.1, 0.05, 0.025
    methods = saddlepoint
    samples = 100000
    seed = 12345
"""
from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, replace

from .exceptions import ConfigError, SmallDevError
from .model import (MASpec, WeightSequence, spec_from_mapping, spec_to_mapping,
                    weights_from_mapping, weights_to_mapping)

METHODS = ("saddlepoint", "tilted_mc", "direct_sim")
MC_METHODS = ("tilted_mc", "direct_sim")
TAIL_MODES = ("fitted", "none")


def _floats(text, key):
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"[run] {key}: expected comma-separated numbers, got {text!r}") from None


def _ints(text, key):
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"[run] {key}: expected comma-separated integers, got {text!r}") from None


@dataclass(frozen=True)
class RunConfig:
    model: MASpec
    weights: WeightSequence
    N_list: tuple = ()
    eps_grid: tuple = ()
    methods: tuple = ("saddlepoint",)
    samples: int = 100_000
    seed: int = 0
    window_tol: float = 1e-14
    quad_rel_tol: float = 1e-10
    output_dir: str = "smalldev_out"
    fit_range: tuple | None = None
    gap_tol: float = 0.05
    ratio_tol: float = 0.15
    tail: str = "fitted"
    order: str = "corrected"

    def __post_init__(self):
        object.__setattr__(self, "N_list", tuple(int(n) for n in self.N_list))
        object.__setattr__(self, "eps_grid", tuple(float(e) for e in self.eps_grid))
        object.__setattr__(self, "methods", tuple(self.methods))
        if list(self.N_list) != sorted(set(self.N_list)) or any(n < 1 for n in self.N_list):
            raise ConfigError(f"N list must be positive and strictly increasing, got {self.N_list}")
        if any(e <= 0 for e in self.eps_grid) or \
                list(self.eps_grid) != sorted(set(self.eps_grid), reverse=True):
            raise ConfigError(f"eps grid must be positive and strictly decreasing, got {self.eps_grid}")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}; choose from {METHODS}")
        if any(m in MC_METHODS for m in self.methods) and self.samples < 1000:
            raise ConfigError("samples must be >= 1000 when a Monte Carlo method is selected")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.tail not in TAIL_MODES:
            raise ConfigError(f"tail must be one of {TAIL_MODES}")
        if self.order not in ("leading", "corrected"):
            raise ConfigError("order must be 'leading' or 'corrected'")
        if self.fit_range is not None:
            lo, hi = self.fit_range
            if not 1 <= lo < hi:
                raise ConfigError(f"fit range must satisfy 1 <= lo < hi, got {self.fit_range}")

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self

    def to_text(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp["model"] = spec_to_mapping(self.model)
        cp["weights"] = weights_to_mapping(self.weights)
        run = {
            "N": ", ".join(map(str, self.N_list)),
            "eps": ", ".join(repr(e) for e in self.eps_grid),
            "methods": ", ".join(self.methods),
            "samples": str(self.samples),
            "seed": str(self.seed),
            "window_tol": repr(self.window_tol),
            "quad_rel_tol": repr(self.quad_rel_tol),
            "output_dir": self.output_dir,
            "gap_tol": repr(self.gap_tol),
            "ratio_tol": repr(self.ratio_tol),
            "tail": self.tail,
            "order": self.order,
        }
        if self.fit_range is not None:
            run["fit_range"] = f"{self.fit_range[0]}, {self.fit_range[1]}"
        cp["run"] = run
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def digest(self) -> str:
        """SHA-256 of the canonical text form (output_dir excluded)."""
        return hashlib.sha256(replace(self, output_dir="").to_text().encode()).hexdigest()


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as err:
        raise ConfigError(f"cannot parse config: {err}") from None
    for sec in ("model", "weights"):
        if sec not in cp:
            raise ConfigError(f"missing [{sec}] section")
    try:
        model = spec_from_mapping(dict(cp["model"]))
        weights = weights_from_mapping(dict(cp["weights"]))
    except SmallDevError as err:
        raise ConfigError(str(err)) from err
    run = dict(cp["run"]) if "run" in cp else {}
    kw = {}
    if "N" in run:
        kw["N_list"] = _ints(run.pop("N"), "N")
    if "eps" in run:
        kw["eps_grid"] = _floats(run.pop("eps"), "eps")
    if "methods" in run:
        kw["methods"] = [m.strip() for m in run.pop("methods").split(",") if m.strip()]
    if "fit_range" in run:
        fr = _ints(run.pop("fit_range"), "fit_range")
        if len(fr) != 2:
            raise ConfigError("fit_range needs two integers")
        kw["fit_range"] = tuple(fr)
    for key, conv in (("samples", int), ("seed", int), ("window_tol", float),
                      ("quad_rel_tol", float), ("gap_tol", float), ("ratio_tol", float)):
        if key in run:
            try:
                kw[key] = conv(run.pop(key))
            except ValueError:
                raise ConfigError(f"[run] {key}: bad value") from None
    for key in ("output_dir", "tail", "order"):
        if key in run:
            kw[key] = run.pop(key).strip()
    if run:
        raise ConfigError(f"unknown [run] keys: {sorted(run)}")
    return RunConfig(model=model, weights=weights, **kw)


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
