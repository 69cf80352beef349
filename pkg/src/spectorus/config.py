"""Flat key-value run configuration.

One file per run; every value serializes with repr so a round trip through
text reproduces the configuration exactly.  Unknown keys are rejected with
the offending line number.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .errors import ConfigError

_DEFAULTS = dict(
    map="slit_c",
    beta=2.718281828459045,
    eps=0.0,  # 0 -> admissibility search
    q=2,
    p=0,
    amp=0.25,
    weight="inverse_det",
    depth=12,
    j_depth=0,  # 0 -> 2 * depth
    tol_map=1e-10,
    tol_jump=1e-6,
    tol_alpha=1e-8,
    tol_disjoint=1e-4,
    tol_len=1e-3,
    target_step=1.5e-3,
    max_samples=900_000,
    n_skeleton=384,
    jump_eps=1e-3,
    duality_budget=1e-5,
    n_observables=10,
    k_max=5,
    ulam_n=64,
    ulam_samples=16,
    seed=0,
    out="runs",
)

_INT_KEYS = {"q", "p", "depth", "j_depth", "max_samples", "n_skeleton",
             "n_observables", "k_max", "ulam_n", "ulam_samples", "seed"}
_STR_KEYS = {"map", "weight", "out"}


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: dict(_DEFAULTS))

    def __getattr__(self, key):
        vals = object.__getattribute__(self, "values")
        if key in vals:
            return vals[key]
        raise AttributeError(key)

    def validated(self):
        v = self.values
        if v["map"] not in ("affine_a", "cocycle_b", "slit_c", "doubling", "identity"):
            raise ConfigError(f"unknown map family {v['map']!r}")
        if v["weight"] not in ("unit", "inverse_det"):
            raise ConfigError(f"unknown weight kind {v['weight']!r}")
        if v["map"] == "affine_a" and v["beta"] <= 1.0:
            raise ConfigError("beta must exceed 1")
        if v["depth"] < 2:
            raise ConfigError("orbit depth must be at least 2")
        for key in ("tol_map", "tol_jump", "tol_alpha", "tol_disjoint", "tol_len",
                    "target_step", "jump_eps", "duality_budget"):
            if v[key] <= 0:
                raise ConfigError(f"{key} must be positive")
        return self

    def to_text(self):
        lines = ["# spectorus run configuration"]
        for key in _DEFAULTS:
            val = self.values[key]
            if key in _STR_KEYS:
                lines.append(f"{key} = {val}")
            else:
                lines.append(f"{key} = {val!r}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text):
        values = dict(_DEFAULTS)
        for ln, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {ln}: expected 'key = value', got {raw!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in _DEFAULTS:
                raise ConfigError(f"line {ln}: unknown key {key!r}")
            try:
                if key in _STR_KEYS:
                    values[key] = val
                elif key in _INT_KEYS:
                    values[key] = int(val)
                else:
                    values[key] = float(val)
            except ValueError as exc:
                raise ConfigError(f"line {ln}: bad value for {key}: {val!r}") from exc
        return RunConfig(values).validated()

    @staticmethod
    def from_file(path):
        with open(path, "r", encoding="utf-8") as f:
            return RunConfig.from_text(f.read())

    def make_map(self):
        from .maps import make_map

        v = self.values
        kw = {}
        if v["map"] == "affine_a":
            kw["beta"] = v["beta"]
        elif v["map"] == "cocycle_b":
            kw.update(beta=v["beta"], q=v["q"], p=v["p"], amp=v["amp"])
        elif v["map"] == "slit_c":
            kw["eps"] = v["eps"] or None
        return make_map(v["map"], weight=v["weight"], **kw)

    def propagate_options(self):
        from .orbit import PropagateOptions

        return PropagateOptions(
            target_step=self.target_step,
            max_samples_per_curve=self.max_samples,
            n_skeleton=self.n_skeleton,
        )
