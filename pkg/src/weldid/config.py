"""INI-style run configuration with typed defaults."""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass
from pathlib import Path

from .exceptions import ConfigError
from .synth import SynthConfig

DEFAULTS = {
    "run": {"seed": "0", "out": "run"},
    "input": {"csv": "", "tally": ""},
    "clean": {"eps_m": "0.05", "window": "10"},
    "prepare": {"half_window_m": "0.3", "level_sizes": "148,642,1464,1838",
                "n_levels": "20", "test_size": "600"},
    "select": {"n_bins": "10", "stall_limit": "5"},
    "mlp": {"hidden_units": "", "learning_rate": "0.3", "momentum": "0.2",
            "epochs": "500", "loss": "squared", "batch": "online"},
    "svm": {"C": "1.0", "omega": "1.0", "sigma": "1.0", "tol": "0.001"},
    "eval": {"k": "10", "levels": "1838", "classifiers": "mlp,svm",
             "features": "all,selected"},
    "detect": {"level": "1838", "classifier": "svm", "features": "selected",
               "max_gap_m": "0.25", "min_records": "3", "tol_m": "1.2"},
}


def _list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


@dataclass
class RunConfig:
    sections: dict
    path: Path | None = None

    @classmethod
    def load(cls, path=None, seed=None, out=None) -> "RunConfig":
        parser = configparser.ConfigParser()
        parser.optionxform = str  # keep "C" as written
        parser.read_dict(DEFAULTS)
        if path is not None:
            path = Path(path)
            if not path.is_file():
                raise ConfigError(f"config file not found: {path}")
            parser.read(path)
        for section in parser.sections():
            if section not in DEFAULTS and section != "synth":
                raise ConfigError(f"unknown config section [{section}]")
        sections = {s: dict(parser[s]) for s in parser.sections()}
        if seed is not None:
            sections["run"]["seed"] = str(seed)
        if out is not None:
            sections["run"]["out"] = str(out)
        cfg = cls(sections, path)
        cfg.validate()
        return cfg

    def get(self, section, key) -> str:
        return self.sections.get(section, {}).get(key, "")

    def _num(self, section, key, kind):
        raw = self.get(section, key)
        try:
            return kind(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid {kind.__name__}") \
                from None

    def validate(self):
        self.seed
        self.synth
        self.clean_params
        self.prepare_params
        self.cfs_params
        self.estimator_params
        self.eval_params
        self.detect_params

    @property
    def seed(self) -> int:
        seed = self._num("run", "seed", int)
        if seed < 0:
            raise ConfigError("seed must be non-negative")
        return seed

    @property
    def out(self) -> Path:
        return Path(self.get("run", "out"))

    @property
    def input_csv(self) -> Path | None:
        return Path(self.get("input", "csv")) if self.get("input", "csv") else None

    @property
    def input_tally(self) -> Path | None:
        return Path(self.get("input", "tally")) if self.get("input", "tally") else None

    @property
    def synth(self) -> SynthConfig:
        mapping = dict(self.sections.get("synth", {}))
        mapping.setdefault("seed", str(self.seed))
        cfg = SynthConfig.from_mapping(mapping)
        cfg.validate()
        return cfg

    @property
    def clean_params(self) -> dict:
        return {"eps_m": self._num("clean", "eps_m", float),
                "window": self._num("clean", "window", int)}

    @property
    def prepare_params(self) -> dict:
        sizes = _list(self.get("prepare", "level_sizes"))
        try:
            sizes = [int(s) for s in sizes] or None
        except ValueError:
            raise ConfigError("[prepare] level_sizes must be integers") from None
        return {"half_window_m": self._num("prepare", "half_window_m", float),
                "sizes": sizes,
                "n_levels": self._num("prepare", "n_levels", int),
                "test_size": self._num("prepare", "test_size", int)}

    @property
    def cfs_params(self) -> dict:
        return {"n_bins": self._num("select", "n_bins", int),
                "stall_limit": self._num("select", "stall_limit", int)}

    @property
    def estimator_params(self) -> dict:
        hidden = self.get("mlp", "hidden_units")
        loss = self.get("mlp", "loss")
        batch = self.get("mlp", "batch")
        if loss not in ("squared", "cross_entropy"):
            raise ConfigError(f"[mlp] loss = {loss!r}")
        if batch not in ("online", "full"):
            raise ConfigError(f"[mlp] batch = {batch!r}")
        return {
            "mlp": {"hidden_units": int(hidden) if hidden else None,
                    "learning_rate": self._num("mlp", "learning_rate", float),
                    "momentum": self._num("mlp", "momentum", float),
                    "epochs": self._num("mlp", "epochs", int),
                    "loss": loss, "batch": batch},
            "svm": {"C": self._num("svm", "C", float),
                    "omega": self._num("svm", "omega", float),
                    "sigma": self._num("svm", "sigma", float),
                    "tol": self._num("svm", "tol", float)},
        }

    @property
    def eval_params(self) -> dict:
        classifiers = _list(self.get("eval", "classifiers"))
        features = _list(self.get("eval", "features"))
        if not set(classifiers) <= {"mlp", "svm"} or not set(features) <= {"all", "selected"}:
            raise ConfigError("[eval] classifiers must be mlp/svm and features all/selected")
        return {"k": self._num("eval", "k", int),
                "levels": _list(self.get("eval", "levels")),
                "classifiers": classifiers, "features": features}

    @property
    def detect_params(self) -> dict:
        return {"level": self.get("detect", "level"),
                "classifier": self.get("detect", "classifier"),
                "features": self.get("detect", "features"),
                "max_gap_m": self._num("detect", "max_gap_m", float),
                "min_records": self._num("detect", "min_records", int),
                "tol_m": self._num("detect", "tol_m", float)}

    def to_text(self) -> str:
        parser = configparser.ConfigParser()
        parser.optionxform = str
        parser.read_dict(self.sections)
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()
