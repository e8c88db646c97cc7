"""Run configuration: JSON file, schema validation, defaults and path resolution."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import ValidationError

DEFAULTS: dict = {
    "seed": 1,
    "output_dir": "decaykit-out",
    "threads": None,
    "input": {"genotypes": None, "phenotypes": None, "populations": None, "training_population": None},
    "synthetic": {
        "n_families": [30, 20], "family_size": 6, "fsts": [0.0, 0.05],
        "n_markers": 2000, "n_hidden": 200, "n_chromosomes": 21,
        "n_causal": 50, "h2": 0.5,
    },
    "qc": {"enabled": True, "maf_min": 0.01, "missing_max": 0.20, "ld_r_max": 0.95, "knn_k": 10},
    "decay": {
        "m_step": 2, "auto_step": True, "n_reps": 40, "fst_stop": 0.005, "window": 0.01,
        "span": 0.75, "degree": 2, "target_n_ta": None, "retune": False, "kmeans_starts": 25,
        "grid_size": 101, "plot": True, "kinship": False,
    },
    "cv": {"alphas": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0], "n_lambda": 100,
           "lambda_min_ratio": 0.001, "n_runs": 5, "n_folds": 10},
    "holdout": {"n_reps": 40, "n_tr": None, "n_ta": None},
    "simulation": {
        "n_base": 96, "n_founders": 200, "n_markers": 2000, "n_chromosomes": 21,
        "n_causal": 50, "h2": 0.55, "n_rounds": 10, "n_progeny": 200, "n_selected": 20,
        "n_sims": 100, "augment_generations": 0,
        "crosspop_sizes": [200, 100, 100, 100], "crosspop_fsts": [0.0, 0.02, 0.05, 0.1],
        "crosspop_family_size": 1,
    },
}


def schema() -> dict:
    return json.loads(resources.files("decaykit").joinpath("data/config.schema.json").read_text())


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class RunConfig:
    """Fully resolved configuration; section dicts carry every default."""

    seed: int
    output_dir: Path
    threads: int | None
    input: dict
    synthetic: dict
    qc: dict
    decay: dict
    cv: dict
    holdout: dict
    simulation: dict
    base_dir: Path = field(default=Path("."))

    @classmethod
    def from_dict(cls, raw: dict, base_dir=".") -> "RunConfig":
        try:
            jsonschema.validate(raw, schema())
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ValidationError(f"config error at {where}: {exc.message}") from None
        d = _merge(DEFAULTS, raw)
        base = Path(base_dir)
        cfg = cls(seed=int(d["seed"]), output_dir=base / d["output_dir"], threads=d["threads"],
                  input=d["input"], synthetic=d["synthetic"], qc=d["qc"], decay=d["decay"],
                  cv=d["cv"], holdout=d["holdout"], simulation=d["simulation"], base_dir=base)
        for key in ("genotypes", "phenotypes", "populations"):
            if cfg.input.get(key):
                cfg.input[key] = str(base / cfg.input[key])
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(raw, path.parent)

    def check_inputs(self) -> None:
        """Fail early, naming the path, if a configured input file is missing."""
        for key in ("genotypes", "phenotypes", "populations"):
            p = self.input.get(key)
            if p and not Path(p).is_file():
                raise FileNotFoundError(f"{key} file not found: {p}")

    def to_dict(self) -> dict:
        return {"seed": self.seed, "input": self.input, "synthetic": self.synthetic, "qc": self.qc,
                "decay": self.decay, "cv": self.cv, "holdout": self.holdout,
                "simulation": self.simulation}
