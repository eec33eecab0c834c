"""Experiment configuration: JSON grammar, validation, canonical hash.

A configuration is a single human-editable JSON file.  Validation fills
every omitted field with its default, producing a complete "normalized"
form; the configuration hash is the SHA-256 of the canonical JSON of
that normalized form together with the grammar version, so the hash
changes exactly when some effective field changes.

Grammar (all keys optional unless marked required)::

    {
      "seed": 7,                      # required master seed, u64
      "out": "wqbench_out",           # output directory
      "source": {                     # required
        "kind": "synth" | "csv",
        # synth:
        "n_basins": 4, "n_years": 4, "start_year": 2000,
        "n_statics": 6, "duplicate_m_into_q": false,
        "coefficient_jitter": 0.15, "relaxed_land_use": false,
        "variables": [ {"name": "conc", "alpha": 1.0, "beta1": 0.5,
                        "beta2": 0.3, "gamma": 0.3, "p_obs": 1.0,
                        "rho": 0.7} ],
        # csv:
        "path": "corpus_dir", "relaxed_land_use": false,
        "min_observations": 0
      },
      "split": {"kind": "temporal", "test_years": [2003]}
             | {"kind": "spatial", "test_fraction": 0.2, "seed": 0},
      "models": [ {"family": "recurrent", "name": "recurrent",
                   ...ModelSpec overrides...} ],   # required, non-empty
      "train": {"epochs": 50, "batch_size": 32, "optimizer": "adamw",
                "lr": 1e-3, "weight_decay": 1e-2,
                "schedule": {"kind": "step", "decay": 0.5, "every": 100}
                          | {"kind": "cosine", "min_lr": 1e-6}},
      "corruptions": [ "outlier" | "noise" | "adversarial"
                       | {"kind": ..., "side": "features" | "targets",
                          "levels": [...], "noise_sigma": 0.1} ],
      "protocols": ["robustness", "tta", "mc_dropout", "ablation",
                    "traverse", "integrated_gradients", "stats"],
      "options": {"n_runs": 10, "noise_sigma": 0.1,
                  "tta_scope": "runoff_only" | "all_dynamic",
                  "dropout_p": 0.3, "ig_steps": 32, "ig_samples": 8,
                  "attribution_groups": ["M","Q","RC","V","BA"],
                  "min_kge": 0.1}
    }

Bare corruption names expand to the standard preset levels (outlier and
adversarial at 10/20/30%, noise at 30/40/50%); unknown names are
rejected.
"""

import dataclasses
import hashlib
import json

from ..corrupt import ADVERSARIAL, CORRUPTION_PRESETS, FEATURES, TARGETS
from ..dataio import SplitPlan, SynthConfig, SynthVariable
from ..errors import ConfigurationError
from ..models import (
    ATTENTION,
    CosineSchedule,
    ModelSpec,
    OPERATOR,
    RECURRENT,
    StepSchedule,
    TrainConfig,
)
from ..trust.attribution import ATTRIBUTION_GROUPS
from ..trust.uncertainty import ALL_DYNAMIC, RUNOFF_ONLY

CONFIG_VERSION = 1

FAMILIES = (RECURRENT, OPERATOR, ATTENTION)
PROTOCOLS = ("robustness", "tta", "mc_dropout", "ablation", "traverse",
             "integrated_gradients", "stats")

_SYNTH_DEFAULTS = {
    "n_basins": 4, "start_year": 2000, "n_years": 4, "n_statics": 6,
    "duplicate_m_into_q": False, "coefficient_jitter": 0.15,
    "relaxed_land_use": False,
}
_VARIABLE_DEFAULTS = {
    "alpha": 1.0, "beta1": 0.5, "beta2": 0.3, "gamma": 0.3,
    "p_obs": 1.0, "rho": 0.7,
}
_CSV_DEFAULTS = {"relaxed_land_use": False, "min_observations": 0}
_TRAIN_DEFAULTS = {
    "epochs": 50, "batch_size": 32, "optimizer": "adamw", "lr": 1e-3,
    "weight_decay": 1e-2,
    "schedule": {"kind": "step", "decay": 0.5, "every": 100},
}
_OPTION_DEFAULTS = {
    "n_runs": 10, "noise_sigma": 0.1, "tta_scope": RUNOFF_ONLY,
    "dropout_p": 0.3, "ig_steps": 32, "ig_samples": 8,
    "attribution_groups": list(ATTRIBUTION_GROUPS), "min_kge": 0.1,
}
_MODEL_FIELDS = {
    f.name for f in dataclasses.fields(ModelSpec)
    if f.name not in ("family", "n_dynamic_features",
                      "n_static_features", "n_targets")
}


def _fail(msg, *args):
    raise ConfigurationError(msg % args if args else msg)


def _take(raw, key, default=None, required=False):
    if required and key not in raw:
        _fail("config is missing required key %r", key)
    return raw.get(key, default)


def _check_keys(section, raw, allowed):
    extra = sorted(set(raw) - set(allowed))
    if extra:
        _fail("unknown %s key(s): %s", section, ", ".join(extra))


def _norm_source(raw):
    if not isinstance(raw, dict):
        _fail("source must be an object")
    kind = _take(raw, "kind", required=True)
    if kind == "synth":
        _check_keys("source", raw,
                    ("kind", "variables") + tuple(_SYNTH_DEFAULTS))
        variables = _take(raw, "variables", required=True)
        if not variables:
            _fail("synth source needs at least one variable")
        norm_vars = []
        for v in variables:
            if "name" not in v:
                _fail("every synth variable needs a name")
            _check_keys("variable", v, ("name",) + tuple(_VARIABLE_DEFAULTS))
            entry = {"name": str(v["name"])}
            for key, default in _VARIABLE_DEFAULTS.items():
                entry[key] = float(v.get(key, default))
            norm_vars.append(entry)
        out = {"kind": "synth", "variables": norm_vars}
        for key, default in _SYNTH_DEFAULTS.items():
            value = raw.get(key, default)
            out[key] = type(default)(value)
        return out
    if kind == "csv":
        _check_keys("source", raw, ("kind", "path") + tuple(_CSV_DEFAULTS))
        path = _take(raw, "path", required=True)
        out = {"kind": "csv", "path": str(path)}
        for key, default in _CSV_DEFAULTS.items():
            out[key] = type(default)(raw.get(key, default))
        return out
    _fail("source kind must be 'synth' or 'csv', got %r", kind)


def _norm_split(raw):
    if not isinstance(raw, dict):
        _fail("split must be an object")
    kind = _take(raw, "kind", required=True)
    if kind == "temporal":
        _check_keys("split", raw, ("kind", "test_years"))
        years = _take(raw, "test_years", required=True)
        if not years:
            _fail("temporal split needs at least one test year")
        return {"kind": "temporal",
                "test_years": sorted(int(y) for y in years)}
    if kind == "spatial":
        _check_keys("split", raw, ("kind", "test_fraction", "seed"))
        fraction = float(raw.get("test_fraction", 0.2))
        if not 0.0 < fraction < 1.0:
            _fail("spatial test_fraction must lie in (0, 1)")
        return {"kind": "spatial", "test_fraction": fraction,
                "seed": int(raw.get("seed", 0))}
    _fail("split kind must be 'temporal' or 'spatial', got %r", kind)


def _norm_models(raw):
    if not raw:
        _fail("config needs at least one model")
    plans, names = [], set()
    for entry in raw:
        if not isinstance(entry, dict) or "family" not in entry:
            _fail("every model entry needs a family")
        family = entry["family"]
        if family not in FAMILIES:
            _fail("unknown model family %r (expected one of %s)",
                  family, ", ".join(FAMILIES))
        name = str(entry.get("name", family))
        if name in names:
            _fail("duplicate model name %r", name)
        names.add(name)
        extra = sorted(set(entry) - {"family", "name"} - _MODEL_FIELDS)
        if extra:
            _fail("unknown model option(s) for %r: %s", name,
                  ", ".join(extra))
        plan = {"family": family, "name": name}
        for key in sorted(set(entry) & _MODEL_FIELDS):
            plan[key] = entry[key]
        plans.append(plan)
    return plans


def _norm_schedule(raw):
    if not isinstance(raw, dict):
        _fail("train.schedule must be an object")
    kind = raw.get("kind", "step")
    if kind == "step":
        _check_keys("schedule", raw, ("kind", "decay", "every"))
        return {"kind": "step", "decay": float(raw.get("decay", 0.5)),
                "every": int(raw.get("every", 100))}
    if kind == "cosine":
        _check_keys("schedule", raw, ("kind", "min_lr"))
        return {"kind": "cosine", "min_lr": float(raw.get("min_lr", 1e-6))}
    _fail("schedule kind must be 'step' or 'cosine', got %r", kind)


def _norm_train(raw):
    _check_keys("train", raw, tuple(_TRAIN_DEFAULTS))
    out = {}
    for key, default in _TRAIN_DEFAULTS.items():
        if key == "schedule":
            out[key] = _norm_schedule(raw.get(key, default))
        else:
            out[key] = type(default)(raw.get(key, default))
    return out


def _norm_corruptions(raw):
    groups = []
    for entry in raw:
        if isinstance(entry, str):
            if entry not in CORRUPTION_PRESETS:
                _fail("unknown corruption preset %r (expected one of %s)",
                      entry, ", ".join(sorted(CORRUPTION_PRESETS)))
            groups.append({"kind": entry, "side": FEATURES,
                           "levels": list(CORRUPTION_PRESETS[entry]),
                           "noise_sigma": 0.1})
            continue
        if not isinstance(entry, dict):
            _fail("corruption entries must be names or objects")
        _check_keys("corruption", entry,
                    ("kind", "side", "levels", "noise_sigma"))
        kind = _take(entry, "kind", required=True)
        if kind not in CORRUPTION_PRESETS:
            _fail("unknown corruption kind %r", kind)
        side = entry.get("side", FEATURES)
        if side not in (FEATURES, TARGETS):
            _fail("corruption side must be 'features' or 'targets'")
        if kind == ADVERSARIAL and side != FEATURES:
            _fail("adversarial corruption only applies to features")
        levels = entry.get("levels", list(CORRUPTION_PRESETS[kind]))
        if not levels:
            _fail("corruption %r needs at least one level", kind)
        levels = [float(x) for x in levels]
        if any(not 0.0 < x < 1.0 for x in levels):
            _fail("corruption levels must lie in (0, 1)")
        sigma = float(entry.get("noise_sigma", 0.1))
        if sigma < 0.0:
            _fail("noise_sigma must be non-negative")
        groups.append({"kind": kind, "side": side, "levels": levels,
                       "noise_sigma": sigma})
    return groups


def _norm_protocols(raw):
    protos = list(raw)
    unknown = sorted(set(protos) - set(PROTOCOLS))
    if unknown:
        _fail("unknown protocol(s): %s (expected among %s)",
              ", ".join(unknown), ", ".join(PROTOCOLS))
    if len(set(protos)) != len(protos):
        _fail("protocols must not repeat")
    # keep canonical execution order regardless of listing order
    return [p for p in PROTOCOLS if p in protos]


def _norm_options(raw):
    _check_keys("options", raw, tuple(_OPTION_DEFAULTS))
    out = {}
    for key, default in _OPTION_DEFAULTS.items():
        value = raw.get(key, default)
        if key == "attribution_groups":
            value = [str(g) for g in value]
            unknown = sorted(set(value) - set(ATTRIBUTION_GROUPS))
            if unknown:
                _fail("unknown attribution group(s): %s",
                      ", ".join(unknown))
            if not value:
                _fail("attribution_groups must not be empty")
        elif key == "tta_scope":
            if value not in (RUNOFF_ONLY, ALL_DYNAMIC):
                _fail("tta_scope must be 'runoff_only' or 'all_dynamic'")
        elif isinstance(default, int) and not isinstance(default, bool):
            value = int(value)
            if value < 1:
                _fail("options.%s must be a positive integer", key)
        else:
            value = float(value)
        out[key] = value
    if not 0.0 <= out["dropout_p"] < 1.0:
        _fail("options.dropout_p must lie in [0, 1)")
    if out["noise_sigma"] < 0.0:
        _fail("options.noise_sigma must be non-negative")
    return out


@dataclasses.dataclass
class ExperimentConfig:
    """A validated experiment plan in normalized form."""

    seed: int
    out: str
    source: dict
    split: dict
    models: list
    train: dict
    corruptions: list
    protocols: list
    options: dict

    def normalized(self):
        """Complete plain-data form, defaults filled, stable ordering."""
        return {
            "config_version": CONFIG_VERSION,
            "seed": self.seed,
            "out": self.out,
            "source": self.source,
            "split": self.split,
            "models": self.models,
            "train": self.train,
            "corruptions": self.corruptions,
            "protocols": self.protocols,
            "options": self.options,
        }

    @property
    def config_hash(self):
        payload = json.dumps(self.normalized(), sort_keys=True,
                             separators=(",", ":"), allow_nan=False)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    # -- builders for domain objects ------------------------------------

    def synth_config(self):
        if self.source["kind"] != "synth":
            _fail("source is not synthetic")
        src = self.source
        return SynthConfig(
            n_basins=src["n_basins"], start_year=src["start_year"],
            n_years=src["n_years"],
            variables=tuple(
                SynthVariable(name=v["name"], alpha=v["alpha"],
                              beta1=v["beta1"], beta2=v["beta2"],
                              gamma=v["gamma"], p_obs=v["p_obs"],
                              rho=v["rho"])
                for v in src["variables"]),
            n_statics=src["n_statics"],
            duplicate_m_into_q=src["duplicate_m_into_q"],
            coefficient_jitter=src["coefficient_jitter"],
            relaxed_land_use=src["relaxed_land_use"],
        )

    def split_plan(self):
        if self.split["kind"] == "temporal":
            return SplitPlan(kind="temporal",
                             test_years=tuple(self.split["test_years"]))
        return SplitPlan(kind="spatial",
                         test_fraction=self.split["test_fraction"],
                         seed=self.split["seed"])

    def train_config(self):
        sched = self.train["schedule"]
        if sched["kind"] == "step":
            schedule = StepSchedule(decay=sched["decay"],
                                    every=sched["every"])
        else:
            schedule = CosineSchedule(min_lr=sched["min_lr"])
        return TrainConfig(epochs=self.train["epochs"],
                           batch_size=self.train["batch_size"],
                           optimizer=self.train["optimizer"],
                           lr=self.train["lr"],
                           weight_decay=self.train["weight_decay"],
                           schedule=schedule)

    def model_plans(self):
        """(name, family, spec overrides) per requested model."""
        plans = []
        for plan in self.models:
            kw = {k: v for k, v in plan.items()
                  if k not in ("family", "name")}
            plans.append((plan["name"], plan["family"], kw))
        return plans


def validate_config(raw):
    """Normalize and validate a raw config mapping."""
    if not isinstance(raw, dict):
        _fail("config root must be an object")
    _check_keys("config", raw, ("seed", "out", "source", "split",
                                "models", "train", "corruptions",
                                "protocols", "options"))
    seed = _take(raw, "seed", required=True)
    if not isinstance(seed, int) or isinstance(seed, bool):
        _fail("seed must be an integer")
    if not 0 <= seed < 2 ** 64:
        _fail("seed must fit an unsigned 64-bit integer")
    return ExperimentConfig(
        seed=seed,
        out=str(raw.get("out", "wqbench_out")),
        source=_norm_source(_take(raw, "source", required=True)),
        split=_norm_split(_take(raw, "split", required=True)),
        models=_norm_models(_take(raw, "models", required=True)),
        train=_norm_train(raw.get("train", {})),
        corruptions=_norm_corruptions(raw.get("corruptions", [])),
        protocols=_norm_protocols(raw.get("protocols", list(PROTOCOLS))),
        options=_norm_options(raw.get("options", {})),
    )


def load_config(path):
    """Read and validate a JSON config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        _fail("cannot read config %s: %s", path, exc)
    except json.JSONDecodeError as exc:
        _fail("config %s is not valid JSON: %s", path, exc)
    return validate_config(raw)
