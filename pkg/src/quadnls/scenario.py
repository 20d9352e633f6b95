"""Scenario files: YAML documents describing initial data, truncation and integrator settings.

Schema (``schema_version: 1``)::

    schema_version: 1
    name: small_pair
    K: 8
    form: auto            # rotating | lab | auto (rotating when Re u_0 = 0)
    initial:              # exactly one of constant / modes / function
      function: eix_pair  # eps (e^{ix} + e^{-ix}) + i mu0
      mu0: 1.0e-3
      epsilon: 0.0223606797749979
    integrator: {rel_tol: 1.0e-10, abs_tol: 1.0e-12, max_step: 1.0,
                 blowup_threshold: 1.0e+8, max_time: 100}
    outputs: [timeseries, events, summary]
    sweep: {mu0: [...], nu0: [...], K: [...]}
    barrier: {mu0: 0.1, f0: 0.01, B: 1.0, n_samples: 65}
    verify: {t: 0.1, panels: 64, K_max: 16}

Complex numbers are written as ``[re, im]``, a plain number, or a Python-style
string such as ``"1+1j"``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import yaml

from .integrate import IntegratorConfig
from .spectral import SpectralState

SCHEMA_VERSION = 1
PRESETS = ("eix_pair", "eix")


class ScenarioError(ValueError):
    pass


def parse_complex(value):
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ScenarioError(f"complex value needs [re, im], got {value!r}")
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        try:
            return complex(value.replace(" ", ""))
        except ValueError as exc:
            raise ScenarioError(f"cannot parse complex value {value!r}") from exc
    if isinstance(value, (int, float)):
        return complex(value)
    raise ScenarioError(f"cannot parse complex value {value!r}")


def preset_state(name, K, mu0=0.0, epsilon=0.0):
    if name == "eix_pair":
        return SpectralState.from_modes({0: 1j * mu0, 1: epsilon, -1: epsilon}, K)
    if name == "eix":
        return SpectralState.from_modes({0: 1j * mu0, 1: epsilon}, K)
    raise ScenarioError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}")


def pair_state(mu0, nu0, K):
    """``eix_pair`` preset with oscillation energy ``nu0`` split evenly over modes +-1."""
    return preset_state("eix_pair", K, mu0, math.sqrt(nu0 / 2))


@dataclass
class Scenario:
    name: str
    K: int
    initial: dict
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    form: str = "auto"
    outputs: list = field(default_factory=lambda: ["timeseries", "events", "summary"])
    sweep: dict = field(default_factory=dict)
    barrier: dict = field(default_factory=dict)
    verify: dict = field(default_factory=dict)

    def initial_state(self):
        spec = self.initial
        keys = {"constant", "modes", "function"} & set(spec)
        if len(keys) != 1:
            raise ScenarioError("initial needs exactly one of constant, modes, function")
        if "constant" in spec:
            return SpectralState.from_modes({0: parse_complex(spec["constant"])}, self.K)
        if "modes" in spec:
            modes = {}
            for entry in spec["modes"]:
                if len(entry) != 3:
                    raise ScenarioError(f"mode entries are [k, re, im], got {entry!r}")
                k, re, im = entry
                modes[int(k)] = complex(float(re), float(im))
            try:
                return SpectralState.from_modes(modes, self.K)
            except ValueError as exc:
                raise ScenarioError(str(exc)) from exc
        return preset_state(spec["function"], self.K, float(spec.get("mu0", 0.0)),
                            float(spec.get("epsilon", 0.0)))

    def system_form(self, state=None):
        if self.form in ("rotating", "lab"):
            return self.form
        if self.form != "auto":
            raise ScenarioError(f"form must be rotating, lab or auto, got {self.form!r}")
        state = self.initial_state() if state is None else state
        return "rotating" if state.u0.real == 0 else "lab"


def scenario_from_dict(doc):
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a mapping")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ScenarioError(f"unsupported schema_version {version!r}; expected {SCHEMA_VERSION}")
    K = doc.get("K")
    if not isinstance(K, int) or K < 1:
        raise ScenarioError(f"K must be an integer >= 1, got {K!r}")
    try:
        integrator = IntegratorConfig(**{k: (bool(v) if k == "stop_at_mu_zero" else float(v))
                                         for k, v in (doc.get("integrator") or {}).items()})
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"bad integrator section: {exc}") from exc
    sc = Scenario(
        name=str(doc.get("name", "scenario")),
        K=K,
        initial=doc.get("initial") or {"constant": 0},
        integrator=integrator,
        form=str(doc.get("form", "auto")),
        outputs=list(doc.get("outputs", ["timeseries", "events", "summary"])),
        sweep=dict(doc.get("sweep") or {}),
        barrier=dict(doc.get("barrier") or {}),
        verify=dict(doc.get("verify") or {}),
    )
    sc.initial_state()
    return sc


def load_scenario(path):
    with open(path) as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ScenarioError(f"{path}: {exc}") from exc
    return scenario_from_dict(doc)
