"""Physical parameters, unit systems and the preset catalogue of media."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import Mapping

import numpy as np
from scipy import constants

from .errors import InvalidParameterError, SingularityError
from .kernels import InteractionKernel
from .nonlinearity import Nonlinearity, gp_coupling_from_scattering_length, sound_speed_sq

EXTERNAL_MODES = ("none", "neutralizing_background", "jeans_swindle")
PRESET_NAMES = (
    "self_gravity",
    "quantum_plasma",
    "mot_cloud",
    "bec_contact",
    "fermion_gas",
    "log_fluid",
    "chemotaxis",
    "nmc_gravity",
    "free",
)
UNIT_SYSTEMS = ("natural", "SI")


@dataclass(frozen=True)
class PhysicalParams:
    m: float = 1.0
    hbar: float = 1.0
    n0: float = 1.0

    def __post_init__(self):
        for name in ("m", "hbar", "n0"):
            val = getattr(self, name)
            if not np.isfinite(val):
                raise InvalidParameterError(name, "must be finite")
        if not self.m > 0:
            raise InvalidParameterError("m", "particle mass must be positive")
        if self.hbar < 0:
            raise InvalidParameterError("hbar", "must be non-negative (0 selects the classical limit)")
        if not self.n0 > 0:
            raise InvalidParameterError("n0", "background density must be positive")

    @property
    def classical(self):
        return self.hbar == 0


@dataclass(frozen=True)
class MediumSpec:
    params: PhysicalParams
    kernel: InteractionKernel = field(default_factory=InteractionKernel.none)
    nonlinearity: Nonlinearity = field(default_factory=Nonlinearity.none)
    external_potential_mode: str = "none"
    name: str = "custom"

    def __post_init__(self):
        if self.external_potential_mode not in EXTERNAL_MODES:
            raise InvalidParameterError(
                "external_potential_mode", f"expected one of {EXTERNAL_MODES}"
            )

    @property
    def zeroes_k0(self):
        """Whether the homogeneous interaction mode is removed."""
        return self.external_potential_mode in ("neutralizing_background", "jeans_swindle")

    @cached_property
    def cs2(self) -> float:
        return sound_speed_sq(self.nonlinearity, self.params)


@dataclass(frozen=True)
class MediumPreset:
    name: str
    parameters: Mapping = field(default_factory=dict)
    units: str = "natural"

    def __post_init__(self):
        name = self.name.replace("-", "_")
        aliases = {"nmc": "nmc_gravity", "plasma": "quantum_plasma", "mot": "mot_cloud",
                   "bec": "bec_contact", "fermion": "fermion_gas", "gravity": "self_gravity"}
        name = aliases.get(name, name)
        if name not in PRESET_NAMES:
            raise InvalidParameterError("name", f"unknown preset {self.name!r}; choose from {PRESET_NAMES}")
        if self.units not in UNIT_SYSTEMS:
            raise InvalidParameterError("units", f"expected one of {UNIT_SYSTEMS}")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "parameters", MappingProxyType(dict(self.parameters)))


def unit_defaults(units="natural"):
    """Default constants of a unit system.

    Natural units set ``m = ħ = n₀ = c = ε₀ = 1``; the default gravitational
    constant ``1/4π`` then gives ``Ω_J = 1``.  In SI the constants are CODATA
    values and ``m``/``n₀`` have no default.
    """
    if units == "natural":
        return {"m": 1.0, "hbar": 1.0, "n0": 1.0, "G": 1.0 / (4.0 * math.pi),
                "e": 1.0, "eps0": 1.0, "c": 1.0}
    if units == "SI":
        return {"hbar": constants.hbar, "G": constants.G, "e": constants.e,
                "eps0": constants.epsilon_0, "c": constants.c}
    raise InvalidParameterError("units", f"expected one of {UNIT_SYSTEMS}")


def jeans_frequency(G, m, n0):
    return math.sqrt(4.0 * math.pi * G * m * n0)


def plasma_frequency(e, eps0, m, n0):
    return math.sqrt(e**2 * n0 / (eps0 * m))


def mot_charge(sigma_R, sigma_L, I0, c):
    """Effective atomic charge of a magneto-optical trap cloud."""
    return (sigma_R - sigma_L) * sigma_L * I0 / c


def nmc_kernel(alpha, beta, gamma_nmc, m):
    """Kernel whose ``(n₀/m)Ṽ k²`` term is the NMC gravity self-interaction term."""
    if alpha == 0:
        return InteractionKernel.nmc_pure(gamma_nmc * m**2 / (16 * math.pi), beta * m**2 / (4 * math.pi))

    def vk(k):
        k2 = np.asarray(k, dtype=float) ** 2
        den = 1.0 + 3.0 * alpha * k2
        if np.any(den == 0):
            raise SingularityError("NMC pole 1 + 3αk² = 0", float(np.sqrt(k2[den == 0][0])))
        return -(m**2) * ((alpha * gamma_nmc - beta / 2) * k2 + gamma_nmc / 4) / (den * k2)

    return InteractionKernel.custom(vk, label="nmc")


def _positive(p, key):
    val = float(p[key])
    if not val > 0:
        raise InvalidParameterError(key, "must be positive")
    return val


_KNOWN = {
    "self_gravity": {"G", "omega_j"},
    "quantum_plasma": {"e", "eps0", "omega_p"},
    "mot_cloud": {"sigma_R", "sigma_L", "I0", "c"},
    "bec_contact": {"g", "a_s"},
    "fermion_gas": {"d"},
    "log_fluid": {"a", "b"},
    "chemotaxis": {"lam"},
    "nmc_gravity": {"alpha", "beta", "gamma_nmc", "G"},
    "free": set(),
}
_COMMON = {"m", "hbar", "n0", "cs2", "nonlinearity"}


def build_medium(preset: MediumPreset) -> MediumSpec:
    """Expand a preset into a full :class:`MediumSpec`.

    Poisson couplings follow ``G_kernel = -m²G`` (gravity), ``e²/4πε₀``
    (plasma), ``Q/4π`` (MOT cloud) and ``-λm²/4π`` (chemotaxis).  A ``cs2``
    entry adds a contact nonlinearity ``μ = g n`` with ``g = c_s² m/n₀``,
    unless the preset fixes its own nonlinearity.
    """
    name = preset.name
    unknown = set(preset.parameters) - _KNOWN[name] - _COMMON
    if unknown:
        raise InvalidParameterError(sorted(unknown)[0], f"not a parameter of preset {name!r}")
    p = dict(unit_defaults(preset.units))
    if name == "chemotaxis":
        p["hbar"] = 0.0
    p.update(preset.parameters)
    for key in ("m", "n0"):
        if key not in p:
            raise InvalidParameterError(key, f"required in {preset.units} units")
    params = PhysicalParams(float(p["m"]), float(p["hbar"]), float(p["n0"]))
    m, n0 = params.m, params.n0

    nl = p.get("nonlinearity")
    if nl is None and "cs2" in p and float(p["cs2"]) != 0.0:
        nl = Nonlinearity.gross_pitaevskii(float(p["cs2"]) * m / n0)
    nl = nl or Nonlinearity.none()
    kernel = InteractionKernel.none()
    mode = "none"

    if name == "self_gravity":
        if "omega_j" in preset.parameters:
            G = _positive(p, "omega_j") ** 2 / (4.0 * math.pi * m * n0)
        else:
            G = _positive(p, "G")
        kernel = InteractionKernel.poisson(-(m**2) * G)
        mode = "jeans_swindle"
    elif name == "quantum_plasma":
        eps0 = _positive(p, "eps0")
        if "omega_p" in preset.parameters:
            e2 = _positive(p, "omega_p") ** 2 * eps0 * m / n0
        else:
            e2 = _positive(p, "e") ** 2
        kernel = InteractionKernel.poisson(e2 / (4.0 * math.pi * eps0))
        mode = "neutralizing_background"
    elif name == "mot_cloud":
        for key in ("sigma_R", "sigma_L", "I0"):
            if key not in p:
                raise InvalidParameterError(key, "required for mot_cloud")
        Q = mot_charge(float(p["sigma_R"]), float(p["sigma_L"]), _positive(p, "I0"), _positive(p, "c"))
        if Q != 0.0:
            kernel = InteractionKernel.poisson(Q / (4.0 * math.pi))
            mode = "neutralizing_background"
    elif name == "bec_contact":
        if "g" in p:
            g = float(p["g"])
        elif "a_s" in p:
            g = gp_coupling_from_scattering_length(float(p["a_s"]), params.hbar, m)
        elif "cs2" in p:
            g = float(p["cs2"]) * m / n0
        else:
            raise InvalidParameterError("g", "bec_contact needs g, a_s or cs2")
        nl = Nonlinearity.gross_pitaevskii(g)
    elif name == "fermion_gas":
        d = int(p.get("d", 3))
        if d not in (1, 2, 3):
            raise InvalidParameterError("d", "dimension must be 1, 2 or 3")
        nl = Nonlinearity.fermion(params.hbar, m, d)
    elif name == "log_fluid":
        a = _positive(p, "a") if "a" in p else 1.0
        if "b" not in p:
            raise InvalidParameterError("b", "log_fluid needs b")
        nl = Nonlinearity.logarithmic(a, float(p["b"]))
    elif name == "chemotaxis":
        if "lam" not in p:
            raise InvalidParameterError("lam", "chemotaxis needs the coupling lam")
        lam = float(p["lam"])
        if lam != 0.0:
            kernel = InteractionKernel.poisson(-lam * m**2 / (4.0 * math.pi))
            mode = "neutralizing_background"
    elif name == "nmc_gravity":
        for key in ("alpha", "beta", "gamma_nmc"):
            if key not in p:
                raise InvalidParameterError(key, "required for nmc_gravity")
        kernel = nmc_kernel(float(p["alpha"]), float(p["beta"]), float(p["gamma_nmc"]), m)
        mode = "jeans_swindle"

    return MediumSpec(params, kernel, nl, mode, name=name)


def coupling_frequency_sq(medium: MediumSpec) -> float:
    """``4π G_kernel n₀/m`` for Poisson kernels (``Ω_p²``, ``-Ω_J²``, ...)."""
    if medium.kernel.form != "poisson":
        raise InvalidParameterError("kernel", "only defined for Poisson kernels")
    return 4.0 * math.pi * medium.kernel.coupling * medium.params.n0 / medium.params.m
