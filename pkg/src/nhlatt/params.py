"""
Validated parameter sets, one per command. Unknown keys are rejected so a
typo in a config file fails loudly instead of running with defaults.
"""

import math
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .lattice import central_site


class CommandArgs(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GeometryArgs(CommandArgs):
    L: int = Field(description="Number of sites")
    q: Optional[int] = Field(default=None, description="Impurity site; central if unset")

    @model_validator(mode="after")
    def resolve_site(self):
        if self.L < 2:
            raise ValueError(f"L must be at least 2, got {self.L}")
        if self.q is None:
            self.q = central_site(self.L)
        if not 1 <= self.q <= self.L:
            raise ValueError(f"q out of range: q={self.q} not in [1, {self.L}]")
        return self


class MomentumArgs(CommandArgs):
    k: Optional[float] = None
    k_pi: Optional[float] = Field(default=None, description="k as a fraction of pi")

    @model_validator(mode="after")
    def resolve_k(self):
        if self.k is None and self.k_pi is None:
            raise ValueError("one of k or k_pi is required")
        if self.k is not None and self.k_pi is not None:
            raise ValueError("give k or k_pi, not both")
        if self.k is None:
            self.k = self.k_pi * math.pi
        if not 0.0 < self.k < math.pi:
            raise ValueError(f"k must lie in (0, pi), got {self.k}")
        return self


class GammaGridArgs(CommandArgs):
    gamma_min: float = Field(default=0.0, ge=0.0)
    gamma_max: float = Field(default=10.0, ge=0.0)
    points: int = Field(default=41, ge=1)

    @model_validator(mode="after")
    def check_range(self):
        if self.points > 1 and self.gamma_max <= self.gamma_min:
            raise ValueError("gamma_max must exceed gamma_min")
        return self


class SpectrumArgs(GeometryArgs, GammaGridArgs):
    gamma: float = Field(default=0.0, ge=0.0)
    V: Optional[float] = None
    vectors: bool = False
    backend: Literal["dense-qr", "charpoly-roots"] = "dense-qr"
    sweep: bool = False

    @model_validator(mode="after")
    def check_backend(self):
        if self.V is not None and self.backend == "charpoly-roots":
            raise ValueError("charpoly-roots backend supports only the absorbing impurity")
        if self.V is not None and self.gamma:
            raise ValueError("give gamma or V, not both")
        return self


class PacketArgs(GeometryArgs, MomentumArgs):
    sigma: float = Field(gt=1.0)
    j0: Optional[int] = None


class ScatterArgs(PacketArgs):
    gamma: float = Field(ge=0.0)
    t_obs: Optional[float] = Field(default=None, gt=0.0)
    series_stride: Optional[float] = Field(default=None, gt=0.0)


class ScanGammaArgs(PacketArgs, GammaGridArgs):
    t_obs: Optional[float] = Field(default=None, gt=0.0)


class ScanKArgs(GeometryArgs, GammaGridArgs):
    sigma: float = Field(gt=1.0)
    j0: Optional[int] = None
    k_values: list[float] = Field(default_factory=list)
    k_pi_values: list[float] = Field(default_factory=list)

    @model_validator(mode="after")
    def merge_k(self):
        ks = sorted(set(self.k_values) | {f * math.pi for f in self.k_pi_values})
        if not ks:
            raise ValueError("at least one k value is required")
        if any(not 0.0 < k < math.pi for k in ks):
            raise ValueError("every k must lie in (0, pi)")
        self.k_values, self.k_pi_values = ks, []
        return self


class ScanQArgs(CommandArgs):
    L: int = Field(ge=2)
    q_values: list[int] = Field(min_length=1)
    gamma_min: float = Field(default=0.5, ge=0.0)
    gamma_max: float = Field(default=4.0, gt=0.0)

    @model_validator(mode="after")
    def check_sites(self):
        bad = [q for q in self.q_values if not 1 <= q <= self.L]
        if bad:
            raise ValueError(f"q out of range: {bad} not in [1, {self.L}]")
        return self


class BoundStateArgs(GeometryArgs):
    gamma: Optional[float] = Field(default=None, ge=0.0)
    V: Optional[float] = None
    map_gamma: list[float] = Field(default_factory=list)
    min_r_squared: float = Field(default=0.99, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def one_impurity(self):
        if not self.map_gamma and (self.gamma is None) == (self.V is None):
            raise ValueError("give exactly one of gamma or V")
        return self


class EpLocateArgs(GeometryArgs):
    gamma_min: float = Field(default=1.5, ge=0.0)
    gamma_max: float = Field(default=2.5, gt=0.0)
    objective: Literal["min-gap", "all-pairs", "central-pair"] = "min-gap"
    grid_points: int = Field(default=41, ge=5)


class ClassifyArgs(CommandArgs):
    L_values: list[int] = Field(min_length=1)
    q: Optional[int] = None

    @model_validator(mode="after")
    def check_lengths(self):
        if any(L < 2 for L in self.L_values):
            raise ValueError("every L must be at least 2")
        if self.q is not None and any(not 1 <= self.q <= L for L in self.L_values):
            raise ValueError(f"q out of range for one of L={self.L_values}")
        return self


class ProfilesArgs(GeometryArgs):
    gamma: float = Field(default=0.0, ge=0.0)
    indices: list[int] = Field(default_factory=list)


class ContinuumArgs(MomentumArgs, GammaGridArgs):
    points: int = Field(default=101, ge=1)
    hbar: float = Field(default=1.0, gt=0.0)
    m: float = Field(default=0.5, gt=0.0)


COMMAND_ARGS: dict[str, type[CommandArgs]] = {
    "spectrum": SpectrumArgs,
    "scatter": ScatterArgs,
    "scan-gamma": ScanGammaArgs,
    "scan-k": ScanKArgs,
    "scan-q": ScanQArgs,
    "bound-state": BoundStateArgs,
    "ep-locate": EpLocateArgs,
    "classify-ep": ClassifyArgs,
    "profiles": ProfilesArgs,
    "continuum": ContinuumArgs,
}
