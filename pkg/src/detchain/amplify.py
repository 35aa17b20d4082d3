"""Avalanche amplification: one reaction's products become many carriers.

Three interchangeable gain mechanisms are modeled. A dynode chain is a
Galton-Watson branching process with Poisson offspring per stage; gas
multiplication and semiconductor collection keep the primary-carrier
count and apply gain on the collected charge.
"""

from dataclasses import dataclass

ELEMENTARY_CHARGE_C = 1.602176634e-19  # exact SI value


@dataclass(frozen=True)
class DynodeChain:
    """Sequential emission stages; stage i emits Poisson(stage_means[i])
    carriers per incoming carrier."""

    stage_means: tuple

    def __post_init__(self):
        means = tuple(float(d) for d in self.stage_means)
        if not means or any(d <= 0.0 for d in means):
            raise ValueError("stage means must be positive")
        object.__setattr__(self, "stage_means", means)


@dataclass(frozen=True)
class GasGain:
    w_value_ev: float
    gain: float

    def __post_init__(self):
        if self.w_value_ev <= 0.0:
            raise ValueError("w_value_ev must be > 0")
        if self.gain < 1.0:
            raise ValueError("gain must be >= 1")


@dataclass(frozen=True)
class Semiconductor:
    pair_energy_ev: float
    collection_efficiency: float = 1.0

    def __post_init__(self):
        if self.pair_energy_ev <= 0.0:
            raise ValueError("pair_energy_ev must be > 0")
        if not 0.0 <= self.collection_efficiency <= 1.0:
            raise ValueError("collection_efficiency must lie in [0, 1]")


AmplifierModel = DynodeChain | GasGain | Semiconductor


@dataclass(frozen=True)
class AvalancheResult:
    carrier_count: int
    collected_charge_c: float

    def __post_init__(self):
        if self.carrier_count < 0 or self.collected_charge_c < 0.0:
            raise ValueError("avalanche result must be nonnegative")


def primary_carriers(deposited_ev: float, model: AmplifierModel, rng) -> int:
    """Number of carriers seeding the avalanche for one reaction.

    Gas and semiconductor primaries are Poisson with mean E_dep / w (the
    collection-thinned Poisson is sampled directly: thinning a Poisson by
    p gives a Poisson with mean scaled by p). A dynode chain starts from
    the single ejected photoelectron.
    """
    if deposited_ev < 0.0:
        raise ValueError("deposited energy must be >= 0")
    if isinstance(model, DynodeChain):
        return 1 if deposited_ev > 0.0 else 0
    if isinstance(model, GasGain):
        return rng.poisson(deposited_ev / model.w_value_ev)
    if isinstance(model, Semiconductor):
        mean = deposited_ev / model.pair_energy_ev * model.collection_efficiency
        return rng.poisson(mean)
    raise TypeError(f"unknown amplifier {model!r}")


def mean_primary_carriers(deposited_ev: float, model: AmplifierModel) -> float:
    if isinstance(model, DynodeChain):
        return 1.0 if deposited_ev > 0.0 else 0.0
    if isinstance(model, GasGain):
        return deposited_ev / model.w_value_ev
    if isinstance(model, Semiconductor):
        return deposited_ev / model.pair_energy_ev * model.collection_efficiency
    raise TypeError(f"unknown amplifier {model!r}")


def charge_per_carrier(model: AmplifierModel) -> float:
    """Collected charge contributed by one final carrier, in coulombs."""
    if isinstance(model, GasGain):
        return ELEMENTARY_CHARGE_C * model.gain
    return ELEMENTARY_CHARGE_C


def mean_final_carriers(primaries: float, model: AmplifierModel) -> float:
    """Expected carrier count after amplification (branching mean)."""
    if isinstance(model, DynodeChain):
        out = float(primaries)
        for d in model.stage_means:
            out *= d
        return out
    return float(primaries)


def amplify(primaries: int, model: AmplifierModel, rng) -> AvalancheResult:
    """Grow ``primaries`` carriers through the amplifier.

    The dynode chain advances one Poisson draw per stage using the
    superposition identity (the sum of n independent Poisson(d) offspring
    counts is Poisson(n*d)), which is exact in distribution and keeps the
    cost independent of the avalanche size.
    """
    if primaries < 0:
        raise ValueError("primaries must be >= 0")
    cpc = charge_per_carrier(model)
    if isinstance(model, DynodeChain):
        pop = primaries
        for d in model.stage_means:
            if pop == 0:
                break
            pop = rng.poisson(pop * d)
        return AvalancheResult(pop, pop * cpc)
    if isinstance(model, (GasGain, Semiconductor)):
        return AvalancheResult(primaries, primaries * cpc)
    raise TypeError(f"unknown amplifier {model!r}")
