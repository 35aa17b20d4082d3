"""Single-detector physics: start reactions, deposited energy, threshold.

A detector is material + entrance window + energy threshold + amplifier.
Whether an arriving object starts the signal chain is a Bernoulli decision
whose probability depends on the particle/material pair; the deposited
energy then gates the chain (strict exceedance of the threshold energy).
"""

import math
from dataclasses import dataclass

from .amplify import AmplifierModel
from .errors import InoperableDetectorError
from .wavefunction import EntranceWindow

NEUTRON_REST_MASS_EV = 939.56542e6  # CODATA 2018
NONRELATIVISTIC_MAX_RATIO = 0.1


@dataclass(frozen=True)
class Charged:
    """Charged projectile that stops in the detector it hits."""
    kinetic_energy_ev: float
    rest_mass_energy_ev: float
    charge_sign: int = -1

    def __post_init__(self):
        if self.kinetic_energy_ev <= 0.0 or self.rest_mass_energy_ev <= 0.0:
            raise ValueError("energies must be > 0")
        ratio = self.kinetic_energy_ev / self.rest_mass_energy_ev
        if ratio >= NONRELATIVISTIC_MAX_RATIO:
            raise ValueError(
                f"kinetic/rest-mass energy ratio {ratio:.3g} is outside the "
                "nonrelativistic regime (< 0.1)")


@dataclass(frozen=True)
class Neutron:
    kinetic_energy_ev: float

    def __post_init__(self):
        if self.kinetic_energy_ev <= 0.0:
            raise ValueError("energies must be > 0")
        ratio = self.kinetic_energy_ev / NEUTRON_REST_MASS_EV
        if ratio >= NONRELATIVISTIC_MAX_RATIO:
            raise ValueError(
                f"kinetic/rest-mass energy ratio {ratio:.3g} is outside the "
                "nonrelativistic regime (< 0.1)")


@dataclass(frozen=True)
class Photon:
    energy_ev: float

    def __post_init__(self):
        if self.energy_ev <= 0.0:
            raise ValueError("energies must be > 0")


Particle = Charged | Neutron | Photon


@dataclass(frozen=True)
class SecondaryProduct:
    kind: str
    energy_fraction: float
    charged: bool = True


@dataclass(frozen=True)
class StartReactionChannel:
    """Exit channel of the first interaction that seeds the avalanche.

    ``q_value_ev`` is energy released into the secondaries (neutron
    capture); ``work_function_ev`` is energy spent freeing the secondary
    (photo-emission). Both are configuration inputs, not built-in physics.
    """

    name: str
    secondaries: tuple
    q_value_ev: float = 0.0
    work_function_ev: float = 0.0

    def __post_init__(self):
        if not any(s.charged for s in self.secondaries):
            raise ValueError("a start reaction needs a charged secondary")
        total = 0.0
        for s in self.secondaries:
            if not 0.0 < s.energy_fraction <= 1.0:
                raise ValueError("energy fractions must lie in (0, 1]")
            total += s.energy_fraction
        if total > 1.0 + 1e-12:
            raise ValueError("energy fractions must sum to <= 1")


@dataclass(frozen=True)
class BF3Gas:
    """Boron-trifluoride converter gas for thermal neutrons.

    ``opacity`` is the lumped interaction strength n*sigma*L controlling
    exponential attenuation; the capture channel's q_value comes from the
    run configuration.
    """

    q_value_ev: float
    boron10_fraction: float = 0.96
    opacity: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.boron10_fraction <= 1.0:
            raise ValueError("boron10_fraction must lie in [0, 1]")
        if self.opacity < 0.0:
            raise ValueError("opacity must be >= 0")
        if self.q_value_ev < 0.0:
            raise ValueError("q_value_ev must be >= 0")


@dataclass(frozen=True)
class Photocathode:
    work_function_ev: float
    quantum_efficiency: float

    def __post_init__(self):
        if not 0.0 <= self.quantum_efficiency <= 1.0:
            raise ValueError("quantum_efficiency must lie in [0, 1]")
        if self.work_function_ev < 0.0:
            raise ValueError("work_function_ev must be >= 0")


@dataclass(frozen=True)
class ChargedStopper:
    """Bulk stopping medium for charged projectiles."""
    w_value_ev: float = 25.0

    def __post_init__(self):
        if self.w_value_ev <= 0.0:
            raise ValueError("w_value_ev must be > 0")


DetectorMaterial = BF3Gas | Photocathode | ChargedStopper


@dataclass(frozen=True)
class DetectorSpec:
    window: EntranceWindow
    material: DetectorMaterial
    threshold_energy_ev: float
    amplifier: AmplifierModel
    operable: bool = True

    def __post_init__(self):
        if self.threshold_energy_ev < 0.0:
            raise ValueError("threshold_energy_ev must be >= 0")


@dataclass(frozen=True)
class Occurred:
    channel: StartReactionChannel
    deposited_energy_ev: float

    def __post_init__(self):
        if self.deposited_energy_ev <= 0.0:
            raise ValueError("deposited energy must be > 0 when a reaction occurred")


@dataclass(frozen=True)
class NoReaction:
    pass


NO_REACTION = NoReaction()

StartReactionOutcome = Occurred | NoReaction

_IONISATION = StartReactionChannel(
    "ionisation", (SecondaryProduct("electron", 1.0),))


def reaction_channel(particle: Particle, material: DetectorMaterial) -> StartReactionChannel:
    """The exit channel this particle/material pair would open."""
    if isinstance(particle, Charged):
        return _IONISATION
    if isinstance(particle, Neutron) and isinstance(material, BF3Gas):
        # energy split between the two fragments is descriptive only; the
        # position pipeline uses the summed deposited energy
        return StartReactionChannel(
            "neutron_capture",
            (SecondaryProduct("alpha", 0.5), SecondaryProduct("li7", 0.5)),
            q_value_ev=material.q_value_ev)
    if isinstance(particle, Photon) and isinstance(material, Photocathode):
        return StartReactionChannel(
            "photoelectric", (SecondaryProduct("photoelectron", 1.0),),
            work_function_ev=material.work_function_ev)
    raise ValueError(
        f"{type(particle).__name__} cannot start a reaction in "
        f"{type(material).__name__}")


def start_reaction_probability(particle: Particle, det: DetectorSpec) -> float:
    """Probability of a start reaction, conditional on arrival at the window.

    A charged projectile reacts with certainty in any material; a neutron
    is captured with probability b10 * (1 - exp(-opacity)) in BF3; a photon
    converts with the cathode's quantum efficiency. Mismatched pairs give 0.
    """
    if isinstance(particle, Charged):
        return 1.0
    if isinstance(particle, Neutron):
        if isinstance(det.material, BF3Gas):
            m = det.material
            return m.boron10_fraction * (1.0 - math.exp(-m.opacity))
        return 0.0
    if isinstance(particle, Photon):
        if isinstance(det.material, Photocathode):
            return det.material.quantum_efficiency
        return 0.0
    raise TypeError(f"unknown particle {particle!r}")


def deposited_energy(particle: Particle, channel: StartReactionChannel) -> float:
    """Energy left in the detector by the start reaction, in eV.

    Charged projectiles deposit their full kinetic energy (stopping
    detector); neutron capture adds the channel's q-value; photo-emission
    subtracts the work function (clamped at zero).
    """
    if isinstance(particle, Charged):
        return particle.kinetic_energy_ev
    if isinstance(particle, Neutron):
        return particle.kinetic_energy_ev + channel.q_value_ev
    if isinstance(particle, Photon):
        return max(particle.energy_ev - channel.work_function_ev, 0.0)
    raise TypeError(f"unknown particle {particle!r}")


def check_threshold(deposited_ev: float, threshold_ev: float) -> bool:
    """Strict energy gate: the chain only proceeds when E_dep > E_thr."""
    if deposited_ev < 0.0 or threshold_ev < 0.0:
        raise ValueError("energies must be >= 0")
    return deposited_ev > threshold_ev


def attempt_start_reaction(particle: Particle, det: DetectorSpec, rng) -> StartReactionOutcome:
    """Bernoulli start-reaction decision for one arrival at this detector.

    Always consumes exactly one uniform draw, mirroring the trial kernels.
    Raises InoperableDetectorError when the reaction would have happened in
    a dead detector, so the caller can log the trial instead of crashing.
    """
    prob = start_reaction_probability(particle, det)
    u = rng.uniform()
    if u >= prob:
        return NO_REACTION
    channel = reaction_channel(particle, det.material)
    edep = deposited_energy(particle, channel)
    if edep <= 0.0:
        # zero-energy exit channel cannot seed the avalanche, so the
        # interaction does not qualify as a start reaction
        return NO_REACTION
    if not det.operable:
        raise InoperableDetectorError(det.window.detector_index)
    return Occurred(channel, edep)
