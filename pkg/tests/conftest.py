"""Shared builders for the standard test configurations."""

import pytest

from detchain import (Charged, ChargedStopper, DetectorSpec,
                      DiscriminatorSpec, EntranceWindow, GasGain, Neutron,
                      PulseShaping, SourceSpec, gaussian_packet)
from detchain.detector import BF3Gas

# Partition of [-8, 8] sigma chosen so every window carries enough
# probability for healthy 4-sigma binomial statistics (no near-empty tails).
GAUSS_EDGES = [-8.0, -1.5, -0.8, -0.35, 0.0, 0.35, 0.8, 1.5, 8.0]

PROTON_REST_EV = 9.38272088e8


def standard_packet(points=4001):
    return gaussian_packet(0.0, 1.0, -8.0, 8.0, points)


def charged_template(kinetic_ev=1.0e5):
    return Charged(kinetic_energy_ev=kinetic_ev,
                   rest_mass_energy_ev=PROTON_REST_EV, charge_sign=1)


def standard_shaping(amplitude_per_coulomb=2.5e13):
    return PulseShaping(amplitude_per_coulomb=amplitude_per_coulomb,
                        rise_time_s=5.0e-9, decay_time_s=5.0e-8)


def standard_discriminator(threshold_v=0.2):
    return DiscriminatorSpec(threshold_v=threshold_v)


def gauss8_detectors(threshold_ev=1.0e4, operable_mask=None):
    dets = []
    for i in range(8):
        lo, hi = GAUSS_EDGES[i], GAUSS_EDGES[i + 1]
        operable = True if operable_mask is None else bool(operable_mask[i])
        dets.append(DetectorSpec(
            window=EntranceWindow(center=(lo + hi) / 2, width=hi - lo,
                                  detector_index=i + 1),
            material=ChargedStopper(w_value_ev=25.0),
            threshold_energy_ev=threshold_ev,
            amplifier=GasGain(w_value_ev=25.0, gain=50.0),
            operable=operable))
    return tuple(dets)


def gauss8_source(kinetic_ev=1.0e5, points=4001):
    return SourceSpec(standard_packet(points), charged_template(kinetic_ev))


def full_cover_detector(material=None, threshold_ev=1.0e4, amplifier=None,
                        operable=True):
    """One detector whose window swallows the whole grid support."""
    return DetectorSpec(
        window=EntranceWindow(center=0.0, width=20.0, detector_index=1),
        material=material or ChargedStopper(w_value_ev=25.0),
        threshold_energy_ev=threshold_ev,
        amplifier=amplifier or GasGain(w_value_ev=25.0, gain=50.0),
        operable=operable)


def bf3_detector(opacity=1.2, boron10_fraction=0.96, q_value_ev=2.31e6):
    return DetectorSpec(
        window=EntranceWindow(center=0.0, width=20.0, detector_index=1),
        material=BF3Gas(q_value_ev=q_value_ev,
                        boron10_fraction=boron10_fraction, opacity=opacity),
        threshold_energy_ev=1.0e4,
        amplifier=GasGain(w_value_ev=25.0, gain=50.0))


def neutron_source(kinetic_ev=0.025, points=2001):
    return SourceSpec(gaussian_packet(0.0, 1.0, -8.0, 8.0, points),
                      Neutron(kinetic_energy_ev=kinetic_ev))


@pytest.fixture(scope="session")
def gauss8():
    """(source, detectors, shaping, discriminator) for the 8-window setup."""
    return (gauss8_source(), gauss8_detectors(), standard_shaping(),
            standard_discriminator())
