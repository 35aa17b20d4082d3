"""detchain: Monte Carlo simulation of single-particle counting detectors.

Models the detection of one quantum object at a time by an array of
counting detectors: Born-rule localization at the entrance windows, a
material-dependent start reaction, stochastic avalanche amplification,
and a discriminator/counter readout chain. Includes a two-detector spin
measurement scenario built on the same chain.

The per-trial hot loop runs on a compiled kernel when available and on a
bit-identical pure-Python fallback otherwise; ``kernel_backend()`` reports
which lane is active.
"""

from .amplify import (AvalancheResult, DynodeChain, GasGain, Semiconductor,
                      amplify, primary_carriers)
from .config import RunConfig, load_config
from .detector import (BF3Gas, Charged, ChargedStopper, DetectorSpec,
                       Neutron, NoReaction, Occurred, Photocathode, Photon,
                       attempt_start_reaction, check_threshold,
                       deposited_energy, start_reaction_probability)
from .errors import (ConfigMismatchError, ConfigParseError,
                     ConfigValidationError, DetchainError,
                     IncompleteLogError, InoperableDetectorError,
                     InvalidShapingError, MiscalibratedApparatusError,
                     ZeroNormError)
from .experiment import (EventLog, EventRecord, ExperimentReport, SourceSpec,
                         run_experiment, verify_born_agreement,
                         verify_one_to_one)
from .kernel import backend as _kernel_backend
from .readout import (CounterMemory, DiscriminatorSpec, PulseShaping,
                      PulseTrace, count, discriminate, shape_pulse)
from .rng import RandomStream
from .sterngerlach import (ReducedState, Spin, SpinorPacket, measure_position,
                           pass_magnet, run_spin_experiment)
from .wavefunction import (ArrivalOutcome, EntranceWindow, Hit, Miss,
                           Wavefunction, expected_counts, gaussian_packet,
                           normalize, sample_arrival, window_probability)

__version__ = "0.1.0"


def kernel_backend() -> str:
    """Name of the active trial-kernel lane: 'cython' or 'python'."""
    return _kernel_backend
