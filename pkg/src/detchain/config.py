"""Run configuration: YAML schema, validation, normalization.

``load_config`` parses a YAML file into a fully validated RunConfig and
reports every violation with its field path. Validation also runs the
gain/threshold consistency check: when a detector's deposited energy
passes the energy gate, the configured gains have to make the voltage
discriminator fire too; configurations where that is doubtful get a
warning (not an error) naming the detector.
"""

import math
from dataclasses import dataclass, field

import yaml

from .amplify import (DynodeChain, GasGain, Semiconductor,
                      charge_per_carrier, mean_final_carriers,
                      mean_primary_carriers)
from .detector import (BF3Gas, Charged, ChargedStopper, DetectorSpec,
                       Neutron, Photocathode, Photon, deposited_energy,
                       reaction_channel, start_reaction_probability)
from .errors import ConfigParseError, ConfigValidationError
from .experiment import MAX_MEAN_CARRIERS, SourceSpec
from .readout import DiscriminatorSpec, PulseShaping
from .wavefunction import (EntranceWindow, gaussian_packet, packet_from_table,
                           two_gaussian_packet, uniform_packet,
                           validate_windows)


@dataclass(frozen=True)
class SternGerlachConfig:
    alpha: complex
    beta: complex
    separation_m: float
    up_detector: DetectorSpec
    down_detector: DetectorSpec


@dataclass(frozen=True)
class RunConfig:
    events: int
    seed: int
    workers: int
    retain_event_log: bool
    event_log_cap: int
    chi_square_quantile: float
    dump_pulses: tuple
    source: SourceSpec
    detectors: tuple
    shaping: PulseShaping
    trace_dt_s: float
    trace_duration_s: float
    discriminator: DiscriminatorSpec
    stern_gerlach: SternGerlachConfig | None
    output_dir: str
    warnings: tuple = field(default_factory=tuple)
    normalized: dict = field(default_factory=dict, repr=False)


_REQUIRED = object()


class _Collector:
    def __init__(self):
        self.errors = []

    def add(self, path, message):
        self.errors.append(f"{path}: {message}")

    def get(self, mapping, path, key, expected=None, default=_REQUIRED):
        if not isinstance(mapping, dict) or key not in mapping:
            if default is not _REQUIRED:
                return default
            self.add(f"{path}.{key}", "missing required field")
            return None
        value = mapping[key]
        if expected is not None and not isinstance(value, expected):
            if expected is float and isinstance(value, int) \
                    and not isinstance(value, bool):
                return float(value)
            self.add(f"{path}.{key}",
                     f"expected {getattr(expected, '__name__', expected)}, "
                     f"got {type(value).__name__}")
            return None
        return value

    def raise_if_any(self):
        if self.errors:
            raise ConfigValidationError("; ".join(self.errors))


def _all_present(*values):
    return all(v is not None for v in values)


def _build_wavefunction(block, path, col):
    if not isinstance(block, dict):
        col.add(path, "expected a mapping")
        return None
    form = col.get(block, path, "form", str)
    if form == "table":
        rows = col.get(block, path, "rows", list)
        if rows is None:
            return None
        try:
            return packet_from_table(rows)
        except (ValueError, TypeError) as exc:
            col.add(f"{path}.rows", str(exc))
            return None
    grid = col.get(block, path, "grid", dict)
    if grid is None:
        return None
    gmin = col.get(grid, f"{path}.grid", "min_m", float)
    gmax = col.get(grid, f"{path}.grid", "max_m", float)
    points = col.get(grid, f"{path}.grid", "points", int)
    if None in (gmin, gmax, points):
        return None
    if points < 2:
        col.add(f"{path}.grid.points", "need at least 2 grid points")
        return None
    if gmax <= gmin:
        col.add(f"{path}.grid", "max_m must exceed min_m")
        return None
    try:
        if form == "gaussian":
            return gaussian_packet(
                col.get(block, path, "mean_m", float, default=0.0),
                col.get(block, path, "sigma_m", float),
                gmin, gmax, points)
        if form == "uniform":
            return uniform_packet(
                col.get(block, path, "lo_m", float),
                col.get(block, path, "hi_m", float),
                gmin, gmax, points)
        if form == "two_gaussian":
            weights = col.get(block, path, "weights", list)
            if weights is None or len(weights) != 2:
                col.add(f"{path}.weights", "need two [re, im] pairs")
                return None
            return two_gaussian_packet(
                col.get(block, path, "means_m", list),
                col.get(block, path, "sigmas_m", list),
                [complex(w[0], w[1]) for w in weights],
                gmin, gmax, points)
    except (ValueError, TypeError) as exc:
        col.add(path, str(exc))
        return None
    col.add(f"{path}.form",
            f"unknown form {form!r} (gaussian, uniform, two_gaussian, table)")
    return None


def _build_particle(block, path, col):
    if not isinstance(block, dict):
        col.add(path, "expected a mapping")
        return None
    kind = col.get(block, path, "kind", str)
    try:
        if kind == "charged":
            ke = col.get(block, path, "kinetic_energy_ev", float)
            rest = col.get(block, path, "rest_mass_energy_ev", float)
            sign = col.get(block, path, "charge_sign", int, default=-1)
            if not _all_present(ke, rest, sign):
                return None
            return Charged(kinetic_energy_ev=ke, rest_mass_energy_ev=rest,
                           charge_sign=sign)
        if kind == "neutron":
            ke = col.get(block, path, "kinetic_energy_ev", float)
            return Neutron(kinetic_energy_ev=ke) if ke is not None else None
        if kind == "photon":
            e = col.get(block, path, "energy_ev", float)
            return Photon(energy_ev=e) if e is not None else None
    except (ValueError, TypeError) as exc:
        col.add(path, str(exc))
        return None
    col.add(f"{path}.kind", f"unknown particle kind {kind!r}")
    return None


def _build_material(block, path, col):
    if not isinstance(block, dict):
        col.add(path, "expected a mapping")
        return None
    mtype = col.get(block, path, "type", str)
    try:
        if mtype == "charged_stopper":
            w = col.get(block, path, "w_value_ev", float, default=25.0)
            return ChargedStopper(w_value_ev=w) if w is not None else None
        if mtype == "bf3_gas":
            q = col.get(block, path, "q_value_ev", float)
            frac = col.get(block, path, "boron10_fraction", float, default=0.96)
            kappa = col.get(block, path, "opacity", float, default=1.0)
            if not _all_present(q, frac, kappa):
                return None
            return BF3Gas(q_value_ev=q, boron10_fraction=frac, opacity=kappa)
        if mtype == "photocathode":
            w = col.get(block, path, "work_function_ev", float)
            qe = col.get(block, path, "quantum_efficiency", float)
            if not _all_present(w, qe):
                return None
            return Photocathode(work_function_ev=w, quantum_efficiency=qe)
    except (ValueError, TypeError) as exc:
        col.add(path, str(exc))
        return None
    col.add(f"{path}.type", f"unknown material type {mtype!r}")
    return None


def _build_amplifier(block, path, col, material):
    if not isinstance(block, dict):
        col.add(path, "expected a mapping")
        return None
    atype = col.get(block, path, "type", str)
    try:
        if atype == "gas_gain":
            if isinstance(material, ChargedStopper):
                w = col.get(block, path, "w_value_ev", float,
                            default=material.w_value_ev)
            else:
                w = col.get(block, path, "w_value_ev", float)
            gain = col.get(block, path, "gain", float)
            if not _all_present(w, gain):
                return None
            return GasGain(w_value_ev=w, gain=gain)
        if atype == "semiconductor":
            pair = col.get(block, path, "pair_energy_ev", float)
            eff = col.get(block, path, "collection_efficiency", float,
                          default=1.0)
            if not _all_present(pair, eff):
                return None
            return Semiconductor(pair_energy_ev=pair, collection_efficiency=eff)
        if atype == "dynode_chain":
            means = col.get(block, path, "stage_means", list)
            if means is None:
                return None
            return DynodeChain(stage_means=tuple(means))
    except (ValueError, TypeError) as exc:
        col.add(path, str(exc))
        return None
    col.add(f"{path}.type", f"unknown amplifier type {atype!r}")
    return None


def _build_detector(block, index, col, path_prefix="detectors"):
    path = f"{path_prefix}[{index}]"
    if not isinstance(block, dict):
        col.add(path, "expected a mapping")
        return None
    win = col.get(block, path, "window", dict)
    window = None
    if win is not None:
        try:
            window = EntranceWindow(
                center=col.get(win, f"{path}.window", "center_m", float),
                width=col.get(win, f"{path}.window", "width_m", float),
                detector_index=col.get(win, f"{path}.window", "detector_index",
                                       int, default=index + 1))
        except (ValueError, TypeError) as exc:
            col.add(f"{path}.window", str(exc))
    material = _build_material(col.get(block, path, "material", dict),
                               f"{path}.material", col)
    amplifier = None
    if material is not None:
        amplifier = _build_amplifier(col.get(block, path, "amplifier", dict),
                                     f"{path}.amplifier", col, material)
    threshold = col.get(block, path, "threshold_energy_ev", float)
    operable = col.get(block, path, "operable", bool, default=True)
    if None in (window, material, amplifier, threshold):
        return None
    try:
        return DetectorSpec(window=window, material=material,
                            threshold_energy_ev=threshold,
                            amplifier=amplifier, operable=operable)
    except (ValueError, TypeError) as exc:
        col.add(path, str(exc))
        return None


def _consistency_warnings(particle, detectors, shaping, discriminator):
    """Energy-gate vs voltage-gate agreement, per detector.

    For each detector whose deposited energy passes the energy gate, the
    expected avalanche must clear the discriminator with wide margin,
    otherwise counted trials and gated trials will disagree.
    """
    warnings = []
    apc = shaping.amplitude_per_coulomb
    any_pass = False
    for det in detectors:
        n = det.window.detector_index
        try:
            channel = reaction_channel(particle, det.material)
        except ValueError:
            continue
        edep = deposited_energy(particle, channel)
        if start_reaction_probability(particle, det) <= 0.0 or edep <= 0.0:
            continue
        if edep <= det.threshold_energy_ev:
            continue
        any_pass = True
        vpc = charge_per_carrier(det.amplifier) * apc
        n_min = math.floor(discriminator.threshold_v / vpc) + 1
        mean_primaries = mean_primary_carriers(edep, det.amplifier)
        mean_final = mean_final_carriers(mean_primaries, det.amplifier)
        if mean_final > MAX_MEAN_CARRIERS:
            raise ConfigValidationError(
                f"detectors[{n}].amplifier: expected avalanche of "
                f"{mean_final:.3g} carriers exceeds the supported "
                f"{MAX_MEAN_CARRIERS:.0e}")
        if isinstance(det.amplifier, DynodeChain):
            if mean_final < 4.0 * n_min:
                warnings.append(
                    f"detector {n}: expected avalanche of {mean_final:.3g} "
                    f"carriers is not comfortably above the {n_min} needed "
                    "to cross the discriminator threshold")
        else:
            margin = mean_final - 6.0 * math.sqrt(mean_final)
            if n_min > margin:
                warnings.append(
                    f"detector {n}: discriminator needs {n_min} carriers but "
                    f"the avalanche mean is {mean_final:.6g}; gated trials "
                    "may fail to fire")
    if not any_pass:
        warnings.append(
            "no detector passes the energy gate for the configured particle; "
            "all counters will stay at zero")
    return warnings


def build_config(raw: dict) -> RunConfig:
    """Validate a parsed YAML tree and construct the RunConfig."""
    if not isinstance(raw, dict):
        raise ConfigValidationError("top level: expected a mapping")
    col = _Collector()

    run = raw.get("run", {}) or {}
    events = col.get(run, "run", "events", int, default=100000)
    seed = col.get(run, "run", "seed", int, default=1)
    workers = col.get(run, "run", "workers", int, default=1)
    retain = col.get(run, "run", "retain_event_log", bool, default=False)
    cap = col.get(run, "run", "event_log_cap", int, default=1000)
    quantile = col.get(run, "run", "chi_square_quantile", float, default=0.999)
    if events is not None and events < 1:
        col.add("run.events", "must be >= 1")
    if workers is not None and workers < 1:
        col.add("run.workers", "must be >= 1")
    if cap is not None and cap < 0:
        col.add("run.event_log_cap", "must be >= 0")
    if quantile is not None and not 0.0 < quantile < 1.0:
        col.add("run.chi_square_quantile", "must lie in (0, 1)")
    if seed is not None and seed < 0:
        col.add("run.seed", "must be >= 0")
    dump_pulses = col.get(run, "run", "dump_pulses", list, default=[])
    if dump_pulses:
        if not all(isinstance(i, int) and not isinstance(i, bool)
                   and i >= 0 for i in dump_pulses):
            col.add("run.dump_pulses", "must be a list of trial ids >= 0")
        elif events is not None and any(i >= events for i in dump_pulses):
            col.add("run.dump_pulses",
                    f"trial ids must lie in [0, {events})")

    source_block = raw.get("source")
    if not isinstance(source_block, dict):
        col.add("source", "missing required section")
        psi = particle = None
    else:
        psi = _build_wavefunction(source_block.get("wavefunction"),
                                  "source.wavefunction", col)
        particle = _build_particle(source_block.get("particle"),
                                   "source.particle", col)

    det_blocks = raw.get("detectors")
    detectors = []
    if not isinstance(det_blocks, list) or not det_blocks:
        col.add("detectors", "need a non-empty list of detector blocks")
    else:
        for i, block in enumerate(det_blocks):
            det = _build_detector(block, i, col)
            if det is not None:
                detectors.append(det)
        if len(detectors) == len(det_blocks):
            try:
                validate_windows([d.window for d in detectors])
            except ValueError as exc:
                col.add("detectors", str(exc))
            indices = [d.window.detector_index for d in detectors]
            if len(set(indices)) != len(indices):
                col.add("detectors", "detector_index values must be unique")

    shaping_block = raw.get("shaping")
    shaping = trace_dt = trace_duration = None
    if not isinstance(shaping_block, dict):
        col.add("shaping", "missing required section")
    else:
        try:
            shaping = PulseShaping(
                amplitude_per_coulomb=col.get(
                    shaping_block, "shaping", "amplitude_per_coulomb", float),
                rise_time_s=col.get(shaping_block, "shaping", "rise_time_s", float),
                decay_time_s=col.get(shaping_block, "shaping", "decay_time_s", float))
        except (ValueError, TypeError) as exc:
            col.add("shaping", str(exc))
        trace_dt = col.get(shaping_block, "shaping", "dt_s", float, default=1e-9)
        trace_duration = col.get(shaping_block, "shaping", "duration_s",
                                 float, default=3e-7)
        if trace_dt is not None and trace_dt <= 0:
            col.add("shaping.dt_s", "must be > 0")
        if trace_duration is not None and trace_duration <= 0:
            col.add("shaping.duration_s", "must be > 0")

    disc_block = raw.get("discriminator")
    discriminator = None
    if not isinstance(disc_block, dict):
        col.add("discriminator", "missing required section")
    else:
        try:
            discriminator = DiscriminatorSpec(
                threshold_v=col.get(disc_block, "discriminator", "threshold_v", float),
                logic_high_v=col.get(disc_block, "discriminator", "logic_high_v",
                                     float, default=1.0),
                logic_low_v=col.get(disc_block, "discriminator", "logic_low_v",
                                    float, default=0.0))
        except (ValueError, TypeError) as exc:
            col.add("discriminator", str(exc))

    sg = None
    sg_block = raw.get("stern_gerlach")
    if sg_block is not None:
        if not isinstance(sg_block, dict):
            col.add("stern_gerlach", "expected a mapping")
        else:
            sg_dets = sg_block.get("detectors")
            up = down = None
            if not isinstance(sg_dets, list) or len(sg_dets) != 2:
                col.add("stern_gerlach.detectors", "need exactly two blocks")
            else:
                up = _build_detector(sg_dets[0], 0, col, "stern_gerlach.detectors")
                down = _build_detector(sg_dets[1], 1, col, "stern_gerlach.detectors")
            separation = col.get(sg_block, "stern_gerlach", "separation_m", float)
            alpha = complex(
                col.get(sg_block, "stern_gerlach", "alpha_re", float, default=1.0),
                col.get(sg_block, "stern_gerlach", "alpha_im", float, default=0.0))
            beta = complex(
                col.get(sg_block, "stern_gerlach", "beta_re", float, default=0.0),
                col.get(sg_block, "stern_gerlach", "beta_im", float, default=0.0))
            if separation is not None and separation <= 0:
                col.add("stern_gerlach.separation_m", "must be > 0")
            if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1.0) > 1e-9:
                col.add("stern_gerlach", "|alpha|^2 + |beta|^2 must equal 1")
            if up is not None and down is not None and separation is not None:
                sg = SternGerlachConfig(alpha=alpha, beta=beta,
                                        separation_m=separation,
                                        up_detector=up, down_detector=down)

    output_block = raw.get("output", {}) or {}
    output_dir = col.get(output_block, "output", "directory", str, default="out")

    col.raise_if_any()

    warnings = tuple(_consistency_warnings(particle, detectors, shaping,
                                           discriminator))
    cfg = RunConfig(
        events=events, seed=seed, workers=workers, retain_event_log=retain,
        event_log_cap=cap, chi_square_quantile=quantile,
        dump_pulses=tuple(dump_pulses or ()),
        source=SourceSpec(wavefunction=psi, particle=particle),
        detectors=tuple(detectors), shaping=shaping,
        trace_dt_s=trace_dt, trace_duration_s=trace_duration,
        discriminator=discriminator, stern_gerlach=sg,
        output_dir=output_dir, warnings=warnings,
    )
    object.__setattr__(cfg, "normalized", to_dict(cfg))
    return cfg


def load_config(path) -> RunConfig:
    """Parse and validate a YAML run configuration."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            raw = yaml.safe_load(handle)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigParseError(f"{path}: {exc}") from exc
    if raw is None:
        raise ConfigParseError(f"{path}: empty configuration")
    return build_config(raw)


def _particle_dict(p):
    if isinstance(p, Charged):
        return {"kind": "charged", "kinetic_energy_ev": p.kinetic_energy_ev,
                "rest_mass_energy_ev": p.rest_mass_energy_ev,
                "charge_sign": p.charge_sign}
    if isinstance(p, Neutron):
        return {"kind": "neutron", "kinetic_energy_ev": p.kinetic_energy_ev}
    return {"kind": "photon", "energy_ev": p.energy_ev}


def _material_dict(m):
    if isinstance(m, ChargedStopper):
        return {"type": "charged_stopper", "w_value_ev": m.w_value_ev}
    if isinstance(m, BF3Gas):
        return {"type": "bf3_gas", "q_value_ev": m.q_value_ev,
                "boron10_fraction": m.boron10_fraction, "opacity": m.opacity}
    return {"type": "photocathode", "work_function_ev": m.work_function_ev,
            "quantum_efficiency": m.quantum_efficiency}


def _amplifier_dict(a):
    if isinstance(a, GasGain):
        return {"type": "gas_gain", "w_value_ev": a.w_value_ev, "gain": a.gain}
    if isinstance(a, Semiconductor):
        return {"type": "semiconductor", "pair_energy_ev": a.pair_energy_ev,
                "collection_efficiency": a.collection_efficiency}
    return {"type": "dynode_chain", "stage_means": list(a.stage_means)}


def _detector_dict(d):
    return {
        "window": {"center_m": d.window.center, "width_m": d.window.width,
                   "detector_index": d.window.detector_index},
        "material": _material_dict(d.material),
        "amplifier": _amplifier_dict(d.amplifier),
        "threshold_energy_ev": d.threshold_energy_ev,
        "operable": d.operable,
    }


def to_dict(cfg: RunConfig) -> dict:
    """Normalized configuration tree (defaults applied, table-form state)."""
    psi = cfg.source.wavefunction
    out = {
        "run": {
            "events": cfg.events, "seed": cfg.seed, "workers": cfg.workers,
            "retain_event_log": cfg.retain_event_log,
            "event_log_cap": cfg.event_log_cap,
            "chi_square_quantile": cfg.chi_square_quantile,
            "dump_pulses": list(cfg.dump_pulses),
        },
        "source": {
            "particle": _particle_dict(cfg.source.particle),
            "wavefunction": {
                "form": "table",
                "rows": [[float(x), float(a.real), float(a.imag)]
                         for x, a in zip(psi.positions, psi.amplitudes)],
            },
        },
        "detectors": [_detector_dict(d) for d in cfg.detectors],
        "shaping": {
            "amplitude_per_coulomb": cfg.shaping.amplitude_per_coulomb,
            "rise_time_s": cfg.shaping.rise_time_s,
            "decay_time_s": cfg.shaping.decay_time_s,
            "dt_s": cfg.trace_dt_s, "duration_s": cfg.trace_duration_s,
        },
        "discriminator": {
            "threshold_v": cfg.discriminator.threshold_v,
            "logic_high_v": cfg.discriminator.logic_high_v,
            "logic_low_v": cfg.discriminator.logic_low_v,
        },
        "output": {"directory": cfg.output_dir},
    }
    if cfg.stern_gerlach is not None:
        sg = cfg.stern_gerlach
        out["stern_gerlach"] = {
            "alpha_re": sg.alpha.real, "alpha_im": sg.alpha.imag,
            "beta_re": sg.beta.real, "beta_im": sg.beta.imag,
            "separation_m": sg.separation_m,
            "detectors": [_detector_dict(sg.up_detector),
                          _detector_dict(sg.down_detector)],
        }
    return out


def emit_config(cfg: RunConfig, path) -> None:
    """Write the normalized configuration as YAML."""
    with open(path, "w", encoding="utf-8") as handle:
        yaml.safe_dump(cfg.normalized, handle, sort_keys=False)
