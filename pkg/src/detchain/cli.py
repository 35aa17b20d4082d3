"""Command-line interface: run, sg, validate, probe.

Exit codes: 0 success, 2 config parse error, 3 config validation error,
4 output I/O error, 5 statistical acceptance failure under --check.
All output files are written atomically (temp file + rename) so a failed
run never leaves a partial report behind.
"""

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from . import kernel
from .config import RunConfig, emit_config, load_config
from .detector import Charged
from .errors import (ConfigMismatchError, ConfigParseError,
                     ConfigValidationError)
from .experiment import (ExperimentReport, build_trial_params,
                         one_to_one_from_report, run_experiment,
                         simulate_single_trial, verify_born_agreement)
from .readout import shape_pulse
from .rng import RandomStream
from .sterngerlach import pass_magnet, run_spin_experiment
from .wavefunction import Hit

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_IO = 4
EXIT_CHECK_FAILED = 5


def _fmt(x) -> str:
    """12 significant digits, the report-file number format."""
    return format(float(x), ".12g")


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _round12(value):
    if isinstance(value, float):
        return float(_fmt(value))
    if isinstance(value, dict):
        return {k: _round12(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round12(v) for v in value]
    return value


def emit_report(report: ExperimentReport, agreement, out_dir,
                prefix="") -> dict:
    """Write the per-detector table and the machine-readable summary.

    Returns {"table": path, "summary": path}. Rows are ordered by
    detector_index and all numbers carry 12 significant digits, so equal
    (config, seed) pairs produce byte-identical files.
    """
    rows = ["detector_index,center_m,width_m,counts,empirical_prob,"
            "theoretical_prob,stderr,z_score"]
    for d in sorted(report.detectors, key=lambda s: s.detector_index):
        rows.append(",".join([
            str(d.detector_index), _fmt(d.center_m), _fmt(d.width_m),
            str(d.counts), _fmt(d.empirical_prob), _fmt(d.detection_prob),
            _fmt(d.stderr), _fmt(d.z_score)]))
    table_path = os.path.join(out_dir, prefix + "detectors.csv")
    _atomic_write(table_path, "\n".join(rows) + "\n")

    summary = {
        "n_source": report.n_source,
        "seed": report.seed,
        "miss_count": report.miss_count,
        "no_signal_count": report.no_signal_count,
        "no_reaction_count": report.no_reaction_count,
        "dead_channel_count": report.dead_channel_count,
        "below_threshold_count": report.below_threshold_count,
        "discriminator_low_count": report.discriminator_low_count,
        "chi_square": report.chi_square,
        "chi_square_dof": report.chi_square_dof,
        "chi_square_limit": agreement.chi_square_limit,
        "max_abs_z": agreement.max_abs_z,
        "pass": agreement.passed,
        "window_probs": [d.window_prob for d in report.detectors],
        "counts": [d.counts for d in report.detectors],
        "start_reactions": [d.start_reactions for d in report.detectors],
    }
    summary_path = os.path.join(out_dir, prefix + "summary.json")
    _atomic_write(summary_path,
                  json.dumps(_round12(summary), sort_keys=True, indent=2) + "\n")
    return {"table": table_path, "summary": summary_path}


def emit_event_log(log, out_dir, prefix="") -> str:
    """Row-oriented event log, one record per line."""
    rows = ["trial_id,arrival,reaction,deposited_ev,carriers,charge_c,"
            "fired_detector"]
    for rec in log.records:
        if isinstance(rec.arrival, Hit):
            arrival = str(rec.arrival.detector_index)
        else:
            arrival = "miss"
        occurred = rec.start is not None and hasattr(rec.start, "channel")
        edep = rec.start.deposited_energy_ev if occurred else 0.0
        carriers = rec.avalanche.carrier_count if rec.avalanche else 0
        charge = rec.avalanche.collected_charge_c if rec.avalanche else 0.0
        rows.append(",".join([
            str(rec.trial_id), arrival,
            (rec.start.channel.name if occurred else
             ("none" if rec.start is None else "no_reaction")),
            _fmt(edep), str(carriers), _fmt(charge),
            str(rec.fired_detector) if rec.fired_detector is not None
            else "none"]))
    path = os.path.join(out_dir, prefix + "events.csv")
    _atomic_write(path, "\n".join(rows) + "\n")
    return path


def dump_pulses(cfg: RunConfig, trial_ids, out_dir):
    """Re-simulate the requested trials and write their voltage traces.

    Per-trial substreams make any single trial reproducible in isolation,
    so dumping does not require re-running the whole experiment.
    """
    params, _ = build_trial_params(cfg.source, cfg.detectors, cfg.shaping,
                                   cfg.discriminator)
    paths = []
    for trial in trial_ids:
        stream = RandomStream(cfg.seed, trial)
        row = simulate_single_trial(params, stream)
        charge = float(row[5])
        trace = shape_pulse(charge, cfg.shaping, cfg.trace_dt_s,
                            cfg.trace_duration_s)
        lines = ["t_s,U_V"]
        for t, u in zip(trace.times, trace.samples):
            lines.append(f"{t:.12f},{u:.9f}")
        path = os.path.join(out_dir, "pulses", f"trial_{trial}.csv")
        _atomic_write(path, "\n".join(lines) + "\n")
        paths.append(path)
    return paths


def _print_warnings(cfg):
    for w in cfg.warnings:
        print(f"warning: {w}", file=sys.stderr)


def _cmd_run(cfg: RunConfig, args) -> int:
    _print_warnings(cfg)
    if args.dump_pulses:
        dump_ids = [int(s) for s in args.dump_pulses.split(",") if s.strip()]
    else:
        dump_ids = list(cfg.dump_pulses)
    bad = [i for i in dump_ids if not 0 <= i < cfg.events]
    if bad:
        raise ConfigValidationError(
            f"dump_pulses: trial ids {bad} outside [0, {cfg.events})")
    report, log = run_experiment(
        cfg.source, cfg.detectors, cfg.events, cfg.seed, cfg.shaping,
        cfg.discriminator, workers=cfg.workers,
        retain_event_log=cfg.retain_event_log,
        event_log_cap=cfg.event_log_cap)
    agreement = verify_born_agreement(report, cfg.chi_square_quantile)
    out_dir = args.out or cfg.output_dir
    paths = emit_report(report, agreement, out_dir)
    if log.records:
        paths["events"] = emit_event_log(log, out_dir)
    if dump_ids:
        dump_pulses(cfg, dump_ids, out_dir)
    counted = sum(d.counts for d in report.detectors)
    print(f"events={report.n_source} counted={counted} "
          f"miss={report.miss_count} no_signal={report.no_signal_count} "
          f"chi2={report.chi_square:.4g} (dof {report.chi_square_dof}) "
          f"kernel={kernel.backend}")
    print(f"report: {paths['table']}")
    if args.check:
        one_ok, bad = one_to_one_from_report(report, cfg.detectors)
        ok = agreement.passed and one_ok
        print(f"check: born_agreement={'pass' if agreement.passed else 'FAIL'} "
              f"one_to_one={'pass' if one_ok else 'FAIL'}"
              + (f" mismatched={list(bad)}" if bad else ""))
        return EXIT_OK if ok else EXIT_CHECK_FAILED
    return EXIT_OK


def _cmd_sg(cfg: RunConfig, args) -> int:
    if cfg.stern_gerlach is None:
        raise ConfigValidationError(
            "stern_gerlach: section required by the sg command")
    _print_warnings(cfg)
    sg = cfg.stern_gerlach
    packet = pass_magnet(sg.alpha, sg.beta, cfg.source.wavefunction,
                         sg.separation_m)
    particle = cfg.source.particle
    if not isinstance(particle, Charged):
        raise ConfigValidationError(
            "source.particle: the sg command models a charged/ionizing "
            "projectile template")
    report, up_fraction = run_spin_experiment(
        packet, sg.up_detector, sg.down_detector, cfg.events, cfg.seed,
        shaping=cfg.shaping, discriminator=cfg.discriminator,
        particle=particle, workers=cfg.workers)
    agreement = verify_born_agreement(report, cfg.chi_square_quantile)
    out_dir = args.out or cfg.output_dir
    paths = emit_report(report, agreement, out_dir, prefix="sg_")
    p_up = abs(sg.alpha) ** 2
    summary = {
        "n_source": report.n_source,
        "seed": report.seed,
        "up_probability": p_up,
        "up_fraction": up_fraction,
        "pass": agreement.passed,
    }
    _atomic_write(os.path.join(out_dir, "sg_spin.json"),
                  json.dumps(_round12(summary), sort_keys=True, indent=2) + "\n")
    print(f"events={report.n_source} up_fraction={up_fraction:.6f} "
          f"|alpha|^2={p_up:.6f} kernel={kernel.backend}")
    print(f"report: {paths['table']}")
    if args.check:
        print(f"check: born_agreement={'pass' if agreement.passed else 'FAIL'}")
        return EXIT_OK if agreement.passed else EXIT_CHECK_FAILED
    return EXIT_OK


def _cmd_validate(cfg: RunConfig, args) -> int:
    _print_warnings(cfg)
    print(f"config ok: {len(cfg.detectors)} detectors, "
          f"events={cfg.events}, seed={cfg.seed}")
    if args.out:
        path = os.path.join(args.out, "normalized.yaml")
        os.makedirs(args.out, exist_ok=True)
        emit_config(cfg, path)
        print(f"normalized config: {path}")
    return EXIT_OK


def _cmd_probe(cfg: RunConfig, args) -> int:
    _print_warnings(cfg)
    params, _ = build_trial_params(cfg.source, cfg.detectors, cfg.shaping,
                                   cfg.discriminator)
    probs = np.diff(params.cum_probs, prepend=0.0)
    print("detector_index,center_m,width_m,window_prob,start_prob,"
          "detection_prob,expected_counts")
    for j, det in enumerate(cfg.detectors):
        det_p = probs[j] * params.p_start[j] * params.pass_thr[j]
        print(",".join([
            str(det.window.detector_index), _fmt(det.window.center),
            _fmt(det.window.width), _fmt(probs[j]), _fmt(params.p_start[j]),
            _fmt(det_p), _fmt(det_p * cfg.events)]))
    print(f"total_window_prob={_fmt(np.sum(probs))}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="detchain",
        description="Monte Carlo simulation of single-particle counting "
                    "detector arrays")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
            ("run", "run the full position-measurement experiment"),
            ("sg", "run the two-detector spin measurement scenario"),
            ("validate", "parse and validate a configuration file"),
            ("probe", "print window probabilities without simulating")]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="YAML configuration")
        p.add_argument("--seed", type=int, default=None,
                       help="override run.seed")
        p.add_argument("--events", type=int, default=None,
                       help="override run.events")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--check", action="store_true",
                       help="turn statistical verification into the exit code")
        p.add_argument("--dump-pulses", default=None, metavar="IDS",
                       help="comma-separated trial ids whose pulse traces "
                            "are written out")
    return parser


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    updates = {}
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigValidationError("--seed must be >= 0")
        updates["seed"] = args.seed
    if args.events is not None:
        if args.events < 1:
            raise ConfigValidationError("--events must be >= 1")
        updates["events"] = args.events
    if not updates:
        return cfg
    from dataclasses import replace
    cfg = replace(cfg, **updates)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        handler = {"run": _cmd_run, "sg": _cmd_sg,
                   "validate": _cmd_validate, "probe": _cmd_probe}
        return handler[args.command](cfg, args)
    except ConfigParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ConfigValidationError, ConfigMismatchError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
