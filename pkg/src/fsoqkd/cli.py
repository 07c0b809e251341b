"""
Command-line front end.

    fsoqkd defaults                       print a complete default config
    fsoqkd plan CONFIG [--out CSV]        compensation strategy per Cn^2
    fsoqkd interrupt CONFIG --out CSV     outage fraction vs distance per Cn^2
    fsoqkd track CONFIG --out CSV         closed-loop tracking time series
    fsoqkd run CONFIG --out CSV           one Monte Carlo scenario
    fsoqkd sweep CONFIG --out CSV         one scalar field swept

Exit codes: 0 success, 1 runtime/model error, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, sim, tracking, turbulence
from .config import digest, from_dict, to_dict
from .errors import ConfigError, DomainError
from .sim import Scenario
from .tracking import TrackingLoopConfig, WanderProcess

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def _check_cn2_list(values, name):
    if not values:
        raise ConfigError("must list at least one value", name)
    for i, v in enumerate(values):
        if v < 0:
            raise ConfigError(f"cn2 must be >= 0, got {v!r}", f"{name}.{i}")


@dataclass(frozen=True)
class PlanSection:
    cn2: tuple[float, ...] = (1e-15, 1e-14, 1e-13)

    def __post_init__(self):
        _check_cn2_list(self.cn2, "plan.cn2")


@dataclass(frozen=True)
class InterruptSection:
    """Distance grid is ``distances_m`` if given, else linspace(start_m, stop_m, num)."""

    start_m: float = 500.0
    stop_m: float = 5000.0
    num: int = 46
    distances_m: tuple[float, ...] | None = None
    cn2: tuple[float, ...] = (0.0, 1e-15, 1e-14, 1e-13)
    # None: receiver aperture radius
    capture_radius_m: float | None = None

    def __post_init__(self):
        _check_cn2_list(self.cn2, "interrupt.cn2")
        if self.num < 1:
            raise ConfigError("must be >= 1", "interrupt.num")
        if self.capture_radius_m is not None and not self.capture_radius_m > 0:
            raise ConfigError("must be > 0", "interrupt.capture_radius_m")
        if any(d < 0 for d in self.grid()):
            raise ConfigError("distances must be >= 0", "interrupt.distances_m")

    def grid(self) -> list[float]:
        if self.distances_m is not None:
            return list(self.distances_m)
        return np.linspace(self.start_m, self.stop_m, self.num).tolist()


@dataclass(frozen=True)
class SweepSection:
    parameter: str = "background.sky_radiance"
    values: tuple[float, ...] = (0.0, 0.01, 0.02, 0.05, 0.1, 0.2)


@dataclass(frozen=True)
class TrackSection:
    # None: per-axis focal-plane rms from the scenario's angle-of-arrival variance
    wander_rms: float | None = None


@dataclass(frozen=True)
class ConfigDocument:
    scenario: Scenario = field(default_factory=Scenario)
    plan: PlanSection = field(default_factory=PlanSection)
    interrupt: InterruptSection = field(default_factory=InterruptSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    track: TrackSection = field(default_factory=TrackSection)


def load_config(path) -> ConfigDocument:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} col {exc.colno}: {exc.msg}",
                          str(path)) from exc
    return from_dict(ConfigDocument, data)


def apply_overrides(doc: ConfigDocument, args) -> ConfigDocument:
    s = doc.scenario
    try:
        if getattr(args, "seed", None) is not None:
            s = dataclasses.replace(s, master_seed=args.seed)
        if getattr(args, "slots", None) is not None:
            s = dataclasses.replace(s, n_slots=args.slots)
    except DomainError as exc:
        raise ConfigError(str(exc), "command line") from exc
    return dataclasses.replace(doc, scenario=s)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def manifest_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".manifest.json")


def write_manifest(out, command, doc, started, flags=(), summary=None) -> Path:
    resolved = to_dict(doc)
    manifest = {
        "tool_version": __version__,
        "command": command,
        "scenario_digest": digest(doc.scenario),
        "config_digest": digest(resolved),
        "started_utc": started,
        "finished_utc": _now(),
        "assumption_flags": list(flags),
        "outputs": [str(out)],
        "resolved_config": resolved,
    }
    if summary is not None:
        manifest["summary"] = summary
    p = manifest_path(out)
    p.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return p


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# ---------------------------------------------------------------- commands


def cmd_plan(doc: ConfigDocument, args) -> int:
    link = doc.scenario.link
    rows = []
    for cn2 in doc.plan.cn2:
        t = turbulence.TurbulenceParams(cn2)
        r = tracking.select_strategy(t, link.tx_beam, link)
        rows.append((cn2, link.range_m, str(r.strategy), r.aperture_ratio, r.boundary_m,
                     r.failed_condition))
        print(f"cn2={cn2:g}: {r.strategy}, range {link.range_m:g} m, "
              f"aperture_ratio={r.aperture_ratio:.4f}, boundary ≈ {r.boundary_m:.0f} m"
              + (f" ({r.failed_condition})" if r.failed_condition else ""))
    if args.out:
        write_csv(args.out, ["cn2", "range_m", "strategy", "aperture_ratio", "boundary_m",
                             "failed_condition"], rows)
        write_manifest(args.out, "plan", doc, args.started)
    return EXIT_OK


def cmd_interrupt(doc: ConfigDocument, args) -> int:
    sec = doc.interrupt
    link = doc.scenario.link
    capture = sec.capture_radius_m or link.rx_aperture_radius_m
    grid = sec.grid()
    rows = []
    for d in grid:
        rows.append([d] + [
            turbulence.interruption_fraction(turbulence.TurbulenceParams(c), link.tx_beam, d, capture)
            for c in sec.cn2
        ])
    header = ["distance_m"] + [f"cn2={c!r}" for c in sec.cn2]
    write_csv(args.out, header, rows)
    write_manifest(args.out, "interrupt", doc, args.started)
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def cmd_track(doc: ConfigDocument, args) -> int:
    s = doc.scenario
    cfg = s.tracking or TrackingLoopConfig()
    if doc.track.wander_rms is not None:
        rms = doc.track.wander_rms
    else:
        st = turbulence.turbulence_stats(s.turbulence, s.link.tx_beam, s.link.range_m,
                                         s.link.rx_aperture_diameter_m)
        rms = sim.focal_plane_wander_rms(st, s.link)
    w = WanderProcess(rms=rms, bandwidth_hz=s.wander_bandwidth_hz,
                      sample_rate_hz=s.wander_sample_rate_hz, duration_s=s.duration_s,
                      seed=sim.derive_seed(s.master_seed, "wander"))
    res = tracking.closed_loop_sim(w, cfg)
    rows = (
        (t, wx, wy, rx, ry)
        for t, (wx, wy), (rx, ry) in zip(res.time_s.tolist(), res.wander_series.tolist(),
                                         res.residual_series.tolist())
    )
    write_csv(args.out, ["t", "wander_x", "wander_y", "residual_x", "residual_y"], rows)
    summary = {
        "rms_residual": res.rms_residual,
        "open_loop_rms": res.open_loop_rms,
        "rejection_db": res.rejection_db if math.isfinite(res.rejection_db) else str(res.rejection_db),
        "saturation_fraction": res.saturation_fraction,
        "diverged": res.diverged,
        "gains": to_dict(res.gains),
    }
    write_manifest(args.out, "track", doc, args.started, summary=summary)
    for k, v in summary.items():
        print(f"{k}: {v}")
    return EXIT_OK


STATS_COLUMNS = ["qber", "sifted_rate_bps", "secret_key_rate_bps", "availability",
                 "background_rate_hz", "abort", "conclusive_count", "error_count", "slots_sent"]


def _stats_row(value, r: sim.SimResult):
    st = r.stats
    return [value, st.qber, st.sifted_rate_bps, st.secret_key_rate_bps, r.availability,
            st.background_rate_hz, st.abort, st.conclusive_count, st.error_count, st.slots_sent]


def cmd_run(doc: ConfigDocument, args) -> int:
    r = sim.run_scenario(doc.scenario)
    write_csv(args.out, ["label"] + STATS_COLUMNS, [_stats_row(doc.scenario.background.label, r)])
    write_manifest(args.out, "run", doc, args.started, flags=r.assumption_flags)
    st = r.stats
    q = "n/a" if st.qber is None else f"{st.qber:.4%}"
    print(f"qber={q} sifted={st.sifted_rate_bps:.4g} bps skr={st.secret_key_rate_bps:.4g} bps "
          f"availability={r.availability:.4f}" + (" ABORT" if st.abort else ""))
    return EXIT_OK


def cmd_sweep(doc: ConfigDocument, args) -> int:
    sec = doc.sweep
    rows = sim.sweep(doc.scenario, sec.parameter, sec.values,
                     analytic_only=args.analytic_only, workers=args.workers)
    if args.analytic_only:
        cols = list(rows[0].analytic)
        write_csv(args.out, [sec.parameter] + cols,
                  ([r.value] + [r.analytic[c] for c in cols] for r in rows))
        flags = ()
    else:
        write_csv(args.out, [sec.parameter] + STATS_COLUMNS,
                  (_stats_row(r.value, r.result) for r in rows))
        flags = rows[0].result.assumption_flags
    write_manifest(args.out, "sweep", doc, args.started, flags=flags)
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def cmd_defaults(doc, args) -> int:
    print(json.dumps(to_dict(ConfigDocument()), indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fsoqkd", description=__doc__.split("\n\n")[0].strip())
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="cmd", required=True)

    sub.add_parser("defaults", help="print the fully expanded default config")

    def add(name, help, out_required=True, mc=False):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("config", help="JSON config file")
        sp.add_argument("--out", required=out_required, help="output CSV path")
        sp.add_argument("--seed", type=int, default=None, help="override scenario.master_seed")
        if mc:
            sp.add_argument("--slots", type=int, default=None,
                            help="Monte Carlo window size (overrides scenario.n_slots)")
        return sp

    add("plan", "compensation strategy per turbulence regime", out_required=False)
    add("interrupt", "interruption fraction vs distance")
    add("track", "closed-loop tracking simulation")
    add("run", "single Monte Carlo scenario", mc=True)
    sw = add("sweep", "sweep one scalar scenario field", mc=True)
    sw.add_argument("--analytic-only", action="store_true",
                    help="emit closed-form turbulence/strategy columns, skip Monte Carlo")
    sw.add_argument("--workers", type=int, default=1, help="parallel sweep rows")
    return p


COMMANDS = {
    "plan": cmd_plan,
    "interrupt": cmd_interrupt,
    "track": cmd_track,
    "run": cmd_run,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.started = _now()
    if args.cmd == "defaults":
        return cmd_defaults(None, args)
    try:
        doc = apply_overrides(load_config(args.config), args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.cmd](doc, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (DomainError, ArithmeticError, ValueError) as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
