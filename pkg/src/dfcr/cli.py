"""Command-line harness.

    dfcr run --experiment {1|2|3|4} [--scenarios N] [--seed S]
             [--config scenario.json] [--deltas a,b,c]
             [--out report.json] [--csv traces.csv]
    dfcr attack {ea|pgd|spoof} ...
    dfcr validate --self-test

Exit codes: 0 success, 1 self-test failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import ais_wire, pgm
from .attacks import EaConfig, PgdConfig, evolve_perturbation, inject_spoofs
from .core import scenario_from_json, default_sensor_config, generate_scenario, ScenarioGenConfig
from .experiments import (
    ConfigInvalid,
    chart_attack_slots,
    chart_background,
    chart_fov_slots,
    child_seed,
    default_experiment_config,
    optical_attack_slots,
    optical_background,
    pgd_on_raster,
    run_experiment,
    train_optical_model,
    write_report,
    write_traces,
)
from .detectors import make_balanced_scorer, window_confidence
from .geometry import Homography
from .core import TRUE_CHART_TO_OPTICAL, latlon_from_enu


def _parse_deltas(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigInvalid(f"--deltas expects three comma-separated values: {text!r}")
    try:
        deltas = tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigInvalid(f"bad delta value in {text!r}") from exc
    return deltas  # type: ignore[return-value]


def _cmd_run(args: argparse.Namespace) -> int:
    sensor_config = None
    if args.config:
        scenario = scenario_from_json(Path(args.config).read_text(encoding="utf-8"))
        sensor_config = scenario.sensor_config
    overrides = {}
    if args.deltas:
        overrides["deltas"] = _parse_deltas(args.deltas)
    if sensor_config is not None:
        overrides["sensor_config"] = sensor_config
    if args.compression_quality is not None:
        overrides["compression_quality"] = args.compression_quality
    if args.noise_sigma is not None:
        overrides["noise_defense_sigma"] = args.noise_sigma
    if args.spoof_kind is not None:
        overrides["spoof_kind"] = args.spoof_kind
    config = default_experiment_config(args.experiment, args.scenarios, **overrides)
    report, rows = run_experiment(args.experiment, config, args.seed)
    if args.out:
        write_report(report, args.out)
    if args.csv:
        write_traces(rows, args.csv)
    for name in sorted(report.systems):
        print(f"{name}: mse={report.systems[name].mse:.6f} mae={report.systems[name].mae:.6f}")
    for key in sorted(report.wilcoxon):
        w = report.wilcoxon[key]
        print(f"wilcoxon[{key}]: p={w.p_value:.3e} n={w.n_effective} ({w.method})")
    print(f"runtime: {report.runtime_s:.2f}s")
    return 0


def _cmd_attack_ea(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(child_seed(args.seed, 3, 0))
    fov_slots = chart_fov_slots(default_sensor_config().camera_fov_deg)
    slot_r = fov_slots[0]
    slot_a = next(s for s in chart_attack_slots() if s != slot_r)
    raster = chart_background(rng)
    ais_scorer = make_balanced_scorer(seed=1001)
    radar_scorer = make_balanced_scorer(seed=1002)
    cfg = EaConfig()
    result = evolve_perturbation(
        raster,
        [
            lambda img: window_confidence(img, ais_scorer, slot_a),
            lambda img: window_confidence(img, radar_scorer, slot_r),
        ],
        cfg,
        seed=args.seed,
    )
    manifest = {
        "attack": "ea-perturbation",
        "seed": args.seed,
        "config": {
            "max_iterations": cfg.max_iterations,
            "min_iterations": cfg.min_iterations,
            "population_size": cfg.population_size,
            "perturbation_epsilon": cfg.perturbation_epsilon,
            "epsilon_decay": cfg.epsilon_decay,
            "no_improvement_threshold": cfg.no_improvement_threshold,
        },
        "generations_run": result.generations_run,
        "final_objectives": list(result.best_objectives),
        "windows": {"ais": list(slot_a), "radar": list(slot_r)},
    }
    paths = pgm.write_attack_artifact(args.out, result.adversarial, manifest)
    print(f"wrote {paths[0]} and {paths[1]}")
    return 0


def _cmd_attack_pgd(args: argparse.Namespace) -> int:
    model, _ = train_optical_model()
    hom = Homography(TRUE_CHART_TO_OPTICAL.copy())
    slots = optical_attack_slots(hom, default_sensor_config().radar_range_m)
    slot = slots[len(slots) // 2]
    rng = np.random.default_rng(child_seed(args.seed, 3, 0))
    raster = optical_background(rng)
    cfg = PgdConfig()
    adv = pgd_on_raster(raster, slot, model, cfg)
    conf = window_confidence(adv, model, slot)
    manifest = {
        "attack": "pgd-patch",
        "seed": args.seed,
        "config": {
            "alpha": cfg.alpha,
            "iterations": cfg.iterations,
            "epsilon": cfg.epsilon,
            "norm_order": "inf",
        },
        "window": list(slot),
        "final_confidence": conf,
    }
    paths = pgm.write_attack_artifact(args.out, adv, manifest)
    print(f"wrote {paths[0]} and {paths[1]} (confidence {conf:.3f})")
    return 0


def _cmd_attack_spoof(args: argparse.Namespace) -> int:
    if args.config:
        scenario = scenario_from_json(Path(args.config).read_text(encoding="utf-8"))
    else:
        scenario = generate_scenario(
            args.seed, ScenarioGenConfig(n_objects_min=0, n_objects_max=0),
            default_sensor_config(),
        )
    spoofed = inject_spoofs(scenario, args.count, kind=args.kind, seed=args.seed)
    lines = []
    manifest_entries = []
    for obj in spoofed.spoofed:
        if not obj.carries_ais:
            manifest_entries.append({"id": obj.id, "kind": "radar",
                                     "position": list(obj.position)})
            continue
        lat, lon = latlon_from_enu(*obj.position)
        static = obj.ais_static
        group = ais_wire.synthesize_spoof(
            msg_type=1, mmsi=static.mmsi, latitude=lat, longitude=lon
        )
        group += ais_wire.synthesize_spoof(
            msg_type=5, mmsi=static.mmsi, ship_type=static.ship_type,
            dim_to_bow=static.dim_to_bow, dim_to_stern=static.dim_to_stern,
            dim_to_port=static.dim_to_port, dim_to_starboard=static.dim_to_starboard,
            name=obj.id.upper(),
        )
        lines.append(ais_wire.render_sentences(group))
        manifest_entries.append({"id": obj.id, "kind": args.kind, "mmsi": static.mmsi,
                                 "position": list(obj.position)})
    out = Path(args.out)
    out.write_text("".join(lines), encoding="ascii")
    import json as _json

    out.with_suffix(".json").write_text(
        _json.dumps({"attack": "spoof", "count": args.count, "kind": args.kind,
                     "seed": args.seed, "spoofs": manifest_entries},
                    sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    print(f"wrote {out} ({args.count} spoofed contact(s))")
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    from .selftest import run_self_test

    return run_self_test(verbose=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dfcr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one of the four experiments")
    run.add_argument("--experiment", type=int, required=True, choices=(1, 2, 3, 4))
    run.add_argument("--scenarios", type=int, default=None)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--config", type=str, default=None, help="scenario JSON file")
    run.add_argument("--deltas", type=str, default=None, help="e.g. 0.4,0.3,0.3")
    run.add_argument("--compression-quality", type=int, default=None,
                     help="block-transform defense quality (experiment 2)")
    run.add_argument("--noise-sigma", type=float, default=None,
                     help="noise defense sigma in intensity units (experiment 2)")
    run.add_argument("--spoof-kind", type=str, default=None,
                     choices=("ais", "radar", "both"),
                     help="spoof modality (experiment 4)")
    run.add_argument("--out", type=str, default=None, help="JSON report path")
    run.add_argument("--csv", type=str, default=None, help="CSV trace path")
    run.set_defaults(func=_cmd_run)

    attack = sub.add_parser("attack", help="generate attack artifacts")
    attack_sub = attack.add_subparsers(dest="attack_kind", required=True)

    ea = attack_sub.add_parser("ea", help="evolutionary perturbation")
    ea.add_argument("--seed", type=int, default=0)
    ea.add_argument("--out", type=str, required=True, help="artifact path prefix")
    ea.set_defaults(func=_cmd_attack_ea)

    pgd = attack_sub.add_parser("pgd", help="gradient patch attack")
    pgd.add_argument("--seed", type=int, default=0)
    pgd.add_argument("--out", type=str, required=True, help="artifact path prefix")
    pgd.set_defaults(func=_cmd_attack_pgd)

    spoof = attack_sub.add_parser("spoof", help="AIS/radar spoof script")
    spoof.add_argument("--count", type=int, default=1, choices=(1, 3, 5))
    spoof.add_argument("--kind", type=str, default="ais", choices=("ais", "radar", "both"))
    spoof.add_argument("--seed", type=int, default=0)
    spoof.add_argument("--config", type=str, default=None, help="scenario JSON file")
    spoof.add_argument("--out", type=str, required=True, help="NMEA sentence file")
    spoof.set_defaults(func=_cmd_attack_spoof)

    validate = sub.add_parser("validate", help="run the built-in oracle checks")
    validate.add_argument("--self-test", action="store_true", required=True)
    validate.set_defaults(func=_cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (ConfigInvalid, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
