"""Command-line entry point: ``cphealth <subcommand> ...``.

Errors print one line ``error: <ErrorClass>: <message>`` on stderr and exit
with status 1; usage errors exit with status 2.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io
from .completion import CompleterConfig, get_completer
from .core import ObservationMask, slice_disease
from .correlation import spatial_profile, temporal_grid
from .errors import CPHError, InvalidConfig
from .geo import build_pair_groups, distance_matrix, nearest_neighbors
from .harness import ALL_COMPLETERS, DEFAULT_PROPORTIONS, SELECTION_METHODS, ExperimentSpec, run_experiment
from .selection import select_qcb, select_random, select_rmdc
from .synthetic import SyntheticSpec, generate_synthetic

RANDOMIZED_ALGOS = ("blend", "nmf", "hotd")


def _csv_list(kind):
    def parse(text):
        try:
            return tuple(kind(x) for x in text.split(",") if x.strip())
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad list: {text!r}") from None
    return parse


def _require_seed(args, why):
    if args.seed is None:
        raise InvalidConfig(f"--seed is required for {why}")


def _history(cube, mask, target_year):
    """Years strictly before ``target_year``; every year when it is None."""
    if target_year is None:
        return cube, mask
    t = cube.year_index(target_year)
    if t < 1:
        raise InvalidConfig(f"no history before {target_year}")
    return cube.take_years(range(t)), mask.take_years(range(t))


def cmd_synth(args):
    spec = SyntheticSpec(
        n_regions=args.regions, n_diseases=args.diseases, n_years=args.years,
        length_scale_km=args.length_scale, rho=args.rho, noise=args.noise,
        seed=args.seed, start_year=args.start_year,
    )
    cube, mask, catalog = generate_synthetic(spec)
    io.export_dir(cube, mask, catalog, args.out)


def cmd_correlate(args):
    cube, mask, catalog = io.ingest_dir(args.data)
    groups = build_pair_groups(catalog, args.bin_width, args.groups)
    codes = [args.disease] if args.disease else list(cube.diseases)
    out = Path(args.out)
    for code in codes:
        m = slice_disease(cube, mask, code)
        io.write_spatial_profile(out / f"spatial_{code}.csv", spatial_profile(m, groups), args.normalize)
        io.write_temporal_grid(out / f"temporal_{code}.csv", temporal_grid(m), args.normalize)


def cmd_select(args):
    cube, mask, catalog = io.ingest_dir(args.data)
    history, hmask = _history(cube, mask, args.target_year)
    if args.method == "random":
        _require_seed(args, "random selection")
        result = select_random(cube.n_regions, args.proportion, args.seed)
    elif args.method == "rmdc":
        neighbors = nearest_neighbors(distance_matrix(catalog))
        result = select_rmdc(history, hmask, neighbors, args.proportion)
    else:
        _require_seed(args, "query-by-committee selection")
        neighbors = nearest_neighbors(distance_matrix(catalog))
        committee = [get_completer(c) for c in args.committee]
        result = select_qcb(history, hmask, committee, neighbors, args.proportion, args.seed)
    io.write_selection(args.out, result, catalog)


def _hide_random(mask: ObservationMask, fraction: float, seed: int) -> np.ndarray:
    if not 0.0 < fraction < 1.0:
        raise InvalidConfig(f"--hide-fraction must lie in (0, 1), got {fraction}")
    obs = np.flatnonzero(mask.mask)
    k = int(round(fraction * len(obs)))
    rng = np.random.default_rng([int(seed), 4242])
    targets = np.zeros(mask.shape, dtype=bool)
    targets.flat[np.sort(rng.choice(obs, size=k, replace=False))] = True
    return targets


def cmd_complete(args):
    cube, mask, catalog = io.ingest_dir(args.data)
    if args.algo in RANDOMIZED_ALGOS:
        _require_seed(args, f"--algo {args.algo}")
    if args.targets:
        targets = io.read_targets(args.targets, cube, catalog)
    else:
        _require_seed(args, "--hide-fraction")
        targets = _hide_random(mask, args.hide_fraction, args.seed)
        if args.targets_out:
            io.write_targets(args.targets_out, targets, cube, catalog)
    config = CompleterConfig(rng_seed=args.seed or 0)
    neighbors = nearest_neighbors(distance_matrix(catalog))
    known = ObservationMask(mask.mask & ~targets)
    pred = get_completer(args.algo).predict(cube, known, targets, neighbors, config)
    io.write_predictions(args.out, pred, cube, catalog)


_EXPERIMENT_KEYS = {
    "target_year", "proportions", "selections", "completers", "seeds", "longitudinal",
    "committee", "workers", "tucker_iters", "tucker_lambda", "nmf_rank", "window_size",
}


def _experiment_settings(args) -> dict:
    settings = {}
    if args.config:
        settings = io.load_config(args.config)
        unknown = set(settings) - _EXPERIMENT_KEYS
        if unknown:
            raise InvalidConfig(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key in _EXPERIMENT_KEYS:
        v = getattr(args, key, None)
        if v is not None and v is not False:
            settings[key] = v
    return settings


def cmd_experiment(args):
    cube, mask, catalog = io.ingest_dir(args.data)
    s = _experiment_settings(args)
    if "seeds" not in s:
        raise InvalidConfig("seeds are required (--seeds or config)")
    overrides = {k: s[k] for k in ("tucker_iters", "tucker_lambda", "nmf_rank", "window_size") if k in s}
    spec = ExperimentSpec(
        target_year=int(s.get("target_year", cube.years[-1])),
        proportions=tuple(float(p) for p in s.get("proportions", DEFAULT_PROPORTIONS)),
        selection_methods=tuple(s.get("selections", ("random",))),
        completers=tuple(s.get("completers", ALL_COMPLETERS)),
        seeds=tuple(int(x) for x in s["seeds"]),
        completer_config=CompleterConfig(**overrides),
        longitudinal=bool(s.get("longitudinal", False)),
        committee=tuple(s.get("committee", ("ucf", "icf"))),
    )
    report = run_experiment(cube, mask, catalog, spec, workers=int(s.get("workers", 1)))
    if args.out_csv:
        io.write_report_csv(args.out_csv, report)
    if args.out_json:
        io.write_report_json(args.out_json, report)
    if not args.out_csv and not args.out_json:
        sys.stdout.write(io.report_to_json(report))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cphealth", description="Population health correlation, selection and completion")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic dataset directory")
    s.add_argument("--out", required=True)
    s.add_argument("--regions", type=int, default=100)
    s.add_argument("--diseases", type=int, default=5)
    s.add_argument("--years", type=int, default=10)
    s.add_argument("--length-scale", type=float, default=10.0)
    s.add_argument("--rho", type=float, default=0.9)
    s.add_argument("--noise", type=float, default=0.002)
    s.add_argument("--start-year", type=int, default=2009)
    s.add_argument("--seed", type=int, required=True)
    s.set_defaults(func=cmd_synth)

    c = sub.add_parser("correlate", help="spatial profile and temporal grid per disease")
    c.add_argument("data")
    c.add_argument("--out", required=True)
    c.add_argument("--disease")
    c.add_argument("--bin-width", type=float, default=1.0)
    c.add_argument("--groups", type=int, default=53)
    c.add_argument("--normalize", action="store_true")
    c.set_defaults(func=cmd_correlate)

    s = sub.add_parser("select", help="choose regions to survey")
    s.add_argument("data")
    s.add_argument("--out", required=True)
    s.add_argument("--method", choices=SELECTION_METHODS, required=True)
    s.add_argument("--proportion", type=float, required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--target-year", type=int, help="score on the years before this one")
    s.add_argument("--committee", type=_csv_list(str), default=("ucf", "icf"))
    s.set_defaults(func=cmd_select)

    c = sub.add_parser("complete", help="predict target entries")
    c.add_argument("data")
    c.add_argument("--out", required=True)
    c.add_argument("--algo", choices=tuple(ALL_COMPLETERS), required=True)
    g = c.add_mutually_exclusive_group(required=True)
    g.add_argument("--targets", help="CSV region_id,disease,year of entries to predict")
    g.add_argument("--hide-fraction", type=float, help="hide this share of observed entries at random")
    c.add_argument("--targets-out", help="where to save the randomly hidden targets")
    c.add_argument("--seed", type=int)
    c.set_defaults(func=cmd_complete)

    e = sub.add_parser("experiment", help="run the selection x completion grid")
    e.add_argument("data")
    e.add_argument("--config", help="flat JSON object with the same keys as the flags")
    e.add_argument("--target-year", type=int)
    e.add_argument("--proportions", type=_csv_list(float))
    e.add_argument("--selections", type=_csv_list(str))
    e.add_argument("--completers", type=_csv_list(str))
    e.add_argument("--seeds", type=_csv_list(int))
    e.add_argument("--committee", type=_csv_list(str))
    e.add_argument("--longitudinal", action="store_true")
    e.add_argument("--tucker-iters", type=int)
    e.add_argument("--tucker-lambda", type=float)
    e.add_argument("--nmf-rank", type=int)
    e.add_argument("--window-size", type=int)
    e.add_argument("--workers", type=int)
    e.add_argument("--out-csv")
    e.add_argument("--out-json")
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (CPHError, OSError, ValueError, KeyError) as exc:
        msg = str(exc).replace("\n", " ")
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
