"""Command line front end: ``molunfold {inspect,encode,solve,bench}``.

Settings come from three layers, later ones winning: built-in defaults, a flat
``key = value`` file given with ``--config``, then explicit flags. Every file
is written under ``--out``.

Exit codes: 0 success, 1 configuration error, 2 input error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from .bench import build_report, load_runs, report_json, validate_report, vdw_validity, write_report
from .encoder import A_CONST_BASES, AngleGrid, NoEligiblePairs, a_const_base, build_hubo, optimization_polynomial
from .geometry import unfold_source
from .mol2 import Mol2Error, read_mol2, write_mol2
from .quadratizer import chop_qubo, quadratize
from .solvers import (
    MAX_EXHAUSTIVE,
    AllRestartsInfeasible,
    SaConfig,
    SearchSpaceTooLarge,
    exhaustive,
    geodock_greedy,
    random_search,
    simulated_annealing,
)
from .topology import TopologyError, build_torsion_model

EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3
SOLVER_NAMES = ("exhaustive", "random", "geodock", "sa")


class ConfigError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    return [int(v) for v in str(text).split(",") if v.strip()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in str(text).split(",") if v.strip()]


def _solver_list(text: str) -> list[str]:
    names = [v.strip() for v in str(text).split(",") if v.strip()]
    if not names:
        raise ValueError("empty solver list")
    if names == ["all"]:
        return list(SOLVER_NAMES)
    bad = [n for n in names if n not in SOLVER_NAMES]
    if bad:
        raise ValueError(f"unknown solver(s) {bad}; choose from {', '.join(SOLVER_NAMES)} or all")
    return names


def _positive(kind):
    def parse(text):
        value = kind(text)
        if value <= 0:
            raise ValueError(f"must be positive, got {text}")
        return value
    return parse


def _non_negative(text):
    value = float(text)
    if value < 0:
        raise ValueError(f"must be non-negative, got {text}")
    return value


def _optional_int(text):
    return None if str(text).lower() in ("", "none", "all") else _positive(int)(text)


def _bool(text):
    value = str(text).lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text}")


# key -> (parser, default, help); keys double as config-file keys
SETTINGS = {
    "granularity": (_positive(int), 8, "angle steps per torsion"),
    "max_torsions": (_optional_int, None, "use only the first M torsions in model order"),
    "levels": (_int_list, [2, 4], "bench: torsion counts to sweep"),
    "chop_hubo": (_non_negative, 0.0, "drop HUBO optimization terms with |coef| below this"),
    "chop_qubo": (_non_negative, 0.0, "drop unprotected QUBO entries with |coef| below this"),
    "aconst_factors": (_float_list, [2.0], "comma-separated penalty factors"),
    "aconst_base": (str, "max-coefficient", f"penalty scale the factors multiply: {', '.join(A_CONST_BASES)}"),
    "solver": (_solver_list, ["exhaustive"], "comma-separated solvers or 'all'"),
    "time_limit": (_positive(float), 1.0, "random search budget in clock seconds"),
    "seed": (int, 0, "master RNG seed"),
    "jobs": (_positive(int), 1, "worker threads; 1 is bit-reproducible"),
    "workers": (_positive(int), 1, "random search sample streams"),
    "epochs": (_positive(int), 500, "SA epochs"),
    "restarts": (_positive(int), 10, "SA restarts"),
    "rounds": (_positive(int), 10, "GeoDock pass cap"),
    "repair": (_bool, False, "SA: project infeasible restarts to one-hot instead of discarding"),
    "clock": (str, "virtual", "virtual (deterministic work-based timing) or wall"),
    "window": (_positive(float), 100.0, "bench curve window in seconds"),
    "resolution": (_positive(float), 1.0, "bench curve tick in seconds"),
    "out": (str, "out", "output directory"),
}

COMMAND_KEYS = {
    "inspect": ("max_torsions",),
    "encode": ("granularity", "max_torsions", "chop_hubo", "chop_qubo", "aconst_factors", "aconst_base", "out"),
    "solve": ("granularity", "max_torsions", "chop_hubo", "chop_qubo", "aconst_factors", "aconst_base", "solver",
              "time_limit", "seed", "jobs", "workers", "epochs", "restarts", "rounds", "repair", "clock", "out"),
    "bench": ("granularity", "levels", "chop_hubo", "chop_qubo", "aconst_factors", "aconst_base", "solver",
              "time_limit", "seed", "jobs", "workers", "epochs", "restarts", "rounds", "repair", "clock",
              "window", "resolution", "out"),
}


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment, dashes in keys are allowed."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key = key.strip().replace("-", "_")
        if key not in SETTINGS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value.strip()
    return out


def _resolve(command: str, args: argparse.Namespace) -> dict:
    allowed = COMMAND_KEYS[command]
    raw = read_config(args.config) if args.config else {}
    for key in raw:
        if key not in allowed:
            raise ConfigError(f"key {key!r} does not apply to '{command}'")
    settings = {}
    for key in allowed:
        parse, default, _ = SETTINGS[key]
        value = getattr(args, key, None)
        if value is None:
            value = raw.get(key)
        if value is None:
            settings[key] = default
            continue
        try:
            settings[key] = parse(value)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    if "clock" in settings and settings["clock"] not in ("virtual", "wall"):
        raise ConfigError("clock must be 'virtual' or 'wall'")
    if "aconst_base" in settings and settings["aconst_base"] not in A_CONST_BASES:
        raise ConfigError(f"aconst_base must be one of {A_CONST_BASES}")
    if "aconst_factors" in settings and (not settings["aconst_factors"] or min(settings["aconst_factors"]) <= 0):
        raise ConfigError("aconst_factors must be a non-empty list of positive numbers")
    if "levels" in settings and (not settings["levels"] or min(settings["levels"]) < 1):
        raise ConfigError("levels must be a non-empty list of positive integers")
    return settings


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="molunfold", description="Molecular unfolding via HUBO/QUBO encodings and classical search.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "inspect": "parse a MOL2 file and print its torsion model",
        "encode": "write HUBO and QUBO files for a ligand",
        "solve": "run solvers and write SolverRun JSON plus the unfolded MOL2",
        "bench": "sweep torsion counts and solvers, then write a benchmark report",
    }
    for command, keys in COMMAND_KEYS.items():
        p = sub.add_parser(command, help=helps[command], description=helps[command])
        if command == "bench":
            p.add_argument("files", nargs="*", help="MOL2 files (default: bundled ligands)")
            p.add_argument("--from-runs", help="rebuild the report from a directory of SolverRun JSON")
        else:
            p.add_argument("file", help="MOL2 file")
        if command == "inspect":
            p.add_argument("--json", action="store_true", help="print the torsion model as JSON")
        p.add_argument("--config", help="flat key = value settings file")
        for key in keys:
            default = SETTINGS[key][1]
            shown = ",".join(map(str, default)) if isinstance(default, list) else default
            p.add_argument(_flag(key), dest=key, default=None, metavar=key.upper(),
                           help=f"{SETTINGS[key][2]} (default: {shown})")
    return parser


def _load_model(path, max_torsions):
    molecule = read_mol2(path)
    return molecule, build_torsion_model(molecule, max_torsions)


def _stem(tm, d=None) -> str:
    name = "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in (tm.molecule.name or "ligand"))
    return f"{name}_M{tm.n_torsions}" + (f"_d{d}" if d else "")


def _encode(tm, grid, factor, s):
    objective = optimization_polynomial(tm, grid)
    a_const = factor * a_const_base(objective, s["aconst_base"])
    hubo = build_hubo(tm, grid, a_const, s["chop_hubo"], objective=objective)
    qubo = quadratize(hubo)
    if s["chop_qubo"]:
        qubo = chop_qubo(qubo, s["chop_qubo"])
    return hubo, qubo


def cmd_inspect(args, s) -> int:
    _, tm = _load_model(args.file, s["max_torsions"])
    data = tm.to_dict()
    if args.json:
        print(json.dumps(data, indent=2, sort_keys=True))
        return EXIT_OK
    m = tm.molecule
    print(f"molecule      {m.name}")
    print(f"atoms         {m.n_atoms} after pruning terminal hydrogens")
    print(f"bonds         {len(m.bonds)}")
    print(f"center atom   {tm.center_atom}")
    print(f"torsions      {tm.n_torsions} (of {tm.n_rotatable_total} rotatable bonds)")
    for t in tm.torsions:
        print(f"  T{t.index}  {t.near}-{t.far}  ({t.bond.kind.value})")
    print(f"fragments     {tm.n_fragments}")
    for f in tm.fragments:
        print(f"  F{f.index}  influence {list(f.influence_set)}  representative {f.representative_atom}  atoms {list(f.atoms)}")
    print(f"eligible fragment pairs  {len(tm.eligible_fragment_pairs)}")
    return EXIT_OK


def cmd_encode(args, s) -> int:
    _, tm = _load_model(args.file, s["max_torsions"])
    grid = AngleGrid(s["granularity"])
    out = Path(s["out"])
    out.mkdir(parents=True, exist_ok=True)
    for factor in s["aconst_factors"]:
        hubo, qubo = _encode(tm, grid, factor, s)
        stem = f"{_stem(tm, grid.d)}_f{factor:g}"
        (out / f"{stem}.hubo").write_text(hubo.to_text())
        (out / f"{stem}.qubo").write_text(qubo.to_text())
        (out / f"{stem}.ancillas.json").write_text(qubo.ancillas_json())
        hc, qc = hubo.term_counts(), qubo.term_counts()
        print(f"{stem}: a_const={hubo.a_const:.6g} degree={hubo.degree} "
              f"HUBO linear={hc['linear']} quadratic={hc['quadratic']} higher={hc['higher']} | "
              f"QUBO vars={qubo.n_vars} linear={qc['linear']} quadratic={qc['quadratic']} ancillas={qc['ancillas']}")
    return EXIT_OK


def _run_solvers(tm, grid, s, names, source_name):
    """Yield ``(filename stem, SolverRun)`` for each requested solver (and factor, for SA)."""
    stem = _stem(tm, grid.d)
    extra = {"input": source_name, "chop_hubo": s["chop_hubo"], "chop_qubo": s["chop_qubo"]}
    for name in names:
        if name == "exhaustive":
            if grid.d ** tm.n_torsions > MAX_EXHAUSTIVE:
                print(f"skipping exhaustive: {grid.d}^{tm.n_torsions} assignments", file=sys.stderr)
                continue
            run = exhaustive(tm, grid, clock=s["clock"])
        elif name == "random":
            run = random_search(tm, grid, s["time_limit"], s["seed"], workers=s["workers"], jobs=s["jobs"],
                                clock=s["clock"])
        elif name == "geodock":
            run = geodock_greedy(tm, grid, s["rounds"], clock=s["clock"])
        else:
            for factor in s["aconst_factors"]:
                _, qubo = _encode(tm, grid, factor, s)
                cfg = SaConfig(epochs=s["epochs"], restarts=s["restarts"], seed=s["seed"], repair=s["repair"])
                context = dict(extra, a_const_factor=float(factor), a_const_base=s["aconst_base"])
                run = simulated_annealing(qubo, cfg, jobs=s["jobs"], clock=s["clock"], context=context)
                yield f"{stem}_sa_f{factor:g}", run
            continue
        run.config.update(extra)
        yield f"{stem}_{name}", run


def cmd_solve(args, s) -> int:
    molecule, tm = _load_model(args.file, s["max_torsions"])
    grid = AngleGrid(s["granularity"])
    out = Path(s["out"])
    out.mkdir(parents=True, exist_ok=True)
    runs = []
    for stem, run in _run_solvers(tm, grid, s, s["solver"], Path(args.file).name):
        (out / f"{stem}.json").write_text(run.to_json())
        runs.append(run)
        print(f"{stem}: best={run.best_value:.6f} angles={run.best_angles_deg} "
              f"occurrences={run.occurrences} time={run.wall_time_s:.6g}s")
    # best conformation that passes the van der Waals check
    for run in sorted(runs, key=lambda r: -r.best_value):
        unfolded = unfold_source(tm, grid.values[list(run.best_indices)])
        if not vdw_validity(unfolded):
            path = out / f"{_stem(tm, grid.d)}_unfolded.mol2"
            path.write_text(write_mol2(unfolded))
            print(f"wrote {path} ({run.solver}, {run.best_value:.6f})")
            break
    else:
        print("no solver produced a clash-free conformation; no MOL2 written", file=sys.stderr)
    return EXIT_OK


def _bundled_ligands() -> list[Path]:
    root = resources.files("molunfold.data").joinpath("ligands")
    return sorted(Path(str(p)) for p in root.iterdir() if p.name.endswith(".mol2"))


def cmd_bench(args, s) -> int:
    out = Path(s["out"])
    if args.from_runs:
        runs = load_runs(args.from_runs)
        if not runs:
            raise FileNotFoundError(f"no SolverRun JSON files in {args.from_runs}")
    else:
        files = [Path(f) for f in args.files] or _bundled_ligands()
        grid = AngleGrid(s["granularity"])
        run_dir = out / "runs"
        run_dir.mkdir(parents=True, exist_ok=True)
        runs = []
        for path in files:
            molecule = read_mol2(path)
            for level in s["levels"]:
                tm = build_torsion_model(molecule, level)
                if tm.n_torsions < level:
                    print(f"{path.name}: only {tm.n_torsions} torsions, skipping M={level}", file=sys.stderr)
                    continue
                try:
                    for stem, run in _run_solvers(tm, grid, s, s["solver"], path.name):
                        (run_dir / f"{stem}.json").write_text(run.to_json())
                        runs.append(run)
                except AllRestartsInfeasible as exc:
                    print(f"{path.name} M={level}: {exc}", file=sys.stderr)
        if not runs:
            raise FileNotFoundError("the sweep produced no runs")
    report = build_report(runs, window=s["window"], resolution=s["resolution"])
    validate_report(report)
    written = write_report(report, out / "report")
    for e in report["entries"]:
        factor = "" if e["a_const_factor"] is None else f"@{e['a_const_factor']:g}"
        print(f"{e['ligand']:<28s} M={e['M']} {e['solver'] + factor:<10s} gain={e['normalized_gain']:.4f} "
              f"tts={e['tts_s']:.6g}s ({e['reference_provenance']})")
    print(f"wrote {len(written)} report files under {out / 'report'}")
    return EXIT_OK


COMMANDS = {"inspect": cmd_inspect, "encode": cmd_encode, "solve": cmd_solve, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        settings = _resolve(args.command, args)
    except ConfigError as exc:
        print(f"molunfold: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args, settings)
    except ConfigError as exc:
        print(f"molunfold: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (Mol2Error, TopologyError, NoEligiblePairs, SearchSpaceTooLarge, FileNotFoundError, IsADirectoryError) as exc:
        print(f"molunfold: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except AllRestartsInfeasible as exc:
        print(f"molunfold: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
