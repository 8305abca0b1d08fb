"""Benchmark metrics and reports built from persisted solver runs.

A report is a pure function of the run JSON files: group runs by ligand,
torsion count, solver and penalty factor, pick a reference optimum per
(ligand, torsion count), then derive gains, time-to-solution and curves.
"""

from __future__ import annotations

import csv
import io
import json
from importlib import resources
from pathlib import Path

import numpy as np

from .encoder import AngleGrid
from .mol2 import Molecule
from .solvers import SearchSpaceTooLarge, SolverRun, exhaustive, is_tie
from .topology import TorsionModel, graph_distances

__all__ = [
    "ZeroOccurrences",
    "ReferenceExceeded",
    "InsufficientLevels",
    "MissingRadius",
    "tts",
    "normalized_gain",
    "best_so_far_curve",
    "gain_per_tts_slopes",
    "degradation_study",
    "load_radii",
    "vdw_validity",
    "load_runs",
    "build_report",
    "report_json",
    "table_csv",
    "curve_csv",
    "write_report",
    "validate_report",
]


class ZeroOccurrences(ValueError):
    pass


class ReferenceExceeded(ValueError):
    pass


class InsufficientLevels(ValueError):
    pass


class MissingRadius(KeyError):
    pass


def tts(run: SolverRun) -> float:
    """Wall time divided by how often the best value was found."""
    if run.occurrences < 1:
        raise ZeroOccurrences(f"{run.solver}: no occurrence of the best solution")
    return run.wall_time_s / run.occurrences


def normalized_gain(run: SolverRun | float, reference_optimum: float) -> float:
    if not reference_optimum > 0:
        raise ValueError("reference optimum must be positive")
    value = run.best_value if isinstance(run, SolverRun) else float(run)
    gain = value / reference_optimum
    if gain > 1 + 1e-6:
        raise ReferenceExceeded(f"value {value} exceeds reference {reference_optimum}; the reference is stale")
    return gain


def best_so_far_curve(runs, window: float = 100.0, resolution: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Max best-so-far across ``runs`` at ticks ``0, resolution, ..., window``; 0 before any trace point."""
    if not window > 0 or not resolution > 0:
        raise ValueError("window and resolution must be positive")
    ticks = np.arange(int(round(window / resolution)) + 1) * resolution
    out = np.zeros(len(ticks))
    for run in runs:
        if not run.trace:
            continue
        times = np.array([t for t, _ in run.trace])
        values = np.array([v for _, v in run.trace])
        pos = np.searchsorted(times, ticks, side="right") - 1
        sampled = np.where(pos >= 0, values[np.clip(pos, 0, None)], 0.0)
        out = np.maximum(out, sampled)
    return ticks, out


def gain_per_tts_slopes(report: dict) -> dict:
    """Per solver: gain/TTS at each torsion count, slopes between levels and their averages.

    ``ratio`` at a level is averaged over ligands. ``slopes[j]`` is the change
    in ratio per added torsion between consecutive levels. ``mean_slope_ratio``
    averages ``slopes[j + 1] / slopes[j]`` and is null with fewer than two slopes.
    """
    per: dict[str, dict[int, list[float]]] = {}
    for e in report["entries"]:
        label = _label(e["solver"], e.get("a_const_factor"))
        per.setdefault(label, {}).setdefault(e["M"], []).append(e["gain_per_tts"])
    out = {}
    for label, levels in sorted(per.items()):
        ms = sorted(levels)
        if len(ms) < 2:
            raise InsufficientLevels(f"{label}: need at least two torsion counts, have {ms}")
        ratios = [float(np.mean(levels[m])) for m in ms]
        slopes = [(ratios[j + 1] - ratios[j]) / (ms[j + 1] - ms[j]) for j in range(len(ms) - 1)]
        quotients = [slopes[j + 1] / slopes[j] for j in range(len(slopes) - 1) if slopes[j] != 0]
        out[label] = {
            "levels": ms,
            "ratios": ratios,
            "slopes": slopes,
            "mean_slope": float(np.mean(slopes)),
            "mean_slope_ratio": float(np.mean(quotients)) if quotients else None,
        }
    return out


def degradation_study(tm: TorsionModel, fine_d: int, coarse_d: int) -> float:
    """Percent loss of the coarse-grid optimum against the fine-grid optimum."""
    if fine_d % coarse_d:
        raise ValueError(f"fine_d={fine_d} must be a multiple of coarse_d={coarse_d}")
    if tm.n_torsions > 3:
        raise SearchSpaceTooLarge(f"degradation study is limited to 3 torsions, model has {tm.n_torsions}")
    fine = exhaustive(tm, AngleGrid(fine_d), clock="virtual").best_value
    coarse = exhaustive(tm, AngleGrid(coarse_d), clock="virtual").best_value
    if not fine > 0:
        raise ValueError("fine-grid optimum must be positive")
    return 100.0 * (1.0 - coarse / fine)


def load_radii(path=None) -> dict[str, float]:
    """Van der Waals radii table (element -> angstrom); defaults to the bundled Bondi values."""
    if path is None:
        text = resources.files("molunfold.data").joinpath("vdw_radii.json").read_text()
    else:
        text = Path(path).read_text()
    return {k: float(v) for k, v in json.loads(text)["radii"].items()}


def vdw_validity(m: Molecule, radii: dict[str, float] | None = None, tolerance: float = 0.4,
                 min_separation: int = 4) -> list[tuple[int, int, float, float]]:
    """Clashing pairs ``(a, b, distance, limit)``; an empty list means the shape is valid.

    Pairs closer than ``min_separation`` bonds are bonded neighbours and are
    not checked.
    """
    radii = load_radii() if radii is None else radii
    missing = sorted({a.element for a in m.atoms} - set(radii))
    if missing:
        raise MissingRadius(f"no van der Waals radius for {missing}")
    coords = m.coordinates
    r = np.array([radii[a.element] for a in m.atoms])
    hops = graph_distances(m) if m.bonds else np.full((m.n_atoms, m.n_atoms), -1)
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    limit = r[:, None] + r[None, :] - tolerance
    # unreachable pairs (negative hop count) are never bonded neighbours
    far = (hops >= min_separation) | (hops < 0)
    ii, jj = np.nonzero(np.triu(far & (dist < limit), k=1))
    return [(int(i) + 1, int(j) + 1, float(dist[i, j]), float(limit[i, j])) for i, j in zip(ii, jj)]


def load_runs(directory) -> list[SolverRun]:
    paths = sorted(Path(directory).glob("*.json"))
    runs = []
    for p in paths:
        data = json.loads(p.read_text())
        if "solver" in data and "best_value" in data:
            runs.append(SolverRun.from_dict(data))
    return runs


def _label(solver: str, factor) -> str:
    return solver if factor is None else f"{solver}@{factor:g}"


def _group_key(run: SolverRun):
    c = run.config
    return (c.get("ligand", ""), int(c.get("M", 0)), run.solver, c.get("a_const_factor"))


def build_report(runs: list[SolverRun], *, window: float = 100.0, resolution: float = 1.0) -> dict:
    if not runs:
        raise ValueError("no runs to report")
    groups: dict[tuple, list[SolverRun]] = {}
    for run in runs:
        groups.setdefault(_group_key(run), []).append(run)

    references = {}
    for (ligand, m, solver, _), members in groups.items():
        key = (ligand, m)
        best = max(r.best_value for r in members)
        ref = references.get(key)
        if solver == "exhaustive":
            if ref is not None and ref["provenance"] == "best-known" and ref["value"] > best and not is_tie(ref["value"], best):
                raise ReferenceExceeded(f"{ligand} M={m}: a run beat the exhaustive optimum {best}")
            references[key] = {"ligand": ligand, "M": m, "value": best, "provenance": "exhaustive"}
        elif ref is None or (ref["provenance"] == "best-known" and best > ref["value"]):
            references[key] = {"ligand": ligand, "M": m, "value": best, "provenance": "best-known"}

    entries = []
    for key in sorted(groups, key=lambda k: (k[0], k[1], k[2], -1.0 if k[3] is None else k[3])):
        ligand, m, solver, factor = key
        members = groups[key]
        best = max(r.best_value for r in members)
        occurrences = sum(r.occurrences for r in members if is_tie(r.best_value, best))
        wall = sum(r.wall_time_s for r in members)
        ref = references[(ligand, m)]
        gain = normalized_gain(best, ref["value"])
        time_to_solution = wall / occurrences
        first = members[0].config
        entries.append({
            "ligand": ligand,
            "M": m,
            "solver": solver,
            "a_const_factor": factor,
            "chop_hubo": first.get("chop_hubo"),
            "chop_qubo": first.get("chop_qubo"),
            "n_runs": len(members),
            "best_value": best,
            "occurrences": occurrences,
            "wall_time_s": wall,
            "tts_s": time_to_solution,
            "normalized_gain": gain,
            "gain_per_tts": gain / time_to_solution if time_to_solution > 0 else None,
            "reference_value": ref["value"],
            "reference_provenance": ref["provenance"],
        })

    curves = []
    for ligand, m in sorted(references):
        labels, columns = [], []
        for key in sorted(groups, key=lambda k: (k[2], -1.0 if k[3] is None else k[3])):
            if key[0] == ligand and key[1] == m:
                ticks, values = best_so_far_curve(groups[key], window, resolution)
                labels.append(_label(key[2], key[3]))
                columns.append([float(v) for v in values])
        curves.append({"ligand": ligand, "M": m, "t": [float(t) for t in ticks], "series": dict(zip(labels, columns))})

    report = {
        "window_s": window,
        "resolution_s": resolution,
        "references": [references[k] for k in sorted(references)],
        "entries": entries,
        "curves": curves,
    }
    try:
        report["slopes"] = gain_per_tts_slopes(report)
    except InsufficientLevels:
        report["slopes"] = {}
    return report


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def table_csv(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["torsionals", "ligand", "solver", "a_const_factor", "tts_s", "normalized_gain",
                     "gain_per_tts", "best_value", "reference_value", "reference_provenance"])
    for e in sorted(report["entries"], key=lambda e: (e["M"], e["ligand"], e["solver"], e["a_const_factor"] or 0)):
        writer.writerow([e["M"], e["ligand"], e["solver"], "" if e["a_const_factor"] is None else e["a_const_factor"],
                         repr(e["tts_s"]), repr(e["normalized_gain"]),
                         "" if e["gain_per_tts"] is None else repr(e["gain_per_tts"]),
                         repr(e["best_value"]), repr(e["reference_value"]), e["reference_provenance"]])
    return buf.getvalue()


def curve_csv(curve: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    labels = sorted(curve["series"])
    writer.writerow(["t"] + labels)
    for n, t in enumerate(curve["t"]):
        writer.writerow([repr(t)] + [repr(curve["series"][label][n]) for label in labels])
    return buf.getvalue()


def write_report(report: dict, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "report.json", out / "table.csv"]
    written[0].write_text(report_json(report))
    written[1].write_text(table_csv(report))
    for curve in report["curves"]:
        path = out / f"curve_{curve['ligand']}_M{curve['M']}.csv"
        path.write_text(curve_csv(curve))
        written.append(path)
    return written


def validate_report(report: dict) -> None:
    """Raise ``jsonschema.ValidationError`` when ``report`` does not match the bundled schema."""
    import jsonschema

    schema = json.loads(resources.files("molunfold.data").joinpath("report.schema.json").read_text())
    jsonschema.validate(report, schema)
