"""CSV ingestion and result serialization.

Dataset layout (a directory holding two files):

``regions.csv``   ``region_id,name,lat,lon``
``morbidity.csv`` ``region_id,disease,year,rate`` -- long format, one row per
                  observed value; absent rows are natively missing.

Rates in dataset files are written with the shortest repr that round-trips a
double. Derived outputs (predictions, reports, correlation tables) use 12
significant digits.
"""

from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path

import numpy as np

from .core import HealthCube, ObservationMask, Region, RegionCatalog
from .errors import IngestError

REGION_HEADER = ("region_id", "name", "lat", "lon")
MORBIDITY_HEADER = ("region_id", "disease", "year", "rate")
TARGET_HEADER = ("region_id", "disease", "year")
PREDICTION_HEADER = ("region_id", "disease", "year", "predicted")
REGIONS_FILE = "regions.csv"
MORBIDITY_FILE = "morbidity.csv"


def fmt(x) -> str:
    """12 significant digits; empty string for missing values."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return str(x)


def round12(x):
    if isinstance(x, (float, np.floating)):
        return float(f"{float(x):.12g}") if math.isfinite(x) else None
    return x


def _rows(path, header):
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot open: {exc.strerror}", path) from None
    with fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise IngestError("empty file, header row required", path, 1) from None
        except (csv.Error, UnicodeDecodeError) as exc:
            raise IngestError(f"unreadable header: {exc}", path, 1) from None
        cols = [c.strip() for c in first]
        missing = [h for h in header if h not in cols]
        if missing:
            raise IngestError(f"header must contain {','.join(header)}; missing {','.join(missing)}", path, 1)
        pos = [cols.index(h) for h in header]
        line = 1
        try:
            for row in reader:
                line = reader.line_num
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) < len(cols):
                    raise IngestError(f"expected {len(cols)} fields, got {len(row)}", path, line)
                yield line, [row[p].strip() for p in pos]
        except csv.Error as exc:
            raise IngestError(f"CSV parse error: {exc}", path, line + 1) from None
        except UnicodeDecodeError:
            raise IngestError("file is not valid UTF-8", path, line + 1) from None


def _float(text, what, path, line):
    try:
        v = float(text)
    except ValueError:
        raise IngestError(f"{what} is not a number: {text!r}", path, line) from None
    if not math.isfinite(v):
        raise IngestError(f"{what} is not finite: {text!r}", path, line)
    return v


def _year(text, path, line):
    if len(text) != 4 or not text.isdigit():
        raise IngestError(f"year must be a 4-digit integer: {text!r}", path, line)
    return int(text)


def read_regions(path) -> RegionCatalog:
    regions, seen = [], {}
    for line, (rid, name, lat, lon) in _rows(path, REGION_HEADER):
        if not rid:
            raise IngestError("empty region_id", path, line)
        if rid in seen:
            raise IngestError(f"duplicate region_id {rid!r} (first on line {seen[rid]})", path, line)
        seen[rid] = line
        la = _float(lat, "lat", path, line)
        lo = _float(lon, "lon", path, line)
        if not -90 <= la <= 90 or not -180 <= lo <= 180:
            raise IngestError(f"coordinate out of range for {rid!r}: ({la}, {lo})", path, line)
        regions.append(Region(rid, name, la, lo))
    return RegionCatalog(regions)


def ingest(regions_path, morbidity_path) -> tuple[HealthCube, ObservationMask, RegionCatalog]:
    """Read a dataset into a cube, its observation mask and the region catalog.

    Diseases are ordered by first appearance, years ascending; region order
    follows the regions file.
    """
    catalog = read_regions(regions_path)
    index = {rid: k for k, rid in enumerate(catalog.ids)}
    diseases: dict[str, int] = {}
    entries = []
    seen: dict[tuple, int] = {}
    for line, (rid, disease, year, rate) in _rows(morbidity_path, MORBIDITY_HEADER):
        if rid not in index:
            raise IngestError(f"unknown region_id {rid!r}", morbidity_path, line)
        if not disease:
            raise IngestError("empty disease code", morbidity_path, line)
        y = _year(year, morbidity_path, line)
        v = _float(rate, "rate", morbidity_path, line)
        if not 0.0 <= v <= 1.0:
            raise IngestError(f"rate out of range [0, 1]: {rate}", morbidity_path, line)
        key = (rid, disease, y)
        if key in seen:
            raise IngestError(f"duplicate row for {key} (first on line {seen[key]})", morbidity_path, line)
        seen[key] = line
        diseases.setdefault(disease, len(diseases))
        entries.append((index[rid], diseases[disease], y, v))
    years = sorted({e[2] for e in entries})
    ypos = {y: k for k, y in enumerate(years)}
    values = np.full((len(catalog), len(diseases), len(years)), np.nan)
    mask = np.zeros(values.shape, dtype=bool)
    for i, d, y, v in entries:
        values[i, d, ypos[y]] = v
        mask[i, d, ypos[y]] = True
    cube = HealthCube(values, list(diseases), years)
    return cube, ObservationMask(mask), catalog


def ingest_dir(path) -> tuple[HealthCube, ObservationMask, RegionCatalog]:
    path = Path(path)
    return ingest(path / REGIONS_FILE, path / MORBIDITY_FILE)


def _write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def export_dataset(cube: HealthCube, mask: ObservationMask, catalog: RegionCatalog, regions_path, morbidity_path):
    _write_csv(regions_path, REGION_HEADER,
               ([r.region_id, r.name, repr(float(r.lat)), repr(float(r.lon))] for r in catalog.regions))
    ids = catalog.ids
    rows = []
    for i, d, y in zip(*np.nonzero(mask.mask)):
        rows.append([ids[i], cube.diseases[d], cube.years[y], repr(float(cube.values[i, d, y]))])
    _write_csv(morbidity_path, MORBIDITY_HEADER, rows)


def export_dir(cube, mask, catalog, path):
    path = Path(path)
    export_dataset(cube, mask, catalog, path / REGIONS_FILE, path / MORBIDITY_FILE)


def read_targets(path, cube: HealthCube, catalog: RegionCatalog) -> np.ndarray:
    index = {rid: k for k, rid in enumerate(catalog.ids)}
    out = np.zeros(cube.shape, dtype=bool)
    for line, (rid, disease, year) in _rows(path, TARGET_HEADER):
        if rid not in index:
            raise IngestError(f"unknown region_id {rid!r}", path, line)
        if disease not in cube.diseases:
            raise IngestError(f"unknown disease {disease!r}", path, line)
        y = _year(year, path, line)
        if y not in cube.years:
            raise IngestError(f"year {y} not in dataset", path, line)
        out[index[rid], cube.disease_index(disease), cube.year_index(y)] = True
    return out


def write_targets(path, targets: np.ndarray, cube: HealthCube, catalog: RegionCatalog):
    ids = catalog.ids
    _write_csv(path, TARGET_HEADER,
               ([ids[i], cube.diseases[d], cube.years[y]] for i, d, y in zip(*np.nonzero(targets))))


def write_predictions(path, prediction, cube: HealthCube, catalog: RegionCatalog):
    ids = catalog.ids
    _write_csv(path, PREDICTION_HEADER,
               ([ids[i], cube.diseases[d], cube.years[y], fmt(v)]
                for (i, d, y), v in zip(prediction.index, prediction.values)))


def write_selection(path, result, catalog: RegionCatalog):
    ids = catalog.ids
    _write_csv(path, ("region_id", "score"), ([ids[i], fmt(result.scores[i])] for i in result.selected))


def write_spatial_profile(path, profile, normalize=False):
    header = ("group_km", "indicator", "value", "pair_count")
    _write_csv(path, header, ([fmt(r[h]) for h in header] for r in profile.records(normalize)))


def write_temporal_grid(path, grid, normalize=False):
    header = ("year_a", "year_b", "indicator", "value")
    _write_csv(path, header, ([fmt(r[h]) for h in header] for r in grid.records(normalize)))


def write_report_csv(path, report):
    from .harness import RECORD_FIELDS

    _write_csv(path, RECORD_FIELDS, ([fmt(r[f]) for f in RECORD_FIELDS] for r in report.records))


def report_to_json(report) -> str:
    records = [{k: round12(v) for k, v in r.items()} for r in report.records]
    return json.dumps({"records": records, "provenance": report.provenance}, indent=1, sort_keys=False) + "\n"


def write_report_json(path, report):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(report_to_json(report))


def read_report_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def load_config(path) -> dict:
    """Flat JSON object whose keys mirror the experiment command's flags."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or any(isinstance(v, dict) for v in data.values()):
        raise IngestError("config must be a flat JSON object", os.fspath(path))
    return data
