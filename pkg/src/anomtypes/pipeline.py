"""Detect, extract, cluster and evaluate stages over persisted artifacts.

Every stage reads its inputs from and writes its outputs to the run
directory, so stages can be rerun in isolation and the full pipeline is
just the four stages in sequence. The on-disk layout is::

    detect/univariate/<series>.<detector>.json
    detect/multivariate/<group>.<detector>.json
    features/<mode>/<group>/anomalies.json
    features/<mode>/<group>/<feature set>.{csv,jsonl}(.meta.json)
    clusters/<mode>/<group>/<feature set>/<algorithm>_K<K>.csv(.json)
    evaluate/metrics.json and plot-data CSVs
    manifest.json, config.json
"""

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from itertools import combinations
from pathlib import Path

import numpy as np

from ._validation import SchemaError
from .cluster import CentroidHAC, ClusteringResult, hac_centroid, kmeans_pp
from .config import PipelineConfig
from .core import TimeSeries, anomalies_from_json, anomalies_to_json, load_csv
from .damp import DAMP, merge_channel_intervals
from .features import (FEATURE_SETS, FeatureMatrix, MissingReferenceError, extract_catch22,
                       extract_crafted, extract_denoised, extract_rocket)
from .features.base import atomic_write_text
from .mdi import MDI
from .metrics import (MetricsReport, complementarity_stats, consensus_matrix, gini,
                      pairwise_distances, saai, silhouette)

__all__ = ["load_inputs", "load_groups", "cmd_detect", "cmd_extract", "cmd_cluster",
           "cmd_evaluate", "cmd_pipeline", "file_sha256"]

logger = logging.getLogger(__name__)

MODES = ("univariate", "multivariate")
_SUFFIX = {"Denoised": ".jsonl"}


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _pool_map(func, tasks, jobs):
    """Ordered map, in-process for one job."""
    tasks = list(tasks)
    if jobs <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(func, tasks))


def _write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


# -- inputs and grouping ------------------------------------------------------

def load_inputs(config):
    """Read every input CSV; the series id is the file stem."""
    if not config.inputs:
        raise SchemaError("no input files configured")
    series = {}
    for p in config.inputs:
        path = Path(p)
        if not path.is_file():
            raise SchemaError(f"input file {path} does not exist")
        schema = dict(config.schema)
        schema.setdefault("series_id", path.stem)
        ts = load_csv(path, schema)
        if ts.series_id != schema["series_id"]:
            ts = TimeSeries(ts.timestamps, ts.values, ts.channel_names, ts.sampling_interval,
                            schema["series_id"], ts.fill_mask)
        if ts.series_id in series:
            raise SchemaError(f"duplicate series id {ts.series_id!r}")
        series[ts.series_id] = ts
    return series


def load_groups(config, series):
    """Group name to list of ``(series_id, channel_index)`` pairs."""
    if config.groups is None:
        return {sid: [(sid, c) for c in range(ts.d)] for sid, ts in series.items()}
    try:
        raw = json.loads(Path(config.groups).read_text(encoding="utf-8"))
    except OSError as exc:
        raise SchemaError(f"cannot read group file {config.groups}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"group file is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise SchemaError("group file must map group names to member lists")
    groups = {}
    for name in sorted(raw):
        members = []
        for entry in raw[name]:
            sid, _, ch = str(entry).partition(":")
            if sid not in series:
                raise SchemaError(f"group {name!r} names unknown series {sid!r}")
            ts = series[sid]
            if ch:
                try:
                    members.append((sid, ts.channel_index(ch)))
                except KeyError as exc:
                    raise SchemaError(f"group {name!r}: {exc.args[0]}") from None
            else:
                members.extend((sid, c) for c in range(ts.d))
        groups[name] = list(dict.fromkeys(members))
    return groups


def _group_series(name, members, series):
    """Stack a group's channels into one multivariate series."""
    first = series[members[0][0]]
    for sid, _ in members:
        if not np.array_equal(series[sid].timestamps, first.timestamps):
            raise SchemaError(f"group {name!r} mixes series with different time axes")
    values = np.column_stack([series[s].values[:, c] for s, c in members])
    mask = np.column_stack([series[s].fill_mask[:, c] for s, c in members])
    names = tuple(f"{s}:{series[s].channel_names[c]}" for s, c in members)
    return TimeSeries(first.timestamps, values, names, first.sampling_interval, name, mask)


def _series_maps(config, series=None):
    series = load_inputs(config) if series is None else series
    groups = load_groups(config, series)
    mv = {g: _group_series(g, m, series) for g, m in groups.items()}
    return series, groups, mv


# -- detect ---------------------------------------------------------------

def _detect_univariate(task):
    ts, detectors, mdi_cfg, damp_cfg = task
    out = {}
    if "DAMP" in detectors:
        est = DAMP(damp_cfg["m"], damp_cfg["t0"], damp_cfg["lookahead"], damp_cfg["k"],
                   damp_cfg["threshold"]).fit(ts)
        out["DAMP"] = est.anomalies_
    if "MDI" in detectors:
        found = []
        for c in range(ts.d):
            est = _mdi(mdi_cfg).fit(ts.select([c]), channel=c)
            found.extend(est.anomalies_)
        out["MDI"] = found
    return ts.series_id, out


def _detect_multivariate(task):
    ts, mdi_cfg = task
    return ts.series_id, _mdi(mdi_cfg).fit(ts).anomalies_


def _mdi(cfg):
    return MDI(cfg["L_min"], cfg["L_max"], cfg["top_k"], cfg["proposals"], cfg["quantile"],
               cfg["preproc"], divergence=cfg["divergence"], step=cfg["step"])


def _sorted(anoms):
    return sorted(anoms, key=lambda a: (a.series_id, -1 if a.channel is None else a.channel,
                                        a.start, a.end, a.detector))


def cmd_detect(config, series=None):
    """Run both detectors per channel and per group.

    Univariate results are per input series and channel; multivariate ones
    per group: MDI on the stacked group series, DAMP as the union of the
    channel discords. Returns the written paths.
    """
    series, groups, mv = _series_maps(config, series)
    out = Path(config.out) / "detect"
    cfg = config.to_dict()
    written = []
    tasks = [(ts, config.detectors, cfg["mdi"], cfg["damp"]) for ts in series.values()]
    uni = dict(_pool_map(_detect_univariate, tasks, config.jobs))
    if "univariate" in config.modes:
        for sid in series:
            for det in config.detectors:
                path = out / "univariate" / f"{sid}.{det}.json"
                atomic_write_text(path, anomalies_to_json(_sorted(uni[sid][det])))
                written.append(path)
    if "multivariate" in config.modes:
        mdi_mv = {}
        if "MDI" in config.detectors:
            mdi_mv = dict(_pool_map(_detect_multivariate,
                                    [(ts, cfg["mdi"]) for ts in mv.values()], config.jobs))
        for g, members in groups.items():
            found = {"MDI": mdi_mv.get(g, [])}
            if "DAMP" in config.detectors:
                local = []
                for k, (sid, c) in enumerate(members):
                    for a in uni[sid]["DAMP"]:
                        if a.channel == c:
                            local.append(type(a)(a.start, a.end, a.score, a.detector,
                                                 channel=k, series_id=g))
                found["DAMP"] = merge_channel_intervals(local, series_id=g)
            for det in config.detectors:
                path = out / "multivariate" / f"{g}.{det}.json"
                atomic_write_text(path, anomalies_to_json(_sorted(found[det])))
                written.append(path)
    logger.info("detect: wrote %d anomaly files", len(written))
    return written


def _read_anomalies(path):
    path = Path(path)
    if not path.is_file():
        raise SchemaError(f"anomaly file {path} does not exist; run detect first")
    try:
        return anomalies_from_json(path.read_text(encoding="utf-8"))
    except (ValueError, KeyError, TypeError) as exc:
        raise SchemaError(f"malformed anomaly file {path}: {exc}") from None


def _check_references(anoms, sid, ts):
    for a in anoms:
        if a.series_id != sid:
            raise MissingReferenceError(f"anomaly {a.anomaly_id} in the file of series {sid!r} "
                                        f"refers to series {a.series_id!r}")
        if a.channel is not None and not 0 <= a.channel < ts.d:
            raise MissingReferenceError(f"anomaly {a.anomaly_id} refers to channel {a.channel}, "
                                        f"series {sid!r} has {ts.d}")


def _group_anomalies(config, groups, detect_dir, series):
    """Per mode and group, the pooled anomalies of all detectors."""
    detect_dir = Path(detect_dir)
    result = {}
    if "univariate" in config.modes:
        cache = {}
        for g, members in groups.items():
            wanted = set(members)
            pooled = []
            for sid in dict.fromkeys(s for s, _ in members):
                for det in config.detectors:
                    key = (sid, det)
                    if key not in cache:
                        cache[key] = _read_anomalies(detect_dir / "univariate" / f"{sid}.{det}.json")
                        _check_references(cache[key], sid, series[sid])
                    pooled.extend(a for a in cache[key] if (a.series_id, a.channel) in wanted)
            result[("univariate", g)] = _sorted(pooled)
    if "multivariate" in config.modes:
        for g in groups:
            pooled = []
            for det in config.detectors:
                pooled.extend(_read_anomalies(detect_dir / "multivariate" / f"{g}.{det}.json"))
            result[("multivariate", g)] = _sorted(pooled)
    return result


# -- extract ---------------------------------------------------------------

def _extract_one(task):
    fs, mode, anoms, smap, fcfg, seed = task
    if fs == "Denoised":
        return extract_denoised(anoms, smap, fcfg["window"])
    if fs == "Crafted":
        return extract_crafted(anoms, smap)
    if fs == "Rocket":
        return extract_rocket(anoms, smap, fcfg["n_kernels"], fcfg["pca_components"], seed)
    th = fcfg["catch22_threshold" if mode == "univariate" else "catch22_threshold_multivariate"]
    return extract_catch22(anoms, smap, th, fcfg["catch22_registry"])


def cmd_extract(config, anomalies_dir=None, series=None):
    """One FeatureMatrix per (mode, group, feature set).

    Groups with fewer than two anomalies cannot be clustered and are
    skipped with a warning, as is a feature set that rejects its input.
    """
    series, groups, mv = _series_maps(config, series)
    out = Path(config.out)
    detect_dir = Path(anomalies_dir) if anomalies_dir else out / "detect"
    grouped = _group_anomalies(config, groups, detect_dir, series)
    fcfg = config.to_dict()["features"]
    written, tasks, where = [], [], []
    for (mode, g), anoms in grouped.items():
        gdir = out / "features" / mode / g
        atomic_write_text(gdir / "anomalies.json", anomalies_to_json(anoms))
        written.append(gdir / "anomalies.json")
        if len(anoms) < 2:
            logger.warning("%s group %r has %d anomalies; nothing to cluster", mode, g, len(anoms))
            continue
        smap = series if mode == "univariate" else {g: mv[g]}
        for fs in FEATURE_SETS:
            if fs in config.features.sets:
                tasks.append((fs, mode, anoms, smap, fcfg, config.seed))
                where.append(gdir / f"{fs}{_SUFFIX.get(fs, '.csv')}")
    results = _pool_map(_safe_extract, tasks, config.jobs)
    for path, (fm, err) in zip(where, results):
        if err is not None:
            logger.warning("skipping %s: %s", path, err)
            continue
        written.extend(fm.save(path))
    logger.info("extract: wrote %d files", len(written))
    return written


def _safe_extract(task):
    try:
        return _extract_one(task), None
    except ValueError as exc:
        return None, str(exc)


# -- cluster ---------------------------------------------------------------

def _feature_files(root):
    root = Path(root)
    files = sorted(p for p in root.glob("*/*/*") if p.suffix in (".csv", ".jsonl")
                   and p.name != "anomalies.json" and not p.name.endswith(".meta.json"))
    return [p for p in files if p.stem in FEATURE_SETS]


def _cluster_one(task):
    path, algorithm, ks, ccfg, seed = task
    fm = FeatureMatrix.load(path)
    n = fm.n_rows
    results = []
    model = None
    for K in ks:
        if K > n:
            continue
        if algorithm == "KMeans":
            res = kmeans_pp(fm, K, seed, ccfg["max_iter"], ccfg["tol"], band=ccfg["band"],
                            dba_iter=ccfg["dba_iter"])
        else:
            if model is None:
                metric = "dtw" if fm.metric == "DTW" else "euclidean"
                model = CentroidHAC(K, metric, ccfg["dba_iter"], ccfg["band"]).fit(fm)
            res = hac_centroid(fm, K, model=model)
        results.append(res)
    return results


def cmd_cluster(config, features_dir=None):
    """Every (feature set, algorithm, K) of the sweep; K above the row count is skipped."""
    out = Path(config.out)
    fdir = Path(features_dir) if features_dir else out / "features"
    files = _feature_files(fdir)
    if not files:
        raise SchemaError(f"no feature files under {fdir}; run extract first")
    ks = [k for k in config.cluster.k_values() if k >= 2]
    ccfg = config.to_dict()["cluster"]
    tasks = []
    for path in files:
        n = FeatureMatrix.load(path).n_rows
        skipped = [k for k in ks if k > n]
        if skipped:
            logger.warning("%s/%s: skipping K=%s above %d anomalies",
                           path.parent.name, path.stem, skipped, n)
        for alg in config.cluster.algorithms:
            tasks.append((path, alg, ks, ccfg, config.seed))
    written = []
    for (path, alg, *_), results in zip(tasks, _pool_map(_cluster_one, tasks, config.jobs)):
        rel = path.relative_to(fdir)
        cdir = out / "clusters" / rel.parent / path.stem
        for stale in cdir.glob(f"{alg}_K*"):
            stale.unlink()
        for res in results:
            written.extend(res.save(cdir / f"{alg}_K{res.K:02d}.csv"))
    logger.info("cluster: wrote %d files", len(written))
    return written


# -- evaluate ---------------------------------------------------------------

def _quartiles(values):
    v = np.asarray(values, dtype=np.float64)
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return {"n": int(v.size), "mean": float(v.mean()), "q1": float(q1), "median": float(med),
            "q3": float(q3), "min": float(v.min()), "max": float(v.max())}


def _evaluate_group(task):
    """Metrics of every stored clustering of one (mode, group, feature set)."""
    feat_path, cluster_dir, anoms_path, mode, scfg = task
    fm = FeatureMatrix.load(feat_path)
    anoms = _read_anomalies(anoms_path)
    by_id = {a.anomaly_id: a for a in anoms}
    try:
        ordered = [by_id[i] for i in fm.anomaly_ids]
    except KeyError as exc:
        raise MissingReferenceError(f"feature row {exc.args[0]} has no anomaly") from None
    D = pairwise_distances(fm)
    rows = []
    for cpath in sorted(Path(cluster_dir).glob("*_K*.csv")):
        res = ClusteringResult.load(cpath)
        if tuple(res.anomaly_ids) != tuple(fm.anomaly_ids):
            raise MissingReferenceError(f"{cpath} does not match {feat_path}")
        report = MetricsReport(gini=gini(res.sizes))
        try:
            report.ssc = silhouette(None, res, distances=D)
        except ValueError:
            report.ssc = None
        if mode == "univariate":
            report.saai = saai(ordered, res, scfg["t_iou"], scfg["lambda1"], scfg["lambda2"])
        rows.append((res, report))
    return rows


def _saai_optimal(entries):
    """argmax over defined SAAI values; ties go to the smallest K."""
    best = None
    for res, rep in entries:
        if rep.saai is None or rep.saai.value is None:
            continue
        if best is None or rep.saai.value > best[1].saai.value:
            best = (res, rep)
    return best


def cmd_evaluate(config, clusters_dir=None):
    """Metrics per clustering plus aggregates, Gini curves, consensus and complementarity."""
    out = Path(config.out)
    cdir = Path(clusters_dir) if clusters_dir else out / "clusters"
    fdir = out / "features"
    scfg = config.to_dict()["saai"]
    tasks = []
    for feat in _feature_files(fdir):
        rel = feat.relative_to(fdir)
        mode = rel.parts[0]
        ccd = cdir / rel.parent / feat.stem
        if ccd.is_dir():
            tasks.append((feat, ccd, feat.parent / "anomalies.json", mode, scfg))
    if not tasks:
        raise SchemaError(f"no clusterings under {cdir}; run cluster first")
    results = _pool_map(_evaluate_group, tasks, config.jobs)

    runs, table = [], {}
    for (feat, _, _, mode, _), rows in zip(tasks, results):
        group = feat.parent.name
        for res, rep in rows:
            key = (mode, group, res.feature_set, res.algorithm)
            table.setdefault(key, []).append((res, rep))
            runs.append({"mode": mode, "group": group, "feature_set": res.feature_set,
                         "algorithm": res.algorithm, "K": res.K, **rep.to_dict()})
    runs.sort(key=lambda r: (r["mode"], r["group"], FEATURE_SETS.index(r["feature_set"]),
                             r["algorithm"], r["K"]))

    # box-plot data: pooled over groups and K
    aggregates = []
    pooled = {}
    for (mode, group, fs, alg), entries in table.items():
        for res, rep in entries:
            slot = pooled.setdefault((mode, fs, alg), {"ssc": [], "saai": [], "gini": []})
            if rep.ssc is not None:
                slot["ssc"].append(rep.ssc.global_score)
            if rep.saai is not None and rep.saai.value is not None:
                slot["saai"].append(rep.saai.value)
            slot["gini"].append(rep.gini)
    for (mode, fs, alg) in sorted(pooled, key=lambda k: (k[0], FEATURE_SETS.index(k[1]), k[2])):
        for metric, vals in pooled[(mode, fs, alg)].items():
            if vals:
                aggregates.append({"mode": mode, "feature_set": fs, "algorithm": alg,
                                   "metric": metric, **_quartiles(vals)})

    # Gini against K over groups
    curves = {}
    for (mode, group, fs, alg), entries in table.items():
        for res, rep in entries:
            curves.setdefault((mode, alg, fs, res.K), []).append(rep.gini)
    gini_curves = [{"mode": m, "algorithm": a, "feature_set": f, "K": k, **_quartiles(v)}
                   for (m, a, f, k), v in sorted(curves.items(),
                                                 key=lambda kv: (kv[0][0], kv[0][1],
                                                                 FEATURE_SETS.index(kv[0][2]),
                                                                 kv[0][3]))]

    # consensus between the chosen clusterings of each feature-set pair
    optimal, consensus = [], []
    groups = sorted({(m, g, a) for (m, g, _, a) in table})
    for mode, group, alg in groups:
        chosen = {}
        for fs in FEATURE_SETS:
            entries = table.get((mode, group, fs, alg))
            if not entries:
                continue
            if mode == "univariate":
                best = _saai_optimal(entries)
                if best is None:
                    continue
                chosen[fs] = best[0]
                optimal.append({"mode": mode, "group": group, "feature_set": fs,
                                "algorithm": alg, "K": best[0].K, "saai": best[1].saai.value})
            else:
                target = config.cluster.consensus_K_multivariate
                fits = [r for r, _ in entries if r.K <= target]
                if fits:
                    chosen[fs] = max(fits, key=lambda r: r.K)
        for fa, fb in combinations([f for f in FEATURE_SETS if f in chosen], 2):
            cm = consensus_matrix(chosen[fa], chosen[fb])
            consensus.append({"mode": mode, "group": group, "algorithm": alg,
                              "K": [chosen[fa].K, chosen[fb].K], **cm.to_dict()})

    complementarity = _complementarity(config, fdir)
    report = {"runs": runs, "aggregates": aggregates, "gini_curves": gini_curves,
              "saai_optimal": optimal, "consensus": consensus,
              "complementarity": complementarity,
              "saai_settings": scfg}
    edir = out / "evaluate"
    _write_json(edir / "metrics.json", report)
    _write_csv(edir / "metrics.csv", ["mode", "group", "feature_set", "algorithm", "K",
                                      "ssc", "saai", "gini"],
               [[r["mode"], r["group"], r["feature_set"], r["algorithm"], r["K"],
                 r["ssc"]["global"], r["saai"]["value"], r["gini"]] for r in runs])
    cols = ["n", "mean", "q1", "median", "q3", "min", "max"]
    _write_csv(edir / "aggregates.csv", ["mode", "feature_set", "algorithm", "metric", *cols],
               [[a["mode"], a["feature_set"], a["algorithm"], a["metric"],
                 *(a[c] for c in cols)] for a in aggregates])
    _write_csv(edir / "gini_curves.csv", ["mode", "algorithm", "feature_set", "K", *cols],
               [[c["mode"], c["algorithm"], c["feature_set"], c["K"], *(c[k] for k in cols)]
                for c in gini_curves])
    _write_csv(edir / "saai_optimal.csv", ["mode", "group", "feature_set", "algorithm", "K",
                                           "saai"],
               [[o["mode"], o["group"], o["feature_set"], o["algorithm"], o["K"], o["saai"]]
                for o in optimal])
    logger.info("evaluate: %d clusterings scored", len(runs))
    return edir / "metrics.json"


def _complementarity(config, fdir):
    """MDI versus DAMP per group and pooled per mode."""
    if not {"MDI", "DAMP"} <= set(config.detectors):
        return {}
    out = {}
    for mode in config.modes:
        mdir = Path(fdir) / mode
        if not mdir.is_dir():
            continue
        all_a, all_b, per_group = [], [], {}
        for gpath in sorted(mdir.glob("*/anomalies.json")):
            anoms = _read_anomalies(gpath)
            a = [x for x in anoms if x.detector == "MDI"]
            b = [x for x in anoms if x.detector == "DAMP"]
            per_group[gpath.parent.name] = complementarity_stats(a, b)
            all_a.extend(a)
            all_b.extend(b)
        out[mode] = {"a": "MDI", "b": "DAMP", "total": complementarity_stats(all_a, all_b),
                     "groups": per_group}
    return out


def _fmt(v):
    return repr(v) if isinstance(v, float) else str(v)


def _write_csv(path, header, rows):
    lines = [",".join(header)] + [",".join(_fmt(v) for v in r) for r in rows]
    atomic_write_text(path, "\n".join(lines) + "\n")


# -- full run ----------------------------------------------------------------

def run_id(config):
    """Content hash of the effective settings and the input files."""
    h = hashlib.sha256(json.dumps(config.digest_dict(), sort_keys=True).encode())
    for p in config.inputs:
        h.update(file_sha256(p).encode())
    if config.groups:
        h.update(file_sha256(config.groups).encode())
    return h.hexdigest()[:16]


def write_manifest(config):
    out = Path(config.out)
    artifacts = []
    for p in sorted(out.rglob("*")):
        if p.is_file() and p.name not in ("manifest.json", "run.log"):
            artifacts.append({"path": p.relative_to(out).as_posix(), "sha256": file_sha256(p)})
    manifest = {"run_id": run_id(config),
                "inputs": [{"path": str(p), "sha256": file_sha256(p)} for p in config.inputs],
                "artifacts": artifacts}
    _write_json(out / "manifest.json", manifest)
    return out / "manifest.json"


def cmd_pipeline(config):
    """detect, extract, cluster and evaluate in sequence, then the manifest."""
    if not isinstance(config, PipelineConfig):
        config = PipelineConfig.from_dict(config)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "config.json", config.to_dict())
    series = load_inputs(config)
    cmd_detect(config, series)
    cmd_extract(config, series=series)
    cmd_cluster(config)
    cmd_evaluate(config)
    return write_manifest(config)
