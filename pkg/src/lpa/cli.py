"""The ``lpa`` command line.

Every command reads one corpus, writes its artifacts under ``--out`` and
finishes with a ``manifest.json`` describing the run. Settings come from
built-in defaults, then an optional TOML file (``--config``), then flags.

Exit status: 0 success, 1 input error, 2 degenerate distribution,
3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import platform
import sys
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Callable

import numpy as np
import scipy

from . import __version__
from .detect import (ThresholdRule, detect_front_users, detect_sockpuppets, detect_tfidf, make_virtual_entities,
                     pairwise_distances, tfidf_baseline)
from .errors import InputError, LPAError
from .experiments import virtual_user_test
from .ingest import FORMATS, PipelineConfig, build_counts, load_documents, read_wordlist, write_jsonl
from .metrics import LOG_BASES, METRICS, RboConfig
from .selection import DEFAULT_HEAD_K, DistributionStats, compare_metrics, entity_distances
from .signature import DEFAULT_N, build_signatures, write_signatures_csv
from .temporal import activemap_svg, activity_profiles, flag_bursts
from .vectorspace import EpsilonPolicy, build_dvr, build_pvr, build_pvrs, vector_to_json, write_vector_csv

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

COMMANDS = ("ingest", "dvr", "pvr", "dist", "compare-metrics", "sign", "detect-sockpuppets", "detect-frontusers",
            "make-virtual", "ttest", "activemap", "export-matrix")

DEFAULTS = {
    "format": "jsonl_text",
    "stopwords": None,
    "stem": None,  # None: on for text, off for counts
    "min_count": 5,
    "min_docs": 30,
    "allow": None,
    "deny": None,
    "epsilon": "auto",
    "p": 0.9,
    "log_base": "e",
    "metric": "kld_eps",
    "n": DEFAULT_N,
    "r": "1",
    "head_k": DEFAULT_HEAD_K,
    "seed": 0,
    "threads": os.cpu_count() or 1,
    "out": ".",
    "no_figures": False,
    "entity": None,
    "count": 10,
    "docs_min": 100,
    "docs_max": 120,
    "min_posts": 5,
    "width": 1600,
    "height": 900,
    "baseline": False,
}
# settings that do not change any artifact's content
_NOT_HASHED = {"threads", "out", "config", "command", "input"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _metric(value: str) -> str:
    value = "kld_eps" if value == "kld" else value
    if value not in METRICS:
        raise argparse.ArgumentTypeError(f"choose from {', '.join(METRICS)} (or kld)")
    return value


def parse_r(text) -> list[int]:
    """``"2"``, ``"1..4"`` or ``"1,3"`` to a sorted list of distinct values."""
    if isinstance(text, int):
        return [text]
    text = str(text).strip()
    try:
        if ".." in text:
            lo, hi = (int(x) for x in text.split("..", 1))
            values = list(range(lo, hi + 1))
        else:
            values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"bad --r value {text!r}; use N, N..M or N,M") from None
    if not values or min(values) < 1:
        raise InputError(f"--r needs values >= 1, got {text!r}")
    return sorted(set(values))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lpa", description="Latent personal analysis of a corpus of entities.")
    parser.add_argument("--version", action="version", version=f"lpa {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    common = _Parser(add_help=False, argument_default=argparse.SUPPRESS)
    g = common.add_argument_group("input")
    g.add_argument("--input", required=True, help="corpus file")
    g.add_argument("--format", choices=FORMATS)
    g.add_argument("--stopwords", metavar="FILE", help="stop-word list replacing the bundled English one")
    g.add_argument("--stem", dest="stem", action="store_true", help="stem text tokens")
    g.add_argument("--no-stem", dest="stem", action="store_false")
    g.add_argument("--min-count", type=int, help="drop elements seen fewer times in the domain (default 5)")
    g.add_argument("--min-docs", type=int, help="drop entities with fewer documents (default 30)")
    g.add_argument("--allow", metavar="FILE", help="keep only these elements")
    g.add_argument("--deny", metavar="FILE", help="drop these elements")
    g = common.add_argument_group("run")
    g.add_argument("--config", metavar="FILE", help="TOML file of settings; flags take precedence")
    g.add_argument("--out", metavar="DIR", help="output directory (default: current)")
    g.add_argument("--seed", type=int)
    g.add_argument("--threads", type=int)
    g.add_argument("--no-figures", action="store_true", help="skip PNG figures")

    def add(name: str, help: str, *options: Callable) -> None:
        p = sub.add_parser(name, parents=[common], help=help, description=help,
                           argument_default=argparse.SUPPRESS)
        for opt in options:
            opt(p)

    eps = lambda p: p.add_argument("--epsilon", help="back-off value: 'auto' (default) or a float")  # noqa: E731
    base = lambda p: p.add_argument("--log-base", choices=sorted(LOG_BASES))  # noqa: E731
    rbo_p = lambda p: p.add_argument("--p", type=float, help="RBO persistence (default 0.9)")  # noqa: E731
    size = lambda p: p.add_argument("--n", type=int, help="signature size (default 500)")  # noqa: E731
    r = lambda p: p.add_argument("--r", help="threshold multiplier(s): N, N..M or N,M")  # noqa: E731

    add("ingest", "tokenize, filter and write per-entity element counts")
    add("dvr", "write the domain vector", lambda p: p.add_argument("--json", action="store_true"))
    add("pvr", "write one entity's vector", lambda p: p.add_argument("--entity", required=True),
        lambda p: p.add_argument("--json", action="store_true"))
    add("dist", "distance of every entity from the domain",
        lambda p: p.add_argument("--metric", type=_metric), rbo_p, base, eps)
    add("compare-metrics", "metric-selection statistics for all four metrics",
        lambda p: p.add_argument("--head-k", type=int), rbo_p, base, eps)
    add("sign", "signatures of every entity", size, base, eps,
        lambda p: p.add_argument("--entity", action="append", help="also plot this entity's signature"))
    add("detect-sockpuppets", "flag entity pairs with unusually close signatures", size, base, eps, r,
        lambda p: p.add_argument("--baseline", action="store_true", help="also run the TF-IDF cosine baseline"))
    add("detect-frontusers", "flag entities unusually close to the domain", base, eps, r)
    add("make-virtual", "assemble virtual entities from random documents",
        lambda p: p.add_argument("--count", type=int),
        lambda p: p.add_argument("--docs-min", type=int),
        lambda p: p.add_argument("--docs-max", type=int))
    add("ttest", "authentic against virtual entity distances (pooled t-test)", base, eps,
        lambda p: p.add_argument("--count", type=int),
        lambda p: p.add_argument("--docs-min", type=int),
        lambda p: p.add_argument("--docs-max", type=int))
    add("activemap", "posting-activity treemap and burst flags",
        lambda p: p.add_argument("--min-posts", type=int, help="days with fewer posts are left out (default 5)"),
        lambda p: p.add_argument("--width", type=int),
        lambda p: p.add_argument("--height", type=int))
    add("export-matrix", "square signature-distance matrix (upper triangle)", size, base, eps)
    return parser


def resolve_settings(args: argparse.Namespace) -> dict:
    """Defaults, then the TOML file, then explicit flags."""
    settings = dict(DEFAULTS)
    given = vars(args)
    if given.get("config"):
        try:
            with open(given["config"], "rb") as fh:
                file_settings = tomllib.load(fh)
        except OSError as exc:
            raise InputError(f"cannot read config {given['config']}: {exc.strerror}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise InputError(f"{given['config']}: {exc}") from exc
        for key, value in file_settings.items():
            key = key.replace("-", "_")
            if key not in DEFAULTS:
                raise InputError(f"{given['config']}: unknown setting {key!r}")
            settings[key] = value
    settings.update(given)
    try:
        settings["metric"] = _metric(str(settings["metric"]))
    except argparse.ArgumentTypeError as exc:
        raise InputError(f"metric: {exc}") from None
    return settings


def pipeline_config(s: dict) -> PipelineConfig:
    overrides = {"min_element_count": int(s["min_count"]), "min_docs_per_entity": int(s["min_docs"])}
    if s["stem"] is not None:
        overrides["stemming"] = bool(s["stem"])
    if s["stopwords"]:
        overrides["stopword_list"] = read_wordlist(s["stopwords"])
    if s["allow"]:
        overrides["allow_list"] = read_wordlist(s["allow"])
    if s["deny"]:
        overrides["deny_list"] = read_wordlist(s["deny"])
    return PipelineConfig.for_format(s["format"], **overrides)


class Outputs:
    """Writes artifacts atomically and remembers their digests for the manifest."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.written: dict[str, str] = {}

    @contextmanager
    def path(self, name: str):
        fd, tmp = tempfile.mkstemp(prefix=f".{name}.", suffix=Path(name).suffix, dir=self.root)
        os.close(fd)
        try:
            yield Path(tmp)
            os.replace(tmp, self.root / name)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
        self.written[name] = hashlib.sha256((self.root / name).read_bytes()).hexdigest()

    def text(self, name: str, content: str) -> None:
        with self.path(name) as p:
            p.write_text(content, encoding="utf-8", newline="\n")

    def json(self, name: str, obj) -> None:
        self.text(name, json.dumps(_clean(obj), indent=2, sort_keys=True, ensure_ascii=False) + "\n")

    def rows(self, name: str, header: list[str], rows) -> None:
        with self.path(name) as p, open(p, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _clean(obj):
    """JSON-safe copy: NaN and infinities become null, numpy scalars plain numbers."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _hashed_settings(s: dict) -> dict:
    return {k: v for k, v in sorted(s.items()) if k not in _NOT_HASHED}


def write_manifest(out: Outputs, command: str, s: dict) -> None:
    settings = _hashed_settings(s)
    canonical = json.dumps(_clean(settings), sort_keys=True, separators=(",", ":"))
    input_digest = hashlib.sha256(Path(s["input"]).read_bytes()).hexdigest()
    out.json("manifest.json", {
        "command": command,
        "settings": settings,
        "config_hash": hashlib.sha256(canonical.encode("utf-8")).hexdigest(),
        "input_sha256": input_digest,
        "seed": s["seed"],
        "versions": {"lpa": __version__, "python": platform.python_version(), "numpy": np.__version__,
                     "scipy": scipy.__version__},
        "outputs": dict(sorted(out.written.items())),
    })


# -- commands ---------------------------------------------------------------

class Context:
    def __init__(self, s: dict):
        self.s = s
        self.config = pipeline_config(s)
        self.docs = load_documents(s["input"], s["format"])
        self._counts = None
        out = Path(s["out"])
        # ``--out map.svg`` names the map itself; other artifacts go beside it
        self.svg_name = out.name if out.suffix.lower() == ".svg" else "map.svg"
        self.out = Outputs(out.parent if out.suffix.lower() == ".svg" else out)

    @property
    def counts(self):
        if self._counts is None:
            self._counts = build_counts(self.docs, self.config)
        return self._counts

    @property
    def epsilon(self) -> float:
        return EpsilonPolicy.parse(self.s["epsilon"]).resolve(self.counts)

    @property
    def figures(self) -> bool:
        return not self.s["no_figures"]

    def signatures(self):
        return build_signatures(build_pvrs(self.counts), build_dvr(self.counts), self.epsilon, int(self.s["n"]),
                                self.s["log_base"])


def cmd_ingest(ctx: Context) -> None:
    rows = ((eid, e, c) for eid in ctx.counts.entity_ids for e, c in sorted(ctx.counts.per_entity[eid].items()))
    ctx.out.rows("counts.csv", ["entity_id", "element", "count"], rows)


def cmd_dvr(ctx: Context) -> None:
    dvr = build_dvr(ctx.counts)
    with ctx.out.path("dvr.csv") as p:
        write_vector_csv(dvr, p)
    if ctx.s.get("json"):
        ctx.out.text("dvr.json", vector_to_json(dvr) + "\n")


def cmd_pvr(ctx: Context) -> None:
    pvr = build_pvr(ctx.counts, ctx.s["entity"])
    with ctx.out.path("pvr.csv") as p:
        write_vector_csv(pvr, p)
    if ctx.s.get("json"):
        ctx.out.text("pvr.json", vector_to_json(pvr) + "\n")


def _entity_distances(ctx: Context, metric: str) -> dict[str, float]:
    return entity_distances(build_pvrs(ctx.counts), build_dvr(ctx.counts), metric, epsilon=ctx.epsilon,
                            rbo_config=RboConfig(float(ctx.s["p"])), base=ctx.s["log_base"])


def cmd_dist(ctx: Context) -> None:
    metric = ctx.s["metric"]
    d = _entity_distances(ctx, metric)
    ctx.out.rows("distances.csv", ["entity_id", "distance"], sorted(d.items()))
    stats = DistributionStats.from_samples(d.values(), require_kurtosis=False)
    ctx.out.json("report.json", {"kind": "distances", "metric": metric, "seed": ctx.s["seed"],
                                 "distribution": stats.as_dict()})
    if ctx.figures:
        from .plotting import distance_histogram
        with ctx.out.path("distances.png") as p:
            distance_histogram(list(d.values()), p, title=f"{metric} distance from the domain")


def cmd_compare_metrics(ctx: Context) -> None:
    pvrs, dvr = build_pvrs(ctx.counts), build_dvr(ctx.counts)
    reports = compare_metrics(pvrs, dvr, ctx.epsilon, int(ctx.s["head_k"]), RboConfig(float(ctx.s["p"])),
                              ctx.s["log_base"])
    rows = []
    for rep in reports:
        d = rep.distances
        rows.append([rep.metric, d.min, d.max, d.mean, d.std, d.median, d.kurtosis_excess,
                     "" if rep.missing_head_fraction is None else rep.missing_head_fraction,
                     "" if rep.tail is None else rep.tail.mean])
    ctx.out.rows("metrics.csv", ["metric", "min", "max", "mean", "std", "median", "kurtosis_excess",
                                 "missing_head_fraction", "tail_mean"], rows)
    ctx.out.json("report.json", {"kind": "compare_metrics", "seed": ctx.s["seed"], "head_k": int(ctx.s["head_k"]),
                                 "verdicts": metric_verdicts(reports)})
    if ctx.figures:
        from .plotting import metric_panels
        per = {m: list(entity_distances(pvrs, dvr, m, epsilon=ctx.epsilon, rbo_config=RboConfig(float(ctx.s["p"])),
                                        base=ctx.s["log_base"]).values()) for m in METRICS}
        with ctx.out.path("metrics.png") as p:
            metric_panels(per, p)


def metric_verdicts(reports) -> dict:
    """Pass/fail per metric on the three selection criteria.

    1: fails for the metric with the highest kurtosis excess (narrowest spread).
    2: fails when elements the entity lacks carry none of the head distance.
    3: among metrics with a tail measurement, fails for the one with the
       largest mean tail-only distance.
    """
    kurt = {r.metric: r.distances.kurtosis_excess for r in reports}
    worst = max(kurt, key=lambda m: kurt[m])
    tails = {r.metric: r.tail.mean for r in reports if r.tail is not None}
    tail_worst = max(tails, key=lambda m: tails[m]) if len(tails) > 1 else None
    out = {}
    for rep in reports:
        out[rep.metric] = {
            "criterion1_spread": rep.metric != worst,
            "criterion2_missing_head": None if rep.missing_head_fraction is None else rep.missing_head_fraction > 0,
            "criterion3_tail": None if rep.metric not in tails or tail_worst is None else rep.metric != tail_worst,
        }
    return out


def cmd_sign(ctx: Context) -> None:
    sigs = ctx.signatures()
    with ctx.out.path("signatures.csv") as p:
        write_signatures_csv(sigs, p)
    if ctx.figures and ctx.s.get("entity"):
        from .plotting import signature_bars
        by = {s.entity_id: s for s in sigs}
        for eid in ctx.s["entity"]:
            if eid not in by:
                raise InputError(f"unknown entity {eid!r}")
            with ctx.out.path(f"signature_{_safe(eid)}.png") as p:
                signature_bars(by[eid], p)


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def cmd_detect_sockpuppets(ctx: Context) -> None:
    sigs = ctx.signatures()
    pairs = pairwise_distances(sigs, threads=max(1, int(ctx.s["threads"])))
    with ctx.out.path("distances.csv") as p:
        pairs.write_csv(p)
    rs = parse_r(ctx.s["r"])
    reports = [detect_sockpuppets(pairs, ThresholdRule(r)).to_dict() for r in rs]
    report = {"kind": "sockpuppets", "seed": ctx.s["seed"], "n": int(ctx.s["n"]), "reports": reports}
    if ctx.s["baseline"]:
        sims = tfidf_baseline(ctx.counts)
        report["tfidf_baseline"] = [detect_tfidf(sims, ThresholdRule(r)).to_dict() for r in rs]
    ctx.out.json("report.json", report)
    if ctx.figures:
        from .plotting import distance_histogram
        with ctx.out.path("pair_distances.png") as p:
            distance_histogram(pairs.values, p, title="signature distance between entity pairs",
                               threshold=reports[0]["threshold"])


def cmd_detect_frontusers(ctx: Context) -> None:
    d = _entity_distances(ctx, "kld_eps")
    ctx.out.rows("distances.csv", ["entity_id", "distance"], sorted(d.items()))
    rs = parse_r(ctx.s["r"])
    reports = [detect_front_users(d, ThresholdRule(r)).to_dict() for r in rs]
    ctx.out.json("report.json", {"kind": "front_users", "seed": ctx.s["seed"], "reports": reports})
    if ctx.figures:
        from .plotting import distance_histogram
        with ctx.out.path("frontusers.png") as p:
            distance_histogram(list(d.values()), p, title="distance from the domain",
                               threshold=reports[0]["threshold"],
                               marked=[d[e] for e in reports[0]["flagged"]])


def cmd_make_virtual(ctx: Context) -> None:
    groups = make_virtual_entities(ctx.docs, (int(ctx.s["docs_min"]), int(ctx.s["docs_max"])), int(ctx.s["count"]),
                                   int(ctx.s["seed"]))
    with ctx.out.path("virtual.jsonl") as p:
        write_jsonl([d for name in sorted(groups) for d in groups[name]], p)


def cmd_ttest(ctx: Context) -> None:
    res = virtual_user_test(ctx.docs, int(ctx.s["count"]), (int(ctx.s["docs_min"]), int(ctx.s["docs_max"])),
                            int(ctx.s["seed"]), ctx.config)
    rows = [(e, "authentic", v) for e, v in sorted(res.authentic.items())]
    rows += [(e, "virtual", v) for e, v in sorted(res.virtual.items())]
    ctx.out.rows("distances.csv", ["entity_id", "group", "distance"], rows)
    t = res.ttest
    ctx.out.json("report.json", {
        "kind": "ttest", "seed": ctx.s["seed"], "t": t.t, "df": t.df, "p": t.p,
        "authentic": DistributionStats.from_samples(res.authentic.values(), require_kurtosis=False).as_dict(),
        "virtual": DistributionStats.from_samples(res.virtual.values(), require_kurtosis=False).as_dict(),
    })


def cmd_activemap(ctx: Context) -> None:
    profiles = activity_profiles(ctx.docs)
    ctx.out.text(ctx.svg_name, activemap_svg(profiles, int(ctx.s["min_posts"]), int(ctx.s["width"]),
                                          int(ctx.s["height"])))
    ctx.out.json("report.json", {"kind": "activity", "seed": ctx.s["seed"], "entities": [
        {"entity_id": p.entity_id, "active_days": p.active_days, "max_posts_per_day": p.max_posts_per_day,
         "span_days": p.span_days, **vars(flag_bursts(p))} for p in profiles]})


def cmd_export_matrix(ctx: Context) -> None:
    pairs = pairwise_distances(ctx.signatures(), threads=max(1, int(ctx.s["threads"])))
    m = pairs.matrix()
    ids = pairs.ids
    rows = ([ids[i]] + ["" if j < i else float(m[i, j]) for j in range(len(ids))] for i in range(len(ids)))
    ctx.out.rows("matrix.csv", ["entity_id"] + ids, rows)


HANDLERS = {
    "ingest": cmd_ingest, "dvr": cmd_dvr, "pvr": cmd_pvr, "dist": cmd_dist, "compare-metrics": cmd_compare_metrics,
    "sign": cmd_sign, "detect-sockpuppets": cmd_detect_sockpuppets, "detect-frontusers": cmd_detect_frontusers,
    "make-virtual": cmd_make_virtual, "ttest": cmd_ttest, "activemap": cmd_activemap,
    "export-matrix": cmd_export_matrix,
}


def run(command: str, settings: dict) -> Path:
    ctx = Context(settings)
    HANDLERS[command](ctx)
    write_manifest(ctx.out, command, settings)
    return ctx.out.root


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help and --version exit 0, usage errors 1
        return int(exc.code or 0)
    command = args.command
    try:
        settings = resolve_settings(args)
        run(command, settings)
    except LPAError as exc:
        print(f"lpa {command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"lpa {command}: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"lpa {command}: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
