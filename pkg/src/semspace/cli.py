"""Command-line front end: ingest -> prep -> pool -> fit-space -> bench ->
metrics -> export-map, plus container validation.

Exit codes: 0 success, 1 usage error, 2 data error. All JSON artifacts
embed the run configuration, seed, and tool version; reruns with an
identical configuration and store produce byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from semspace import __version__, geometry, metrics as semmetrics, pooling, retrieval
from semspace.activation_io import (
    ContainerFormatError,
    align_subwords,
    load_word_vectors,
    read_container,
)
from semspace.config import RunConfig, artifact_json
from semspace.ingest import (
    ArchiveParseError,
    ArchiveStreamError,
    ParseTally,
    parse_archive,
)
from semspace.prep import EmptyFieldError, normalize
from semspace.store import CorpusStore, StoreError, read_emb_file, write_emb_file

USAGE_ERROR = 1
DATA_ERROR = 2

# stripped from word boundaries before static-vector lookup
_PUNCT = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~"

_DATA_ERRORS = (
    StoreError,
    ContainerFormatError,
    ArchiveStreamError,
    ArchiveParseError,
    EmptyFieldError,
    pooling.EmptyPoolError,
    pooling.MissingClsError,
    retrieval.SingletonLabelError,
    semmetrics.LinearDependenceError,
    semmetrics.DegeneratePairError,
    geometry.RankError,
    ValueError,
    OSError,
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we use 1
        raise _UsageError(f"{self.prog}: error: {message}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="semspace", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"semspace {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse gzip MEDLINE XML archives into a store")
    p.add_argument("--store", required=True)
    p.add_argument("--threads", type=int, default=1, help="archives parsed concurrently")
    p.add_argument("archives", nargs="+")

    p = sub.add_parser("prep", help="normalize text (single record or whole store to TSV)")
    p.add_argument("--store")
    p.add_argument("--out", default="-", help="TSV destination, '-' for stdout")
    p.add_argument("--journal")
    p.add_argument("--year", type=int)
    p.add_argument("--title")
    p.add_argument("--abstract")
    p.add_argument("--pmid", type=int, default=0)

    p = sub.add_parser("pool", help="pool a container (or static vectors) into embeddings")
    p.add_argument("--store", required=True)
    p.add_argument("--space", required=True)
    p.add_argument("--strategy", required=True, choices=pooling.STRATEGIES)
    p.add_argument("--container")
    p.add_argument("--marker", default="##", help="subword continuation marker")
    p.add_argument("--min-chars", type=int, default=5)
    p.add_argument("--vectors", help="word-vector text file (static_mean)")
    p.add_argument("--texts", help="pmid<TAB>text TSV (static_mean)")

    p = sub.add_parser("fit-space", help="estimate mean, demean, fit PCA, project all vectors")
    p.add_argument("--store", required=True)
    p.add_argument("--source-space", required=True)
    p.add_argument("--space", required=True, help="output space id")
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--sample", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("bench", help="journal-discriminability retrieval benchmark")
    p.add_argument("--store", required=True)
    p.add_argument("--space", required=True)
    p.add_argument("--labels", required=True, help="comma-separated journal pair")
    p.add_argument("--queries", type=int, default=5000)
    p.add_argument("--k", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="report JSON path")

    p = sub.add_parser("metrics", help="semantic metrics over embedded element sets")
    p.add_argument("--metric", required=True, choices=[
        "breadth_sigma", "breadth_pairwise", "set_distance", "novelty_fraction",
        "distance_threshold", "axis_projection", "perplexity",
    ])
    p.add_argument("--store")
    p.add_argument("--space")
    p.add_argument("--pmids", help="file with one pmid per line")
    p.add_argument("--journal")
    p.add_argument("--vectors", help="EMB1 vector file as the element set")
    p.add_argument("--pmids-b", help="second set (set_distance)")
    p.add_argument("--vectors-b", help="second set as EMB1 file (set_distance)")
    p.add_argument("--journal-b")
    p.add_argument("--metric-kind", default="l2", choices=["l2", "cosine"])
    p.add_argument("--threshold", type=float)
    p.add_argument("--percentile", type=float, default=90.0)
    p.add_argument("--positive", action="append", default=[], help="EMB1 anchor set (repeatable)")
    p.add_argument("--negative", action="append", default=[], help="EMB1 anchor set (repeatable)")
    p.add_argument("--container", help="TACS container with per-token losses (perplexity)")
    p.add_argument("--out", help="result JSON path")

    p = sub.add_parser("export-map", help="export 2-D coordinates for external plotting")
    p.add_argument("--store", required=True)
    p.add_argument("--space", required=True)
    p.add_argument("--dims", type=int, default=2)
    p.add_argument("--method", default="pca", choices=["pca", "umap"])
    p.add_argument("--journal")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-", help="TSV destination, '-' for stdout")

    p = sub.add_parser("validate-container", help="check a TACS container end to end")
    p.add_argument("--in", dest="path", required=True)

    return parser


def _write_text(destination: str, text: str) -> None:
    if destination == "-":
        sys.stdout.write(text)
    else:
        Path(destination).write_text(text, encoding="utf-8")


# -- subcommand handlers -----------------------------------------------------


def _cmd_ingest(args) -> int:
    store = CorpusStore(args.store)
    results = []
    if args.threads > 1 and len(args.archives) > 1:
        from concurrent.futures import ThreadPoolExecutor

        def parse_one(path):
            tally = ParseTally()
            records = list(parse_archive(path, tally))
            return path, records, tally

        with ThreadPoolExecutor(max_workers=args.threads) as executor:
            results = list(executor.map(parse_one, args.archives))
    else:
        for path in args.archives:
            tally = ParseTally()
            records = list(parse_archive(path, tally))
            results.append((path, records, tally))
    total = 0
    for path, records, tally in results:  # single writer: inserts in argument order
        total += store.put_records(records)
        print(tally.summary(Path(path).name), file=sys.stderr)
    print(f"ingested {total} records into {args.store}")
    return 0


def _cmd_prep(args) -> int:
    if args.title is not None or args.abstract is not None:
        if args.title is None or args.abstract is None:
            raise _UsageError("prep: --title and --abstract must be given together")
        print(normalize(args.title, args.abstract, source_pmid=args.pmid).text)
        return 0
    if not args.store:
        raise _UsageError("prep: need --store (or --title/--abstract)")
    store = CorpusStore(args.store)
    records = store.query(journal=args.journal, year=args.year, require_abstract=True)
    lines = []
    for record in records:
        normalized = normalize(record.title, record.abstract, source_pmid=record.pmid)
        lines.append(f"{record.pmid}\t{normalized.text}\n")
    _write_text(args.out, "".join(lines))
    if args.out != "-":
        print(f"wrote {len(lines)} normalized records to {args.out}", file=sys.stderr)
    return 0


def _read_texts_tsv(path: str) -> list[tuple[int, str]]:
    rows = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            pmid_text, sep, text = line.partition("\t")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected pmid<TAB>text")
            rows.append((int(pmid_text), text))
    return rows


def _cmd_pool(args) -> int:
    store = CorpusStore(args.store)
    pooled: list[pooling.PooledVector] = []
    if args.strategy == "static_mean":
        if not args.vectors or not args.texts:
            raise _UsageError("pool: static_mean needs --vectors and --texts")
        table = load_word_vectors(args.vectors)
        skipped = 0
        for pmid, text in _read_texts_tsv(args.texts):
            words = [w for w in (tok.strip(_PUNCT) for tok in text.split()) if w]
            try:
                pooled.append(pooling.pool_static_mean(words, table, pmid=pmid))
            except pooling.EmptyPoolError:
                skipped += 1
        if skipped:
            print(f"pool: skipped {skipped} documents with no in-vocabulary words", file=sys.stderr)
    else:
        if not args.container:
            raise _UsageError(f"pool: strategy {args.strategy} needs --container")
        for doc in read_container(args.container):
            if args.strategy == "mean_tokens":
                pooled.append(pooling.pool_mean_tokens(doc))
            elif args.strategy == "cls":
                pooled.append(pooling.pool_cls(doc))
            elif args.strategy == "mean_long_tokens":
                pooled.append(pooling.pool_long_tokens(doc, args.min_chars, args.marker))
            elif args.strategy == "cls_concat_mean":
                pooled.append(pooling.pool_cls_concat_mean(doc))
            elif args.strategy == "mean_words":
                alignment = align_subwords(doc.tokens, doc.special_mask, args.marker)
                pooled.append(pooling.pool_mean_words(doc, alignment))
    if not pooled:
        raise ValueError("no documents pooled")
    dim = pooled[0].vector.shape[0]
    store.register_space(args.space, dim)
    store.put_embeddings(args.space, [p.pmid for p in pooled], np.stack([p.vector for p in pooled]))
    fallbacks = sum(1 for p in pooled if p.fallback)
    note = f" ({fallbacks} long-token fallbacks)" if fallbacks else ""
    print(f"pooled {len(pooled)} documents into space {args.space} (dim {dim}){note}")
    return 0


def _cmd_fit_space(args) -> int:
    store = CorpusStore(args.store)
    pmids = store.embedded_pmids(args.source_space)
    if not pmids:
        raise ValueError(f"space {args.source_space!r} holds no embeddings")
    matrix, _ = store.get_embeddings(args.source_space, pmids)
    rng = np.random.default_rng(args.seed)
    sample_n = min(args.sample, len(pmids))
    sample_rows = np.sort(rng.choice(len(pmids), size=sample_n, replace=False))
    sample = matrix[sample_rows]
    mean = geometry.estimate_mean(sample)
    space = geometry.fit_pca(
        geometry.demean(sample, mean),
        args.dim,
        space_id=args.space,
        base_mean=mean,
        seed=args.seed,
    )
    reduced = geometry.apply_pca(space, matrix)
    store.register_space(args.space, args.dim)
    store.put_embeddings(args.space, pmids, reduced)
    geometry.save_space(space, Path(args.store) / "spaces" / f"{args.space}.space")
    config = RunConfig(
        store=args.store,
        space_id=args.space,
        mean_sample_n=args.sample,
        d_out=args.dim,
        seed=args.seed,
    )
    report = artifact_json(
        "space-fit",
        {
            "source_space": args.source_space,
            "n_vectors": len(pmids),
            "n_sampled": sample_n,
            "explained_variance": [float(v) for v in space.explained_variance],
        },
        config,
    )
    (Path(args.store) / "spaces" / f"{args.space}.fit.json").write_text(report, encoding="utf-8")
    print(f"fitted space {args.space}: {space.dim_in} -> {space.dim_out} over {sample_n} samples")
    return 0


def _render_table(report: retrieval.RetrievalReport) -> str:
    header = f"{'':40s}  Precision@{report.k}  Precision@R  MAP@R"
    row = (
        f"{report.identifier:40s}  {report.precision_at_k:13.2f}  "
        f"{report.precision_at_r:11.2f}  {report.map_at_r:5.2f}"
    )
    return header + "\n" + row + "\n"


def _cmd_bench(args) -> int:
    store = CorpusStore(args.store)
    labels = tuple(label.strip() for label in args.labels.split(",") if label.strip())
    if len(labels) < 2:
        raise _UsageError("bench: --labels needs at least two comma-separated journals")
    pool = retrieval.pool_from_store(store, args.space, labels)
    report = retrieval.run_benchmark(
        pool, n_queries=args.queries, seed=args.seed, k=args.k, identifier=args.space
    )
    config = RunConfig(
        store=args.store,
        space_id=args.space,
        n_queries=args.queries,
        k=args.k,
        seed=args.seed,
        labels=labels,
    )
    artifact = artifact_json("retrieval-report", {"report": report.to_dict()}, config)
    if args.out:
        _write_text(args.out, artifact)
    sys.stdout.write(_render_table(report))
    return 0


def _load_pmids(path: str) -> list[int]:
    return [int(line) for line in Path(path).read_text().split() if line.strip()]


def _element_set(args, store, which: str = "") -> semmetrics.ElementSet:
    suffix = f"-{which}" if which else ""
    attr = f"_{which}" if which else ""
    vectors_arg = getattr(args, f"vectors{attr}")
    pmids_arg = getattr(args, f"pmids{attr}")
    journal_arg = getattr(args, f"journal{attr}")
    if vectors_arg:
        pmids, matrix = read_emb_file(vectors_arg)
        return semmetrics.ElementSet(name=vectors_arg, vectors=matrix, ids=[int(p) for p in pmids])
    if not (args.store and args.space):
        raise _UsageError(f"metrics: need --vectors{suffix} or --store/--space with --pmids{suffix}/--journal{suffix}")
    if pmids_arg:
        pmids = _load_pmids(pmids_arg)
        name = pmids_arg
    elif journal_arg:
        pmids = [r.pmid for r in store.query(journal=journal_arg)]
        name = journal_arg
    else:
        raise _UsageError(f"metrics: need --pmids{suffix} or --journal{suffix}")
    matrix, found = store.get_embeddings(args.space, pmids)
    keep = np.flatnonzero(found)
    if keep.size == 0:
        raise ValueError(f"no embeddings found in space {args.space!r} for set {name!r}")
    return semmetrics.ElementSet(
        name=name, vectors=matrix[keep], ids=[pmids[i] for i in keep]
    )


def _cmd_metrics(args) -> int:
    store = CorpusStore(args.store) if args.store else None
    config = RunConfig(store=args.store or "", space_id=args.space or "", seed=0)
    parameters: dict = {"metric": args.metric}
    if args.metric == "perplexity":
        if not args.container:
            raise _UsageError("metrics: perplexity needs --container with losses")
        values = {}
        for doc in read_container(args.container):
            if doc.losses is None:
                raise ValueError(f"container document {doc.pmid} carries no losses")
            regular = doc.losses[~doc.special_mask]
            values[str(doc.pmid)] = semmetrics.perplexity(regular if regular.size else doc.losses)
        body = {"inputs": {"container": args.container}, "value": values, "parameters": parameters}
    elif args.metric in ("breadth_sigma", "breadth_pairwise"):
        element_set = _element_set(args, store)
        fn = semmetrics.breadth_sigma if args.metric == "breadth_sigma" else semmetrics.breadth_pairwise
        body = {
            "inputs": {"set": element_set.name, "size": element_set.size},
            "value": fn(element_set),
            "parameters": parameters,
        }
    elif args.metric == "set_distance":
        set_a = _element_set(args, store)
        set_b = _element_set(args, store, which="b")
        parameters["metric_kind"] = args.metric_kind
        body = {
            "inputs": {"set_a": set_a.name, "set_b": set_b.name},
            "value": semmetrics.set_distance(set_a, set_b, metric=args.metric_kind),
            "parameters": parameters,
        }
    elif args.metric == "distance_threshold":
        element_set = _element_set(args, store)
        parameters["percentile"] = args.percentile
        body = {
            "inputs": {"set": element_set.name, "size": element_set.size},
            "value": semmetrics.distance_threshold(
                semmetrics.pairwise_distances(element_set), args.percentile
            ),
            "parameters": parameters,
        }
    elif args.metric == "novelty_fraction":
        element_set = _element_set(args, store)
        if args.threshold is None:
            raise _UsageError("metrics: novelty_fraction needs --threshold "
                              "(use distance_threshold on a reference set first)")
        parameters["threshold"] = args.threshold
        body = {
            "inputs": {"set": element_set.name, "size": element_set.size},
            "value": semmetrics.novelty_fraction(element_set, args.threshold),
            "parameters": parameters,
        }
    elif args.metric == "axis_projection":
        if not args.positive or len(args.positive) != len(args.negative):
            raise _UsageError("metrics: axis_projection needs paired --positive/--negative EMB1 files")
        positive = [
            semmetrics.ElementSet(name=path, vectors=read_emb_file(path)[1]) for path in args.positive
        ]
        negative = [
            semmetrics.ElementSet(name=path, vectors=read_emb_file(path)[1]) for path in args.negative
        ]
        axis = semmetrics.build_axis(positive, negative)
        element_set = _element_set(args, store)
        ids = element_set.ids or list(range(element_set.size))
        values = {
            str(identifier): semmetrics.project_on_axis(vector, axis)
            for identifier, vector in zip(ids, element_set.vectors)
        }
        parameters["anchors"] = [list(pair) for pair in axis.provenance]
        body = {"inputs": {"set": element_set.name}, "value": values, "parameters": parameters}
    else:  # unreachable given argparse choices
        raise _UsageError(f"unknown metric {args.metric}")
    artifact = artifact_json("metric", body, config)
    _write_text(args.out or "-", artifact)
    return 0


def _cmd_export_map(args) -> int:
    if args.dims != 2:
        raise _UsageError("export-map: only --dims 2 is supported")
    store = CorpusStore(args.store)
    if args.journal:
        pmids = [r.pmid for r in store.query(journal=args.journal)]
        matrix, found = store.get_embeddings(args.space, pmids)
        keep = np.flatnonzero(found)
        pmids = [pmids[i] for i in keep]
        matrix = matrix[keep]
    else:
        pmids = store.embedded_pmids(args.space)
        matrix, _ = store.get_embeddings(args.space, pmids)
    if len(pmids) == 0:
        raise ValueError(f"space {args.space!r} holds no embeddings")
    if args.method == "pca":
        mean = geometry.estimate_mean(matrix)
        space2 = geometry.fit_pca(geometry.demean(matrix, mean), 2, base_mean=mean, seed=args.seed)
        coords = geometry.apply_pca(space2, matrix)
    else:
        coords = _umap_via_bridge(pmids, matrix, args.seed)
    lines = ["pmid\tx\ty\n"]
    for pmid, (x, y) in zip(pmids, coords):
        lines.append(f"{pmid}\t{float(x)!r}\t{float(y)!r}\n")
    _write_text(args.out, "".join(lines))
    if args.out != "-":
        config = RunConfig(store=args.store, space_id=args.space, seed=args.seed)
        meta = artifact_json("map-export", {"method": args.method, "rows": len(pmids)}, config)
        Path(args.out + ".meta.json").write_text(meta, encoding="utf-8")
    return 0


def _umap_via_bridge(pmids, matrix, seed: int) -> np.ndarray:
    """Shell out to the encoder bridge over the EMB1/TSV boundary."""
    executable = shutil.which("bridge")
    if executable is None:
        raise ValueError("umap export requires the encoder bridge ('bridge' executable) on PATH")
    with tempfile.TemporaryDirectory(prefix="semspace-umap-") as workdir:
        emb_path = Path(workdir) / "vectors.emb"
        tsv_path = Path(workdir) / "coords.tsv"
        write_emb_file(emb_path, pmids, matrix.astype(np.float16))
        proc = subprocess.run(
            [
                executable, "umap",
                "--reference", str(emb_path),
                "--project", str(emb_path),
                "--out", str(tsv_path),
                "--seed", str(seed),
            ],
            capture_output=True,
            text=True,
        )
        if proc.returncode != 0:
            raise ValueError(f"bridge umap failed: {proc.stderr.strip()}")
        coords = []
        with open(tsv_path, encoding="utf-8") as handle:
            header = handle.readline()
            if header.rstrip("\n") != "pmid\tx\ty":
                raise ValueError("bridge umap returned an unexpected TSV header")
            by_pmid = {}
            for line in handle:
                pmid_text, x, y = line.rstrip("\n").split("\t")
                by_pmid[int(pmid_text)] = (float(x), float(y))
        for pmid in pmids:
            coords.append(by_pmid[int(pmid)])
    return np.asarray(coords, dtype=np.float64)


def _cmd_validate_container(args) -> int:
    docs = read_container(args.path)
    dims = sorted({doc.dim for doc in docs})
    with_losses = sum(1 for doc in docs if doc.losses is not None)
    print(
        f"{args.path}: OK ({len(docs)} documents, dims {dims or '[]'}, "
        f"{with_losses} with losses)"
    )
    return 0


_HANDLERS = {
    "ingest": _cmd_ingest,
    "prep": _cmd_prep,
    "pool": _cmd_pool,
    "fit-space": _cmd_fit_space,
    "bench": _cmd_bench,
    "metrics": _cmd_metrics,
    "export-map": _cmd_export_map,
    "validate-container": _cmd_validate_container,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return USAGE_ERROR
    try:
        return _HANDLERS[args.command](args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return USAGE_ERROR
    except _DATA_ERRORS as exc:
        print(f"semspace {args.command}: {exc}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
