"""Standalone bridge executable: encode | export-vectors | umap.

Consumes normalized-text TSV (pmid<TAB>text) and EMB1 vector files; emits
TACS containers, word-vector text files, and 2-D coordinate TSVs. Exit
codes: 0 success, 1 usage error, 2 data/job error.
"""

from __future__ import annotations

import argparse
import sys

from encoder_bridge import __version__
from encoder_bridge.encoding import EncodeError, EncodeJob, encode_documents
from encoder_bridge.projection import export_umap
from encoder_bridge.vectors import WordVectorExportError, export_word_vectors


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="bridge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"bridge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="encode a TSV of normalized text into a TACS container")
    p.add_argument("--checkpoint", required=True, help="model name or local checkpoint path")
    p.add_argument("--in", dest="texts", required=True, help="pmid<TAB>text TSV")
    p.add_argument("--out", required=True, help="container destination")
    p.add_argument("--max-length", type=int, default=512)
    p.add_argument("--losses", action="store_true", help="emit per-token masked-LM losses")
    p.add_argument("--loss-stride", type=int, default=0,
                   help="0 = exact one-pass-per-token; s > 0 = s approximate passes")
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--device", default="cpu")

    p = sub.add_parser("export-vectors", help="convert a static word-vector model to text format")
    p.add_argument("--model", required=True, help=".bin (word2vec binary) or .txt model file")
    p.add_argument("--out", required=True)

    p = sub.add_parser("umap", help="2-D neighbor embedding of EMB1 vectors, written as TSV")
    p.add_argument("--reference", required=True, help="EMB1 file the embedding is fitted on")
    p.add_argument("--project", required=True, help="EMB1 file projected into the fit")
    p.add_argument("--out", required=True, help="TSV destination (pmid, x, y)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--neighbors", type=int, default=15)

    return parser


def _read_texts(path: str) -> list[tuple[int, str]]:
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


def _cmd_encode(args) -> int:
    job = EncodeJob(
        checkpoint=args.checkpoint,
        inputs=_read_texts(args.texts),
        max_length=args.max_length,
        output=args.out,
        emit_losses=args.losses,
        loss_stride=args.loss_stride,
        batch_size=args.batch_size,
        device=args.device,
    )
    summary = encode_documents(job)
    print(
        f"encoded {summary.encoded} documents to {args.out} "
        f"({len(summary.skipped)} skipped, {len(summary.truncated)} truncated)"
    )
    return 0


def _cmd_export_vectors(args) -> int:
    count = export_word_vectors(args.model, args.out)
    print(f"exported {count} word vectors to {args.out}")
    return 0


def _cmd_umap(args) -> int:
    rows = export_umap(
        args.reference, args.project, args.out, seed=args.seed, n_neighbors=args.neighbors
    )
    print(f"projected {rows} vectors to {args.out}")
    return 0


_HANDLERS = {
    "encode": _cmd_encode,
    "export-vectors": _cmd_export_vectors,
    "umap": _cmd_umap,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    try:
        return _HANDLERS[args.command](args)
    except (EncodeError, WordVectorExportError, ValueError, OSError) as exc:
        print(f"bridge {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
