import argparse
from pathlib import Path

from src.audio.index import read_wav
from src.commands.utils import print_summary
from src.config.logging import get_logger
from src.metrics.index import evaluate, read_sidecar, write_csv_rows, write_report
from src.middleware.run_context import track_command

logger = get_logger(__name__)

"""
`evaluate`

  - evaluate ref.wav test.wav --out-prefix results/take1 [--sidecar pesq_stoi.txt]
      ~ results/take1.metrics.txt (key = value) and results/take1.metrics.csv (one row)
"""


def register(subparsers) -> None:
    parser = subparsers.add_parser("evaluate", help="MCD and LSD between a reference and a recovered WAV")
    parser.add_argument("ref", help="reference WAV")
    parser.add_argument("test", help="recovered WAV")
    parser.add_argument("--out-prefix", help="write <prefix>.metrics.txt and <prefix>.metrics.csv")
    parser.add_argument("--sidecar", help="externally computed pesq/stoi as key = value lines")
    parser.set_defaults(handler=cmd_evaluate)


def cmd_evaluate(args: argparse.Namespace) -> int:
    with track_command("evaluate", ref=args.ref, test=args.test):
        ref = read_wav(args.ref)
        test = read_wav(args.test)
        sidecar = read_sidecar(args.sidecar) if args.sidecar else None
        report = evaluate(ref, test, sidecar)
        flat = report.to_flat()
        if args.out_prefix:
            write_report(flat, Path(f"{args.out_prefix}.metrics.txt"))
            write_csv_rows([{"ref": args.ref, "test": args.test, **flat}], Path(f"{args.out_prefix}.metrics.csv"))
        print_summary((key, round(value, 6) if isinstance(value, float) else value) for key, value in flat.items())
    return 0
