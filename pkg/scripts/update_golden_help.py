"""Regenerate tests/golden/*.txt from the current argument parser.

Run after an intentional change to the command-line interface, then review
the diff.
"""

import contextlib
import io
from pathlib import Path

from bandsup.cli import SUBCOMMANDS, main

GOLDEN = Path(__file__).resolve().parent.parent / "tests" / "golden"


def help_text(argv):
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf), contextlib.suppress(SystemExit):
        main(argv + ["--help"])
    return buf.getvalue()


if __name__ == "__main__":
    GOLDEN.mkdir(exist_ok=True)
    (GOLDEN / "help_main.txt").write_text(help_text([]))
    for name in SUBCOMMANDS:
        (GOLDEN / f"help_{name}.txt").write_text(help_text([name]))
    print(f"wrote {len(SUBCOMMANDS) + 1} files to {GOLDEN}")
