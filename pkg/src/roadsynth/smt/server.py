"""Stdio SMT-LIB server: reads a command stream, answers on stdout.

Lets the refinement layer (or anything else) talk to the built-in solver as
an external process: pipe a document in, read "sat"/"unsat" and values back.
"""

from __future__ import annotations

import sys

from .text import run_session


def main(stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    text = stdin.read()
    for line in run_session(text):
        stdout.write(line + "\n")
        stdout.flush()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
