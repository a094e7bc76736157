#!/usr/bin/env python3
"""Regenerate the committed golden artifacts under tests/golden/.

Run after intentionally changing a fixture or a file format, then review
the diff before committing.
"""

import pathlib
import shutil
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "tests"))

from golden_support import GOLDEN, generate_artifacts  # noqa: E402

if __name__ == "__main__":
    if GOLDEN.exists():
        shutil.rmtree(GOLDEN)
    GOLDEN.mkdir(parents=True)
    for path in generate_artifacts(GOLDEN):
        print(path.relative_to(GOLDEN.parent.parent))
