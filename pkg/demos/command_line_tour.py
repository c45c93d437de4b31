"""End-to-end tour of the ``marineseg`` command line.

Renders a synthetic sequence, runs mono and stereo detection on it,
scores both against the ground truth and prints a timing table.  Every
step is the same call the shell command makes (``marineseg <command>``).

    python demos/command_line_tour.py [work_dir]
"""

import sys
import tempfile
from pathlib import Path

from marineseg.cli import main

work = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="marineseg-"))
data = work / "data"


def step(*argv):
    print(f"\n$ marineseg {' '.join(map(str, argv))}")
    code = main([str(a) for a in argv])
    if code:
        raise SystemExit(code)


step("synth", "-q", "--frames", 6, "--width", 640, "--height", 480, "--glitter", 10, "--seed", 3, "--out", data)
for mode in ("mono", "stereo"):
    step("detect", "-q", "--mode", mode, "--data", data, "--out", work / mode)
for mode in ("mono", "stereo"):
    step("eval", "-q", "--detections", work / mode / "detections.json",
         "--annotations", data / "annotations", "--name", mode)
step("bench", "-q", "--frames", 4, "--width", 640, "--height", 480)
print(f"\noutputs are in {work}")
