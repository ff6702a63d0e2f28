#!/usr/bin/env python3
"""The same pipeline driven entirely through the installed command line
tool: generate data, run two methods, print the comparison table."""

import subprocess
import sys
import tempfile
from pathlib import Path

work = Path(tempfile.mkdtemp(prefix="cli_demo_"))
data = work / "data"
runs = work / "runs"


def sh(*args):
    cmd = [sys.executable, "-m", "streamproto.cli", *args]
    print("$ streamproto", " ".join(args))
    out = subprocess.run(cmd, capture_output=True, text=True)
    sys.stdout.write(out.stdout)
    if out.returncode != 0:
        sys.stderr.write(out.stderr)
        raise SystemExit(out.returncode)
    print()


sh("gen", "synth", "--kind", "gaussian", "--classes", "8", "--dim", "24",
   "--per-class", "80", "--tasks", "4", "--separation", "7", "--seed", "1",
   "--out", str(data))

manifest = str(data / "manifest.json")
sh("run", "--manifest", manifest, "--method", "proposed", "--q", "96",
   "--seeds", "0,1", "--out", str(runs))
sh("run", "--manifest", manifest, "--method", "ncm", "--seeds", "0,1",
   "--out", str(runs))

sh("report", "--runs", str(runs))
