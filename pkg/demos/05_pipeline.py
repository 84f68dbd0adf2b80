# The whole experiment in one call, on a grid small enough to finish in seconds.
import json
import sys
import tempfile
from pathlib import Path

from degpar.pipeline import ExperimentConfig, run_pipeline

cfg = ExperimentConfig.from_dict({
    "problem": "tt_example",
    "params": {"l": 1, "n": 1},
    "cells": [64, 64],
    "viscosities": [0.08, 0.04],
    "T": 0.05,
    "n_sphere": 1024,
    "n_lambda": 20000,
    "seed": 3,
})

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())
report = run_pipeline(cfg, out)
print(json.dumps(report.verdict, indent=2))
print(report.note)
print(sorted(p.name for p in out.iterdir()))

# The same config is also reachable from the shell:
#   degpar pipeline --config cfg.json --output out/
