"""Run a small verification grid from Python and replay one case from the report."""

import io
import os
import tempfile

from elldet import IdentityId
from elldet.harness import RunConfig, parse_grid, read_report, replay, run_suite

cfg = RunConfig(seed=42, identities=(IdentityId.THM21, IdentityId.RCG, IdentityId.CN_SUM),
                grid=parse_grid("2x2,2x3,3x3"), draws_per_cell=5, output_format="text")

# human readable lines
buf = io.StringIO()
summary = run_suite(cfg, buf)
print(buf.getvalue())

# JSON lines report, then re-evaluate the worst case from its parameter echo
path = os.path.join(tempfile.mkdtemp(), "report.jsonl")
with open(path, "w") as fh:
    run_suite(RunConfig(**{**cfg.__dict__, "output_format": "json"}), fh)

head, recs, summ = read_report(path)
print(head["prng"])
case = summ["worst_case"]["case"]
stored, fresh = replay(path, case)
print(case, stored["rel_residual"], fresh.rel_residual)
