#! /usr/bin/env python3
# Convergence histories on the structural-dynamics bidiagonal matrices.
#
# The matrix is upper bidiagonal with four tiny leading diagonal entries and
# a long ramp of integers. The shifted family uses sigma = 1 and sigma = -1
# with the normalised all-ones right-hand side. Both solvers run through the
# benchmark harness, which writes one CSV per curve plus a gnuplot script.

import os
import sys
import tempfile

from shiftkrylov.bench import ExperimentConfig, run_experiment

out_root = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="bidiag-")

for preset in ("example5.3-case1", "example5.3-case2"):
    out = os.path.join(out_root, preset)
    report = run_experiment(ExperimentConfig(preset=preset, solver="both", out=out))
    print(report.summary())
    print(f"-> histories in {out} (gnuplot {os.path.join(out, 'plot.gp')})\n")

# smoothness is the fraction of sampled true residuals that went up rather
# than down. The quasi-minimal variant avoids the large spikes of BiCGstab.
# It still wobbles slightly on its plateaus, and this metric counts those
# wobbles as increases too.
