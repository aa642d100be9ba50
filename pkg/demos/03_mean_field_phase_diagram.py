"""
Mean-field phase diagram
========================

Forcing each row into a translation-invariant product state closes the
dynamics on three numbers.  Iterating that map to stationarity gives a
phase diagram whose critical line changes character with p1.
"""

# %%
from pathlib import Path

import numpy as np

from qca_critic.gates import make_gate_params
from qca_critic.meanfield import (
    mf_critical_line,
    mf_p1_one_closed_form,
    mf_phase_diagram,
    mf_stationary,
    order_boundary,
)
from qca_critic.plotting import phase_diagram_svg

out = Path(__file__).with_name("output")
out.mkdir(exist_ok=True)

# %%
# At p1 = 1 the active density has a closed form.
for p2 in (0.0, 0.1, 0.2, 0.3):
    state, converged, iters = mf_stationary(make_gate_params(1.0, p2), max_iter=100_000)
    print(f"p2={p2:.1f}: iterated {state.n:.6f} ({iters} steps), closed form {mf_p1_one_closed_form(p2):.6f}")

# %%
# The order classifier compares the steepest slope with a threshold quoted at
# 2001 p2 samples.  On coarser grids the threshold is scaled down with the
# sample density while continuous slopes stay put, so keep the full grid.
p1 = np.linspace(0.1, 1.0, 10)
p2 = np.linspace(0.0, 1.0, 2001)
diagram = mf_phase_diagram(p1, p2)
records = mf_critical_line(diagram)
for r in records:
    print(f"p1={r.p1:.1f}  p2_crit={r.p2_crit:.4f}  {r.order:13s} max|grad|={r.max_abs_gradient:8.2f}")
print("order changes between slices at p1 ~", order_boundary(records))

# %%
(out / "phase_diagram.svg").write_text(phase_diagram_svg(diagram, records))
print("wrote", out / "phase_diagram.svg")
