"""Predict which fault clearances end in a pole slip.

For each clearance angle and grid sag depth the quasi-static classifier
settles the network, the limited voltage loop and the oscillator amplitude
with the integrators held, then compares the voltage-loop d-axis current
with the current the oscillator asks for. A coarse grid is checked against
full simulations; `vocfrt analyze --with-oracle` runs the 20 x 20 version.
"""

import numpy as np

from vocfrt import config
from vocfrt.analysis import CONDITION1, agreement, clearance_grid

sc = config.to_scenario(config.preset("paper-sec2-baseline"))
deltas = np.linspace(0.0, -np.pi, 7)
sags = np.linspace(0.0, 1.0, 4)
pts = clearance_grid(sc, deltas, sags, with_oracle=True, workers=1)
grid = {(p.delta_c, p.sag): p for p in pts}

print("rows: sag depth, columns: clearance angle in rad")
print("'o' converges, 'x' slips; a '!' marks a disagreement with simulation\n")
print("      " + "".join(f"{d:>7.2f}" for d in deltas))
for s in sags:
    cells = []
    for d in deltas:
        p = grid[(d, s)]
        c = "o" if p.predicted == CONDITION1 else "x"
        cells.append(f"{c + ('' if p.agree else '!'):>7}")
    print(f"{s:>6.2f}" + "".join(cells))
print(f"\nagreement with simulation: {100 * agreement(pts):.1f}%")
