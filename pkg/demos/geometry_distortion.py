"""How an anisotropic design reorders distances between coefficient vectors.

Three coefficient vectors are compared in coefficient space and in the space
of fitted values ``X beta``. Under a design that stretches the first axis,
the closest pair in one space is not the closest pair in the other, so a
repulsion measured on raw coefficients pushes apart the wrong pair.

    python demos/geometry_distortion.py
"""

import numpy as np

from repmix import geometry_report

betas = np.array([[0.0, 1.0], [0.0, -1.0], [0.2, 1.0]])
for label, gram in (("isotropic", np.eye(2)), ("anisotropic", np.diag([100.0, 0.01]))):
    rep = geometry_report(gram, betas, 1.0)
    print(f"{label}: ordering flips = {rep['ordering_flips']}")
    for (i, j), db, dm in zip(rep["pairs"], rep["beta_space_dists"], rep["mean_space_dists"]):
        print(f"  pair ({i}, {j}): coefficient distance {db:7.3f}   fitted-value distance {dm:7.3f}")
