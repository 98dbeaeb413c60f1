"""
Structure of the symmetry algebra
=================================

Brackets of the fields R1..R4 are computed from differenced Jacobians and
compared with the expected structure sl(2) + R. The superposition group law
has identity (1, 1, 1, 1) and is associative near it.
"""

import numpy as np

from wavemap.vessiot import IDENTITY, GroupPoint, group_law, structure_check

points = np.random.default_rng(0).uniform(0.6, 1.8, (20, 4))
for name in ("R", "rho", "E1", "E2"):
    rep = structure_check(name, points)
    for res in rep.results:
        status = "holds" if res.holds else "FAILS"
        print(f"{name:4s} {res.relation.text:24s} {res.max_deviation:9.2e}  {status}")

a, b, c = (GroupPoint.of(1 + 0.1 * np.random.default_rng(k).standard_normal(4)) for k in range(3))
print("m(e, a) = a:", group_law(IDENTITY, a).distance(a))
print("associativity defect:", group_law(group_law(a, b), c).distance(group_law(a, group_law(b, c))))
