"""Compare the named inertia schedules and validate them.

The decreasing families alpha_n = 1 / (c0 + c1 * n * (log n)^e) decay
to zero slowly enough to keep momentum useful for a long while; the
validator scans the descent margins delta_n and reports from which
index the energy decrease is certified.
"""

import numpy as np

from nfbkit.certificates import make_certificate
from nfbkit.schedules import (ScheduleSpec, alpha_at, parse_schedule,
                              validate_schedule)

cert = make_certificate(0.5, 0.1, lam=1.0, alpha=0.0)
print(f"certificate: psi={cert.psi}, lam={cert.lam}, "
      f"alpha_sup={cert.alpha_sup}")
print()

labels = ("const:0", f"const:{0.99 * cert.alpha_sup:.6f}",
          "dec1", "dec2", "dec3", "ramp:0.3,5")
ns = np.array([0, 1, 10, 100, 1000, 10000, 100000])

header = "schedule".ljust(16) + "".join(f"n={n}".rjust(11) for n in ns)
print(header)
for label in labels:
    spec = parse_schedule(label)
    vals = "".join(f"{alpha_at(spec, int(n)):11.6f}" for n in ns)
    print(label.ljust(16) + vals)
print()

print("validation against the certificate (horizon 100000):")
for label in labels + ("const:" + f"{cert.alpha_sup + 0.01:.6f}",):
    spec = parse_schedule(label)
    rep = validate_schedule(spec, cert)
    if rep.feasible:
        print(f"  {label:<18} feasible, descent certified from "
              f"n={rep.validated_from}")
    else:
        print(f"  {label:<18} INFEASIBLE: violates {rep.first_violation}")
print()

# a custom decreasing family and a callable relaxation both validate
custom = parse_schedule("custom:2,1e-4,1.01")
rep = validate_schedule(custom, cert)
print(f"custom:2,1e-4,1.01 -> feasible={rep.feasible}, "
      f"validated_from={rep.validated_from}")

varying = ScheduleSpec("constant", {"alpha": 0.1},
                       lam=lambda n: 0.9 + 0.05 * np.cos(n / 10.0),
                       name="const alpha, wobbling lambda")
rep = validate_schedule(varying, cert)
print(f"{varying.name} -> feasible={rep.feasible}")
