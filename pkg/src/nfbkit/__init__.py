"""nfbkit: inertial-relaxed nonlinear forward-backward splitting.

A small numpy/scipy toolkit for solving monotone inclusions
``0 in A z + C z`` by warped-resolvent (nonlinear forward-backward)
iterations with inertia and relaxation.  It provides

* closed-form feasibility certificates for the step parameters
  (``nfbkit.certificates``),
* inertia schedules and their validation (``nfbkit.schedules``),
* a single iteration engine plus method kernels for the classical
  specializations — forward-backward, Tseng's forward-backward-forward,
  forward-backward-half-forward, Chambolle-Pock, Condat-Vu and the
  four-operator primal-dual method with an extra Lipschitz term
  (``nfbkit.engine``, ``nfbkit.methods``),
* benchmark problems: affinely constrained least squares and TV/wavelet
  image restoration (``nfbkit.experiments``),
* a small CLI (``nfbkit ...``) wrapping parameter checks and the
  benchmarks.
"""

from . import linalg, operators, certificates, schedules, engine, methods
from . import experiments

__version__ = "0.1.0"

__all__ = [
    "linalg", "operators", "certificates", "schedules", "engine",
    "methods", "experiments", "__version__",
]
