"""weakgal: adversarial weak-form neural solver for second-order elliptic PDEs.

The package has two halves that share one set of primitives:

* a solver - dense networks for trial and test functions, trained on the
  sampled weak-form residual of a divergence-form elliptic problem with
  Robin/Neumann/penalized-Dirichlet boundary data;
* a verification lab - finite-difference reference solvers, exact Rademacher
  enumeration, and the quantitative class-capacity bounds the solver's error
  analysis rests on, each paired with an empirical probe.
"""

__version__ = "0.1.0"

from . import expr, network, pde, loss, oracle, theory, train, cli  # noqa: F401
