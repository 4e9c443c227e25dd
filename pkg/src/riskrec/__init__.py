"""riskrec: regression-test prioritization from usage telemetry and change history.

The pipeline completes a sparse user x component access-frequency matrix by
item-based collaborative filtering, scores per-component defect risk with a
linear model over change-history metrics, ranks components by the product of
the two scores, orders test suites by covered risk, and evaluates orderings
with APFD/NAPFD budget sweeps against four control techniques.
"""

__version__ = "0.1.0"

from .errors import InputError, InvariantError, ParseError

__all__ = ["InputError", "InvariantError", "ParseError", "__version__"]
