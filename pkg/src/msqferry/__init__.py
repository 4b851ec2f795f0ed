"""Ferry-relayed delivery on multi-scale quartered triangle networks."""
from .cycles import CyclePlan, Scheme, assign_cycles
from .geometry import Network, generate, init_triangulation, subdivide_face, validate
from .queueing import optimize_rates, plan_flows
from .routing import route

__version__ = "0.1.0"

__all__ = ["CyclePlan", "Network", "Scheme", "assign_cycles", "generate", "init_triangulation",
           "optimize_rates", "plan_flows", "route", "subdivide_face", "validate", "__version__"]
