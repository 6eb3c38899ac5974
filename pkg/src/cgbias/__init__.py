"""Biased equilibria and price-of-anarchy bounds for nonatomic routing games."""

from .costfun import *  # noqa: F401,F403
from .exceptions import *  # noqa: F401,F403
from .exhibits import *  # noqa: F401,F403
from .flowsolve import *  # noqa: F401,F403
from .netgraph import *  # noqa: F401,F403
from .smoothbounds import *  # noqa: F401,F403
from .estimators import BiasedEquilibrium, BPoAEstimator, SmoothnessFitter, SocialOptimum  # noqa: F401
from .io import dumps, loads, load, dump, DocumentError  # noqa: F401

__version__ = "0.1.0"
