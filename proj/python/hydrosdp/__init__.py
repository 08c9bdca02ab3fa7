"""Water values of a hydro cascade with reserve provision."""

from ._core import *  # noqa: F401,F403
from ._core import Method, ValuationConfig, backward_induction, make_grids

__version__ = "0.1.0"


def value_function(plant, params, method=Method.M1, reserves=False, n_v=21, n_w=21, **kwargs):
    """Grids plus backward induction in one call; kwargs set ValuationConfig fields."""
    config = ValuationConfig()
    config.method = method
    config.reserves_enabled = reserves
    for key, value in kwargs.items():
        if not hasattr(config, key):
            raise TypeError(f"unknown valuation option {key!r}")
        setattr(config, key, value)
    grids = make_grids(plant, params, method, n_v, n_w)
    return backward_induction(plant, params, grids, config)
