"""frontlab: a desk-scale numerical laboratory for transition fronts in
heterogeneous reaction-advection-diffusion media."""

from . import medium, cell, evolve, fronts, random_media, cli  # noqa: F401

__version__ = "0.1.0"
