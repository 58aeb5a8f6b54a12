"""Resource broker that matches typed requirements against published offers
and drives the matched resources through their lifecycle on simulated
providers."""

__version__ = "0.1.0"
