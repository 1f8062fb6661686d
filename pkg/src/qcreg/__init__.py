"""Principal solutions of the Beltrami equation on a flat torus, and
numerical probes of how smoothness of the coefficient transfers to them."""

__version__ = "0.1.0"
