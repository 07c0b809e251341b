"""Free-space B92 QKD link simulator: turbulence statistics, link budget, protocol Monte Carlo, beam-wander tracking."""

__version__ = "0.1.0"
