"""Site-specific ray tracing and channel statistics for satellite-terrestrial
links along a high-speed railway at 22.6 GHz."""

__version__ = "0.1.0"

SPEED_OF_LIGHT = 299_792_458.0
FREQUENCY_HZ = 22.6e9
