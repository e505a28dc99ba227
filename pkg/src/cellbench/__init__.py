"""Frame-level performance benchmarking of cell-switched networks."""

__version__ = "0.1.0"
