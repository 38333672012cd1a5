"""Read-only analysis of acdc run directories: learning-curve figures with
median/interquartile bands across seeds, and TTT/regret summary tables that
independently recompute every value from the raw CSVs."""

__version__ = "0.1.0"
