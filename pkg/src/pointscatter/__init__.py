"""Poisson random model for moments of point-scatterer eigenfunctions on flat tori."""

from pointscatter.partition_polynomials import (
    PartitionPolynomialTable,
    bessel_log_series,
    build_table,
    enumerate_partitions,
)
from pointscatter.stats import EmpiricalDistribution, ks_one_sample, ks_two_sample, rng_stream

__all__ = [
    "PartitionPolynomialTable",
    "bessel_log_series",
    "build_table",
    "enumerate_partitions",
    "EmpiricalDistribution",
    "ks_one_sample",
    "ks_two_sample",
    "rng_stream",
]

__version__ = "0.1.0"
