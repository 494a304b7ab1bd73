"""Eye-tracking reading-difficulty screening pipeline.

Cleaning and imputation of interest-area reports, percentile labeling,
a from-scratch random forest with Bayesian-style tuning, cross-validated
evaluation, and Ward clustering of reader subgroups.
"""

__version__ = "0.1.0"

SCHEMA_VERSION = 1
