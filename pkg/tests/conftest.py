"""Shared fixtures: fitted parameter vectors used across the suite.

The three theta vectors are the fitted log-polynomial coefficients for
the breast-cancer (n = 3226), TCGA (n = 20068), and Huang pilot
(n = 48803) p-value sets; SIG_BC3 holds the reported standard errors
that drive the latent-dependence scenarios.
"""
from hypothesis import HealthCheck, settings

from fdrdist import ThetaParams

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

THETA_BC3 = ThetaParams(3, (0.158, 0.0492, 0.0201))
SIG_BC3 = (0.084, 0.0506, 0.0075)
THETA_TCGA = ThetaParams(4, (0.100, 0.0761, 0.000493, 0.00195))
THETA_HUANG = ThetaParams(3, (0.0524, 0.00983, 0.00327))
