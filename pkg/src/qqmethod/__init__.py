"""Quantile-quantile regression for distribution fitting and reference intervals."""

__version__ = "0.1.0"

from .errors import (CalibrationError, CalibrationWarning, DegenerateError, DomainError,
                     FormatError, InsufficientDataError, QQError, SearchWarning)
from .kernel import (RngStream, rng_standard_normal, std_normal_cdf, std_normal_inv_cdf,
                     student_t_cdf, student_t_inv_cdf)
from .scores import (BLOM, HAZEN, WEIBULL, PlottingPosition, ScoreVector, hazen_scores,
                     normal_scores, t_scores)
from .qqfit import (QQFit, ReferenceInterval, Sample, fit_censored, fit_full, fit_winsorized,
                    qq_regression, reference_interval)
from .shapefit import (BoxCoxFit, TFit, boxcox_transform, fit_boxcox_pl, fit_boxcox_qqr,
                       fit_t_nu)
from .normtest import NormalityTest, standardize, test_normality, z_transform
