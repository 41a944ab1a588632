"""Reference interval from a QQ regression, full and left-censored.

Run with ``python demos/01_reference_interval.py``.
"""
# %%
import numpy as np

from qqmethod import Sample, fit_censored, fit_full, fit_winsorized, reference_interval

rng = np.random.default_rng(7)
values = 50 + 8 * rng.standard_normal(120)

# %% The intercept estimates the mean and the slope estimates the sd.
fit = fit_full(Sample.from_values(values))
ri = reference_interval(fit)
print(f"mean {fit.intercept:.2f}  sd {fit.slope:.2f}  r {fit.r:.4f}")
print(f"95% interval [{ri.lower:.2f}, {ri.upper:.2f}], se of upper limit {ri.se_upper:.2f}")

# %% Censor everything below 42: those readings drop out of the regression,
# but their ranks still fix the scores of the remaining points.
cens = Sample.from_values(values, censor_below=42.0)
cfit = fit_censored(cens)
print(f"\ncensored {cens.k_censored} of {cens.n_total} (f = {1 - cens.censored_fraction:.2f} kept)")
print(f"mean {cfit.intercept:.2f}  sd {cfit.slope:.2f}")
print(f"effective n for mean/sd/limit: {cfit.n_eff_mean:.1f} / {cfit.n_eff_sd:.1f} / "
      f"{cfit.n_eff_limit:.1f}")

# %% Dropping two points from each end guards against stray outliers.
wfit = fit_winsorized(Sample.from_values(np.r_[values[:-1], 400.0]), 2)
print(f"\nwith one wild value, winsorized sd {wfit.slope:.2f} "
      f"(n_eff for the limit {wfit.n_eff_limit:.0f})")
