# %% [markdown]
# # Least squares, t-tests and fit measures
#
# A three-point example small enough to check by hand: the points (1, 1),
# (2, 2), (3, 4) give slope 3/2, intercept -2/3, residuals (1/6, -1/3, 1/6).

# %%
import math

import numpy as np

from transit2sls.regress import ModelFrame, fit_ols, format_report, t_test

frame = ModelFrame("y", np.array([1.0, 2.0, 4.0]), ("x",), np.array([[1.0], [2.0], [3.0]]))
fit = fit_ols(frame)
print(format_report(fit))

# %%
d = fit.diagnostics
print("adjusted R²", d.adjusted_r_squared, "vs 13/14 =", 13 / 14)
print("MAE        ", d.mae, "vs 2/9 =", 2 / 9)
print("RMSE       ", d.rmse, "vs sqrt(1/18) =", math.sqrt(1 / 18))

# %% [markdown]
# The significance rule compares |t| with the critical value, so a negative
# estimate with t = -1.99 against 1.65 is significant.

# %%
print(t_test(-0.13, 0.13 / 1.99, 1.65))

# %% [markdown]
# Exact Student-t critical values are available instead of the fixed
# 1.96 / 1.65 pair.

# %%
print(format_report(fit_ols(frame, critical_mode="student-t")))
