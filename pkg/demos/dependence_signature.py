"""Input and mechanism are decoupled only in the causal direction.

Fit the mechanism on half a sample, fit it again on the other half after
changing the input distribution, and measure the parameter shift in units
of its standard error. For the backward factorization the shift grows like
sqrt(k), which shows up as a slope near 1/2 against log2 k.
"""
from socausal.fisher import split_sample_experiment

sizes = [100, 1000, 10_000]
theta = (0.4, -1.0, 1.5, 0.8)
rep = split_sample_experiment("mixture-forward", theta, 0.7, sizes, range(10))
ctl = split_sample_experiment("mixture-forward", theta, 0.7, sizes, range(10), control=True)
for k, b in zip(sizes, rep.median_proxy_bits()):
    print(f"k={k:>6}  median proxy bits {b:6.2f}")
print(f"slope {rep.fitted_slope:.3f}   control slope {ctl.fitted_slope:.3f}")
