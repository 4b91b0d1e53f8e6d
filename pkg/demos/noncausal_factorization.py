"""The mixture model written the other way round.

A two-component Gaussian mixture with shared variance has an exact
backward factorization: y is a (non-Gaussian) mixture marginal and
p(x=1|y) is logistic. This script checks the closed form numerically.
"""
import numpy as np

from socausal.closedform import GaussMixtureModel, logistic_response, noncausal_sigmoid_params, unique_gamma

m = GaussMixtureModel(gamma=0.3, nu0=-1.0, nu1=1.5, rho=0.8)
alpha, beta = noncausal_sigmoid_params(m)
print(f"p(x=1|y) = 1 / ({beta:.4f} exp({alpha:.4f} y) + 1)")

ys = np.linspace(-3, 3, 7)
pdf = lambda y, mu: np.exp(-(y - mu) ** 2 / (2 * m.rho ** 2))  # noqa: E731
bayes = m.gamma * pdf(ys, m.nu1) / (m.gamma * pdf(ys, m.nu1) + (1 - m.gamma) * pdf(ys, m.nu0))
print("max |closed form - Bayes rule| =", float(np.max(np.abs(logistic_response(alpha, beta, ys) - bayes))))

# thresholding a Gaussian at b gives the input probability whose
# marginal is the Gaussian itself
print("gamma for N(0,1) thresholded at 0.5:", round(unique_gamma(0.0, 1.0, 0.5), 6))
