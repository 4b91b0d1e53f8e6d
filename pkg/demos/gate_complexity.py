"""A smooth OR gate is simple in its causal direction only.

The output of an n-input OR gate is a degree-1 tanh function of its inputs.
Asking for one input given the others and the output needs interaction
terms up to degree n-2.
"""
from socausal.closedform import causal_gate_table, minimal_tanh_degree, or_gate_kernel, reverse_gate_degree

K = 30
for n in (3, 4, 5):
    fwd = minimal_tanh_degree(causal_gate_table(or_gate_kernel(K, n - 1)), n - 1)
    rev = reverse_gate_degree(n, K)
    print(f"n={n}: causal degree {fwd.degree}, reverse degree {rev.degree}  "
          f"(residuals {['%.1e' % r for r in rev.residuals]})")
