"""Random labels, then the resistance term alone: predictions drift toward uniform.

With 10 classes the mean resistance loss should settle near ln 10 = 2.303.
Run:  python3 demos/uniformization.py   (about ten seconds)
"""
import math

from sprl.experiment import uniformization_run

ce, res = uniformization_run(n=1000, c=10, ce_epochs=100, resistance_epochs=200)
print(f"cross-entropy after 100 epochs on random labels: {ce[-1]:.3f}")
for epoch in range(0, 200, 25):
    print(f"resistance epoch {epoch + 1:>3}: {res[epoch]:.4f}")
print(f"final {res[-1]:.4f}  vs ln 10 = {math.log(10):.4f}")
