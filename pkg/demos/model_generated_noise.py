"""A weak model trained on 10% of the labels relabels everything; train on its guesses.

Run:  python3 demos/model_generated_noise.py   (about fifteen seconds)
"""
from dataclasses import replace

from sprl.data import make_blobs
from sprl.noise import model_generated_noise
from sprl.trainer import TrainConfig, last10, train

data = make_blobs(n=2000, c=4, d=20, class_separation=2.0, seed=1)
base = TrainConfig(t1=5, seed=1)
noisy, weak_acc = model_generated_noise(data, 0.1, base, seed=1)
data = data.with_noisy_labels(noisy)
print(f"weak model test accuracy {weak_acc:.3f}, label noise it produced {data.noise_rate():.3f}")

for method in ("standard", "sprl"):
    history, _ = train(replace(base, method=method), data)
    print(f"{method:>9}: last-10 test accuracy {last10(history):.3f}")
