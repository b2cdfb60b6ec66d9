"""Standard training vs self-paced resistance learning on blobs with half the labels flipped.

Run:  python3 demos/noisy_blobs_comparison.py
Takes roughly half a minute on one core.
"""
from sprl.data import make_blobs
from sprl.noise import NoiseSpec, corrupt
from sprl.trainer import TrainConfig, best_accuracy, last10, train

# four Gaussian clusters in 20 dimensions, 1600 training points
clean = make_blobs(n=2000, c=4, d=20, class_separation=4.0, seed=1)
data = corrupt(clean, NoiseSpec("symmetric", 0.5, seed=1))
print(f"realised noise rate: {data.noise_rate():.3f}")

for method in ("standard", "sprl"):
    history, _ = train(TrainConfig(method=method, seed=1), data)
    # plain cross-entropy peaks early and then memorises the flipped labels
    trace = " ".join(f"{m.test_accuracy:.2f}" for m in history[::20])
    print(f"{method:>9}: max {best_accuracy(history):.3f}  last-10 {last10(history):.3f}")
    print(f"           test accuracy every 20 epochs: {trace}")
    if method == "sprl":
        prec = " ".join(f"{m.selection_precision:.2f}" for m in history[20::20])
        print(f"           precision of the selected curriculum: {prec}")
