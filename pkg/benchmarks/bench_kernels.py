"""Time the numba kernels against their numpy fallbacks.

Shapes follow one training step at the default settings: a 64 + 256 row
minibatch over a 2000-word vocabulary, 500 hidden units.

    python benchmarks/bench_kernels.py [--repeat 50] [--vocab 2000] [--width 500]

The last column is the speedup of numba over numpy (higher is better).
An end-to-end line times a few MTPU epochs under each backend in a
subprocess, since the backend is fixed at import time.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from horizon_pu import _kernels
from horizon_pu.synth import SynthConfig, generate, synth_vocabulary
from horizon_pu.corpus import vectorize_corpus

END_TO_END = """
import time
from horizon_pu import _kernels
from horizon_pu.corpus import vectorize_corpus
from horizon_pu.mtpu import MtpuTrainConfig, mtpu_train
from horizon_pu.purisk import TrainConfig
from horizon_pu.synth import SynthConfig, generate, synth_vocabulary
cfg = SynthConfig(T=3, vocab_size={vocab}, seed=0)
corpus, _ = generate(cfg)
X = vectorize_corpus(corpus, synth_vocabulary(cfg))
mtpu_train(corpus, None, MtpuTrainConfig(train=TrainConfig(epochs=1)), X=X, width={width})  # warm-up / JIT
t0 = time.perf_counter()
mtpu_train(corpus, None, MtpuTrainConfig(train=TrainConfig(epochs=3)), X=X, width={width})
print(_kernels.backend(), time.perf_counter() - t0)
"""


def batch(vocab, n_rows, seed=0):
    cfg = SynthConfig(T=1, n_pos=n_rows, n_unl=1, vocab_size=vocab, seed=seed)
    corpus, _ = generate(cfg)
    X = vectorize_corpus(corpus, synth_vocabulary(cfg))
    return X.take(np.arange(n_rows))


def best_ms(fn, repeat):
    fn()  # compile / warm caches
    return 1e3 * min(timeit.repeat(fn, number=1, repeat=repeat))


def run(repeat, vocab, width):
    rng = np.random.default_rng(0)
    X = batch(vocab, 320)
    W = rng.standard_normal((vocab, width)).astype(np.float32)
    G = rng.standard_normal((X.n_rows, width)).astype(np.float32)
    out_f = np.empty((X.n_rows, width), np.float32)
    out_t = np.empty((vocab, width), np.float32)
    P = rng.standard_normal((width, width)).astype(np.float32)
    g = rng.standard_normal(P.shape).astype(np.float32)

    def adam(impl):
        m, v, p = np.zeros_like(P), np.zeros_like(P), P.copy()
        return lambda: impl(p, g, m, v, 1e-3, 0.9, 0.999, 1e-8, 1)

    cases = {
        "csr_matmul": (
            lambda: _kernels.numpy_csr_matmul(X.indptr, X.indices, X.data, W, out_f),
            lambda: _kernels.numba_csr_matmul(X.indptr, X.indices, X.data, W, out_f),
        ),
        "csr_t_matmul": (
            lambda: _kernels.numpy_csr_t_matmul(X.indptr, X.indices, X.data, G, out_t),
            lambda: _kernels.numba_csr_t_matmul(X.indptr, X.indices, X.data, G, out_t),
        ),
        "adam_update": (adam(_kernels.numpy_adam_update), adam(_kernels.numba_adam_update)),
    }
    print(f"rows={X.n_rows} nnz={X.indices.size} vocab={vocab} width={width} repeat={repeat}")
    print(f"{'kernel':<14}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}")
    for name, (np_fn, nb_fn) in cases.items():
        a, b = best_ms(np_fn, repeat), best_ms(nb_fn, repeat)
        print(f"{name:<14}{a:>10.3f}{b:>10.3f}{a / b:>8.1f}x")

    times = {}
    for flag in ("0", "1"):
        env = dict(os.environ, HORIZON_PU_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", END_TO_END.format(vocab=vocab, width=width)],
                             env=env, capture_output=True, text=True, check=True)
        backend, secs = res.stdout.split()
        times[backend] = float(secs)
    print(f"{'mtpu 3 epochs':<14}{times['numpy']:>9.2f}s{times['numba']:>9.2f}s{times['numpy'] / times['numba']:>8.1f}x")


def main():
    if not _kernels.HAVE_NUMBA:
        sys.exit("numba is not installed; nothing to compare")
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=50)
    ap.add_argument("--vocab", type=int, default=2000)
    ap.add_argument("--width", type=int, default=500)
    args = ap.parse_args()
    run(args.repeat, args.vocab, args.width)


if __name__ == "__main__":
    main()
