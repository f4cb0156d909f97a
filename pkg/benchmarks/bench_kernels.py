#!/usr/bin/env python3
"""Compare the compiled kernel extension against the NumPy fallback.

Times each kernel on training-shaped inputs, then a full forward+backward
training step under each backend. Run after `pip install -e .`:

    python benchmarks/bench_kernels.py [--repeats 30]
"""

import argparse
import importlib
import os
import statistics
import sys
import time

import numpy as np


def best_of(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_kernels(repeats: int) -> list[tuple[str, float, float]]:
    from trunklm.kernels import reference as ref

    try:
        from trunklm.kernels import _fused as fused
    except ImportError:
        print("compiled extension not built; run pip install -e . first", file=sys.stderr)
        raise SystemExit(1)

    rng = np.random.default_rng(0)
    x1 = np.ascontiguousarray(rng.normal(size=8 * 96 * 512))
    d1 = np.ascontiguousarray(rng.normal(size=x1.size))
    rows = np.ascontiguousarray(rng.normal(size=(8 * 4 * 96, 128)))
    ln_x = np.ascontiguousarray(rng.normal(size=(8 * 96, 128)))
    gamma = np.ones(128)
    beta = np.zeros(128)
    ln_d = np.ascontiguousarray(rng.normal(size=ln_x.shape))
    p = np.ascontiguousarray(rng.normal(size=200_000))
    g = np.ascontiguousarray(rng.normal(size=p.size))

    results = []
    for name, args in [
        ("gelu_forward", (x1,)),
        ("gelu_backward", (x1, d1)),
        ("softmax_rows", (rows,)),
        ("layernorm_forward", (ln_x, gamma, beta, 1e-5)),
    ]:
        t_ref = best_of(lambda: getattr(ref, name)(*args), repeats)
        t_fused = best_of(lambda: getattr(fused, name)(*args), repeats)
        results.append((name, t_ref, t_fused))

    _, mean, rstd = ref.layernorm_forward(ln_x, gamma, beta, 1e-5)
    t_ref = best_of(lambda: ref.layernorm_backward(ln_d, ln_x, gamma, mean, rstd), repeats)
    t_fused = best_of(lambda: fused.layernorm_backward(ln_d, ln_x, gamma, mean, rstd), repeats)
    results.append(("layernorm_backward", t_ref, t_fused))

    def adam(mod):
        mod.adam_update(p.copy(), g, np.zeros_like(p), np.zeros_like(p),
                        1e-4, 0.9, 0.999, 1e-8, 0.01, 3)

    results.append(("adam_update",
                    best_of(lambda: adam(ref), repeats),
                    best_of(lambda: adam(fused), repeats)))
    return results


def bench_train_step(backend: str, repeats: int) -> float:
    """One masked-token training step (forward+backward+adam) under the
    given kernel backend, in a subprocess-fresh interpreter state."""
    os.environ["TRUNKLM_KERNELS"] = backend
    for mod in [m for m in list(sys.modules) if m.startswith("trunklm")]:
        del sys.modules[mod]
    import trunklm.kernels as K

    assert K.BACKEND == ("python" if backend == "python" else "compiled"), K.BACKEND
    from trunklm import autodiff as ad
    from trunklm.model import ModelConfig, UnifiedModel
    from trunklm.optim import AdamHyper, AdamState, adam_step
    from trunklm.tasks.losses import compute_task_loss

    cfg = ModelConfig.desk(vocab_size=600, max_seq_len=96, memory_len=32)
    model = UnifiedModel(cfg, seed=0)
    opt = AdamState(hyper=AdamHyper(warmup_steps=10, total_steps=1000))
    rng = np.random.default_rng(1)
    batch = [{"input": [3] + [int(t) for t in rng.integers(9, 590, size=95)],
              "positions": list(range(5, 19)), "targets": [11] * 14} for _ in range(8)]

    class Sp:
        pad_id, bos_id = 0, 1

    params = model.parameters()

    def step():
        for p_ in params.values():
            p_.zero_grad()
        loss = compute_task_loss(model, "span_mlm", batch, Sp())
        ad.backward(loss)
        adam_step(params, opt, lr=1e-4)

    step()  # warm caches
    return best_of(step, max(3, repeats // 10))


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=30)
    args = ap.parse_args()

    print(f"{'kernel':<20} {'numpy':>10} {'compiled':>10} {'speedup':>8}")
    for name, t_ref, t_fused in bench_kernels(args.repeats):
        print(f"{name:<20} {t_ref * 1e3:>8.2f}ms {t_fused * 1e3:>8.2f}ms "
              f"{t_ref / t_fused:>7.2f}x")

    t_py = bench_train_step("python", args.repeats)
    t_c = bench_train_step("compiled", args.repeats)
    print(f"\n{'train step (mlm)':<20} {t_py * 1e3:>8.1f}ms {t_c * 1e3:>8.1f}ms "
          f"{t_py / t_c:>7.2f}x")


if __name__ == "__main__":
    main()
