"""Time the compiled trial loops against the pure-Python fallback.

Usage::

    python benchmarks/bench_kernels.py --steps 20000 --repeat 3
"""

import argparse
import time

import numpy as np

from momentum_sa import kernels, linear_model, mdp


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def qlearn_case(name, m, exploration, steps):
    rng = np.random.default_rng(0)
    u = mdp.draw_uniforms(exploration, rng, steps)
    if exploration == "async":
        pairs, nxt = kernels.async_events(m.first_pair, m.n_actions, m.cumulative(), m.goal,
                                          m.non_goal_states(), u, 0)
    else:
        pairs, nxt = kernels.clock_events(m.cumulative(), u, 0)
    snaps = np.array([steps], dtype=np.int64)

    def run(impl):
        return lambda: impl.qlearn_run(kernels.Q_CODES[name], m.beta, m.cost, m.first_pair,
                                       m.n_actions, pairs, nxt, np.zeros(m.d), exploration == "clock",
                                       1.0, 1.0, 0.0, 1e-8, 1000, snaps)
    return run


def linear_case(name, spec, steps):
    idx, noise = spec.draw_stream(np.random.default_rng(0), steps)
    gain = {"SNR_ideal": np.linalg.inv(spec.a_mean), "PolSA_fixed": spec.a_mean}.get(name, np.eye(spec.dim))
    snaps = np.array([steps], dtype=np.int64)

    def run(impl):
        return lambda: impl.linear_run(kernels.LINEAR_CODES[name], spec.a_mean, spec.perturbation_stack,
                                       idx, noise, spec.theta_star, np.zeros(spec.dim), 1.0, 1.0, 0.0,
                                       gain, snaps)
    return run


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=20_000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    backends = kernels.backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the fallback is available")
    cases = []
    six, d19 = mdp.preset("six-state"), mdp.preset("d19")
    for name in kernels.Q_CODES:
        cases.append((f"qlearn {name} d19 clock", qlearn_case(name, d19, "clock", args.steps)))
    cases.append(("qlearn SNR six-state async", qlearn_case("SNR", six, "async", args.steps)))
    for name in ("SNR_ideal", "PolSA", "NeSA"):
        cases.append((f"linear {name} mixture-d3", linear_case(name, linear_model.preset("mixture-d3"),
                                                               args.steps)))

    header = f"{'case':34s}" + "".join(f"{b:>12s}" for b in backends) + f"{'speedup':>10s}"
    print(f"{args.steps} steps, best of {args.repeat}")
    print(header)
    print("-" * len(header))
    for label, make in cases:
        times = {b: _best(make(impl), args.repeat) for b, impl in backends.items()}
        speed = times["python"] / times["compiled"] if "compiled" in times else float("nan")
        print(f"{label:34s}" + "".join(f"{t * 1e3:10.1f}ms" for t in times.values()) + f"{speed:9.1f}x")


if __name__ == "__main__":
    main()
