"""Benchmark the compiled simplex kernel against the numpy fallback on
random dense LPs and on a real counterfactual model.

Run:  python benchmarks/bench_simplex.py
"""

import time

import numpy as np

from cemio.builder import CeConfig, build
from cemio.datasets import load_fixture
from cemio.learners import predict, train
from cemio.milp import MilpModel, Sense, VarKind
from cemio.solver import SolveOptions, available_kernels, solve_milp
from cemio.solver.simplex import LpData, solve_lp_data


def random_lp(rng, n, m):
    model = MilpModel()
    vs = [model.add_variable(f"x{i}", VarKind.CONTINUOUS, 0.0, 1.0) for i in range(n)]
    A = rng.normal(size=(m, n))
    b = rng.normal(size=m) + 0.1 * n
    for i in range(m):
        model.add_constraint([(vs[j], A[i, j]) for j in range(n)], Sense.LE, b[i])
    model.set_objective([(vs[j], c) for j, c in enumerate(rng.normal(size=n))])
    return LpData.from_model(model)


def time_lp(data, kernel, repeats=3):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = solve_lp_data(data, kernel_name=kernel)
        best = min(best, time.perf_counter() - t0)
    return best, result


def ce_model():
    ds = load_fixture("german-credit")
    model = train(ds, "svm", seed=0)
    idx = next(i for i in range(len(ds)) if predict(model, ds.encoded[i]) == "bad")
    cfg = CeConfig(target_label="good", sparsity_mode="penalty", sparsity_alpha=0.2,
                   actionability=True, manifold_mode="soft", manifold_beta=5.0)
    built = build(dict(ds.rows[idx]), model, ds, cfg)
    built.milp.freeze()
    return built.milp


def main():
    kernels = available_kernels()
    print(f"kernels available: {kernels}")
    if "c" not in kernels:
        print("compiled kernel not built; run `python setup.py build_ext --inplace`")
    rng = np.random.default_rng(99)

    print("\nrandom dense LPs (best of 3):")
    print(f"{'size':>14} " + " ".join(f"{k:>10}" for k in kernels) + f" {'speedup':>9}")
    for n, m in ((60, 40), (150, 100), (300, 200), (500, 300)):
        data = random_lp(rng, n, m)
        times = {}
        objs = {}
        for k in kernels:
            times[k], res = time_lp(data, k)
            objs[k] = res.objective
        if len(kernels) == 2:
            assert abs(objs["c"] - objs["py"]) < 1e-6, "kernels disagree"
        row = f"{n:>5} x {m:>5}  " + " ".join(f"{times[k]:>9.3f}s" for k in kernels)
        if len(kernels) == 2:
            row += f" {times['py'] / times['c']:>8.2f}x"
        print(row)

    print("\ncounterfactual MILP (svm + soft manifold, single optimum):")
    milp = ce_model()
    print(f"  model: {len(milp.variables)} vars, {len(milp.constraints)} constraints, "
          f"{len(milp.integral_ids())} integral")
    for k in kernels:
        t0 = time.perf_counter()
        res = solve_milp(milp, SolveOptions(kernel=k, time_limit=600))
        dt = time.perf_counter() - t0
        print(f"  {k:>3}: {dt:7.2f}s  status={res.status} obj={res.best_objective:.4f} "
              f"nodes={res.nodes_explored}")


if __name__ == "__main__":
    main()
