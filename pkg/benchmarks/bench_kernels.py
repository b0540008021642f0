"""Time the compiled kernels against the numpy fallback.

Each backend runs in its own interpreter because the choice is made at import.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, timeit
import numpy as np
from modewitness import _kernels
from modewitness.basis import lift
from modewitness.generators import GeneratorSet

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)
q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
gens = GeneratorSet(3, 3)
idx = np.array([[0, 1, 2], [0, 3, 5], [1, 1, 4], [2, 2, 2]] * 8)
norms = np.ones(len(idx))
pdf = rng.random((256, 256))
pdf /= pdf.sum()

cases = {
    "lift_block (32 gens, order 3)": lambda: _kernels.lift_block(q, idx, norms),
    "hellinger_shift (256x256)": lambda: _kernels.hellinger_shift(pdf, [3, -2]),
    "basis lift (m=3, N<=3)": lambda: lift(q, gens),
}
out = {"backend": _kernels.BACKEND, "times": {}, "check": {}}
for name, fn in cases.items():
    t = timeit.Timer(fn)
    n, _ = t.autorange()
    out["times"][name] = min(t.repeat(repeat, n)) / n
out["check"]["lift_block"] = np.asarray(_kernels.lift_block(q, idx, norms)).tolist()
out["check"]["hellinger_shift"] = float(_kernels.hellinger_shift(pdf, [3, -2]))
print(json.dumps(out))
"""


def run(pure, repeat):
    env = dict(os.environ)
    env.pop("MODEWITNESS_PURE_PYTHON", None)
    if pure:
        env["MODEWITNESS_PURE_PYTHON"] = "1"
    res = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    fast, slow = run(False, args.repeat), run(True, args.repeat)
    if fast["backend"] != "cython":
        print("compiled extension not available; both runs use the numpy fallback")

    import numpy as np

    agree = (np.allclose(fast["check"]["lift_block"], slow["check"]["lift_block"], atol=1e-12)
             and abs(fast["check"]["hellinger_shift"] - slow["check"]["hellinger_shift"]) < 1e-12)
    print(f"{'kernel':34s} {fast['backend']:>12s} {slow['backend']:>12s} {'speedup':>8s}")
    for name, t_fast in fast["times"].items():
        t_slow = slow["times"][name]
        print(f"{name:34s} {t_fast * 1e6:10.1f}us {t_slow * 1e6:10.1f}us {t_slow / t_fast:7.1f}x")
    print("outputs agree" if agree else "OUTPUTS DIFFER")
    return 0 if agree else 1


if __name__ == "__main__":
    sys.exit(main())
