#!/usr/bin/env python3
"""Smoke test of the Python bindings.

Builds the extension module if needed, loads it, and spot-checks the main
operations against known values. Exits non-zero on any mismatch.
"""

import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def build_and_import():
    so = ROOT / "target" / "release" / "libraredyn.so"
    if not so.exists():
        print("building raredyn-py ...")
        subprocess.run(
            ["cargo", "build", "-p", "raredyn-py", "--release"],
            cwd=ROOT,
            check=True,
        )
    staging = Path(tempfile.mkdtemp(prefix="raredyn_py_"))
    shutil.copy(so, staging / "raredyn.so")
    sys.path.insert(0, str(staging))
    import raredyn

    return raredyn


def approx(got, expected, tol, label):
    if not math.isfinite(got) or abs(got - expected) > tol:
        raise AssertionError(f"{label}: got {got}, expected {expected} (tol {tol})")
    print(f"  ok {label}: {got:.12g}")


def main():
    rd = build_and_import()
    log2 = math.log(2.0)

    print("toy chain:")
    toy = rd.Kernel.toy()
    mu_star, gamma = toy.invariant()
    assert mu_star == [1.0, 0.0, 0.0], mu_star
    approx(gamma, log2, 1e-10, "mixing rate")

    lam, per_state, converges = toy.pressure([0.0, 2.0 * log2, 0.0])
    approx(lam, log2, 1e-10, "pressure of the large tilt")
    assert not converges, "per-state rates must differ for the large tilt"

    approx(toy.rate([0.0, 1.0, 0.0]), log2, 1e-8, "rate of the lazy Dirac")
    approx(toy.rate([0.5, 0.5, 0.0]), 0.5 * log2, 1e-6, "rate of the even mixture")

    in_v, reasons = toy.membership([0.0, 1.39, 0.0])
    assert not in_v and any("per-state" in r for r in reasons), reasons

    approx(
        toy.occupation_probability(1, 10, ["c1==1"]),
        2.0 ** -10,
        0.0,
        "exact stay probability",
    )

    report = toy.ldp_report(1, ["c1>=1"], list(range(5, 45, 5)))
    approx(report["fitted_a"], log2, 1e-6, "fitted decay rate")
    approx(report["inf_rate"], log2, 1e-5, "rate infimum over the event")

    print("two-state chain:")
    k2 = rd.Kernel([[0.9, 0.1], [0.2, 0.8]])
    approx(k2.clt_variance([0.0, 1.0]), 34.0 / 27.0, 1e-12, "Poisson-equation variance")
    lam, h, mu = k2.perron([0.0, 0.0])
    approx(lam, 1.0, 1e-10, "untilted principal eigenvalue")
    approx(mu[0], 2.0 / 3.0, 1e-9, "stationary mass at state 0")

    iid = rd.Kernel.iid([0.5, 0.5])
    kl = 0.9 * math.log(1.8) + 0.1 * math.log(0.2)
    approx(iid.rate([0.9, 0.1]), kl, 1e-8, "Sanov value")
    approx(iid.level1([0.0, 1.0], 0.9), kl, 1e-6, "level-1 rate")
    p_hat, se, ess = iid.rare_event_tilted(
        [0.0, math.log(9.0)], 0, 30, ["c1>=0.9"], 20000, seed=7
    )
    exact = iid.occupation_probability(0, 30, ["c1>=0.9"])
    assert abs(p_hat - exact) <= 4 * se, (p_hat, exact, se)
    assert ess > 100.0, ess
    print(f"  ok tilted estimate {p_hat:.3e} vs exact {exact:.3e} (ess {ess:.0f})")

    print("measure metrics:")
    d, witness = rd.dual_lipschitz([[0.0], [2.0]], [1.0, 0.0], [0.0, 1.0])
    approx(d, 1.0, 1e-9, "two-Dirac dual-Lipschitz distance")
    assert max(abs(w) for w in witness) <= 1.0 + 1e-9
    approx(rd.total_variation([0.5, 0.5], [0.8, 0.2]), 0.3, 1e-12, "total variation")
    ext = rd.mcshane_extend([[0.0], [1.0], [2.0]], [0, 2], [0.0, 2.0])
    approx(ext[1], 1.0, 1e-12, "McShane midpoint")

    print("contraction toy:")
    toy_model = rd.ContractionToy(contraction=0.5, gain=1.0, kick_bound=1.0, dim=1)
    approx(toy_model.attainable_radius, 2.0, 0.0, "attainable radius")
    kappa, bound, _ = toy_model.ac_diagnostic([200.0], n=7, ensemble=64, seed=3)
    approx(kappa, log2, 0.1 * log2, "attraction rate")
    rows = toy_model.squeezing(q=0.5, samples=1000, seed=5)
    assert all(p_hat == 0.0 and passed for (_, p_hat, _, passed) in rows), rows
    print("  ok squeezing holds pathwise")

    print("wave surrogate (small):")
    wave = rd.Wave(modes=16, noise_modes=4, dt_divisions=1024)
    e = wave.energy([1.0] + [0.0] * 15, [0.0] * 16)
    approx(e, 0.5 + 3.0 / (8.0 * math.pi), 1e-12, "first-mode energy")
    rows = wave.simulate(energy=1.0, periods=4, seed=1)
    energies = [r[0] for r in rows]
    assert energies[-1] < energies[0], energies
    assert all(tail < 1e-2 for (_, tail) in rows), rows
    decay = wave.decay([1.0, 4.0], kicks_on=False, horizon=8, seed=2)
    for (_, rate, r2) in decay["unforced"]:
        assert rate > 0.0 and r2 > 0.95, decay["unforced"]
    print("  ok energy decays and the forced tail stays small")

    print("all smoke checks passed")


if __name__ == "__main__":
    main()
