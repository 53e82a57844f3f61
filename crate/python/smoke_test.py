#!/usr/bin/env python3
"""Smoke test for the fockmet_py extension module.

Locates the compiled shared library under target/, copies it next to this
script under an importable name, imports it, and exercises the API surface.
Exits 0 on success, 1 on the first failure.
"""

import math
import shutil
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
BUILD = Path(__file__).resolve().parent / "_build"


def locate_library() -> Path:
    candidates = [
        ROOT / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libfockmet_py.so", "libfockmet_py.dylib", "fockmet_py.dll")
    ]
    found = [p for p in candidates if p.exists()]
    if not found:
        sys.exit(
            "fockmet_py library not found; run `cargo build --release -p fockmet-py` first"
        )
    # Prefer the most recently built artifact.
    return max(found, key=lambda p: p.stat().st_mtime)


def import_module():
    lib = locate_library()
    BUILD.mkdir(exist_ok=True)
    suffix = ".pyd" if lib.suffix == ".dll" else ".so"
    target = BUILD / f"fockmet_py{suffix}"
    shutil.copy2(lib, target)
    sys.path.insert(0, str(BUILD))
    import fockmet_py  # noqa: E402

    return fockmet_py


def approx(a: float, b: float, tol: float = 1e-9) -> bool:
    return abs(a - b) <= tol


def main() -> None:
    fm = import_module()
    checks = 0

    def check(name: str, ok: bool) -> None:
        nonlocal checks
        if not ok:
            sys.exit(f"FAIL: {name}")
        checks += 1
        print(f"ok: {name}")

    # --- states and bounds ---------------------------------------------
    n = 6
    psi = fm.StateVector.mvs(n, n + 1)
    check("mvs dimensions", psi.dim() == n + 1)
    check("mvs populations", approx(psi.population(0), 0.5) and approx(psi.population(n), 0.5))
    check("mvs variance = N^2/4", approx(psi.variance_number(), n * n / 4))
    check("qcrb = 1/N", approx(psi.qcrb_number(), 1 / n))
    check("snl", approx(fm.snl(n), 1 / math.sqrt(n)))
    check("hl", approx(fm.hl(n), 1 / n))
    check("ideal dB at N=12", approx(fm.db_enhancement(fm.hl(12), fm.snl(12)), 10.7918, 1e-3))

    rotated = psi.apply_phase(0.37)
    expected = 0.5 * (1 + math.cos(n * 0.37))
    check("fringe via fidelity", approx(rotated.fidelity(psi), expected, 1e-12))
    check("optimal_probability", approx(fm.optimal_probability(n, 0.37), expected, 1e-12))

    vac = fm.StateVector.fock(0, 1)
    coh = fm.StateVector.coherent(0.4 + 0.3j, 25)
    overlap = abs(coh.inner_product(fm.StateVector.fock(0, 25))) ** 2
    check("coherent vacuum overlap", approx(overlap, math.exp(-0.25), 1e-10))

    # --- Wigner ----------------------------------------------------------
    check("vacuum W(0) = 2/pi", approx(fm.wigner_value(vac, 0j), fm.WIGNER_BOUND, 1e-12))
    w_fock1 = fm.wigner_value(fm.StateVector.fock(1, 2), 0j)
    check("fock-1 W(0) = -2/pi", approx(w_fock1, -fm.WIGNER_BOUND, 1e-12))
    check(
        "wigner bound on MVS",
        abs(fm.wigner_value(psi, 0.8 + 0.2j)) <= fm.WIGNER_BOUND + 1e-9,
    )

    # --- decoherence ------------------------------------------------------
    kappa, t = 1.0e5, 2.0e-6
    rho = fm.DensityMatrix.from_pure(fm.StateVector.mvs(4, 5))
    evolved = rho.evolve(kappa, 0.0, t)
    check("trace preserved", approx(evolved.trace(), 1.0, 1e-8))
    coh_abs = abs(evolved.coherence(0, 4))
    check(
        "coherence decay e^{-N kappa t / 2}",
        approx(coh_abs, 0.5 * math.exp(-4 * kappa * t / 2), 1e-5),
    )
    check("purity decreases", evolved.purity() < rho.purity() + 1e-12)
    check(
        "density expectation",
        approx(rho.expectation(fm.StateVector.mvs(4, 5)), 1.0, 1e-12),
    )

    # --- hybrid scheme ----------------------------------------------------
    dim = 2 + 46
    best_binary = fm.optimize_hybrid(2, dim, "binary")
    best_counting = fm.optimize_hybrid(2, dim, "number_resolving")
    check(
        "counting beats thresholding",
        best_counting["precision"] <= best_binary["precision"] + 1e-12,
    )
    check("hybrid beats SNL at N=2", best_binary["precision"] < fm.snl(2))
    p_click = fm.hybrid_probability(
        2,
        best_binary["alpha_mag"],
        best_binary["alpha_phase_offset"],
        best_binary["n_detect"],
        best_binary["phi_work"],
        0.1,
        dim,
    )
    check("hybrid probability in [0,1]", 0.0 <= p_click <= 1.0)

    # --- sampling and fitting ----------------------------------------------
    thetas = [2 * math.pi * k / 240 for k in range(241)]
    probs = [fm.optimal_probability(n, t) for t in thetas]
    fit = fm.fit_fringe(n, thetas, probs)
    check("exact fit A", approx(fit["A"], 0.5, 1e-9))
    check("exact fit B", approx(fit["B"], 0.5, 1e-9))
    check("exact fit reaches HL", approx(fit["delta_theta"] * n, 1.0, 1e-6))

    counts_a = fm.sample_counts(n, thetas, probs, 5000, 11)
    counts_b = fm.sample_counts(n, thetas, probs, 5000, 11)
    counts_c = fm.sample_counts(n, thetas, probs, 5000, 12)
    check("sampling deterministic in seed", counts_a == counts_b)
    check("seed changes counts", counts_a != counts_c)
    sampled_fit = fm.fit_fringe(n, thetas, probs, shots=5000, counts=counts_a)
    check("sampled fit near ideal", abs(sampled_fit["A"] - 0.5) < 0.01)

    fit = fm.scaling_fit(list(range(1, 13)), [1.0 / k for k in range(1, 13)])
    check("HL scaling slope -1", approx(fit["slope"], -1.0, 1e-9))
    check("HL scaling R^2 = 1", approx(fit["r_squared"], 1.0, 1e-9))

    # --- error mapping ------------------------------------------------------
    try:
        fm.StateVector.mvs(0, 4)
    except ValueError:
        check("invalid N raises ValueError", True)
    else:
        check("invalid N raises ValueError", False)

    try:
        fm.optimize_hybrid(2, dim, "bogus")
    except ValueError:
        check("bad detector raises ValueError", True)
    else:
        check("bad detector raises ValueError", False)

    print(f"PASS: {checks} checks")


if __name__ == "__main__":
    main()
