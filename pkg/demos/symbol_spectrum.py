"""Eigenvalue branches of the linear symbol over p = |q|^2.

The 4x4 symbol splits into a doubly degenerate shear branch nu1*p and an
acoustic pair lambda_pm = (nu*p -+ sqrt(nu^2 p^2 - 4 gamma^2 p)) / 2 with
nu = nu1 + nu2.  Below the crossover p* = 4 gamma^2 / nu^2 the pair is
oscillatory with real part nu*p/2; above it both roots are real and the
slow one saturates at gamma^2 / nu, which is what caps the spectral gap at
low frequency.  This script prints the branch structure for a couple of
parameter sets and optionally draws the classic two-regime picture.
"""

import argparse

import numpy as np

from nsas import FluidParams, PressureLaw, admissible_r0_window, spectral_gap, symbol_eigenvalues


def describe(params, label):
    nu = params.nu1 + params.nu2
    p_star = 4.0 * params.gamma ** 2 / nu ** 2
    p = np.geomspace(1e-4, 1e4, 400)
    eig = symbol_eigenvalues(p, params)
    print(f"{label}: nu1 = {params.nu1}, nu2 = {params.nu2}, "
          f"gamma = {params.gamma:.6f}")
    print(f"  oscillatory below p* = {p_star:.4f}, "
          f"Re lambda_- -> {params.gamma ** 2 / nu:.4f} as p -> inf")
    print(f"  admissible r0^2 window: (0, {admissible_r0_window(params):.4f})")
    r0_sq = 0.5 * admissible_r0_window(params)
    print(f"  gap at r0^2 = {r0_sq:.4f}: a = {spectral_gap(r0_sq, params):.4f}")
    tail = eig.lambda_minus[-1].real
    print(f"  sampled Re lambda_-({p[-1]:.0f}) = {tail:.6f}")
    return p, eig, p_star


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", help="write branch plot to this SVG path")
    args = ap.parse_args()

    cases = [
        (FluidParams(nu1=1.0, nu2=1.0), "quadratic law"),
        (FluidParams(nu1=1.0, nu2=2.0, law=PressureLaw("adiabatic", 1.4)),
         "adiabatic law, kappa = 1.4"),
    ]
    results = [describe(params, label) for params, label in cases]

    if args.out:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        fig, axes = plt.subplots(1, len(results), figsize=(11, 4), sharey=True)
        for ax, ((p, eig, p_star), (_, label)) in zip(axes, zip(results, cases)):
            ax.loglog(p, eig.lambda1.real, label="shear (x2)")
            ax.loglog(p, eig.lambda_plus.real, label="acoustic +")
            ax.loglog(p, eig.lambda_minus.real, label="acoustic -")
            ax.axvline(p_star, color="k", ls=":", lw=0.8)
            ax.set_xlabel("p = |q|^2")
            ax.set_title(label, fontsize=9)
            ax.grid(True, which="both", alpha=0.3)
        axes[0].set_ylabel("Re lambda")
        axes[0].legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(args.out)
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
