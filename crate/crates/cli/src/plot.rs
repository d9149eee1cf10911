/// Renders whichever of the CSVs written by `powerctl plot` are present next to it.
pub const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Render powerctl plot CSVs to PNG files in this directory."""
import csv
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))


def read(name):
    path = os.path.join(HERE, name)
    if not os.path.exists(path):
        return None
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def save(fig, name):
    fig.tight_layout()
    fig.savefig(os.path.join(HERE, name), dpi=150)
    plt.close(fig)
    print("wrote", name)


def main():
    rows = read("convergence.csv")
    if rows:
        fig, ax = plt.subplots()
        ax.plot([int(r["iter"]) for r in rows], [float(r["objective"]) for r in rows])
        ax.set_xlabel("iteration")
        ax.set_ylabel("total utility")
        ax.set_title("solver convergence")
        save(fig, "convergence.png")

    rows = read("fixed_point.csv")
    if rows:
        fig, ax = plt.subplots()
        it = [int(r["iter"]) for r in rows]
        for key in [k for k in rows[0] if k.startswith("p_")]:
            ax.plot(it, [float(r[key]) for r in rows], label=key)
        ax.set_xlabel("iteration")
        ax.set_ylabel("power")
        ax.set_title("fixed-point iteration")
        ax.legend()
        save(fig, "fixed_point.png")

    rows = read("sweep.csv")
    if rows:
        fig, ax = plt.subplots()
        gamma = [float(r["gamma"]) for r in rows]
        ax.plot(gamma, [float(r["rho"]) for r in rows], marker="o", label="rho")
        ax.axhline(1.0, color="grey", linestyle="--", linewidth=0.8)
        ax.set_xlabel("uniform SINR target")
        ax.set_ylabel("spectral radius")
        ax.set_title("feasibility sweep")
        ax.legend()
        save(fig, "sweep.png")


if __name__ == "__main__":
    sys.exit(main())
"#;
