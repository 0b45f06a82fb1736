"""Render the report figures from the delimited data files.

Only the CLI report path imports this module, so the numerical core stays
free of plotting dependencies. Each renderer reads the text artifact written
by the pipeline and saves a PNG next to it.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def render_spectrum(out_dir):
    out_dir = Path(out_dir)
    rows = np.genfromtxt(out_dir / "fig1_spectrum.csv", delimiter=",", names=True)
    errs = np.genfromtxt(out_dir / "fig1_prediction_errors.csv", delimiter=",", names=True)
    fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(7, 5.2))
    principal = rows["principal_flag"] > 0
    finite = np.isfinite(rows["re_lambda"])
    ax0.scatter(rows["re_lambda"][finite & ~principal], rows["im_lambda"][finite & ~principal],
                marker="x", color="tab:red", label="eDMD spectrum")
    ax0.scatter(rows["re_lambda"][principal], rows["im_lambda"][principal],
                marker="o", facecolors="none", edgecolors="tab:blue", s=80,
                label="principal")
    ax0.set_xlim(-12, 6)
    ax0.set_xlabel("Re $\\hat\\lambda$")
    ax0.set_ylabel("Im $\\hat\\lambda$")
    ax0.legend(loc="upper left", fontsize=8)
    ax0.set_title("Estimated eigenvalues")
    order = np.argsort(-errs["re_lambda"])[:6]
    labels = [f"{errs['re_lambda'][j]:.2f}" for j in order]
    ax1.bar(range(len(order)), errs["prediction_error_l2"][order],
            color=["tab:blue" if errs["principal_flag"][j] else "0.6" for j in order])
    ax1.set_xticks(range(len(order)), labels, fontsize=8)
    ax1.set_yscale("log")
    ax1.set_xlabel("Re $\\hat\\lambda$ of eigenpair")
    ax1.set_ylabel("prediction error")
    ax1.set_title("Eigenpair prediction errors on the test trajectory")
    fig.tight_layout()
    path = out_dir / "fig1.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_tracking(out_dir):
    out_dir = Path(out_dir)
    fig, axes = plt.subplots(2, 2, figsize=(8, 5), sharex=True)
    for col, (stem, title) in enumerate((("fig2_bilinear", "bilinear closed loop"),
                                         ("fig2_pde", "PDE closed loop"))):
        data = np.genfromtxt(out_dir / f"{stem}.csv", delimiter=",", names=True)
        for row, comp in enumerate(("1", "2")):
            ax = axes[row, col]
            ax.plot(data["t"], data[f"phi{comp}_of_w"], color="tab:blue",
                    label=f"$\\Phi_{comp}$")
            ax.plot(data["t"], data[f"wlin{comp}"], "--", color="tab:green",
                    label=f"target $\\tilde w_{comp}$")
            ax.legend(fontsize=8)
            if row == 1:
                ax.set_xlabel("t")
        axes[0, col].set_title(title)
    fig.tight_layout()
    path = out_dir / "fig2.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_profile(out_dir):
    out_dir = Path(out_dir)
    body = np.loadtxt(out_dir / "fig3_profile.dat")
    t, z, x = body[0, 1:], body[1:, 0], body[1:, 1:]
    fig = plt.figure(figsize=(7, 4))
    ax = fig.add_subplot(projection="3d")
    tt, zz = np.meshgrid(t, z)
    ax.plot_surface(tt, zz, x, cmap="viridis", linewidth=0.2, edgecolor="k",
                    rstride=8, cstride=1)
    ax.set_xlabel("t")
    ax.set_ylabel("z")
    ax.set_title("closed-loop state profile x(z, t)")
    ax.view_init(elev=25, azim=-140)
    path = out_dir / "fig3.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_all(out_dir):
    return [render_spectrum(out_dir), render_tracking(out_dir), render_profile(out_dir)]
