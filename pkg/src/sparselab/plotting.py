"""Figures rendered next to the CSV tables (Agg backend, PNG)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.fontsize": 8,
}


def _by_label(rows, key="label"):
    out = {}
    for r in rows:
        out.setdefault(r[key], []).append(r)
    return out


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)


def phase_diagram(rows, summary, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        lam = np.array([r["lambda"] for r in rows])
        rat = np.array([r["ratio"] for r in rows])
        sc = np.array([r["region"] == "sc" for r in rows])
        ax.scatter(lam[~sc], rat[~sc], s=2, c="0.35", label="pure point", rasterized=True)
        ax.scatter(lam[sc], rat[sc], s=2, c="0.8", label="singular continuous", rasterized=True)
        x = np.linspace(0, 1, 200)
        edge = 2 * np.sqrt(1 - x ** 2)
        ax.plot(edge, x, "k-", lw=1)
        ax.plot(-edge, x, "k-", lw=1, label="mobility edges")
        if summary and summary.get("ratio") is not None and summary["ratio"] < 1:
            ax.axhline(summary["ratio"], color="C3", lw=0.8, ls="--", label="configured v/v_c")
        ax.set_xlabel("energy")
        ax.set_ylabel("v / v_c")
        ax.set_xlim(-2, 2)
        ax.legend(loc="lower center", markerscale=4)
        return _save(fig, path)


def growth(rows, sample_rows, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        samples = _by_label(sample_rows)
        for i, r in enumerate(rows):
            rates = [s["rate"] for s in samples.get(r["label"], [])]
            ax.hist(rates, bins=30, alpha=0.5, color=f"C{i}", label=f"{r['label']} (mean {r['rate_mean']:.4f})")
            if r["target"] is not None:
                ax.axvline(r["target"], color=f"C{i}", ls="--", lw=1)
        ax.set_xlabel("growth rate per bump")
        ax.set_ylabel("samples")
        if rows:
            ax.legend()
        return _save(fig, path)


def spectrum(rows, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        a = np.array([r["atom"] for r in rows])
        w = np.array([r["weight"] for r in rows])
        if a.size:
            ax.vlines(a, 1e-30, w, lw=0.4)
            ax.set_yscale("log")
            ax.set_ylim(max(w.min(), 1e-30), 1.5 * w.max())
        ax.set_xlabel("eigenvalue")
        ax.set_ylabel("site-0 weight")
        return _save(fig, path)


def dimension(rows, mass_rows, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        masses = _by_label(mass_rows)
        for i, r in enumerate(rows):
            pts = masses.get(r["label"], [])
            s = np.array([p["scale"] for p in pts])
            m = np.array([p["mass"] for p in pts])
            ax.loglog(s, m, "o", color=f"C{i}", label=f"{r['label']}: alpha_hat={r['alpha_hat']:.3f}")
            if s.size:
                ax.loglog(s, m[0] * (s / s[0]) ** r["alpha_target"], "--", color=f"C{i}", lw=0.8)
        ax.set_xlabel("window half-width")
        ax.set_ylabel("mean spectral mass")
        if rows:
            ax.legend()
        return _save(fig, path)


def decay(rows, curve_rows, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        curves = _by_label(curve_rows)
        for i, r in enumerate(rows):
            pts = curves.get(r["label"], [])
            T = np.array([p["T"] for p in pts])
            I = np.array([p["I"] for p in pts])
            ax.loglog(T, I, "o-", color=f"C{i}", label=f"{r['label']}: slope={r['exponent_hat']:.3f}")
        ax.set_xlabel("T")
        ax.set_ylabel("time-integrated |transform|^2")
        if rows:
            ax.legend()
        return _save(fig, path)


def kronecker(rows, density_rows, path):
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
        dens = _by_label(density_rows, "theta")
        for i, (th, pts) in enumerate(sorted(dens.items())):
            ax1.plot([p["center"] for p in pts], [p["density"] for p in pts], lw=0.7,
                     color=plt.cm.viridis(i / max(1, len(dens) - 1)), label=f"{th:.2f}")
        ax1.set_xlabel("energy")
        ax1.set_ylabel("binned density")
        if dens:
            ax1.legend(title="theta", ncol=2, fontsize=6)
        th = [r["theta"] for r in rows]
        ax2.plot(th, [r["stability"] for r in rows], "o", label="stability score")
        ax2.plot(th, [r["l2_tail_slope"] for r in rows], "s", label="L2 tail slope")
        ax2.set_xlabel("theta")
        ax2.legend()
        return _save(fig, path)


def render(record, out_dir) -> list:
    """Draw every figure whose tables are present in the record."""
    out = Path(out_dir)
    t, s = record.tables, record.summaries
    made = []
    if "phase_diagram" in t:
        made.append(phase_diagram(t["phase_diagram"], s.get("phase_diagram"), out / "phase_diagram.png"))
    if "growth" in t:
        made.append(growth(t["growth"], t.get("growth_samples", []), out / "growth.png"))
    if "spectrum" in t:
        made.append(spectrum(t["spectrum"], out / "spectrum.png"))
    if "dimension" in t:
        made.append(dimension(t["dimension"], t.get("dimension_masses", []), out / "dimension.png"))
    if "decay" in t:
        made.append(decay(t["decay"], t.get("decay_curves", []), out / "decay.png"))
    if "kronecker" in t:
        made.append(kronecker(t["kronecker"], t.get("kronecker_density", []), out / "kronecker.png"))
    return made
