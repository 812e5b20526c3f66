"""Seeded benchmark sweeps over the new-cluster angle."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dp, spkm
from .metrics import SingleCluster, nmi, silhouette_cosine
from .synth import SynthSpec, generate

DEFAULT_PHI_GRID_DEG = tuple(np.arange(15.0, 55.01, 2.5))


@dataclass
class SweepRow:
    phi_deg: float
    K: list = field(default_factory=list)
    nmi: list = field(default_factory=list)
    silhouette: list = field(default_factory=list)
    converged: list = field(default_factory=list)
    # most negative step of the objective trace per run (0 when monotone)
    min_step: list = field(default_factory=list)

    def stats(self) -> dict:
        def ms(v):
            v = np.asarray(v, dtype=float)
            v = v[np.isfinite(v)]
            return (float(v.mean()), float(v.std())) if v.size else (float("nan"), float("nan"))
        out = {"phi_deg": self.phi_deg}
        for key in ("K", "nmi", "silhouette"):
            out[key + "_mean"], out[key + "_std"] = ms(getattr(self, key))
        out["converged_frac"] = float(np.mean(self.converged)) if self.converged else float("nan")
        out["min_trace_step"] = float(min(self.min_step)) if self.min_step else float("nan")
        return out


@dataclass
class SweepResult:
    rows: list
    spkm: SweepRow | None
    truth_silhouette: list

    def table(self) -> list[dict]:
        return [r.stats() for r in self.rows]

    def best(self) -> dict:
        """Row with the highest mean NMI (ties to the smaller angle)."""
        tab = self.table()
        return max(tab, key=lambda r: (r["nmi_mean"], -r["phi_deg"]))

    def plateau_deg(self, lo: int, hi: int) -> float:
        """Widest contiguous grid span whose mean K (rounded) lies in [lo, hi]."""
        tab = self.table()
        best = 0.0
        start = None
        for i, r in enumerate(tab):
            ok = lo <= round(r["K_mean"]) <= hi
            if ok and start is None:
                start = i
            if ok:
                best = max(best, tab[i]["phi_deg"] - tab[start]["phi_deg"])
            else:
                start = None
        return best


def _silhouette(X, labels, max_sample, seed):
    try:
        return silhouette_cosine(X, labels, max_sample=max_sample, seed=seed)
    except SingleCluster:
        return float("nan")


def _min_step(trace) -> float:
    return float(min(0.0, np.min(np.diff(trace)))) if len(trace) > 1 else 0.0


def sweep(seeds, phi_grid_deg=DEFAULT_PHI_GRID_DEG, spec: SynthSpec | None = None,
          spkm_k: int | None = None, spkm_restarts: int = 10, max_iterations: int = 100,
          workers: int | None = 1, max_sample: int = 10000) -> SweepResult:
    """Fit DP-vMF-means at every grid angle (and optionally spkm) on one dataset per seed."""
    base = spec or SynthSpec()
    rows = [SweepRow(float(p)) for p in phi_grid_deg]
    base_row = SweepRow(float("nan")) if spkm_k else None
    truth_sil = []
    for seed in seeds:
        s = SynthSpec(base.K_T, base.N, base.tau, base.D, base.min_separation,
                      base.weights, int(seed))
        X, z, _ = generate(s)
        truth_sil.append(_silhouette(X, z, max_sample, int(seed)))
        for row in rows:
            cfg = dp.DpConfig.from_angle(np.deg2rad(row.phi_deg), max_iterations=max_iterations,
                                         workers=workers)
            r = dp.fit(X, cfg)
            row.K.append(r.K)
            row.nmi.append(nmi(z, r.labels))
            row.silhouette.append(_silhouette(X, r.labels, max_sample, int(seed)))
            row.converged.append(r.converged)
            row.min_step.append(_min_step(r.objective_trace))
        if base_row is not None:
            r = spkm.fit(X, spkm.SpkmConfig(spkm_k, max_iterations, spkm_restarts, int(seed)))
            base_row.K.append(r.K)
            base_row.nmi.append(nmi(z, r.labels))
            base_row.silhouette.append(_silhouette(X, r.labels, max_sample, int(seed)))
            base_row.converged.append(r.converged)
            base_row.min_step.append(_min_step(r.objective_trace))
    return SweepResult(rows, base_row, truth_sil)


def format_table(result: SweepResult) -> str:
    lines = [f"{'phi_deg':>8} {'K':>13} {'NMI':>15} {'silhouette':>15} {'conv':>5}"]
    for r in result.table():
        lines.append(f"{r['phi_deg']:8.2f} {r['K_mean']:6.2f}±{r['K_std']:<6.2f}"
                     f" {r['nmi_mean']:7.4f}±{r['nmi_std']:<7.4f}"
                     f" {r['silhouette_mean']:7.4f}±{r['silhouette_std']:<7.4f}"
                     f" {r['converged_frac']:5.2f}")
    if result.spkm is not None:
        r = result.spkm.stats()
        lines.append(f"{'spkm':>8} {r['K_mean']:6.2f}±{r['K_std']:<6.2f}"
                     f" {r['nmi_mean']:7.4f}±{r['nmi_std']:<7.4f}"
                     f" {r['silhouette_mean']:7.4f}±{r['silhouette_std']:<7.4f}"
                     f" {r['converged_frac']:5.2f}")
    ts = np.asarray(result.truth_silhouette, dtype=float)
    lines.append(f"{'truth':>8} {'':13} {'':15} {np.nanmean(ts):7.4f}±{np.nanstd(ts):<7.4f}")
    return "\n".join(lines)
