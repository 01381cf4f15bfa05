"""Eigenvalue, subspace and eigenfunction error metrics."""

from __future__ import annotations

import csv
import io

import numpy as np


def eigenvalue_metrics(truth: np.ndarray, predictions: np.ndarray) -> dict[str, np.ndarray]:
    """Per-index MAE, R2 and MAPE (percent) over samples; rows are samples.

    R2 is NaN for an index whose true values are all equal.
    """
    t = np.asarray(truth)
    p = np.asarray(predictions)
    if t.shape != p.shape or t.ndim != 2:
        raise ValueError(f"truth {t.shape} and predictions {p.shape} must be equal 2-D shapes")
    err = np.abs(t - p)
    mae = err.mean(axis=0)
    ss_res = (err ** 2).sum(axis=0)
    ss_tot = (np.abs(t - t.mean(axis=0)) ** 2).sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = np.where(ss_tot > 0, 1.0 - ss_res / np.where(ss_tot > 0, ss_tot, 1.0), np.nan)
        mape = (err / np.abs(t)).mean(axis=0) * 100.0
    return {"MAE": mae, "R2": r2, "MAPE": mape}


def principal_sines(Q_U: np.ndarray, Q_V: np.ndarray) -> np.ndarray:
    """Sines of the principal angles, one per column of ``Q_V`` (descending)."""
    s = np.linalg.svd(Q_V.conj().T @ Q_U, compute_uv=False)
    s = np.clip(s, 0.0, 1.0)
    sines = np.sqrt(1.0 - s * s)
    k = Q_V.shape[1]
    if sines.size < k:
        # Q_U has fewer columns: the missing directions are fully orthogonal
        sines = np.concatenate([sines, np.ones(k - sines.size)])
    return np.sort(sines)[::-1]


def subspace_metrics(Q_U: np.ndarray, Q_V: np.ndarray) -> dict[str, float]:
    """``L1 = k_V - ||Q_V^H Q_U||_F^2``, projection and chordal distances."""
    Q_U = np.asarray(Q_U)
    Q_V = np.asarray(Q_V)
    k_V, k_U = Q_V.shape[1], Q_U.shape[1]
    C = Q_V.conj().T @ Q_U
    L1 = float(k_V - np.sum(np.abs(C) ** 2))
    sines = principal_sines(Q_U, Q_V)
    d_ch = float(np.sqrt(np.sum(sines ** 2)))
    if k_U == k_V:
        d_pr = float(sines.max())
    else:
        D = Q_U @ Q_U.conj().T - Q_V @ Q_V.conj().T
        d_pr = float(min(np.linalg.norm(D, 2), 1.0))
    return {"L1": L1, "d_pr": d_pr, "d_ch": d_ch}


def eigenfunction_metrics(u_truth: np.ndarray, Q_U: np.ndarray) -> dict[str, float]:
    """MaxAE, cosine similarity and relative L1 error of ``u`` against its projection on ``span(Q_U)``."""
    u = np.asarray(u_truth)
    u = u / np.linalg.norm(u)
    p = Q_U @ (Q_U.conj().T @ u)
    r = u - p
    pn = np.linalg.norm(p)
    cs = 0.0 if pn < 1e-14 else float(abs(np.vdot(u, p)) / pn)
    return {"MaxAE": float(np.abs(r).max()), "CS": min(cs, 1.0),
            "RelL1": float(np.abs(r).sum() / np.abs(u).sum())}


def eigenfunction_table(U_truth: np.ndarray, Q_U: np.ndarray) -> dict[str, np.ndarray]:
    """``eigenfunction_metrics`` for each column of ``U_truth``."""
    rows = [eigenfunction_metrics(U_truth[:, j], Q_U) for j in range(U_truth.shape[1])]
    return {k: np.array([r[k] for r in rows]) for k in ("MaxAE", "CS", "RelL1")}


def _fmt(v) -> str:
    if isinstance(v, (complex, np.complexfloating)):
        return f"{v.real:.17g}{v.imag:+.17g}j"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def to_csv(rows: list[dict], header_lines: list[str] | None = None) -> str:
    """Rows of dicts as CSV text; header lines are emitted as ``# ...`` comments."""
    buf = io.StringIO()
    for h in header_lines or []:
        buf.write(f"# {h}\n")
    if rows:
        cols = list(rows[0].keys())
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in cols])
    return buf.getvalue()


def write_csv(path, rows: list[dict], header_lines: list[str] | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(to_csv(rows, header_lines))
