"""Comparison tables, accuracy heatmaps, budget and λ-sensitivity curves, CKA maps."""

import csv
from collections import defaultdict
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import torch  # noqa: E402

from src.cli.commands import CommandError, load_run  # noqa: E402
from src.cli.experiment import validate_experiment  # noqa: E402
from src.evalkit import layer_similarity_map  # noqa: E402
from src.evalkit.cka import MAX_PROBE_SAMPLES  # noqa: E402
from src.nets import load_classifier  # noqa: E402
from src.utils.logger import setup_logger  # noqa: E402


logger = setup_logger(__name__)

TABLE_COLUMNS = ("name", "method", "seeds", "acc_mean", "acc_std", "bwt_mean", "bwt_std", "total_queries_mean")


def _pct(mean: Optional[float], std: Optional[float]) -> str:
    if mean is None:
        return "N/A"
    return f"{100 * mean:.2f} ± {100 * (std or 0.0):.2f}"


def comparison_rows(runs: Sequence[Dict[str, Any]]) -> List[Dict[str, Any]]:
    rows = []
    for run in runs:
        agg = run["aggregate"]
        rows.append({
            "name": agg.get("name", run["root"].name),
            "method": agg["method"],
            "seeds": len(agg["seeds"]),
            "acc_mean": agg["acc_mean"],
            "acc_std": agg["acc_std"],
            "bwt_mean": agg["bwt_mean"],
            "bwt_std": agg["bwt_std"],
            "total_queries_mean": agg.get("total_queries_mean"),
        })
    return rows


def render_table(rows: Sequence[Dict[str, Any]]) -> str:
    header = ("Run", "Method", "Seeds", "ACC (%)", "BWT (%)")
    body = [
        (r["name"], r["method"], str(r["seeds"]), _pct(r["acc_mean"], r["acc_std"]), _pct(r["bwt_mean"], r["bwt_std"]))
        for r in rows
    ]
    widths = [max(len(line[i]) for line in [header] + body) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(line, widths)) for line in [header] + body]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def write_table(rows: Sequence[Dict[str, Any]], out_dir: Path) -> str:
    with open(out_dir / "comparison.csv", 'w', encoding='utf-8', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=TABLE_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    text = render_table(rows)
    (out_dir / "comparison.txt").write_text(text + "\n", encoding='utf-8')
    return text


def mean_matrix(results: Sequence[Dict[str, Any]]) -> Optional[np.ndarray]:
    """Seed-averaged accuracy matrix with NaN above the diagonal."""
    matrices = []
    for result in results:
        if not result.get("matrix"):
            return None
        rows = result["matrix"]["rows"]
        K = len(rows)
        dense = np.full((K, K), np.nan)
        for k, row in enumerate(rows):
            dense[k, :len(row)] = row
        matrices.append(dense)
    return np.mean(matrices, axis=0)


def plot_heatmap(matrix: np.ndarray, title: str, path: Path, xlabels=None, ylabels=None, xlabel="", ylabel="") -> None:
    fig, ax = plt.subplots(1, 1, figsize=(1.2 * matrix.shape[1] + 2.5, 1.0 * matrix.shape[0] + 2))
    image = ax.imshow(np.ma.masked_invalid(matrix), cmap="viridis", vmin=0.0, vmax=1.0)
    for (i, j), value in np.ndenumerate(matrix):
        if not np.isnan(value):
            ax.text(j, i, f"{100 * value:.1f}", ha="center", va="center", color="white" if value < 0.6 else "black", fontsize=8)
    ax.set_xticks(range(matrix.shape[1]), xlabels or [str(i + 1) for i in range(matrix.shape[1])], rotation=45, ha="right")
    ax.set_yticks(range(matrix.shape[0]), ylabels or [str(i + 1) for i in range(matrix.shape[0])])
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.colorbar(image, ax=ax)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def budget_curve(runs: Sequence[Dict[str, Any]]) -> Dict[str, List[Tuple[int, float, float]]]:
    """(budget, ACC mean, ACC std) per method, sorted by budget; runs without a budget are skipped."""
    curves = defaultdict(list)
    for run in runs:
        agg = run["aggregate"]
        if agg.get("budget_per_task") is not None:
            curves[agg["method"]].append((agg["budget_per_task"], agg["acc_mean"], agg["acc_std"]))
    return {method: sorted(points) for method, points in curves.items() if len(points) > 1}


def lambda_sweeps(runs: Sequence[Dict[str, Any]]) -> Dict[str, Dict[str, List[Tuple[float, float, float]]]]:
    """Per method, ACC against λ_G (λ_CL fixed at its most common value) and against λ_CL likewise."""
    sweeps = {}
    by_method = defaultdict(list)
    for run in runs:
        by_method[run["aggregate"]["method"]].append(run["aggregate"])
    for method, aggs in by_method.items():
        pairs = {(a["lambda_g"], a["lambda_cl"]) for a in aggs}
        if len(pairs) < 2:
            continue
        curves = {}
        for varied, fixed in (("lambda_g", "lambda_cl"), ("lambda_cl", "lambda_g")):
            values = [a[fixed] for a in aggs]
            anchor = max(set(values), key=values.count)
            points = sorted((a[varied], a["acc_mean"], a["acc_std"]) for a in aggs if a[fixed] == anchor)
            if len({p[0] for p in points}) > 1:
                curves[varied] = points
        if curves:
            sweeps[method] = curves
    return sweeps


def plot_curves(curves: Dict[str, List[Tuple[float, float, float]]], xlabel: str, title: str, path: Path, log_x: bool = False) -> None:
    fig, ax = plt.subplots(1, 1, figsize=(6, 4))
    for label, points in curves.items():
        xs, means, stds = zip(*points)
        ax.errorbar(xs, [100 * m for m in means], yerr=[100 * s for s in stds], marker="o", capsize=3, label=label)
    if log_x:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("ACC (%)")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _first_seed_model(run: Dict[str, Any]):
    seed = run["aggregate"]["seeds"][0]
    path = run["root"] / f"seed_{seed}" / "model.pt"
    if not path.exists():
        raise CommandError(f"No final model in {path.parent}")
    return seed, load_classifier(path)


def cka_report(run_a: Dict[str, Any], run_b: Dict[str, Any], out_dir: Path) -> np.ndarray:
    """Layer-by-layer linear CKA between the final models of two runs, probed on test images."""
    seed, model_a = _first_seed_model(run_a)
    _, model_b = _first_seed_model(run_b)
    experiment = validate_experiment(run_a["experiment"]["experiment"])
    stream = experiment.build_stream(seed)
    probe = torch.cat([task.test.images for task in stream])
    probe = probe[torch.randperm(len(probe), generator=torch.Generator().manual_seed(seed))[:MAX_PROBE_SAMPLES]]

    matrix, names_a, names_b = layer_similarity_map(model_a, model_b, probe)
    matrix = matrix.cpu().numpy()
    name_a, name_b = run_a["aggregate"]["name"], run_b["aggregate"]["name"]
    with open(out_dir / "cka.csv", 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f)
        writer.writerow([f"{name_a} \\ {name_b}"] + names_b)
        for name, row in zip(names_a, matrix):
            writer.writerow([name] + [f"{v:.6f}" for v in row])
    plot_heatmap(matrix, f"Linear CKA: {name_a} vs {name_b}", out_dir / "cka.png", names_b, names_a, name_b, name_a)
    return matrix


def cmd_report(
    run_dirs: Sequence[Path],
    out_dir: Optional[Path] = None,
    cka: Optional[Tuple[Path, Path]] = None,
) -> Path:
    """Render everything the given runs support into `out_dir` (default: `<first run>/../report`)."""
    if not run_dirs and not cka:
        raise CommandError("report needs at least one run directory")
    runs = [load_run(Path(d)) for d in run_dirs]
    cka_runs = [load_run(Path(d)) for d in cka] if cka else []

    datasets = {r["aggregate"]["dataset"] for r in runs + cka_runs}
    if len(datasets) > 1:
        raise CommandError(f"Refusing to compare runs on different datasets: {sorted(datasets)}")

    out_dir = Path(out_dir) if out_dir else (runs or cka_runs)[0]["root"].parent / "report"
    out_dir.mkdir(parents=True, exist_ok=True)

    if runs:
        text = write_table(comparison_rows(runs), out_dir)
        print(text)

        for run in runs:
            matrix = mean_matrix(run["results"])
            if matrix is not None:
                name = run["aggregate"]["name"]
                plot_heatmap(matrix, f"{name}: accuracy after each task", out_dir / f"heatmap_{name}.png",
                             xlabel="evaluated task", ylabel="after training task")

        curves = budget_curve(runs)
        if curves:
            with open(out_dir / "budget_curve.csv", 'w', encoding='utf-8', newline='') as f:
                writer = csv.writer(f)
                writer.writerow(["method", "budget_per_task", "acc_mean", "acc_std"])
                for method, points in curves.items():
                    writer.writerows([method, *p] for p in points)
            plot_curves(curves, "queries per task", "ACC against query budget", out_dir / "budget_curve.png", log_x=True)

        for method, sweep in lambda_sweeps(runs).items():
            for varied, points in sweep.items():
                plot_curves({method: points}, varied, f"{method}: sensitivity to {varied}",
                            out_dir / f"sensitivity_{method}_{varied}.png")

    if cka_runs:
        cka_report(cka_runs[0], cka_runs[1], out_dir)

    logger.info(f"Report written to {out_dir}")
    return out_dir
