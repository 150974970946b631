import logging
from pathlib import Path
from typing import Dict, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

logger = logging.getLogger(__name__)

Series = Dict[str, Tuple[Sequence[float], Sequence[float]]]

PALETTE = ["#2E86AB", "#A23B72", "#F18F01", "#4ECDC4", "#FF6B6B", "#6C5B7B", "#355C7D"]


class ChartService:
    """Service for convergence and trajectory charts and plain-text plot data"""

    @classmethod
    def create_convergence_chart(
        cls, series: Series, path: str | Path, title: str, xlabel: str = "h", ylabel: str = "L2 error"
    ) -> Path:
        """Log-log error versus refinement parameter, one line per series, last observed rate in the legend"""
        try:
            cls._setup_chart_style()
            fig, ax = plt.subplots(figsize=(10, 7))
            for i, (name, (params, errors)) in enumerate(series.items()):
                params_a, errors_a = np.asarray(params, dtype=float), np.asarray(errors, dtype=float)
                label = name
                if len(params_a) >= 2 and errors_a[-1] > 0 and errors_a[-2] > 0:
                    rate = np.log(errors_a[-2] / errors_a[-1]) / np.log(params_a[-2] / params_a[-1])
                    label = f"{name} (rate {rate:.2f})"
                ax.loglog(params_a, errors_a, marker="o", linewidth=2, color=PALETTE[i % len(PALETTE)], label=label)

            ax.set_title(title, fontsize=16, fontweight="bold")
            ax.set_xlabel(xlabel, fontsize=12)
            ax.set_ylabel(ylabel, fontsize=12)
            ax.legend(loc="lower right")
            ax.grid(True, which="both", alpha=0.3)
            plt.tight_layout()
            return cls._save_chart(path)
        except (ValueError, OSError) as e:
            raise ValueError(f"Error creating convergence chart {path}: {str(e)}")

    @classmethod
    def create_trajectory_chart(cls, series: Series, path: str | Path, title: str) -> Path:
        """x-y paths, the first series drawn as the reference"""
        try:
            cls._setup_chart_style()
            fig, ax = plt.subplots(figsize=(9, 9))
            for i, (name, (x, y)) in enumerate(series.items()):
                style = dict(linewidth=2.5, color="black") if i == 0 else dict(linewidth=1.5, linestyle="--")
                ax.plot(x, y, label=name, **style)
            ax.set_title(title, fontsize=16, fontweight="bold")
            ax.set_xlabel("x", fontsize=12)
            ax.set_ylabel("y", fontsize=12)
            ax.set_aspect("equal", adjustable="datalim")
            ax.legend(loc="best")
            ax.grid(True, alpha=0.3)
            plt.tight_layout()
            return cls._save_chart(path)
        except (ValueError, OSError) as e:
            raise ValueError(f"Error creating trajectory chart {path}: {str(e)}")

    @staticmethod
    def write_dat(series: Series, path: str | Path) -> Path:
        """One block per series: '# name' then 'x y' lines, blocks separated by a blank line"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        blocks = []
        for name, (x, y) in series.items():
            lines = [f"# {name}"] + [f"{float(a):.10e} {float(b):.10e}" for a, b in zip(x, y)]
            blocks.append("\n".join(lines))
        path.write_text("\n\n".join(blocks) + "\n")
        return path

    @classmethod
    def _setup_chart_style(cls) -> None:
        """Setup consistent chart styling"""
        try:
            plt.style.use("seaborn-v0_8")
        except OSError:
            plt.style.use("default")

        plt.rcParams["figure.figsize"] = (10, 7)
        plt.rcParams["font.size"] = 10
        plt.rcParams["axes.labelsize"] = 12
        plt.rcParams["axes.titlesize"] = 14
        plt.rcParams["legend.fontsize"] = 10
        plt.rcParams["figure.facecolor"] = "white"
        plt.rcParams["axes.facecolor"] = "white"

    @classmethod
    def _save_chart(cls, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        plt.savefig(path, format="png", dpi=150, bbox_inches="tight")
        plt.close()  # Close the figure to free memory
        logger.debug("wrote chart %s", path)
        return path
