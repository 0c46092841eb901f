"""
Regime map over real gains a in [0, a_max] and b in [0, b_max].

Columns sample a at `cells` evenly spaced points including both ends;
rows sample b at the `cells` row centres. Each cell carries the regime
label; the map renders to CSV and to an SVG heat map.
"""

import io
import csv
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List

import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
from matplotlib.colors import ListedColormap
from matplotlib.patches import Patch

from gaussian_ccm import GaussianChannelParams, RegimeLabel, regime_classify
from rate_region import format_number


logger = logging.getLogger(__name__)

REGIME_COLORS: Dict[RegimeLabel, str] = {
    RegimeLabel.VERY_STRONG: "#2e8b57",
    RegimeLabel.PDC: "#1f77b4",
    RegimeLabel.BOTH: "#008080",
    RegimeLabel.GAP_ONLY: "#9e9e9e",
}

LABEL_ORDER = (RegimeLabel.VERY_STRONG, RegimeLabel.PDC, RegimeLabel.BOTH, RegimeLabel.GAP_ONLY)

SVG_HASH_SALT = "cifc-ccm-regime-map"


@dataclass(frozen=True)
class RegimeMap:
    a_values: np.ndarray
    b_values: np.ndarray
    labels: List[List[RegimeLabel]]   # labels[row][col], row over b, col over a
    p1: float
    p2: float

    def counts(self) -> Dict[str, int]:
        tally = Counter(label for row in self.labels for label in row)
        return {label.value: tally.get(label, 0) for label in LABEL_ORDER}

    def to_csv(self, digits: int = 12) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["a", "b", "label"])
        for b, row in zip(self.b_values, self.labels):
            for a, label in zip(self.a_values, row):
                writer.writerow([format_number(a, digits), format_number(b, digits), label.value])
        return buffer.getvalue()

    def weak_rows_primary_decodes(self) -> List[int]:
        """Indices of rows with |b| <= 1 holding a cell that is neither PDC nor BOTH."""
        bad = []
        for j, (b, row) in enumerate(zip(self.b_values, self.labels)):
            if b <= 1.0 and any(label not in (RegimeLabel.PDC, RegimeLabel.BOTH) for label in row):
                bad.append(j)
        return bad

    def non_monotone_rows(self) -> List[int]:
        """Rows where very strong interference switches off as a grows."""
        bad = []
        for j, row in enumerate(self.labels):
            flags = [label in (RegimeLabel.VERY_STRONG, RegimeLabel.BOTH) for label in row]
            if any(flags[i] and not flags[i + 1] for i in range(len(flags) - 1)):
                bad.append(j)
        return bad

    def to_svg(self) -> bytes:
        """Heat map; byte-identical for identical maps."""
        codes = np.array([[LABEL_ORDER.index(label) for label in row] for row in self.labels])
        cmap = ListedColormap([REGIME_COLORS[label] for label in LABEL_ORDER])
        a_step = self.a_values[1] - self.a_values[0] if len(self.a_values) > 1 else 1.0
        b_step = self.b_values[1] - self.b_values[0] if len(self.b_values) > 1 else 1.0
        extent = (self.a_values[0] - a_step / 2, self.a_values[-1] + a_step / 2,
                  self.b_values[0] - b_step / 2, self.b_values[-1] + b_step / 2)

        with plt.rc_context({"svg.hashsalt": SVG_HASH_SALT, "svg.fonttype": "none"}):
            fig, ax = plt.subplots(figsize=(6, 5))
            ax.imshow(codes, origin="lower", extent=extent, aspect="auto", cmap=cmap,
                      vmin=-0.5, vmax=len(LABEL_ORDER) - 0.5, interpolation="nearest")
            ax.set_xlabel("a")
            ax.set_ylabel("|b|")
            ax.set_title(f"CIFC-CCM regimes, P1={self.p1:g}, P2={self.p2:g}")
            ax.legend(handles=[Patch(color=REGIME_COLORS[label], label=label.value) for label in LABEL_ORDER],
                      loc="upper left", fontsize=7)
            buffer = io.BytesIO()
            fig.savefig(buffer, format="svg", metadata={"Date": None})
            plt.close(fig)
        return buffer.getvalue()


def build_regime_map(a_max: float, b_max: float, cells: int, p1: float, p2: float) -> RegimeMap:
    if cells < 2:
        raise ValueError("regime map needs at least 2 cells per axis")
    if a_max <= 0.0 or b_max <= 0.0:
        raise ValueError("a_max and b_max must be positive")
    a_values = np.linspace(0.0, a_max, cells)
    b_values = (np.arange(cells) + 0.5) * b_max / cells
    labels = [
        [regime_classify(GaussianChannelParams(float(a), float(b), p1, p2)) for a in a_values]
        for b in b_values
    ]
    regime_map = RegimeMap(a_values, b_values, labels, p1, p2)
    logger.info(f"regime map {cells}x{cells}: {regime_map.counts()}")
    return regime_map
