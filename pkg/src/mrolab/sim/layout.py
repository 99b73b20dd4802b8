"""Cell layouts and the per-pair offset table.

The default layout is a 2x2 grid of omni cells with one designated tunable
source→target pair; every other ordered pair keeps a zero offset. A
7-site / 21-cell hexagonal option exists for larger runs. Offsets for the
tunable pair are integers in dB and are clamped to the supported range at
the API boundary (setting an out-of-range value is rejected, not silently
clipped).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..mro import CIO_MAX, CIO_MIN


@dataclass(frozen=True)
class A3Config:
    """Global handover-entry offsets: trigger when
    target - source > off_a3 + hys_a3 + pair offset, sustained for ttt_ms."""

    off_a3: float = 3.0
    hys_a3: float = 1.0
    ttt_ms: float = 160.0

    def __post_init__(self):
        if self.hys_a3 < 0:
            raise ValueError("hysteresis must be non-negative")
        if self.ttt_ms <= 0:
            raise ValueError("time-to-trigger must be positive")


@dataclass(frozen=True)
class Cell:
    ident: int
    x: float
    y: float
    tx_power_dbm: float = 30.0
    carrier_mhz: float = 3500.0


class CellLayout:
    def __init__(self, cells: list[Cell], tunable_pair: tuple[int, int]):
        idents = [c.ident for c in cells]
        if len(set(idents)) != len(idents):
            raise ValueError("cell identifiers must be unique")
        if tunable_pair[0] not in idents or tunable_pair[1] not in idents:
            raise ValueError(f"tunable pair {tunable_pair} not in layout")
        if tunable_pair[0] == tunable_pair[1]:
            raise ValueError("tunable pair must name two distinct cells")
        self.cells = list(cells)
        self.tunable_pair = (int(tunable_pair[0]), int(tunable_pair[1]))
        self._index = {c.ident: i for i, c in enumerate(cells)}
        self.positions = np.array([[c.x, c.y] for c in cells], dtype=np.float64)
        self.tx_power = np.array([c.tx_power_dbm for c in cells], dtype=np.float64)
        self.cio_db = np.zeros((len(cells), len(cells)), dtype=np.float64)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def index_of(self, ident: int) -> int:
        if ident not in self._index:
            raise KeyError(f"unknown cell {ident}")
        return self._index[ident]

    @property
    def pair_indices(self) -> tuple[int, int]:
        return self.index_of(self.tunable_pair[0]), self.index_of(self.tunable_pair[1])

    def set_pair_cio(self, cio: int) -> None:
        """Set the tunable pair's offset; values outside the range are rejected."""
        if cio != int(cio) or not (CIO_MIN <= cio <= CIO_MAX):
            raise ValueError(f"pair offset must be an integer in [{CIO_MIN}, {CIO_MAX}], got {cio}")
        a, b = self.pair_indices
        self.cio_db[a, b] = float(int(cio))

    def pair_cio(self) -> int:
        a, b = self.pair_indices
        return int(self.cio_db[a, b])

    def bounding_box(self, margin: float) -> tuple[float, float, float, float]:
        xs, ys = self.positions[:, 0], self.positions[:, 1]
        return (
            float(xs.min() - margin),
            float(xs.max() + margin),
            float(ys.min() - margin),
            float(ys.max() + margin),
        )


def grid_layout(
    site_distance: float = 300.0,
    tx_power_dbm: float = 30.0,
    carrier_mhz: float = 3500.0,
) -> CellLayout:
    """2x2 grid; the tunable pair is the bottom edge (0 -> 1)."""
    d = float(site_distance)
    cells = [
        Cell(0, 0.0, 0.0, tx_power_dbm, carrier_mhz),
        Cell(1, d, 0.0, tx_power_dbm, carrier_mhz),
        Cell(2, 0.0, d, tx_power_dbm, carrier_mhz),
        Cell(3, d, d, tx_power_dbm, carrier_mhz),
    ]
    return CellLayout(cells, tunable_pair=(0, 1))


def hex_layout(
    site_distance: float = 300.0,
    tx_power_dbm: float = 30.0,
    carrier_mhz: float = 3500.0,
) -> CellLayout:
    """7 hexagonally packed sites, 3 cells each (21 cells).

    Cells sit on a small triangle around their site so every cell is omni;
    the tunable pair is the two facing cells of the central site.
    """
    d = float(site_distance)
    sites = [(0.0, 0.0)]
    for k in range(6):
        ang = np.pi / 3.0 * k
        sites.append((d * np.cos(ang), d * np.sin(ang)))
    r = d / 6.0
    cells = []
    ident = 0
    for sx, sy in sites:
        for k in range(3):
            ang = np.pi / 2.0 + 2.0 * np.pi / 3.0 * k
            cells.append(Cell(ident, sx + r * np.cos(ang), sy + r * np.sin(ang), tx_power_dbm, carrier_mhz))
            ident += 1
    return CellLayout(cells, tunable_pair=(1, 2))


def make_layout(kind: str, site_distance: float, tx_power_dbm: float, carrier_mhz: float) -> CellLayout:
    if kind == "grid":
        return grid_layout(site_distance, tx_power_dbm, carrier_mhz)
    if kind == "hex":
        return hex_layout(site_distance, tx_power_dbm, carrier_mhz)
    raise ValueError(f"unknown layout kind {kind!r}")
