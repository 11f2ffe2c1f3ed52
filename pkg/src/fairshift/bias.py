"""Training-data bias injection and the audit grid.

Two bias kinds, both applied only to the underprivileged group s=0 of the
training split: under-representation keeps an exact-count fraction beta_pos
of the (y=1, s=0) rows and beta_neg of the (y=0, s=0) rows; label bias flips
an exact-count fraction nu of the (y=1, s=0) rows to label 0. The test split
is never biased.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import LabeledDataset, exact_count

_MASK64 = (1 << 64) - 1

UNDER_REP = "under_rep"
LABEL_BIAS = "label_bias"
BASELINE = "baseline"
_KIND_CODES = {UNDER_REP: 0, LABEL_BIAS: 1, BASELINE: 2}


def mix64(*parts: int) -> int:
    """Avalanche the packed integer parts into one 64-bit seed.

    Splitmix64 finalizer folded over the parts; tiny index changes flip
    roughly half the output bits, so per-cell streams are independent.
    """
    h = 0
    for part in parts:
        h = (h + (int(part) & _MASK64) + 0x9E3779B97F4A7C15) & _MASK64
        h = ((h ^ (h >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        h = ((h ^ (h >> 27)) * 0x94D049BB133111EB) & _MASK64
        h ^= h >> 31
    return h


@dataclass(frozen=True)
class BiasSetting:
    """One cell of the bias grid; (1, 1, 0) is the identity setting."""

    beta_pos: float
    beta_neg: float
    nu: float

    def __post_init__(self):
        if not 0.0 < self.beta_pos <= 1.0:
            raise ValueError("beta_pos must lie in (0, 1]")
        if not 0.0 < self.beta_neg <= 1.0:
            raise ValueError("beta_neg must lie in (0, 1]")
        if not 0.0 <= self.nu < 1.0:
            raise ValueError("nu must lie in [0, 1)")

    @property
    def is_identity(self) -> bool:
        return self.beta_pos == 1.0 and self.beta_neg == 1.0 and self.nu == 0.0


IDENTITY_SETTING = BiasSetting(1.0, 1.0, 0.0)


@dataclass(frozen=True)
class BiasGrid:
    beta_pos_values: tuple = field(default=())
    beta_neg_values: tuple = field(default=())
    nu_values: tuple = field(default=())
    runs: int = 5
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "beta_pos_values", tuple(self.beta_pos_values))
        object.__setattr__(self, "beta_neg_values", tuple(self.beta_neg_values))
        object.__setattr__(self, "nu_values", tuple(self.nu_values))
        for b in self.beta_pos_values + self.beta_neg_values:
            if not 0.0 < b <= 1.0:
                raise ValueError("beta values must lie in (0, 1]")
        for v in self.nu_values:
            if not 0.0 <= v < 1.0:
                raise ValueError("nu values must lie in [0, 1)")
        if self.runs < 1:
            raise ValueError("runs must be positive")

    @classmethod
    def default(cls, runs: int = 5, master_seed: int = 0) -> "BiasGrid":
        """10x10 beta grid plus ten label-bias levels."""
        return cls(
            beta_pos_values=tuple(i / 10 for i in range(1, 11)),
            beta_neg_values=tuple(i / 10 for i in range(1, 11)),
            nu_values=tuple(i / 10 for i in range(10)),
            runs=runs,
            master_seed=master_seed,
        )

    @classmethod
    def desk(cls, runs: int = 3, master_seed: int = 0) -> "BiasGrid":
        """Small grid that keeps a full audit in the minutes range."""
        return cls(
            beta_pos_values=(0.25, 0.5, 0.75, 1.0),
            beta_neg_values=(0.25, 0.5, 0.75, 1.0),
            nu_values=(0.0, 0.3, 0.6, 0.9),
            runs=runs,
            master_seed=master_seed,
        )


@dataclass(frozen=True)
class GridCell:
    run: int
    setting: BiasSetting
    seed: int
    kind: str


def enumerate_grid(grid: BiasGrid) -> list[GridCell]:
    """Deterministic cell list: run-major, beta_pos, beta_neg, then nu.

    The beta sweep is the beta_pos x beta_neg cross product with nu=0; the
    label-bias sweep uses beta_pos=beta_neg=1. Each cell's seed mixes the
    master seed with the run and cell indices.
    """
    cells = []
    for run in range(grid.runs):
        for i, bp in enumerate(grid.beta_pos_values):
            for j, bn in enumerate(grid.beta_neg_values):
                seed = mix64(grid.master_seed, run, _KIND_CODES[UNDER_REP], i, j)
                cells.append(GridCell(run, BiasSetting(bp, bn, 0.0), seed, UNDER_REP))
        for k, nu in enumerate(grid.nu_values):
            seed = mix64(grid.master_seed, run, _KIND_CODES[LABEL_BIAS], k, 0)
            cells.append(GridCell(run, BiasSetting(1.0, 1.0, nu), seed, LABEL_BIAS))
    return cells


def baseline_seed(master_seed: int, run: int) -> int:
    return mix64(master_seed, run, _KIND_CODES[BASELINE], 0, 0)


def inject_under_representation(
    ds: LabeledDataset, beta_pos: float, beta_neg: float, seed: int
) -> LabeledDataset:
    """Keep exact-count fractions of the (1,0) and (0,0) subgroups.

    All s=1 rows are kept untouched; row order stays stable by original
    index. Raises if a retained subgroup would come out empty.
    """
    if not (0.0 < beta_pos <= 1.0 and 0.0 < beta_neg <= 1.0):
        raise ValueError("beta factors must lie in (0, 1]")
    rng = np.random.default_rng(np.uint64(seed))
    keep_mask = np.ones(ds.n, dtype=bool)
    for beta, y in ((beta_pos, 1), (beta_neg, 0)):
        members = ds.subgroup_indices(y, 0)
        if len(members) == 0:
            raise ValueError(f"subgroup (y={y}, s=0) is empty before injection")
        keep = exact_count(beta, len(members))
        if keep == 0:
            raise ValueError(f"beta={beta} would empty subgroup (y={y}, s=0)")
        keep_mask[members] = False
        keep_mask[rng.choice(members, size=keep, replace=False)] = True
    return ds.subset(np.flatnonzero(keep_mask))


def inject_label_bias(
    ds: LabeledDataset, nu: float, seed: int, strict: bool = False
) -> LabeledDataset:
    """Flip exactly round(nu * n_10) labels of the (1,0) subgroup to 0.

    Features, groups and the total row count are untouched. In strict mode
    raises if no positive s=0 row would remain.
    """
    if not 0.0 <= nu < 1.0:
        raise ValueError("nu must lie in [0, 1)")
    members = ds.subgroup_indices(1, 0)
    if len(members) == 0:
        raise ValueError("subgroup (y=1, s=0) is empty before injection")
    flips = exact_count(nu, len(members))
    if strict and flips >= len(members):
        raise ValueError(f"nu={nu} would leave no (y=1, s=0) rows")
    if flips == 0:
        return ds
    rng = np.random.default_rng(np.uint64(seed))
    chosen = rng.choice(members, size=flips, replace=False)
    labels = ds.labels.copy()
    labels[chosen] = 0
    return LabeledDataset(ds.features, labels, ds.groups, ds.feature_names)


def apply_setting(ds: LabeledDataset, setting: BiasSetting, seed: int) -> LabeledDataset:
    """Apply one grid cell's bias to a training set."""
    out = ds
    if setting.beta_pos != 1.0 or setting.beta_neg != 1.0:
        out = inject_under_representation(out, setting.beta_pos, setting.beta_neg, seed)
    if setting.nu > 0.0:
        out = inject_label_bias(out, setting.nu, mix64(seed, 1))
    return out
