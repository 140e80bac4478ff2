"""Run configuration shared by the algorithm driver and the command line."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

from .core import AtomicMeasure, BoxSpec
from .extended import Tolerances


@dataclass(frozen=True)
class RunConfig:
    tol_psd: float = 1e-9
    tol_rank: float = 1e-10
    tol_op: float = 1e-7
    tol_recon: float = 1e-6
    tol_res: float = 1e-9      # consistency of step systems (relative)
    tol_pivot: float = 1e-10   # zero-column threshold in elimination (relative)
    tol_bound: float = 1e-9    # slack on the norm bounds d <= M (relative)
    depth: int = 3
    beam: int = 32
    seed: int = 0
    box: BoxSpec = field(default_factory=lambda: BoxSpec(2, 2, 2))
    modified: bool = False
    # add the rank-preserving prediction from fitted shift operators to each grid
    flat_guess: bool = True
    # oracle measure used only to add the oracle-guided point to the sampling grid
    oracle: AtomicMeasure | None = None

    def __post_init__(self):
        for name in ("tol_psd", "tol_rank", "tol_op", "tol_recon", "tol_res", "tol_pivot", "tol_bound"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        if self.beam < 1:
            raise ValueError("beam must be >= 1")

    def tolerances(self) -> Tolerances:
        return Tolerances(tol_psd=self.tol_psd, tol_rank=self.tol_rank, tol_op=self.tol_op,
                          tol_recon=self.tol_recon, seed=self.seed)

    def with_(self, **kw) -> "RunConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["box"] = [self.box.m_max, self.box.n_max, self.box.k_abs_max]
        d["oracle"] = None if self.oracle is None else [list(a) for a in self.oracle.atoms]
        return d
