"""Coupled-mode decomposition of quality factors into radiative, coupling and fabrication loss channels."""

from __future__ import annotations

import math
from dataclasses import dataclass

from opencqed.exceptions import InfeasibleBudgetError

Q_FAB_CAP = 1e9
BUDGET_RTOL = 1e-9


@dataclass(frozen=True)
class QBudget:
    q_sim: float
    q_exp: float
    q_rad: float
    q_c: float
    q_fab: float
    f0: float

    def __post_init__(self) -> None:
        for name in ("q_sim", "q_exp", "q_rad", "q_c", "q_fab", "f0"):
            if not getattr(self, name) > 0:
                msg = f"{name} must be positive"
                raise ValueError(msg)
        if not math.isclose(1 / self.q_sim, 1 / self.q_rad + 2 / self.q_c, rel_tol=BUDGET_RTOL):
            msg = "simulated budget does not close: 1/q_sim != 1/q_rad + 2/q_c"
            raise ValueError(msg)
        if not math.isclose(1 / self.q_exp, 1 / self.q_sim + 1 / self.q_fab, rel_tol=BUDGET_RTOL):
            msg = "measured budget does not close: 1/q_exp != 1/q_sim + 1/q_fab"
            raise ValueError(msg)

    @classmethod
    def from_measurement(cls, q_sim: float, t_sim: float, q_exp: float, f0: float) -> QBudget:
        """Builds the full budget from a simulated (Q, T) pair and a measured Q."""
        q_rad, q_c = decompose_from_transmission(q_sim, t_sim)
        return cls(q_sim=q_sim, q_exp=q_exp, q_rad=q_rad, q_c=q_c, q_fab=fabrication_q(q_exp, q_sim), f0=f0)

    @property
    def q_rad_effective(self) -> float:
        """Radiative Q with the fabrication loss folded in as an extra intrinsic channel."""
        return 1 / (1 / self.q_rad + 1 / self.q_fab)

    def rates(self) -> dict[str, float]:
        return {
            "exp": q_to_rate(self.q_exp, self.f0),
            "sim": q_to_rate(self.q_sim, self.f0),
            "rad": q_to_rate(self.q_rad, self.f0),
            "c": q_to_rate(self.q_c, self.f0),
            "fab": q_to_rate(self.q_fab, self.f0),
        }


def decompose_from_transmission(q_sim: float, t_sim: float) -> tuple[float, float]:
    """Splits a simulated Q into radiative and coupling Q using the on-resonance drop transmission T = 4 Q^2 / Q_c^2.

    Args:
        q_sim: simulated total quality factor.
        t_sim: simulated on-resonance transmission.

    Returns:
        (q_rad, q_c).
    """
    if q_sim <= 0:
        msg = "q_sim must be positive"
        raise ValueError(msg)
    if not 0 < t_sim <= 1:
        msg = "t_sim must lie in (0, 1]"
        raise ValueError(msg)
    q_c = 2 * q_sim / math.sqrt(t_sim)
    inverse_q_rad = 1 / q_sim - 2 / q_c
    if inverse_q_rad <= 1 / q_sim * BUDGET_RTOL:
        msg = f"transmission {t_sim} leaves no radiative loss for q_sim={q_sim}"
        raise InfeasibleBudgetError(msg)
    return 1 / inverse_q_rad, q_c


def fabrication_q(q_exp: float, q_sim: float, q_fab_cap: float = Q_FAB_CAP) -> float:
    if q_exp <= 0 or q_sim <= 0:
        msg = "quality factors must be positive"
        raise ValueError(msg)
    if q_exp >= q_sim:
        msg = f"measured Q {q_exp} is not below simulated Q {q_sim}"
        raise InfeasibleBudgetError(msg)
    q_fab = 1 / (1 / q_exp - 1 / q_sim)
    if q_fab > q_fab_cap:
        msg = f"fabrication Q {q_fab:.3g} exceeds the cap {q_fab_cap:.3g}"
        raise InfeasibleBudgetError(msg)
    return q_fab


def on_resonance_estimates(budget: QBudget, *, fold_fabrication: bool = False) -> tuple[float, float]:
    """Expected on-resonance reflection and transmission of the fabricated device.

    Args:
        budget: a closed Q budget.
        fold_fabrication: use the radiative Q with the fabrication channel folded in for R.

    Returns:
        (R, T) with R = (q_exp / q_rad)^2 and T = 4 (q_exp / q_c)^2.
    """
    q_rad = budget.q_rad_effective if fold_fabrication else budget.q_rad
    return (budget.q_exp / q_rad) ** 2, 4 * (budget.q_exp / budget.q_c) ** 2


def q_to_rate(q: float, f0: float) -> float:
    if q <= 0:
        msg = "q must be positive"
        raise ValueError(msg)
    return f0 / q
