"""Allocation problems for the eight cooperation configurations.

Four scenarios, each in two transmission orders:

  S1  energy + data cooperation: U2 routes data through U1 and both users
      can transfer energy (U1 power-splits U2's relay transmission with
      ratio rho; the other direction uses dedicated transfers).
  S2  data cooperation only (S1 with rho = 0 and no energy transfer).
  S3  energy cooperation only: both users transmit directly, U1 beams
      energy to U2 (case A) or receives it (case B is the mirrored order).
  S4  no cooperation: direct transmissions only.

Case A schedules U1 before U2's traffic, case B the reverse.  The block
has a harvesting slot t0 followed by the transmission slots; t0 is
eliminated through t0 = 1 - sum(t_i).

Two objectives: the weighted sum of the user throughputs, and the common
(max-min) throughput where one shared rate is capped by every route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .network import (
    ChannelState,
    NetworkConfig,
    derive_channels,
    rho_max,
)
from .program import (
    LN2,
    Allocation,
    ConvexProgram,
    EpigraphConstraint,
    LinearConstraint,
    PerspectiveTerm,
)


class Scenario(Enum):
    S1 = "S1"
    S2 = "S2"
    S3 = "S3"
    S4 = "S4"


class Case(Enum):
    A = "A"  # U1 first
    B = "B"  # U2 first


class Objective(Enum):
    WEIGHTED_SUM = "sum"
    COMMON = "common"


# scenarios where U2's data is relayed through U1
RELAY_SCENARIOS = (Scenario.S1, Scenario.S2)
# scenarios with active RF energy transfer
ENERGY_SCENARIOS = (Scenario.S1, Scenario.S3)


class InfeasibleAllocationError(ValueError):
    """Allocation violates the constraints of its scenario."""


@dataclass(frozen=True)
class ScenarioSpec:
    """One cooperation configuration plus its power-splitting ratio."""

    scenario: Scenario
    case: Case
    objective: Objective = Objective.WEIGHTED_SUM
    rho: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("power-splitting ratio must lie in [0, 1)")
        if self.scenario is not Scenario.S1 and self.rho != 0.0:
            raise ValueError("only S1 uses a power-splitting ratio; set rho=0")


def build_problem(spec: ScenarioSpec, cfg: NetworkConfig, ch: ChannelState | None = None) -> ConvexProgram:
    """Construct the canonical convex program for one configuration."""
    if ch is None:
        ch = derive_channels(cfg)
    eta = cfg.eta if spec.scenario in ENERGY_SCENARIOS else 0.0
    if spec.scenario in RELAY_SCENARIOS:
        limit = rho_max(ch)  # raises RelayNotBeneficialError when the link is too weak
        if spec.scenario is Scenario.S1 and spec.rho >= limit:
            raise ValueError(
                f"rho={spec.rho:g} leaves the relay link weaker than the direct link "
                f"(needs rho < {limit:g})"
            )
        return _relay_program(spec, cfg, ch, eta)
    return _direct_program(spec, cfg, ch, eta)


# variable layout of the relay scenarios: t1 t2 t3 y1 y2 y3 B
_T1, _T2, _T3, _Y1, _Y2, _Y3, _B = range(7)


def _relay_program(spec: ScenarioSpec, cfg: NetworkConfig, ch: ChannelState, eta: float) -> ConvexProgram:
    X1, X2 = cfg.x1_watt, cfg.x2_watt
    rho = spec.rho
    rbar = 1.0 - rho
    g1, g2, gu, hu = ch.gamma1, ch.gamma2, ch.gamma_u, ch.hu

    if spec.case is Case.A:
        # t1: U1 sends its own data; t2: U2 uplinks to D and U1 (relay input);
        # t3: U1 forwards U2's data.
        own = PerspectiveTerm(g1, _T1, _Y1)
        route = (PerspectiveTerm(g2, _T2, _Y2), PerspectiveTerm(g1, _T3, _Y3))
        link = (PerspectiveTerm(rbar * gu, _T2, _Y2),)
        rows = [
            _row(7, {_T1: X1, _T2: X1, _T3: X1, _Y1: 1.0}, X1, "energy_u1_slot1"),
            # U2 harvests from U1's first transmission regardless of rho
            _row(7, {_T2: X2, _T3: X2, _Y1: -eta * hu, _Y2: 1.0}, X2, "energy_u2_slot2"),
            # U1 recovers a rho-split share of U2's relay transmission
            _row(7, {_T3: X1, _Y1: 1.0, _Y2: -eta * rho * hu, _Y3: 1.0}, X1, "energy_u1_slot3"),
        ]
    else:
        # t1: U2 uplinks (relay input); t2: U1 forwards; t3: U1 sends its own.
        own = PerspectiveTerm(g1, _T3, _Y3)
        route = (PerspectiveTerm(g2, _T1, _Y1), PerspectiveTerm(g1, _T2, _Y2))
        link = (PerspectiveTerm(rbar * gu, _T1, _Y1),)
        harvest = -eta * rho * hu  # U1's split share of U2's opening transmission
        rows = [
            _row(7, {_T1: X2, _T2: X2, _T3: X2, _Y1: 1.0}, X2, "energy_u2_slot1"),
            _row(7, {_T2: X1, _T3: X1, _Y1: harvest, _Y2: 1.0}, X1, "energy_u1_slot2"),
            _row(7, {_T3: X1, _Y1: harvest, _Y2: 1.0, _Y3: 1.0}, X1, "energy_u1_slot3"),
        ]
    rows.append(_row(7, {_T1: 1.0, _T2: 1.0, _T3: 1.0}, 1.0, "total_time"))

    q = np.zeros(7)
    if spec.objective is Objective.WEIGHTED_SUM:
        if cfg.w2 == 0.0:
            # the far user's rate does not count; drop the rate variable and
            # its caps instead of leaving the program unbounded below in B
            return _relay_sum_without_rate(spec, cfg, own, rows)
        q[_B] = -cfg.w2
        obj_terms = (_scaled(own, cfg.w1),) if cfg.w1 > 0 else ()
        epigraph = (
            EpigraphConstraint(_B, route, "route_throughput"),
            EpigraphConstraint(_B, link, "interuser_link"),
        )
        names = ("t1", "t2", "t3", "y1", "y2", "y3", "B")
    else:
        q[_B] = -1.0
        obj_terms = ()
        epigraph = (
            EpigraphConstraint(_B, (own,), "near_user_rate"),
            EpigraphConstraint(_B, route, "route_throughput"),
            EpigraphConstraint(_B, link, "interuser_link"),
        )
        names = ("t1", "t2", "t3", "y1", "y2", "y3", "Bbar")

    return ConvexProgram(
        n_vars=7,
        objective_linear=q,
        objective_terms=obj_terms,
        epigraph=epigraph,
        linear=tuple(rows),
        t_indices=(_T1, _T2, _T3),
        y_indices=(_Y1, _Y2, _Y3),
        var_names=names,
    )


def _relay_sum_without_rate(spec, cfg, own, rows):
    """Weighted-sum relay program when w2 = 0: only U1's own slot matters."""
    trimmed = tuple(LinearConstraint(c.a[:6], c.b, c.label) for c in rows)
    return ConvexProgram(
        n_vars=6,
        objective_linear=np.zeros(6),
        objective_terms=(_scaled(own, cfg.w1),),
        epigraph=(),
        linear=trimmed,
        t_indices=(_T1, _T2, _T3),
        y_indices=(_Y1, _Y2, _Y3),
        var_names=("t1", "t2", "t3", "y1", "y2", "y3"),
    )


# variable layout of the direct scenarios: t1 t2 y1 y2 (+ Bbar)
_DT1, _DT2, _DY1, _DY2, _DB = range(5)


def _direct_program(spec: ScenarioSpec, cfg: NetworkConfig, ch: ChannelState, eta: float) -> ConvexProgram:
    X1, X2 = cfg.x1_watt, cfg.x2_watt
    g1, g2, hu = ch.gamma1, ch.gamma2, ch.hu

    if spec.case is Case.A:
        u1 = PerspectiveTerm(g1, _DT1, _DY1)
        u2 = PerspectiveTerm(g2, _DT2, _DY2)
        rows = [
            _row_direct({_DT1: X1, _DT2: X1, _DY1: 1.0}, X1, "energy_u1"),
            _row_direct({_DT2: X2, _DY1: -eta * hu, _DY2: 1.0}, X2, "energy_u2"),
        ]
    else:
        u1 = PerspectiveTerm(g1, _DT2, _DY2)
        u2 = PerspectiveTerm(g2, _DT1, _DY1)
        rows = [
            _row_direct({_DT1: X2, _DT2: X2, _DY1: 1.0}, X2, "energy_u2"),
            _row_direct({_DT2: X1, _DY1: -eta * hu, _DY2: 1.0}, X1, "energy_u1"),
        ]
    rows.append(_row_direct({_DT1: 1.0, _DT2: 1.0}, 1.0, "total_time"))

    if spec.objective is Objective.COMMON:
        rows = [LinearConstraint(c.a + (0.0,), c.b, c.label) for c in rows]
        q = np.zeros(5)
        q[_DB] = -1.0
        return ConvexProgram(
            n_vars=5,
            objective_linear=q,
            objective_terms=(),
            epigraph=(
                EpigraphConstraint(_DB, (u1,), "near_user_rate"),
                EpigraphConstraint(_DB, (u2,), "far_user_rate"),
            ),
            linear=tuple(rows),
            t_indices=(_DT1, _DT2),
            y_indices=(_DY1, _DY2),
            var_names=("t1", "t2", "y1", "y2", "Bbar"),
        )

    obj_terms = []
    if cfg.w1 > 0:
        obj_terms.append(_scaled(u1, cfg.w1))
    if cfg.w2 > 0:
        obj_terms.append(_scaled(u2, cfg.w2))
    return ConvexProgram(
        n_vars=4,
        objective_linear=np.zeros(4),
        objective_terms=tuple(obj_terms),
        epigraph=(),
        linear=tuple(rows),
        t_indices=(_DT1, _DT2),
        y_indices=(_DY1, _DY2),
        var_names=("t1", "t2", "y1", "y2"),
    )


def _row(n: int, entries: dict[int, float], b: float, label: str) -> LinearConstraint:
    a = [0.0] * n
    for i, v in entries.items():
        a[i] = v
    return LinearConstraint(tuple(a), b, label)


def _row_direct(entries: dict[int, float], b: float, label: str) -> LinearConstraint:
    return _row(4, entries, b, label)


def _scaled(term: PerspectiveTerm, w: float) -> PerspectiveTerm:
    return PerspectiveTerm(term.gamma, term.t_index, term.y_index, w)


# ---------------------------------------------------------------------------
# Throughput recovery
# ---------------------------------------------------------------------------


def _rate_bits(gamma: float, t: float, y: float) -> float:
    if t <= 0.0 or y <= 0.0:
        return 0.0
    return t * math.log2(1.0 + gamma * y / t)


@dataclass(frozen=True)
class Throughputs:
    """Per-user rates in bits plus the recovered slot lengths."""

    b1_bits: float
    b2_bits: float
    t0: float
    slots: tuple[float, ...]


def throughputs_from_allocation(
    spec: ScenarioSpec,
    cfg: NetworkConfig,
    ch: ChannelState,
    alloc: Allocation,
    check: bool = True,
    tol: float = 1e-8,
) -> Throughputs:
    """Per-user throughputs implied by an allocation.

    For the relay scenarios U2's rate is the smaller of the decode
    constraint on the inter-user link and the combined direct plus
    forwarded throughput at the destination.  With `check` set, the
    allocation is verified against the scenario's constraints first and
    an infeasible point raises instead of being scored.
    """
    x = alloc.x
    if check:
        p = build_problem(spec, cfg, ch)
        worst = p.max_violation(np.asarray(x, dtype=float))
        if worst > tol:
            raise InfeasibleAllocationError(f"allocation violates constraints by {worst:.3g}")

    g1, g2, gu = ch.gamma1, ch.gamma2, ch.gamma_u
    if spec.scenario in RELAY_SCENARIOS:
        t1, t2, t3, y1, y2, y3 = (float(v) for v in x[:6])
        rbar = 1.0 - spec.rho
        if spec.case is Case.A:
            b1 = _rate_bits(g1, t1, y1)
            routed = _rate_bits(g2, t2, y2) + _rate_bits(g1, t3, y3)
            decoded = _rate_bits(rbar * gu, t2, y2)
        else:
            b1 = _rate_bits(g1, t3, y3)
            routed = _rate_bits(g2, t1, y1) + _rate_bits(g1, t2, y2)
            decoded = _rate_bits(rbar * gu, t1, y1)
        b2 = min(routed, decoded)
        slots = (t1, t2, t3)
    else:
        t1, t2, y1, y2 = (float(v) for v in x[:4])
        if spec.case is Case.A:
            b1 = _rate_bits(g1, t1, y1)
            b2 = _rate_bits(g2, t2, y2)
        else:
            b1 = _rate_bits(g1, t2, y2)
            b2 = _rate_bits(g2, t1, y1)
        slots = (t1, t2)
    t0 = 1.0 - sum(slots)
    return Throughputs(b1_bits=b1, b2_bits=b2, t0=t0, slots=slots)


def objective_bits(spec: ScenarioSpec, cfg: NetworkConfig, tp: Throughputs) -> float:
    """Scalar objective in bits for reporting and strategy comparison."""
    if spec.objective is Objective.WEIGHTED_SUM:
        return cfg.w1 * tp.b1_bits + cfg.w2 * tp.b2_bits
    return min(tp.b1_bits, tp.b2_bits)
