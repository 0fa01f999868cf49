"""Closed-form generalization and estimation error bounds for ISTA, ADMM and ReLU networks.

Geometric factors and eta are computed as explicit sums so B = 1 needs no
special case. Quantities outside their admissible interval are reported in
``BoundReport.validity`` and are never clamped.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

logger = logging.getLogger(__name__)

EE_K = 41.0 / 40.0

Number = Union[int, float]


class DegenerateDepthError(ValueError):
    pass


def _per_layer(value, L: int, name: str) -> tuple[float, ...]:
    if isinstance(value, (int, float)):
        return (float(value),) * L
    values = tuple(float(v) for v in value)
    if len(values) != L:
        raise ValueError(f"{name} needs {L} entries, got {len(values)}")
    return values


@dataclass(frozen=True)
class BoundInputs:
    B0: float = 1.0
    B: Union[float, Sequence[float]] = 1.0
    lam: float = 0.1
    gamma: float = 1.0
    m: int = 100
    L: int = 10
    T: Union[float, Sequence[float]] = 0.0
    c: float = 1.0
    C: float = 1.0
    alpha: float = 1.0
    s: float = 1.0
    n_x: int = 64

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("depth L must be at least 1")
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if self.B0 < 0:
            raise ValueError("B0 must be nonnegative")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if not 0.0 < self.c <= 1.0:
            raise ValueError("c must lie in (0, 1]")
        if self.C < 1.0:
            raise ValueError("C must be at least 1")
        if self.alpha <= 0 or self.s <= 0:
            raise ValueError("alpha and s must be positive")
        if self.n_x < 1:
            raise ValueError("n_x must be positive")
        caps = _per_layer(self.B, self.L, "B")
        if any(b <= 0 for b in caps):
            raise ValueError("every B_l must be positive")
        if any(t < 0 for t in _per_layer(self.T, self.L, "T")):
            raise ValueError("every T^(l) must be nonnegative")
        object.__setattr__(self, "B", caps if len(set(caps)) > 1 else caps[0])

    @property
    def caps(self) -> tuple[float, ...]:
        return _per_layer(self.B, self.L, "B")

    @property
    def ts(self) -> tuple[float, ...]:
        return _per_layer(self.T, self.L, "T")

    @property
    def B_max(self) -> float:
        return max(self.caps)

    @property
    def T_scalar(self) -> float:
        # single-T forms use the smallest per-layer value
        return min(self.ts)

    @property
    def lam_admm(self) -> float:
        return (1.0 + self.gamma) * self.lam

    def caps_admm(self) -> tuple[float, ...]:
        return tuple((1.0 + 2.0 * self.gamma) * (b + 2.0) for b in self.caps)

    @classmethod
    def from_dict(cls, data: dict) -> "BoundInputs":
        data = dict(data)
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        return cls(**data)


@dataclass
class BoundReport:
    value: float
    intermediate: dict = field(default_factory=dict)
    validity: dict = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        return all(self.validity.values())

    def to_dict(self) -> dict:
        return {"value": self.value, "valid": self.valid,
                "intermediate": self.intermediate, "validity": self.validity}


def geom(B: float, L: int) -> float:
    """sum_{l=0}^{L-1} B^l."""
    return math.fsum(B ** l for l in range(L))


def eta(B: float, L: int) -> float:
    """sum_{l=1}^{L-1} l B^{l-1}."""
    return math.fsum(l * B ** (l - 1) for l in range(1, L))


def _g_recurrence(g0: float, caps, lam: float, ts, m: int):
    """G^{l} = B_l G^{l-1} - lam T^(l) / m, with the admissible upper end for each T^(l)."""
    sequence = [g0]
    upper = []
    for b, t in zip(caps, ts):
        prev = sequence[-1]
        limit = m * b * prev / lam if lam > 0 else math.inf
        upper.append(min(limit, float(m)))
        sequence.append(b * prev - lam * t / m)
    return sequence, upper


def _interval_flags(ts, upper) -> dict:
    return {f"T{l}_in_interval": 0.0 <= t <= u for l, (t, u) in enumerate(zip(ts, upper), start=1)}


def ge_bound_relu(inp: BoundInputs) -> BoundReport:
    product = math.prod(inp.caps)
    value = 2.0 * inp.B0 * product / math.sqrt(inp.m)
    return BoundReport(value=value, intermediate={"G_R": value / 2.0})


def ge_bound_ista(inp: BoundInputs) -> BoundReport:
    ts = inp.ts
    sequence, upper = _g_recurrence(inp.B0 / math.sqrt(inp.m), inp.caps, inp.lam, ts, inp.m)
    validity = _interval_flags(ts, upper)
    if not all(validity.values()):
        logger.warning("ISTA GE bound evaluated with T outside its interval")
    return BoundReport(
        value=2.0 * sequence[-1],
        intermediate={"G": sequence, "T_upper": upper},
        validity=validity,
    )


def ista_closed_form_g(inp: BoundInputs) -> float:
    """G_I^L as the product/sum expression rather than the recurrence."""
    caps, ts, L = inp.caps, inp.ts, inp.L
    lead = inp.B0 * math.prod(caps) / math.sqrt(inp.m)
    tail = math.fsum(ts[l] * math.prod(caps[l + 1:]) for l in range(L - 1))
    return lead - inp.lam / inp.m * tail - inp.lam * ts[L - 1] / inp.m


def ge_bound_ista_simplified(B0: float, B: float, lam: float, m: int, L: int, T: float) -> BoundReport:
    g = B0 * B ** L / math.sqrt(m) - lam * T / m * geom(B, L)
    return BoundReport(
        value=2.0 * g,
        intermediate={"geom": geom(B, L)},
        validity={"T_in_interval": 0.0 <= T <= m},
    )


def ge_bound_admm(inp: BoundInputs) -> BoundReport:
    """ADMM bound: the ISTA recurrence under lambda -> (1+gamma) lambda, B_l -> (1+2 gamma)(B_l+2).

    G_A^1 = B0 / sqrt(m), G_A^{l+1} = B~_l G_A^l - lam~ T^(l) / m, value 2 B~_L G_A^{L-1}.
    T^(l) is checked against B~_l G_A^l, the factor it is subtracted from.
    """
    L = inp.L
    lam_t = inp.lam_admm
    caps_t = inp.caps_admm()
    ts = inp.ts
    g1 = inp.B0 / math.sqrt(inp.m)
    intermediate = {"lambda_tilde": lam_t, "B_tilde": list(caps_t)}

    if L == 1:
        intermediate.update({"G_A": [g1], "simplified": 2.0 * caps_t[0] * g1})
        return BoundReport(
            value=2.0 * caps_t[0] * g1,
            intermediate=intermediate,
            validity={"depth_at_least_2": False},
        )

    # G_A^1..G_A^{L-1} use B~_1..B~_{L-2}; T^(L-1) is admissibility-checked only
    sequence, upper = _g_recurrence(g1, caps_t[:L - 1], lam_t, ts[:L - 1], inp.m)
    g_last = sequence[L - 2]
    validity = _interval_flags(ts[:L - 1], upper)

    b_t = max(caps_t)
    t = inp.T_scalar
    simplified = 2.0 * b_t * (inp.B0 * b_t ** (L - 1) / math.sqrt(inp.m) - lam_t * t / inp.m * geom(b_t, L - 1))
    intermediate.update({"G_A": sequence[:L - 1], "T_upper": upper[:L - 1], "simplified": simplified})
    return BoundReport(value=2.0 * caps_t[L - 1] * g_last, intermediate=intermediate, validity=validity)


@dataclass
class TLowerBound:
    values: list
    b_sequence: list
    thresholds: list
    meaningful: list
    annihilated_from: int | None = None


def expected_T_lower_bound(inp: BoundInputs) -> TLowerBound:
    """Per-layer lower bound on E[T^(l)] from the distribution constant c."""
    values, bs, thresholds, meaningful = [], [], [], []
    annihilated_from = None
    b = inp.B0
    for l, cap in enumerate(inp.caps, start=1):
        bs.append(b)
        if b <= 0 and annihilated_from is None:
            annihilated_from = l
            logger.warning("thresholding annihilates the signal from layer %d on", l)
        if annihilated_from is not None:
            values.append(0.0)
            thresholds.append(0.0)
            meaningful.append(False)
        else:
            exponent = inp.c * cap * b - inp.lam
            if exponent <= math.log(2.0):
                # lambda at or past the threshold: the bound is clamped at zero
                values.append(0.0)
            else:
                values.append(inp.m * (1.0 - 2.0 * math.exp(-exponent)))
            threshold = inp.c * cap * b + math.log(2.0)
            thresholds.append(threshold)
            meaningful.append(inp.lam < threshold)
        b = cap * b - inp.lam
    return TLowerBound(values=values, b_sequence=bs, thresholds=thresholds,
                       meaningful=meaningful, annihilated_from=annihilated_from)


def design_rule_max_B(lam: float, T: float, m: int, B0: float) -> float:
    """Largest uniform norm cap keeping the simplified ISTA G-sequence nonincreasing."""
    if B0 <= 0 or m < 1:
        raise ValueError("design rule needs B0 > 0 and m >= 1")
    return 1.0 + lam * T / (math.sqrt(m) * B0)


def g_sequence_simplified(B0: float, B: float, lam: float, m: int, T: float, depth: int) -> list:
    sequence = [B0 / math.sqrt(m)]
    for _ in range(depth):
        sequence.append(B * sequence[-1] - lam * T / m)
    return sequence


def psi(r: float, C: float, alpha: float, beta: float) -> float:
    """Sub-root function C alpha sqrt(r) beta."""
    return C * alpha * math.sqrt(r) * beta


def ee_fixed_point(arch: str, inp: BoundInputs) -> BoundReport:
    arch = str(getattr(arch, "value", arch)).upper()
    L, m = inp.L, inp.m
    B = inp.B_max
    T = inp.T_scalar
    ca = inp.C * inp.alpha
    intermediate: dict = {"B": B}
    validity: dict = {}

    if arch == "RELU":
        beta = inp.B0 * B ** (L - 1) * 2 ** L / math.sqrt(m)
    elif arch == "ISTA":
        e = eta(B, L)
        lead = inp.B0 * B ** (L - 1) * 2 ** L / math.sqrt(m)
        beta = lead - inp.lam * T * e / m
        upper = min(math.sqrt(m) * inp.B0 * B ** (L - 1) * 2 ** L / (inp.lam * e), m) if inp.lam * e > 0 else float(m)
        intermediate.update({"eta": e, "T_upper": upper})
        validity["T_in_interval"] = 0.0 <= T <= upper
    elif arch == "ADMM":
        if L < 2:
            raise DegenerateDepthError("ADMM estimation-error bound needs depth L >= 2")
        lam_t = inp.lam_admm
        b_t = (1.0 + 2.0 * inp.gamma) * (B + 2.0)
        e = eta(b_t, L - 1)
        lead = inp.B0 * b_t ** (L - 2) * 2 ** (L - 1) / math.sqrt(m)
        beta = lead - lam_t * T * e / m
        upper = min(math.sqrt(m) * inp.B0 * b_t ** (L - 2) * 2 ** (L - 1) / (lam_t * e), m) if lam_t * e > 0 else float(m)
        intermediate.update({"eta_tilde": e, "lambda_tilde": lam_t, "B_tilde": b_t, "T_upper": upper})
        validity["T_in_interval"] = 0.0 <= T <= upper
    else:
        raise ValueError(f"unknown architecture {arch!r}")

    r_star = ca ** 2 * beta ** 2
    intermediate.update({"beta": beta, "r_star": r_star, "psi_at_r_star": psi(r_star, inp.C, inp.alpha, beta)})
    validity["B_dominates"] = B >= max(inp.alpha * math.sqrt(r_star), 1.0)
    return BoundReport(value=r_star, intermediate=intermediate, validity=validity)


def ee_bound(r_star: float, C: float, s: float, m: int, n_x: int) -> float:
    if s <= 0 or C < 1:
        raise ValueError("ee_bound needs s > 0 and C >= 1")
    return 41.0 * r_star + (17.0 * C ** 2 + 48.0 * C) * s / (m * n_x)


def ee_bound_general(r_star: float, C: float, s: float, m: int, n_x: int, K: float = EE_K) -> float:
    if K <= 1:
        raise ValueError("K must exceed 1")
    return 40.0 * K * r_star + (16.0 * K * C ** 2 + 48.0 * C) * s / (m * n_x)


def all_reports(inp: BoundInputs) -> dict:
    """Every applicable bound for one input set, as plain dicts."""
    reports = {
        "ge_relu": ge_bound_relu(inp).to_dict(),
        "ge_ista": ge_bound_ista(inp).to_dict(),
        "ge_admm": ge_bound_admm(inp).to_dict(),
        "ge_ista_simplified": ge_bound_ista_simplified(
            inp.B0, inp.B_max, inp.lam, inp.m, inp.L, inp.T_scalar).to_dict(),
    }
    for arch in ("ISTA", "ADMM", "RELU"):
        try:
            fixed = ee_fixed_point(arch, inp)
        except DegenerateDepthError as exc:
            reports[f"ee_{arch.lower()}"] = {"error": str(exc)}
            continue
        entry = fixed.to_dict()
        entry["ee_bound"] = ee_bound(fixed.value, inp.C, inp.s, inp.m, inp.n_x)
        reports[f"ee_{arch.lower()}"] = entry
    t_bound = expected_T_lower_bound(inp)
    reports["expected_T"] = {
        "values": t_bound.values, "b_sequence": t_bound.b_sequence,
        "thresholds": t_bound.thresholds, "meaningful": t_bound.meaningful,
        "annihilated_from": t_bound.annihilated_from,
    }
    return reports
