"""16-state mammalian circadian oscillator (Per/Cry/Bmal1 regulatory loops).

State ordering (fixed, used by every file format):
    0 M_P    Per mRNA
    1 M_C    Cry mRNA
    2 M_B    Bmal1 mRNA          <- additive input u(t) enters here
    3 P_C    PER protein, cytosol
    4 C_C    CRY protein, cytosol
    5 P_CP   phosphorylated PER, cytosol
    6 C_CP   phosphorylated CRY, cytosol
    7 PC_C   PER-CRY complex, cytosol
    8 PC_N   PER-CRY complex, nucleus
    9 PC_CP  phosphorylated PER-CRY, cytosol
   10 PC_NP  phosphorylated PER-CRY, nucleus
   11 B_C    BMAL1, cytosol
   12 B_CP   phosphorylated BMAL1, cytosol
   13 B_N    BMAL1, nucleus
   14 B_NP   phosphorylated BMAL1, nucleus
   15 I_N    inactive PER-CRY / CLOCK-BMAL1 complex, nucleus

Time in hours, concentrations in nM.  Basal rate constants live in
``isoslow/data/circadian_basal.json``; the defaults applied here override
k1, k2 and v_sP on top of that table.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .._accel import maybe_njit
from .base import DynamicalSystem

STATE_LABELS = (
    "M_P", "M_C", "M_B", "P_C", "C_C", "P_CP", "C_CP", "PC_C",
    "PC_N", "PC_CP", "PC_NP", "B_C", "B_CP", "B_N", "B_NP", "I_N",
)

# packed parameter vector layout (order matters for the kernels)
PARAM_NAMES = (
    "k1", "k2", "k3", "k4", "k5", "k6", "k7", "k8",
    "K_AP", "K_AC", "K_IB",
    "k_dmb", "k_dmc", "k_dmp", "k_dn", "k_dnc",
    "K_d", "K_dp", "K_p", "K_mB", "K_mC", "K_mP",
    "k_sB", "k_sC", "k_sP",
    "m", "n",
    "V_1B", "V_1C", "V_1P", "V_1PC",
    "V_2B", "V_2C", "V_2P", "V_2PC",
    "V_3B", "V_3PC", "V_4B", "V_4PC",
    "v_dBC", "v_dBN", "v_dCC", "v_dIN",
    "v_dPC", "v_dPCC", "v_dPCN",
    "v_mB", "v_mC", "v_mP",
    "v_sB", "v_sC", "v_sP",
)

OVERRIDES = {"k1": 0.58, "k2": 2.0, "v_sP": 1.35}


def basal_constants() -> dict[str, float]:
    text = resources.files("isoslow.data").joinpath("circadian_basal.json").read_text()
    raw = json.loads(text)
    raw.pop("comment", None)
    return {k: float(v) for k, v in raw.items()}


def _default_constants() -> dict[str, float]:
    vals = basal_constants()
    vals.update(OVERRIDES)
    return vals


@dataclass(frozen=True)
class CircadianParams:
    constants: dict = field(default_factory=_default_constants)

    def __post_init__(self):
        missing = set(PARAM_NAMES) - set(self.constants)
        if missing:
            raise ValueError(f"missing circadian constants: {sorted(missing)}")

    def packed(self) -> np.ndarray:
        return np.array([self.constants[k] for k in PARAM_NAMES], dtype=float)


@maybe_njit(cache=True)
def _mm(v, x, k):
    # Michaelis-Menten rate v*x/(k+x)
    return v * x / (k + x)


@maybe_njit(cache=True)
def _mm_d(v, x, k):
    return v * k / ((k + x) * (k + x))


@maybe_njit(cache=True)
def circadian_rhs(t, x, u, p):
    (k1, k2, k3, k4, k5, k6, k7, k8) = p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7]
    K_AP, K_AC, K_IB = p[8], p[9], p[10]
    k_dmb, k_dmc, k_dmp, k_dn, k_dnc = p[11], p[12], p[13], p[14], p[15]
    K_d, K_dp, K_p, K_mB, K_mC, K_mP = p[16], p[17], p[18], p[19], p[20], p[21]
    k_sB, k_sC, k_sP = p[22], p[23], p[24]
    m_h, n_h = p[25], p[26]
    V_1B, V_1C, V_1P, V_1PC = p[27], p[28], p[29], p[30]
    V_2B, V_2C, V_2P, V_2PC = p[31], p[32], p[33], p[34]
    V_3B, V_3PC, V_4B, V_4PC = p[35], p[36], p[37], p[38]
    v_dBC, v_dBN, v_dCC, v_dIN = p[39], p[40], p[41], p[42]
    v_dPC, v_dPCC, v_dPCN = p[43], p[44], p[45]
    v_mB, v_mC, v_mP = p[46], p[47], p[48]
    v_sB, v_sC, v_sP = p[49], p[50], p[51]

    M_P, M_C, M_B = x[0], x[1], x[2]
    P_C, C_C, P_CP, C_CP = x[3], x[4], x[5], x[6]
    PC_C, PC_N, PC_CP, PC_NP = x[7], x[8], x[9], x[10]
    B_C, B_CP, B_N, B_NP, I_N = x[11], x[12], x[13], x[14], x[15]

    Bn = B_N ** n_h
    Bm = B_N ** m_h

    out = np.empty(16)
    out[0] = v_sP * Bn / (K_AP ** n_h + Bn) - _mm(v_mP, M_P, K_mP) - k_dmp * M_P
    out[1] = v_sC * Bn / (K_AC ** n_h + Bn) - _mm(v_mC, M_C, K_mC) - k_dmc * M_C
    out[2] = (
        v_sB * K_IB ** m_h / (K_IB ** m_h + Bm)
        - _mm(v_mB, M_B, K_mB)
        - k_dmb * M_B
        + u
    )
    out[3] = (
        k_sP * M_P
        - _mm(V_1P, P_C, K_p)
        + _mm(V_2P, P_CP, K_dp)
        + k4 * PC_C
        - k3 * P_C * C_C
        - k_dn * P_C
    )
    out[4] = (
        k_sC * M_C
        - _mm(V_1C, C_C, K_p)
        + _mm(V_2C, C_CP, K_dp)
        + k4 * PC_C
        - k3 * P_C * C_C
        - k_dnc * C_C
    )
    out[5] = (
        _mm(V_1P, P_C, K_p)
        - _mm(V_2P, P_CP, K_dp)
        - _mm(v_dPC, P_CP, K_d)
        - k_dn * P_CP
    )
    out[6] = (
        _mm(V_1C, C_C, K_p)
        - _mm(V_2C, C_CP, K_dp)
        - _mm(v_dCC, C_CP, K_d)
        - k_dn * C_CP
    )
    out[7] = (
        -_mm(V_1PC, PC_C, K_p)
        + _mm(V_2PC, PC_CP, K_dp)
        - k4 * PC_C
        + k3 * P_C * C_C
        + k2 * PC_N
        - k1 * PC_C
        - k_dn * PC_C
    )
    out[8] = (
        -_mm(V_3PC, PC_N, K_p)
        + _mm(V_4PC, PC_NP, K_dp)
        - k2 * PC_N
        + k1 * PC_C
        - k7 * B_N * PC_N
        + k8 * I_N
        - k_dn * PC_N
    )
    out[9] = (
        _mm(V_1PC, PC_C, K_p)
        - _mm(V_2PC, PC_CP, K_dp)
        - _mm(v_dPCC, PC_CP, K_d)
        - k_dn * PC_CP
    )
    out[10] = (
        -_mm(V_3PC, PC_N, K_p)
        - _mm(V_4PC, PC_NP, K_dp)
        - _mm(v_dPCN, PC_NP, K_d)
        - k_dn * PC_NP
    )
    out[11] = (
        k_sB * M_B
        - _mm(V_1B, B_C, K_p)
        + _mm(V_2B, B_CP, K_dp)
        - k5 * B_C
        + k6 * B_N
        - k_dn * B_C
    )
    out[12] = (
        _mm(V_1B, B_C, K_p)
        - _mm(V_2B, B_CP, K_dp)
        - _mm(v_dBC, B_CP, K_d)
        - k_dn * B_CP
    )
    out[13] = (
        -_mm(V_3B, B_N, K_p)
        + _mm(V_4B, B_NP, K_dp)
        + k5 * B_C
        - k6 * B_N
        - k7 * B_N * PC_N
        + k8 * I_N
        - k_dn * B_N
    )
    out[14] = (
        _mm(V_3B, B_N, K_p)
        - _mm(V_4B, B_NP, K_dp)
        - _mm(v_dBN, B_NP, K_d)
        - k_dn * B_NP
    )
    out[15] = -k8 * I_N + k7 * B_N * PC_N - _mm(v_dIN, I_N, K_d) - k_dn * I_N
    return out


@maybe_njit(cache=True)
def circadian_jac(t, x, p):
    (k1, k2, k3, k4, k5, k6, k7, k8) = p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7]
    K_AP, K_AC, K_IB = p[8], p[9], p[10]
    k_dmb, k_dmc, k_dmp, k_dn, k_dnc = p[11], p[12], p[13], p[14], p[15]
    K_d, K_dp, K_p, K_mB, K_mC, K_mP = p[16], p[17], p[18], p[19], p[20], p[21]
    k_sB, k_sC, k_sP = p[22], p[23], p[24]
    m_h, n_h = p[25], p[26]
    V_1B, V_1C, V_1P, V_1PC = p[27], p[28], p[29], p[30]
    V_2B, V_2C, V_2P, V_2PC = p[31], p[32], p[33], p[34]
    V_3B, V_3PC, V_4B, V_4PC = p[35], p[36], p[37], p[38]
    v_dBC, v_dBN, v_dCC, v_dIN = p[39], p[40], p[41], p[42]
    v_dPC, v_dPCC, v_dPCN = p[43], p[44], p[45]
    v_mB, v_mC, v_mP = p[46], p[47], p[48]
    v_sB, v_sC, v_sP = p[49], p[50], p[51]

    M_P, M_C, M_B = x[0], x[1], x[2]
    P_C, C_C, P_CP, C_CP = x[3], x[4], x[5], x[6]
    PC_C, PC_N, PC_CP, PC_NP = x[7], x[8], x[9], x[10]
    B_C, B_CP, B_N, B_NP, I_N = x[11], x[12], x[13], x[14], x[15]

    J = np.zeros((16, 16))

    # Hill terms in B_N
    Bn = B_N ** n_h
    Bm = B_N ** m_h
    dact_P = v_sP * n_h * K_AP ** n_h * B_N ** (n_h - 1.0) / (K_AP ** n_h + Bn) ** 2
    dact_C = v_sC * n_h * K_AC ** n_h * B_N ** (n_h - 1.0) / (K_AC ** n_h + Bn) ** 2
    drep_B = -v_sB * K_IB ** m_h * m_h * B_N ** (m_h - 1.0) / (K_IB ** m_h + Bm) ** 2

    J[0, 0] = -_mm_d(v_mP, M_P, K_mP) - k_dmp
    J[0, 13] = dact_P
    J[1, 1] = -_mm_d(v_mC, M_C, K_mC) - k_dmc
    J[1, 13] = dact_C
    J[2, 2] = -_mm_d(v_mB, M_B, K_mB) - k_dmb
    J[2, 13] = drep_B

    J[3, 0] = k_sP
    J[3, 3] = -_mm_d(V_1P, P_C, K_p) - k3 * C_C - k_dn
    J[3, 4] = -k3 * P_C
    J[3, 5] = _mm_d(V_2P, P_CP, K_dp)
    J[3, 7] = k4

    J[4, 1] = k_sC
    J[4, 3] = -k3 * C_C
    J[4, 4] = -_mm_d(V_1C, C_C, K_p) - k3 * P_C - k_dnc
    J[4, 6] = _mm_d(V_2C, C_CP, K_dp)
    J[4, 7] = k4

    J[5, 3] = _mm_d(V_1P, P_C, K_p)
    J[5, 5] = -_mm_d(V_2P, P_CP, K_dp) - _mm_d(v_dPC, P_CP, K_d) - k_dn

    J[6, 4] = _mm_d(V_1C, C_C, K_p)
    J[6, 6] = -_mm_d(V_2C, C_CP, K_dp) - _mm_d(v_dCC, C_CP, K_d) - k_dn

    J[7, 3] = k3 * C_C
    J[7, 4] = k3 * P_C
    J[7, 7] = -_mm_d(V_1PC, PC_C, K_p) - k4 - k1 - k_dn
    J[7, 8] = k2
    J[7, 9] = _mm_d(V_2PC, PC_CP, K_dp)

    J[8, 7] = k1
    J[8, 8] = -_mm_d(V_3PC, PC_N, K_p) - k2 - k7 * B_N - k_dn
    J[8, 10] = _mm_d(V_4PC, PC_NP, K_dp)
    J[8, 13] = -k7 * PC_N
    J[8, 15] = k8

    J[9, 7] = _mm_d(V_1PC, PC_C, K_p)
    J[9, 9] = -_mm_d(V_2PC, PC_CP, K_dp) - _mm_d(v_dPCC, PC_CP, K_d) - k_dn

    J[10, 8] = -_mm_d(V_3PC, PC_N, K_p)
    J[10, 10] = -_mm_d(V_4PC, PC_NP, K_dp) - _mm_d(v_dPCN, PC_NP, K_d) - k_dn

    J[11, 2] = k_sB
    J[11, 11] = -_mm_d(V_1B, B_C, K_p) - k5 - k_dn
    J[11, 12] = _mm_d(V_2B, B_CP, K_dp)
    J[11, 13] = k6

    J[12, 11] = _mm_d(V_1B, B_C, K_p)
    J[12, 12] = -_mm_d(V_2B, B_CP, K_dp) - _mm_d(v_dBC, B_CP, K_d) - k_dn

    J[13, 8] = -k7 * B_N
    J[13, 11] = k5
    J[13, 13] = -_mm_d(V_3B, B_N, K_p) - k6 - k7 * PC_N - k_dn
    J[13, 14] = _mm_d(V_4B, B_NP, K_dp)
    J[13, 15] = k8

    J[14, 13] = _mm_d(V_3B, B_N, K_p)
    J[14, 14] = -_mm_d(V_4B, B_NP, K_dp) - _mm_d(v_dBN, B_NP, K_d) - k_dn

    J[15, 8] = k7 * B_N
    J[15, 13] = k7 * PC_N
    J[15, 15] = -k8 - _mm_d(v_dIN, I_N, K_d) - k_dn
    return J


def build_circadian(params: CircadianParams | None = None, **constant_overrides) -> DynamicalSystem:
    if params is None:
        consts = _default_constants()
        consts.update(constant_overrides)
        params = CircadianParams(constants=consts)
    elif constant_overrides:
        raise TypeError("pass either params or keyword overrides, not both")
    alpha = np.zeros(16)
    alpha[2] = 1.0
    return DynamicalSystem(
        name="circadian",
        dim=16,
        pars=params.packed(),
        rhs=circadian_rhs,
        jac=circadian_jac,
        input_coupling=alpha,
        time_unit="h",
        state_labels=STATE_LABELS,
        meta={"params": params},
    )


def circadian_start_state() -> np.ndarray:
    """Reasonable positive state for settling onto the stable orbit."""
    x = np.full(16, 1.0)
    x[2] = 8.0
    x[13] = 2.0
    return x
