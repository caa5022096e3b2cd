"""Feature-evolvable stream synthesis.

The dataset's own columns form the previous space; the current space is a
random Gaussian image of them. Old features vanish during the overlap under
a nested schedule drawn by :func:`make_script`.
"""
from __future__ import annotations

import math
from typing import List, Optional, Union

import numpy as np

from pufe.core.exceptions import ContractViolationError
from pufe.core.logging import get_logger
from pufe.models.completion import ObservedRow
from pufe.models.stream import EvolutionScript, OverlapSetting, PhasedInstance, VanishSchedule
from pufe.services.linalg import as_matrix, as_vector

logger = get_logger(__name__)

# Independent RNG streams derived from the script seed
_PERMUTATION_STREAM = 0
_MAP_STREAM = 1
_NOISE_STREAM = 2


def draw_gaussian_map(d1: int, d2: int, seed: int) -> np.ndarray:
    """G (d1×d2) with i.i.d. N(0, 1) entries scaled by 1/sqrt(d1)."""
    if d1 < 1 or d2 < 1:
        raise ContractViolationError(f"map dimensions must be >= 1, got {d1}x{d2}")
    rng = np.random.default_rng([seed, _MAP_STREAM])
    return rng.standard_normal((d1, d2)) / math.sqrt(d1)


def gaussian_map(x, G) -> np.ndarray:
    G = as_matrix(G, "G")
    x = as_vector(x, "x", dim=G.shape[0])
    return G.T @ x


def _linear_counts(d1: int, b: int, s_floor: int) -> np.ndarray:
    if b == 1:
        return np.array([s_floor])
    steps = np.arange(b) / (b - 1)
    return np.rint(d1 - (d1 - s_floor) * steps).astype(np.int64)


def make_script(
    d1: int,
    b: int,
    T1: int,
    T2: int,
    s_floor: int,
    seed: int,
    d2: Optional[int] = None,
    schedule: Union[VanishSchedule, str] = VanishSchedule.LINEAR,
) -> EvolutionScript:
    """Draw which old features vanish at which overlap round.

    LINEAR: surviving count falls from d1 at the first overlap round to
    ``s_floor`` at the last, following a random permutation of the features.
    RANDOM_LIFETIME: ``s_floor`` random features survive; every other feature
    gets an i.i.d. uniform vanish round over the overlap.
    """
    if not 1 <= s_floor <= d1:
        raise ContractViolationError(f"s_floor must lie in [1, {d1}], got {s_floor}")
    if not 1 <= b <= T1:
        raise ContractViolationError(f"b must lie in [1, T1 = {T1}], got {b}")
    schedule = VanishSchedule(schedule)
    rng = np.random.default_rng([seed, _PERMUTATION_STREAM])
    order = rng.permutation(d1)
    first, survive = T1 - b + 1, T1 + 1
    vanish = np.full(d1, survive, dtype=np.int64)

    if schedule is VanishSchedule.LINEAR:
        counts = _linear_counts(d1, b, s_floor)
        # order[k] is observed at overlap round i iff k < counts[i]
        for rank_in_order, feature in enumerate(order):
            dropped = np.flatnonzero(counts <= rank_in_order)
            if dropped.size:
                vanish[feature] = first + int(dropped[0])
    else:
        mortal = order[s_floor:]
        vanish[mortal] = rng.integers(first, survive + 1, size=mortal.size)

    script = EvolutionScript(
        T1=T1,
        b=b,
        T2=T2,
        d1=d1,
        d2=d1 if d2 is None else d2,
        vanish_round=[int(v) for v in vanish],
        seed=seed,
        s_floor=s_floor,
    )
    logger.debug("drew evolution script", schedule=schedule.value, counts=script.observed_counts())
    return script


def synthesize_stream(
    data,
    labels,
    script: EvolutionScript,
    setting: Union[OverlapSetting, str],
    G: Optional[np.ndarray] = None,
    noise_std: float = 0.0,
) -> List[PhasedInstance]:
    """Cut the first T1 + T2 rows of ``data`` into the phased stream.

    Old rows are masked by the script in the overlap unless the setting is
    complete; IC tags overlap rows for completion. ``G`` defaults to the
    seeded Gaussian map of the script.
    """
    data = as_matrix(data, "data")
    labels = as_vector(labels, "labels", dim=data.shape[0])
    setting = setting if isinstance(setting, OverlapSetting) else OverlapSetting.parse(setting)
    if data.shape[1] != script.d1:
        raise ContractViolationError(f"data has {data.shape[1]} columns, script expects {script.d1}")
    if data.shape[0] < script.horizon:
        raise ContractViolationError(f"{data.shape[0]} rows cannot fill T1 + T2 = {script.horizon} rounds")
    if noise_std < 0:
        raise ContractViolationError(f"noise_std must be nonnegative, got {noise_std}")
    G = draw_gaussian_map(script.d1, script.d2, script.seed) if G is None else as_matrix(
        G, "G", shape=(script.d1, script.d2)
    )
    noise_rng = np.random.default_rng([script.seed, _NOISE_STREAM])

    stream: List[PhasedInstance] = []
    for t in range(1, script.horizon + 1):
        row = data[t - 1]
        old = new = None
        if t <= script.T1:
            if t < script.overlap_start or setting is OverlapSetting.COMPLETE:
                old = ObservedRow.full(row)
            else:
                indices = script.observed_indices(t)
                old = ObservedRow(dim=script.d1, indices=indices, values=row[indices])
        if t >= script.overlap_start:
            new = gaussian_map(row, G)
            if noise_std > 0:
                new = new + noise_std * noise_rng.standard_normal(script.d2)
        stream.append(
            PhasedInstance(
                t=t,
                label=float(labels[t - 1]),
                old_features=old,
                new_features=new,
                completion_requested=(
                    setting is OverlapSetting.INCOMPLETE_COMPLETED and old is not None and new is not None
                ),
            )
        )
    return stream
