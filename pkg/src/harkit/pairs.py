"""Pairwise-constraint sampling for the weakly supervised regimes.

Pairs are drawn with replacement from a labeled index pool; binary labels
state whether the two windows share an activity (and, for quadruples, a
subject).  Sampling is seeded and reproducible; per-epoch resampling uses
seed + epoch upstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass
class PairBatch:
    a: np.ndarray                       # indices into the source window set
    b: np.ndarray
    y_act: np.ndarray                   # 1 iff same activity
    y_pers: Optional[np.ndarray] = None  # 1 iff same subject (quadruples)
    warnings: list = field(default_factory=list)

    def __len__(self) -> int:
        return self.a.size

    def __post_init__(self):
        if np.any(self.a == self.b):
            raise ValueError("a pair may not contain the same window twice")


class PairSamplingError(ValueError):
    pass


def _class_pools(labeled_indices, labels):
    labeled_indices = np.asarray(labeled_indices, dtype=np.int64)
    labels = np.asarray(labels)
    pools = {}
    for idx in labeled_indices:
        pools.setdefault(int(labels[idx]), []).append(int(idx))
    return labeled_indices, {c: np.array(v, dtype=np.int64) for c, v in pools.items()}


def sample_pairs(labeled_indices, labels, n_pairs: int, pos_ratio: float = 0.5,
                 seed: int = 0) -> PairBatch:
    """Sample activity must-link / cannot-link pairs from the labeled pool."""
    if not 0.0 <= pos_ratio <= 1.0:
        raise ValueError(f"pos_ratio must be in [0, 1], got {pos_ratio}")
    labeled_indices, pools = _class_pools(labeled_indices, labels)
    if labeled_indices.size < 2:
        raise PairSamplingError("need at least 2 labeled windows to form pairs")
    rng = np.random.default_rng(seed)

    pos_classes = [c for c, pool in pools.items() if pool.size >= 2]
    n_pos = int(round(n_pairs * pos_ratio))
    n_neg = n_pairs - n_pos
    if n_pos > 0 and not pos_classes:
        raise PairSamplingError(
            "no activity class has two labeled windows; positive pairs are impossible")
    if n_neg > 0 and len(pools) < 2:
        raise PairSamplingError(
            "all labeled windows share one activity; negative pairs are impossible")

    a = np.empty(n_pairs, dtype=np.int64)
    b = np.empty(n_pairs, dtype=np.int64)
    y = np.zeros(n_pairs, dtype=np.int64)
    classes = sorted(pools)
    for i in range(n_pos):
        c = pos_classes[rng.integers(len(pos_classes))]
        pool = pools[c]
        ia, ib = rng.choice(pool.size, size=2, replace=False)
        a[i], b[i], y[i] = pool[ia], pool[ib], 1
    for i in range(n_pos, n_pairs):
        ca, cb = rng.choice(len(classes), size=2, replace=False)
        a[i] = rng.choice(pools[classes[ca]])
        b[i] = rng.choice(pools[classes[cb]])
    labels_arr = np.asarray(labels)
    assert np.array_equal(y, (labels_arr[a] == labels_arr[b]).astype(np.int64))
    return PairBatch(a=a, b=b, y_act=y)


def sample_quadruples(labeled_indices, activity_labels, person_labels,
                      n_pairs: int, seed: int = 0) -> PairBatch:
    """Sample pairs labeled for both activity and person similarity.

    Targets a balanced split over the four (y_act, y_pers) combinations;
    quotas of combinations with no population are reallocated to the rest,
    with a warning recorded on the batch.
    """
    labeled_indices = np.asarray(labeled_indices, dtype=np.int64)
    act = np.asarray(activity_labels)
    pers = np.asarray(person_labels)
    if labeled_indices.size < 2:
        raise PairSamplingError("need at least 2 labeled windows to form pairs")
    rng = np.random.default_rng(seed)

    # Group pool: (activity, person) -> indices.
    groups = {}
    for idx in labeled_indices:
        groups.setdefault((int(act[idx]), int(pers[idx])), []).append(int(idx))
    groups = {k: np.array(v, dtype=np.int64) for k, v in groups.items()}
    acts = sorted({k[0] for k in groups})
    persons = sorted({k[1] for k in groups})
    act_pools = {c: np.concatenate([g for k, g in groups.items() if k[0] == c])
                 for c in acts}
    pers_pools = {p: np.concatenate([g for k, g in groups.items() if k[1] == p])
                  for p in persons}

    def feasible(combo):
        same_act, same_pers = combo
        if same_act and same_pers:
            return any(g.size >= 2 for g in groups.values())
        if same_act and not same_pers:
            return any(len({k[1] for k in groups if k[0] == c}) >= 2 for c in acts)
        if not same_act and same_pers:
            return any(len({k[0] for k in groups if k[1] == p}) >= 2 for p in persons)
        return len(acts) >= 2 and len(persons) >= 2 and any(
            k1[0] != k2[0] and k1[1] != k2[1] for k1 in groups for k2 in groups)

    combos = [(1, 1), (1, 0), (0, 1), (0, 0)]
    ok = {c: feasible(c) for c in combos}
    warnings = []
    if not any(ok.values()):
        raise PairSamplingError("no (activity, person) pair combination is feasible")
    base, extra = divmod(n_pairs, 4)
    quota = {c: base + (1 if i < extra else 0) for i, c in enumerate(combos)}
    dead = [c for c in combos if quota[c] > 0 and not ok[c]]
    if dead:
        live = [c for c in combos if ok[c]]
        spill = sum(quota[c] for c in dead)
        for c in dead:
            quota[c] = 0
        warnings.append(
            f"combinations {dead} have no population; reallocated {spill} pairs")
        for i in range(spill):
            quota[live[i % len(live)]] += 1

    def draw(combo):
        same_act, same_pers = combo
        for _ in range(10000):
            if same_act and same_pers:
                pool_keys = [k for k, g in groups.items() if g.size >= 2]
                k = pool_keys[rng.integers(len(pool_keys))]
                ia, ib = rng.choice(groups[k].size, size=2, replace=False)
                return groups[k][ia], groups[k][ib]
            if same_act:
                c = acts[rng.integers(len(acts))]
                pool = act_pools[c]
                ia, ib = rng.integers(pool.size), rng.integers(pool.size)
                wa, wb = pool[ia], pool[ib]
                if wa != wb and pers[wa] != pers[wb]:
                    return wa, wb
            elif same_pers:
                p = persons[rng.integers(len(persons))]
                pool = pers_pools[p]
                ia, ib = rng.integers(pool.size), rng.integers(pool.size)
                wa, wb = pool[ia], pool[ib]
                if wa != wb and act[wa] != act[wb]:
                    return wa, wb
            else:
                wa = labeled_indices[rng.integers(labeled_indices.size)]
                wb = labeled_indices[rng.integers(labeled_indices.size)]
                if wa != wb and act[wa] != act[wb] and pers[wa] != pers[wb]:
                    return wa, wb
        raise PairSamplingError(f"could not draw a {combo} pair")

    a, b, ya, yp = [], [], [], []
    for combo in combos:
        for _ in range(quota[combo]):
            wa, wb = draw(combo)
            a.append(wa)
            b.append(wb)
            ya.append(combo[0])
            yp.append(combo[1])
    batch = PairBatch(a=np.array(a, dtype=np.int64), b=np.array(b, dtype=np.int64),
                      y_act=np.array(ya, dtype=np.int64),
                      y_pers=np.array(yp, dtype=np.int64), warnings=warnings)
    assert np.array_equal(batch.y_act, (act[batch.a] == act[batch.b]).astype(np.int64))
    assert np.array_equal(batch.y_pers, (pers[batch.a] == pers[batch.b]).astype(np.int64))
    return batch


def export_pairs_csv(batch: PairBatch, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        cols = "index_a,index_b,y_act" + (",y_pers" if batch.y_pers is not None else "")
        f.write(cols + "\n")
        for i in range(len(batch)):
            row = f"{batch.a[i]},{batch.b[i]},{batch.y_act[i]}"
            if batch.y_pers is not None:
                row += f",{batch.y_pers[i]}"
            f.write(row + "\n")
