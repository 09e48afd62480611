"""Implicit-feedback interaction datasets.

Loads rating triples, binarizes them, filters sparse users/items to a
fixed point and produces a timestamp-based leave-one-out split. Datasets
are immutable after construction and stored CSR-style (``indptr`` +
per-user sorted item arrays) so they can be shared across workers and
snapshotted to a compact binary file (layout documented in the README).
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

SNAPSHOT_MAGIC = b"CDSNAP01"
SPLIT_MAGIC = b"CDSPLT01"


class DatasetError(Exception):
    """Base class for dataset construction errors."""


class DatasetFormatError(DatasetError):
    """Malformed input line or corrupt snapshot."""


class EmptyDatasetError(DatasetError):
    """No interactions remain."""


@dataclass
class InteractionDataset:
    """Binary user-item feedback with timestamps, densely indexed.

    ``indptr[u]:indptr[u+1]`` slices ``items``/``times`` to user u's
    positives; ``items`` is sorted ascending within each user. Presence of
    a pair means r_ui = 1; every absent pair is unrated.
    """

    num_users: int
    num_items: int
    indptr: np.ndarray      # int64, shape (num_users + 1,)
    items: np.ndarray       # int64, shape (nnz,)
    times: np.ndarray       # int64, shape (nnz,), aligned with items
    user_ids: list = field(repr=False)   # dense index -> raw user id (str)
    item_ids: list = field(repr=False)   # dense index -> raw item id (str)

    @property
    def num_interactions(self):
        return int(self.items.shape[0])

    def user_items(self, u):
        """Sorted positive item indices of user u."""
        return self.items[self.indptr[u]:self.indptr[u + 1]]

    def user_times(self, u):
        """Timestamps aligned with :meth:`user_items`."""
        return self.times[self.indptr[u]:self.indptr[u + 1]]

    def user_degree(self, u):
        return int(self.indptr[u + 1] - self.indptr[u])

    def unrated_items(self, u):
        """All items without positive feedback from u (never cached)."""
        mask = np.ones(self.num_items, dtype=bool)
        mask[self.user_items(u)] = False
        return np.flatnonzero(mask).astype(np.int64)

    def positives_mask(self, u):
        mask = np.zeros(self.num_items, dtype=bool)
        mask[self.user_items(u)] = True
        return mask

    def fingerprint(self):
        """Hex digest identifying the interaction structure."""
        h = hashlib.sha256()
        h.update(struct.pack("<qq", self.num_users, self.num_items))
        h.update(self.indptr.tobytes())
        h.update(self.items.tobytes())
        h.update(self.times.tobytes())
        return h.hexdigest()

    # --- snapshot io ---

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(SNAPSHOT_MAGIC)
            _write_body(fh, self)

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            magic = fh.read(8)
            if magic != SNAPSHOT_MAGIC:
                raise DatasetFormatError(f"{path}: not a dataset snapshot (magic {magic!r})")
            return _read_body(fh)


@dataclass
class SplitDataset:
    """Leave-one-out split: training data plus one held-out item per user."""

    train: InteractionDataset
    test_items: np.ndarray   # int64, shape (num_users,)
    test_times: np.ndarray   # int64, shape (num_users,)

    @property
    def num_users(self):
        return self.train.num_users

    @property
    def num_items(self):
        return self.train.num_items

    def fingerprint(self):
        h = hashlib.sha256()
        h.update(bytes.fromhex(self.train.fingerprint()))
        h.update(self.test_items.tobytes())
        return h.hexdigest()

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(SPLIT_MAGIC)
            _write_body(fh, self.train)
            fh.write(self.test_items.astype("<i8").tobytes())
            fh.write(self.test_times.astype("<i8").tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            magic = fh.read(8)
            if magic != SPLIT_MAGIC:
                raise DatasetFormatError(f"{path}: not a split snapshot (magic {magic!r})")
            train = _read_body(fh)
            m = train.num_users
            test_items = np.frombuffer(fh.read(8 * m), dtype="<i8").astype(np.int64)
            test_times = np.frombuffer(fh.read(8 * m), dtype="<i8").astype(np.int64)
        return cls(train=train, test_items=test_items, test_times=test_times)


def _write_body(fh, ds):
    fh.write(struct.pack("<qqq", ds.num_users, ds.num_items, ds.num_interactions))
    fh.write(ds.indptr.astype("<i8").tobytes())
    fh.write(ds.items.astype("<i8").tobytes())
    fh.write(ds.times.astype("<i8").tobytes())
    for table in (ds.user_ids, ds.item_ids):
        for raw in table:
            enc = str(raw).encode("utf-8")
            fh.write(struct.pack("<H", len(enc)))
            fh.write(enc)


def _read_body(fh):
    m, n, nnz = struct.unpack("<qqq", fh.read(24))
    indptr = np.frombuffer(fh.read(8 * (m + 1)), dtype="<i8").astype(np.int64)
    items = np.frombuffer(fh.read(8 * nnz), dtype="<i8").astype(np.int64)
    times = np.frombuffer(fh.read(8 * nnz), dtype="<i8").astype(np.int64)
    user_ids = [_read_str(fh) for _ in range(m)]
    item_ids = [_read_str(fh) for _ in range(n)]
    return InteractionDataset(num_users=m, num_items=n, indptr=indptr,
                              items=items, times=times,
                              user_ids=user_ids, item_ids=item_ids)


def _read_str(fh):
    (length,) = struct.unpack("<H", fh.read(2))
    return fh.read(length).decode("utf-8")


def _build(pairs, user_ids, item_ids):
    """CSR-ify {(u, i): t} with per-user ascending item order."""
    if not pairs:
        raise EmptyDatasetError("dataset has no interactions")
    m, n = len(user_ids), len(item_ids)
    users = np.fromiter((u for u, _ in pairs), dtype=np.int64, count=len(pairs))
    its = np.fromiter((i for _, i in pairs), dtype=np.int64, count=len(pairs))
    ts = np.fromiter(pairs.values(), dtype=np.int64, count=len(pairs))
    order = np.lexsort((its, users))
    users, its, ts = users[order], its[order], ts[order]
    indptr = np.zeros(m + 1, dtype=np.int64)
    np.add.at(indptr, users + 1, 1)
    np.cumsum(indptr, out=indptr)
    return InteractionDataset(num_users=m, num_items=n, indptr=indptr,
                              items=its, times=ts,
                              user_ids=list(user_ids), item_ids=list(item_ids))


def load_dataset(path, fmt=None):
    """Parse delimiter-separated triples into a dense binarized dataset.

    Lines are ``user<sep>item[<sep>rating]<sep>timestamp``; any rating is
    binarized to 1. Duplicate (user, item) pairs collapse to the one with
    the largest timestamp. ``fmt`` is ``"triples-tsv"`` or ``"triples-csv"``;
    by default it is inferred from the file extension (.csv -> comma,
    anything else -> whitespace/tab).
    """
    if fmt is None:
        fmt = "triples-csv" if str(path).lower().endswith(".csv") else "triples-tsv"
    if fmt not in ("triples-tsv", "triples-csv"):
        raise ValueError(f"unknown format {fmt!r}")
    sep = "," if fmt == "triples-csv" else None   # None -> any whitespace

    user_index, item_index = {}, {}
    pairs = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = [f.strip() for f in line.split(sep)]
            if len(fields) == 3:
                raw_u, raw_i, raw_t = fields
            elif len(fields) == 4:
                raw_u, raw_i, _rating, raw_t = fields
            else:
                raise DatasetFormatError(
                    f"{path}:{lineno}: expected 3 or 4 fields, got {len(fields)}")
            try:
                t = int(float(raw_t))
            except ValueError as exc:
                raise DatasetFormatError(
                    f"{path}:{lineno}: bad timestamp {raw_t!r}") from exc
            u = user_index.setdefault(raw_u, len(user_index))
            i = item_index.setdefault(raw_i, len(item_index))
            prev = pairs.get((u, i))
            if prev is None or t > prev:
                pairs[(u, i)] = t
    if not pairs:
        raise EmptyDatasetError(f"{path}: no interactions")
    return _build(pairs, list(user_index), list(item_index))


def filter_dataset(ds, min_user=10, min_item=5):
    """Drop users/items below the interaction thresholds, to a fixed point.

    Removing an item can push a user below threshold and vice versa, so
    filtering alternates until stable; surviving indices are re-densified
    preserving relative order.
    """
    if min_user < 1 or min_item < 1:
        raise ValueError("thresholds must be >= 1")
    keep_u = np.ones(ds.num_users, dtype=bool)
    keep_i = np.ones(ds.num_items, dtype=bool)
    users = np.repeat(np.arange(ds.num_users, dtype=np.int64), np.diff(ds.indptr))
    while True:
        alive = keep_u[users] & keep_i[ds.items]
        u_deg = np.bincount(users[alive], minlength=ds.num_users)
        i_deg = np.bincount(ds.items[alive], minlength=ds.num_items)
        new_u = keep_u & (u_deg >= min_user)
        new_i = keep_i & (i_deg >= min_item)
        if np.array_equal(new_u, keep_u) and np.array_equal(new_i, keep_i):
            break
        keep_u, keep_i = new_u, new_i
    if not keep_u.any() or not keep_i.any():
        raise EmptyDatasetError("filtering removed every user/item")

    u_map = np.cumsum(keep_u) - 1
    i_map = np.cumsum(keep_i) - 1
    alive = keep_u[users] & keep_i[ds.items]
    pairs = {}
    for u, i, t in zip(u_map[users[alive]], i_map[ds.items[alive]], ds.times[alive]):
        pairs[(int(u), int(i))] = int(t)
    user_ids = [ds.user_ids[k] for k in np.flatnonzero(keep_u)]
    item_ids = [ds.item_ids[k] for k in np.flatnonzero(keep_i)]
    return _build(pairs, user_ids, item_ids)


def leave_one_out_split(ds):
    """Hold out each user's latest interaction as the single test item.

    Ties on the maximum timestamp go to the largest item index. Training
    data keeps the original dense index space (items may lose all raters).
    """
    m = ds.num_users
    test_items = np.empty(m, dtype=np.int64)
    test_times = np.empty(m, dtype=np.int64)
    pairs = {}
    for u in range(m):
        its, ts = ds.user_items(u), ds.user_times(u)
        if its.shape[0] < 2:
            raise DatasetError(f"user {u} has {its.shape[0]} interaction(s); need >= 2 to split")
        t_max = ts.max()
        cand = its[ts == t_max]
        held = int(cand.max())
        test_items[u] = held
        test_times[u] = int(t_max)
        for i, t in zip(its, ts):
            if int(i) != held:
                pairs[(u, int(i))] = int(t)
    train = _build(pairs, list(ds.user_ids), list(ds.item_ids))
    # item universe must stay aligned with the full dataset
    if train.num_items != ds.num_items:
        raise AssertionError("split must not re-densify items")
    return SplitDataset(train=train, test_items=test_items, test_times=test_times)
