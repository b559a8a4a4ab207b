"""
Interaction-log ingestion and leave-one-out splitting.

Input files are plain text, one interaction per line:
``user item [timestamp]``, whitespace separated. Without timestamps the
input order is the chronological order. Item ids are re-indexed densely to
1..|I| by first appearance; 0 is reserved for padding.
"""

import logging
import os
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Set, Tuple

from core.exceptions import DataError

logger = logging.getLogger(__name__)

ITEM_MAP_FILE = "item_map.tsv"
MIN_SPLIT_LENGTH = 3


@dataclass
class InteractionRecord:
    user: str
    item: str
    timestamp: Optional[float]
    order: int


@dataclass
class InteractionLog:
    """
    Chronological item sequences per user with a dense item id map.

    Attributes:
        sequences: User -> internal item ids in chronological order
        item_map: Original item id -> internal id (1..|I|)
    """

    sequences: Dict[str, List[int]]
    item_map: Dict[str, int]
    _reverse: Dict[int, str] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._reverse = {internal: original for original, internal in self.item_map.items()}

    @property
    def num_items(self) -> int:
        return len(self.item_map)

    @property
    def num_users(self) -> int:
        return len(self.sequences)

    @property
    def num_interactions(self) -> int:
        return sum(len(seq) for seq in self.sequences.values())

    def encode(self, original: str) -> int:
        if original not in self.item_map:
            raise DataError(f"Item '{original}' not found in item map")
        return self.item_map[original]

    def decode(self, internal: int) -> str:
        if internal not in self._reverse:
            raise DataError(f"Internal item id {internal} not found in item map")
        return self._reverse[internal]


@dataclass
class SplitDataset:
    """
    Leave-one-out split: per user a training sequence, a validation item and
    a test item.
    """

    users: List[str]
    train: Dict[str, List[int]]
    valid: Dict[str, int]
    test: Dict[str, int]
    num_items: int

    def history(self, user: str) -> Set[int]:
        """Every item the user interacted with."""
        return set(self.train[user]) | {self.valid[user], self.test[user]}

    def num_train_items(self) -> int:
        return sum(len(self.train[user]) for user in self.users)

    def with_train(self, train: Dict[str, List[int]]) -> "SplitDataset":
        return SplitDataset(list(self.users), train, dict(self.valid), dict(self.test), self.num_items)


def parse_interactions(lines: Iterable[str], source: str = "<input>") -> List[InteractionRecord]:
    """
    Parse ``user item [timestamp]`` lines.

    Blank lines are skipped. All non-blank lines must have the same arity.

    Args:
        lines: Input lines
        source: Name used in error messages

    Returns:
        Parsed records in input order

    Raises:
        DataError: Naming the line number of the first malformed line, or
            when there is no interaction at all
    """
    records: List[InteractionRecord] = []
    arity: Optional[int] = None
    for line_number, line in enumerate(lines, start=1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) not in (2, 3):
            raise DataError(f"{source}:{line_number}: expected 'user item [timestamp]', got {len(parts)} fields")
        if arity is None:
            arity = len(parts)
        elif len(parts) != arity:
            raise DataError(f"{source}:{line_number}: mixed lines with and without timestamps")
        timestamp = None
        if len(parts) == 3:
            try:
                timestamp = float(parts[2])
            except ValueError:
                raise DataError(f"{source}:{line_number}: timestamp '{parts[2]}' is not a number")
        records.append(InteractionRecord(parts[0], parts[1], timestamp, len(records)))
    if not records:
        raise DataError(f"{source}: no interactions found")
    return records


def build_log(records: List[InteractionRecord]) -> InteractionLog:
    """
    Group records per user, order them chronologically and re-index items.

    Ties on timestamp keep input order. Repeated interactions are kept.
    """
    item_map: Dict[str, int] = {}
    for record in records:
        if record.item not in item_map:
            item_map[record.item] = len(item_map) + 1

    grouped: Dict[str, List[InteractionRecord]] = {}
    for record in records:
        grouped.setdefault(record.user, []).append(record)

    sequences: Dict[str, List[int]] = {}
    for user, user_records in grouped.items():
        ordered = sorted(user_records, key=lambda r: ((r.timestamp or 0.0), r.order))
        sequences[user] = [item_map[r.item] for r in ordered]
    return InteractionLog(sequences=sequences, item_map=item_map)


def write_item_map(log: InteractionLog, path: str) -> str:
    """Write the ``original<TAB>internal`` id map, one item per line."""
    with open(path, "w") as handle:
        for original, internal in sorted(log.item_map.items(), key=lambda kv: kv[1]):
            handle.write(f"{original}\t{internal}\n")
    return path


def load_interactions(path: str, map_path: Optional[str] = None) -> InteractionLog:
    """
    Load and re-index an interaction file.

    Args:
        path: Dataset file
        map_path: Where to write the id map; defaults to item_map.tsv next to
            the dataset. Pass an empty string to skip writing it.

    Returns:
        InteractionLog

    Raises:
        DataError: If the file is missing, empty or malformed
    """
    if not os.path.isfile(path):
        raise DataError(f"Dataset file not found: {path}")
    with open(path) as handle:
        records = parse_interactions(handle, source=path)
    log = build_log(records)
    if map_path is None:
        map_path = os.path.join(os.path.dirname(os.path.abspath(path)), ITEM_MAP_FILE)
    if map_path:
        try:
            write_item_map(log, map_path)
        except OSError as e:
            logger.warning(f"Could not write item map to {map_path}: {str(e)}")
    logger.info(f"Loaded {log.num_interactions} interactions, {log.num_users} users, {log.num_items} items from {path}")
    return log


def write_interactions(log: InteractionLog, path: str) -> str:
    """Write a log back out as ``user item timestamp`` lines (timestamp = position)."""
    with open(path, "w") as handle:
        for user, sequence in log.sequences.items():
            for position, item in enumerate(sequence):
                handle.write(f"{user} {log.decode(item)} {position}\n")
    return path


def filter_interactions(log: InteractionLog, min_user: int = 0, min_item: int = 0) -> InteractionLog:
    """
    Drop interactions of rare users and items in a single pass.

    Counts are taken on the unfiltered log; an interaction is kept when its
    user has at least min_user interactions and its item at least min_item.
    Items are re-indexed by first appearance in the filtered log.

    Args:
        log: Input log
        min_user: Minimum interactions per user
        min_item: Minimum interactions per item

    Returns:
        Filtered, re-indexed log
    """
    item_counts: Dict[int, int] = {}
    for sequence in log.sequences.values():
        for item in sequence:
            item_counts[item] = item_counts.get(item, 0) + 1

    kept: Dict[str, List[int]] = {}
    for user, sequence in log.sequences.items():
        if len(sequence) < min_user:
            continue
        items = [item for item in sequence if item_counts[item] >= min_item]
        if items:
            kept[user] = items

    item_map: Dict[str, int] = {}
    remap: Dict[int, int] = {}
    for sequence in kept.values():
        for item in sequence:
            if item not in remap:
                remap[item] = len(remap) + 1
                item_map[log.decode(item)] = remap[item]
    sequences = {user: [remap[item] for item in sequence] for user, sequence in kept.items()}
    filtered = InteractionLog(sequences=sequences, item_map=item_map)
    logger.info(f"Filtered to {filtered.num_users} users and {filtered.num_items} items (min_user={min_user}, min_item={min_item})")
    return filtered


def split_leave_one_out(log: InteractionLog) -> SplitDataset:
    """
    Last item for test, second-to-last for validation, the rest for training.

    Users with fewer than three interactions are dropped.
    """
    users, train, valid, test = [], {}, {}, {}
    dropped = 0
    for user, sequence in log.sequences.items():
        if len(sequence) < MIN_SPLIT_LENGTH:
            dropped += 1
            continue
        users.append(user)
        train[user] = list(sequence[:-2])
        valid[user] = sequence[-2]
        test[user] = sequence[-1]
    if dropped:
        logger.info(f"Dropped {dropped} users with fewer than {MIN_SPLIT_LENGTH} interactions")
    return SplitDataset(users=users, train=train, valid=valid, test=test, num_items=log.num_items)


def pad_truncate(sequence: List[int], n: int) -> List[int]:
    """Keep the most recent n items, left-padding with 0."""
    if n < 1:
        raise DataError(f"Sequence length must be >= 1, got {n}")
    recent = list(sequence[-n:]) if sequence else []
    return [0] * (n - len(recent)) + recent


def slot_of_position(position: int, length: int, n: int) -> Optional[int]:
    """
    Column of item ``position`` of a length-``length`` sequence after
    pad_truncate to n, or None when it was truncated away.
    """
    slot = n - length + position
    return slot if 0 <= slot < n else None


def user_sequences(split: SplitDataset, users: List[str], n: int, stage: str) -> Tuple[List[List[int]], List[int]]:
    """
    Model inputs and ground truths for validation or test.

    Validation feeds the training sequence and targets the validation item;
    test additionally appends the validation item to the input.
    """
    inputs, truths = [], []
    for user in users:
        if stage == "valid":
            inputs.append(pad_truncate(split.train[user], n))
            truths.append(split.valid[user])
        elif stage == "test":
            inputs.append(pad_truncate(split.train[user] + [split.valid[user]], n))
            truths.append(split.test[user])
        else:
            raise DataError(f"Unknown split '{stage}', expected 'valid' or 'test'")
    return inputs, truths
