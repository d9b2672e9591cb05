"""Senate rollcall votes to per-state graph signals.

Vote codes follow the usual rollcall encoding: 1-3 are Yea variants, 4-6 are
Nay variants, anything else (present, abstain, absent, not in office) is 0.
A state's value for a rollcall is the sum of its senators' vote values over
the two Senate seats, so one Yea and one absence gives 0.5.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .errors import DataError

log = logging.getLogger(__name__)

STATES = (
    "AK AL AR AZ CA CO CT DE FL GA HI IA ID IL IN KS KY LA MA MD ME MI MN MO MS "
    "MT NC ND NE NH NJ NM NV NY OH OK OR PA RI SC SD TN TX UT VA VT WA WI WV WY"
).split()
SEATS = 2
YEA = {1, 2, 3}
NAY = {4, 5, 6}

_ALIASES = {
    "member_id": ("member_id", "icpsr"),
    "state_code": ("state_code", "state_abbrev", "state"),
    "chamber": ("chamber",),
    "cast_code": ("cast_code", "vote"),
    "rollcall_id": ("rollcall_id",),
}


@dataclass(frozen=True)
class RollcallSignalSet:
    states: tuple
    rollcalls: tuple
    signals: np.ndarray  # m x n, entries in [-1, 1]

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def m(self) -> int:
        return len(self.rollcalls)


def vote_value(code) -> int:
    try:
        c = int(float(code))
    except (TypeError, ValueError):
        return 0
    return 1 if c in YEA else (-1 if c in NAY else 0)


def _column(header, key, path):
    for name in _ALIASES[key]:
        if name in header:
            return name
    raise DataError(f"{path}: missing column {key!r} (accepted: {', '.join(_ALIASES[key])})")


def _rollcall_key(row, header):
    if "rollcall_id" in header:
        return row["rollcall_id"]
    if "rollnumber" in header:
        return (int(row.get("congress") or 0), int(row["rollnumber"]))
    raise DataError("votes file needs a rollcall_id column or congress/rollnumber columns")


def _is_senate(value):
    return str(value).strip().lower() in ("senate", "s")


def ingest_rollcalls(votes_file, members_file) -> RollcallSignalSet:
    with open(members_file, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        mid, st, ch = (_column(header, k, members_file) for k in ("member_id", "state_code", "chamber"))
        member_state = {}
        for row in reader:
            if not _is_senate(row[ch]):
                continue
            code = row[st].strip().upper()
            if code not in STATES:
                raise DataError(f"{members_file}: unknown state code {code!r}")
            member_state[row[mid].strip()] = code

    sums = {}
    order = []
    with open(votes_file, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        mid = _column(header, "member_id", votes_file)
        cc = _column(header, "cast_code", votes_file)
        ch = "chamber" if "chamber" in header else None
        for row in reader:
            if ch is not None and not _is_senate(row[ch]):
                continue
            state = member_state.get(row[mid].strip())
            if state is None:
                continue
            key = _rollcall_key(row, header)
            if key not in sums:
                sums[key] = {}
                order.append(key)
            sums[key][state] = sums[key].get(state, 0) + vote_value(row[cc])

    present = sorted(set(member_state.values()))
    missing = [s for s in STATES if s not in present]
    if missing:
        log.warning("no senators found for %s; dropping them", ", ".join(missing))
    if not present:
        raise DataError("no Senate members matched the votes file")
    if not order:
        raise DataError("no Senate rollcalls found")
    keys = sorted(order, key=lambda k: (isinstance(k, str), k))
    idx = {s: i for i, s in enumerate(present)}
    Y = np.zeros((len(keys), len(present)))
    for r, key in enumerate(keys):
        for state, total in sums[key].items():
            Y[r, idx[state]] = total / SEATS
    np.clip(Y, -1.0, 1.0, out=Y)
    return RollcallSignalSet(tuple(present), tuple(keys), Y)
