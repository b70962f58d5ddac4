"""Three-valued verdicts shared by every checker in the package."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

PASS = "Pass"
FAIL = "Fail"
UNKNOWN = "Unknown"


@dataclass(frozen=True)
class Verdict:
    """Outcome of a single check: Pass, Fail(witness) or Unknown(reason)."""

    status: str
    witness: Any = None
    notes: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.status == PASS

    @staticmethod
    def passed(*notes: str) -> "Verdict":
        return Verdict(PASS, None, tuple(notes))

    @staticmethod
    def failed(witness: Any, *notes: str) -> "Verdict":
        return Verdict(FAIL, witness, tuple(notes))

    @staticmethod
    def unknown(reason: Any, *notes: str) -> "Verdict":
        return Verdict(UNKNOWN, reason, tuple(notes))

    def with_notes(self, *notes: str) -> "Verdict":
        return Verdict(self.status, self.witness, self.notes + tuple(notes))

    def to_json(self) -> dict:
        out: dict[str, Any] = {"status": self.status}
        if self.witness is not None:
            out["witness"] = _jsonable(self.witness)
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def combine(verdicts) -> Verdict:
    """All Pass -> Pass; any Fail -> Fail (first witness); else Unknown."""
    verdicts = list(verdicts)
    for v in verdicts:
        if v.status == FAIL:
            return Verdict(FAIL, v.witness, v.notes)
    for v in verdicts:
        if v.status == UNKNOWN:
            return Verdict(UNKNOWN, v.witness, v.notes)
    notes = tuple(n for v in verdicts for n in v.notes)
    return Verdict(PASS, None, notes)


# tags for ContractVerdict
EMPTY = "Empty"
DISCONNECTED = "Disconnected"
CONNECTED = "Connected"
CONTRACTIBLE = "ContractibleByWitness"
CV_UNKNOWN = "Unknown"


@dataclass(frozen=True)
class ContractVerdict:
    """Tiered contractibility verdict for a finite category.

    Empty and Disconnected are exact refutations.  ContractibleByWitness
    carries the witness (initial/terminal object or a collapse sequence).
    Connected may carry exact H1 data; a deep or looping nerve downgrades
    the homology tier to Unknown instead of ever passing silently.
    """

    tag: str
    witness: Any = None
    h1: tuple[int, tuple[int, ...]] | None = None  # (free rank, torsion)
    h1_complete: bool = False

    def is_refuted(self) -> bool:
        return self.tag in (EMPTY, DISCONNECTED)

    def is_confirmed(self) -> bool:
        """Contractibility positively established at the tier used."""
        if self.tag == CONTRACTIBLE:
            return True
        return (
            self.tag == CONNECTED
            and self.h1_complete
            and self.h1 == (0, ())
        )

    def to_json(self) -> dict:
        out: dict[str, Any] = {"tag": self.tag}
        if self.witness is not None:
            out["witness"] = _jsonable(self.witness)
        if self.h1 is not None:
            out["h1"] = {"rank": self.h1[0], "torsion": list(self.h1[1]),
                         "complete": self.h1_complete}
        return out


def _jsonable(x):
    if isinstance(x, (str, int, float, bool)) or x is None:
        return x
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in sorted(x.items(), key=lambda kv: str(kv[0]))}
    if isinstance(x, (list, tuple, set, frozenset)):
        items = [_jsonable(v) for v in x]
        if isinstance(x, (set, frozenset)):
            items = sorted(items, key=str)
        return items
    if hasattr(x, "to_json"):
        return x.to_json()
    return str(x)
