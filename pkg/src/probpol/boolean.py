"""Propositional engine over signal atoms.

Satisfiability is decided by exhaustive enumeration of all ``2**n``
assignments (vectorized with numpy), filtered by at-most-one constraints
that softmax-exclusive groups contribute.  ``n`` is capped at
:data:`MAX_ATOMS`; larger universes raise :class:`UniverseOverflow`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .nodes import And, Atom, Condition, Not, Or, Program, atoms

MAX_ATOMS = 24

AtomKey = tuple[str, str]


class UniverseOverflow(Exception):
    """Too many atoms to enumerate; the analysis is incomplete, not passed."""

    def __init__(self, count: int):
        super().__init__(f"{count} atoms exceed the enumeration bound of {MAX_ATOMS}")
        self.count = count


@dataclass(frozen=True)
class AtomUniverse:
    atoms: tuple[AtomKey, ...]
    exclusive: tuple[frozenset[int], ...] = field(default=())

    def __post_init__(self) -> None:
        if len(set(self.atoms)) != len(self.atoms):
            raise ValueError("atoms must be distinct")
        for group in self.exclusive:
            if len(group) < 2:
                raise ValueError("exclusivity sets need at least two atoms")
            if not all(0 <= i < len(self.atoms) for i in group):
                raise ValueError("exclusivity index out of range")

    def index(self, key: AtomKey) -> int:
        return self.atoms.index(key)

    def with_exclusive(self, *sets: Iterable[int]) -> AtomUniverse:
        extra = tuple(frozenset(s) for s in sets if len(frozenset(s)) >= 2)
        return AtomUniverse(self.atoms, self.exclusive + extra)


def build_universe(conditions: Iterable[Condition],
                   exclusive_names: Iterable[Iterable[str]] = ()) -> AtomUniverse:
    """Universe over the atoms of ``conditions``.

    ``exclusive_names`` are sets of signal names of which at most one is
    active; each becomes an index set over the atoms it touches.
    """
    keys: list[AtomKey] = []
    for cond in conditions:
        for a in atoms(cond):
            if a.key not in keys:
                keys.append(a.key)
    ex: list[frozenset[int]] = []
    for names in exclusive_names:
        names = set(names)
        idx = frozenset(i for i, (_, n) in enumerate(keys) if n in names)
        if len(idx) >= 2 and idx not in ex:
            ex.append(idx)
    return AtomUniverse(tuple(keys), tuple(ex))


def program_universe(program: Program, conditions: Iterable[Condition],
                     extra: Iterable[Iterable[str]] = ()) -> AtomUniverse:
    sets = [g.exclusive_names for g in program.groups] + [list(e) for e in extra]
    return build_universe(conditions, sets)


def _columns(universe: AtomUniverse) -> tuple[dict[AtomKey, np.ndarray], np.ndarray]:
    n = len(universe.atoms)
    if n > MAX_ATOMS:
        raise UniverseOverflow(n)
    rows = np.arange(1 << n, dtype=np.uint32)
    cols = {key: ((rows >> i) & 1).astype(bool) for i, key in enumerate(universe.atoms)}
    feasible = np.ones(rows.shape, dtype=bool)
    for group in universe.exclusive:
        count = np.zeros(rows.shape, dtype=np.uint8)
        for i in group:
            count += cols[universe.atoms[i]]
        feasible &= count <= 1
    return cols, feasible


def evaluate(cond: Condition, cols: dict[AtomKey, np.ndarray]) -> np.ndarray:
    if isinstance(cond, Atom):
        return cols[cond.key]
    if isinstance(cond, Not):
        return ~evaluate(cond.operand, cols)
    if isinstance(cond, And):
        return evaluate(cond.left, cols) & evaluate(cond.right, cols)
    if isinstance(cond, Or):
        return evaluate(cond.left, cols) | evaluate(cond.right, cols)
    raise TypeError(f"not a condition: {cond!r}")


def _check_atoms(cond: Condition, universe: AtomUniverse) -> None:
    missing = {a.key for a in atoms(cond)} - set(universe.atoms)
    if missing:
        raise ValueError(f"atoms not in universe: {sorted(missing)}")


def witness(cond: Condition, universe: AtomUniverse) -> dict[AtomKey, bool] | None:
    """A feasible satisfying assignment, or None when unsatisfiable."""
    _check_atoms(cond, universe)
    cols, feasible = _columns(universe)
    hits = np.flatnonzero(evaluate(cond, cols) & feasible)
    if hits.size == 0:
        return None
    row = int(hits[0])
    return {key: bool((row >> i) & 1) for i, key in enumerate(universe.atoms)}


def satisfiable(cond: Condition, universe: AtomUniverse) -> bool:
    _check_atoms(cond, universe)
    cols, feasible = _columns(universe)
    return bool(np.any(evaluate(cond, cols) & feasible))


def count_models(cond: Condition, universe: AtomUniverse) -> int:
    _check_atoms(cond, universe)
    cols, feasible = _columns(universe)
    return int(np.count_nonzero(evaluate(cond, cols) & feasible))


def implies(lo: Condition, hi: Condition, universe: AtomUniverse) -> bool:
    return not satisfiable(And(lo, Not(hi)), universe)


def equivalent_cond(x: Condition, y: Condition, universe: AtomUniverse) -> bool:
    return implies(x, y, universe) and implies(y, x, universe)
