"""Nondeterministic Büchi automata over mutually exclusive region labels.

Word symbols are label valuations: the empty set (free space) or a
singleton region index.  Guards are kept in disjunctive normal form; a
guard is feasible iff some valuation of that shape satisfies it.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

Symbol = frozenset  # empty or singleton set of 1-based label indices
Literal = tuple[int, bool]  # (label index, positive?)


class BuchiError(Exception):
    pass


class NoFeasibleAccepting(BuchiError):
    """No accepting state is both reachable from init and self-reachable."""


class EmptySuffix(BuchiError):
    pass


class UnsupportedFeature(BuchiError):
    """HOA input uses a feature outside the supported Büchi subset."""


class HoaSyntaxError(BuchiError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class GuardSyntaxError(BuchiError):
    pass


# -- guards ----------------------------------------------------------------


def _disjunct_consistent(lits: frozenset[Literal]) -> bool:
    return not any((i, not pos) in lits for (i, pos) in lits)


@dataclass(frozen=True)
class Guard:
    """Boolean formula over labels in DNF: a set of literal-set disjuncts.

    The guard ``true`` is the single empty disjunct; an empty disjunct set
    is the unsatisfiable guard (never produced by normalization from
    satisfiable input, but representable).
    """

    disjuncts: frozenset[frozenset[Literal]]

    def __post_init__(self):
        object.__setattr__(
            self,
            "disjuncts",
            frozenset(d for d in self.disjuncts if _disjunct_consistent(d)),
        )

    @staticmethod
    def true() -> "Guard":
        return Guard(frozenset({frozenset()}))

    @staticmethod
    def literal(index: int, positive: bool = True) -> "Guard":
        return Guard(frozenset({frozenset({(index, positive)})}))

    def satisfied_by(self, symbol: Symbol) -> bool:
        for d in self.disjuncts:
            ok = True
            for (i, pos) in d:
                if (i in symbol) != pos:
                    ok = False
                    break
            if ok:
                return True
        return False

    def max_ap(self) -> int:
        return max((i for d in self.disjuncts for (i, _) in d), default=0)

    def text(self) -> str:
        if not self.disjuncts:
            return "false"
        parts = []
        for d in sorted(self.disjuncts, key=lambda d: sorted(d)):
            if not d:
                return "true"
            lits = [("" if pos else "!") + f"l{i}" for (i, pos) in sorted(d)]
            parts.append(" & ".join(lits))
        return " | ".join(parts)

    @staticmethod
    def parse(text: str) -> "Guard":
        return _parse_guard(text)


def _parse_guard(text: str) -> Guard:
    toks = re.findall(r"l\d+|pi\d+|true|false|t|f|1|0|&&|\|\||[!&|()]", text)
    if "".join(toks).replace(" ", "") != text.replace(" ", ""):
        raise GuardSyntaxError(f"cannot tokenize guard {text!r}")
    pos = [0]

    def peek():
        return toks[pos[0]] if pos[0] < len(toks) else None

    def take():
        t = peek()
        pos[0] += 1
        return t

    # DNF via recursive descent; negation pushed to literals
    def atom(neg: bool) -> frozenset[frozenset[Literal]]:
        t = take()
        if t == "(":
            d = expr_or(neg)
            if take() != ")":
                raise GuardSyntaxError(f"unbalanced parens in {text!r}")
            return d
        if t == "!":
            return atom(not neg)
        if t in ("true", "t", "1"):
            return frozenset() if neg else frozenset({frozenset()})
        if t in ("false", "f", "0"):
            return frozenset({frozenset()}) if neg else frozenset()
        if t and (t.startswith("l") or t.startswith("pi")):
            i = int(t[1:] if t.startswith("l") else t[2:])
            return frozenset({frozenset({(i, not neg)})})
        raise GuardSyntaxError(f"unexpected token {t!r} in {text!r}")

    def expr_and(neg: bool) -> frozenset[frozenset[Literal]]:
        # under negation, '&' combines with OR and '|' with AND (De Morgan)
        d = atom(neg)
        while peek() in ("&", "&&"):
            take()
            d2 = atom(neg)
            d = _dnf_or(d, d2) if neg else _dnf_and(d, d2)
        return d

    def expr_or(neg: bool) -> frozenset[frozenset[Literal]]:
        d = expr_and(neg)
        while peek() in ("|", "||"):
            take()
            d2 = expr_and(neg)
            d = _dnf_and(d, d2) if neg else _dnf_or(d, d2)
        return d

    d = expr_or(False)
    if pos[0] != len(toks):
        raise GuardSyntaxError(f"trailing tokens in {text!r}")
    return Guard(d)


def _dnf_or(a, b):
    return a | b


def _dnf_and(a, b):
    out = set()
    for da in a:
        for db in b:
            d = da | db
            if _disjunct_consistent(d):
                out.add(d)
    return frozenset(out)


def guard_sat(g: Guard, m: int) -> Optional[Symbol]:
    """A witness valuation satisfying g under mutual label exclusion, or None.

    Candidates are the empty valuation and each singleton {1..m}.
    """
    for sym in [frozenset()] + [frozenset((i,)) for i in range(1, m + 1)]:
        if g.satisfied_by(sym):
            return sym
    return None


# -- automaton -------------------------------------------------------------


@dataclass(frozen=True)
class Nba:
    """Büchi automaton with a unique initial state and DNF-guarded edges."""

    n: int
    init: int
    accepting: frozenset[int]
    edges: tuple[tuple[int, Guard, int], ...]
    n_aps: int = 0

    def __post_init__(self):
        seen = set()
        norm = []
        for (s, g, d) in self.edges:
            if not (0 <= s < self.n and 0 <= d < self.n):
                raise BuchiError(f"edge ({s},{d}) out of range")
            key = (s, g, d)
            if key not in seen:
                seen.add(key)
                norm.append(key)
        object.__setattr__(self, "edges", tuple(norm))
        object.__setattr__(self, "accepting", frozenset(self.accepting))
        aps = max((g.max_ap() for (_, g, _) in norm), default=0)
        object.__setattr__(self, "n_aps", max(self.n_aps, aps))
        if not (0 <= self.init < self.n):
            raise BuchiError("init out of range")

    @cached_property
    def out_edges(self) -> dict[int, list[tuple[Guard, int]]]:
        out: dict[int, list[tuple[Guard, int]]] = {s: [] for s in range(self.n)}
        for (s, g, d) in self.edges:
            out[s].append((g, d))
        return out

    def enabled(self, state: int, symbol: Symbol) -> list[int]:
        return [d for (g, d) in self.out_edges[state] if g.satisfied_by(symbol)]

    def has_transition(self, src: int, symbol: Symbol, dst: int) -> bool:
        return any(d == dst and g.satisfied_by(symbol) for (g, d) in self.out_edges[src])

    def symbol_matrix(self, symbol: Symbol) -> np.ndarray:
        mat = np.zeros((self.n, self.n), dtype=bool)
        for (s, g, d) in self.edges:
            if g.satisfied_by(symbol):
                mat[s, d] = True
        return mat

    def restrict_reachable(self) -> "Nba":
        """Drop states unreachable from init, renumbering compactly."""
        reach = {self.init}
        stack = [self.init]
        while stack:
            s = stack.pop()
            for (_, d) in self.out_edges[s]:
                if d not in reach:
                    reach.add(d)
                    stack.append(d)
        order = sorted(reach)
        remap = {s: i for i, s in enumerate(order)}
        return Nba(
            n=len(order),
            init=remap[self.init],
            accepting=frozenset(remap[s] for s in self.accepting if s in reach),
            edges=tuple((remap[s], g, remap[d]) for (s, g, d) in self.edges if s in reach and d in reach),
            n_aps=self.n_aps,
        )

    # -- serialization ----------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "init": self.init,
            "accepting": sorted(self.accepting),
            "edges": [[s, g.text(), d] for (s, g, d) in self.edges],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), separators=(",", ":"))

    @staticmethod
    def from_json_dict(d: dict) -> "Nba":
        return Nba(
            n=d["n"],
            init=d["init"],
            accepting=frozenset(d["accepting"]),
            edges=tuple((s, Guard.parse(g), t) for (s, g, t) in d["edges"]),
        )

    @staticmethod
    def from_json(text: str) -> "Nba":
        return Nba.from_json_dict(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.to_json())

    @staticmethod
    def load(path) -> "Nba":
        with open(path) as f:
            return Nba.from_json(f.read())


# -- HOA interchange -------------------------------------------------------
#
# Subset of HOA v1: state-based Buchi acceptance (a single Inf(0) set),
# explicit edge labels as boolean expressions over numbered APs, a single
# nonconjunctive start state.


def _hoa_label_dnf(expr: str, aps: list[int], lineno: int) -> frozenset:
    """DNF disjunct set for a HOA label expression over AP numbers."""
    tokens = re.findall(r"\d+|[!&|()tf]", expr)
    if "".join(tokens).replace("&&", "&") != expr.replace(" ", ""):
        raise HoaSyntaxError(lineno, f"bad label expression {expr!r}")
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else None

    def take(tok=None):
        nonlocal pos
        if pos >= len(tokens) or (tok is not None and tokens[pos] != tok):
            raise HoaSyntaxError(lineno, f"bad label expression {expr!r}")
        pos += 1
        return tokens[pos - 1]

    TRUE = frozenset({frozenset()})
    FALSE = frozenset()

    def atom(negated: bool) -> frozenset:
        t = peek()
        if t == "!":
            take()
            return atom(not negated)
        if t == "(":
            take()
            d = disj(negated)
            take(")")
            return d
        if t == "t":
            take()
            return FALSE if negated else TRUE
        if t == "f":
            take()
            return TRUE if negated else FALSE
        if t is not None and t.isdigit():
            take()
            i = int(t)
            if i >= len(aps):
                raise HoaSyntaxError(lineno, f"AP number {i} out of range")
            return frozenset({frozenset({(aps[i], not negated)})})
        raise HoaSyntaxError(lineno, f"bad label expression {expr!r}")

    def conj(negated: bool) -> frozenset:
        # under negation De Morgan swaps the connective handled at each level
        d = atom(negated)
        while peek() == "&":
            take()
            other = atom(negated)
            if negated:
                d = d | other
            else:
                d = frozenset(a | b for a in d for b in other)
        return d

    def disj(negated: bool) -> frozenset:
        d = conj(negated)
        while peek() == "|":
            take()
            other = conj(negated)
            if negated:
                d = frozenset(a | b for a in d for b in other)
            else:
                d = d | other
        return d

    out = disj(False)
    if pos != len(tokens):
        raise HoaSyntaxError(lineno, f"bad label expression {expr!r}")
    return out


def parse_hoa(text: str) -> Nba:
    """Nba from a HOA v1 document (state-based Buchi acceptance only).

    AP names must be atoms of the guard syntax (l<k> or pi<k>); their HOA
    order is preserved when mapping numbered labels.
    """
    lines = text.splitlines()
    n_states = None
    start = None
    aps: list[int] = []
    acceptance_ok = False
    body_at = None
    for ln, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line:
            continue
        if line == "--BODY--":
            body_at = ln
            break
        if line.startswith("HOA:"):
            if line.split(":", 1)[1].strip() != "v1":
                raise UnsupportedFeature(f"line {ln}: only HOA v1 is supported")
        elif line.startswith("States:"):
            n_states = int(line.split(":", 1)[1])
        elif line.startswith("Start:"):
            if start is not None or "&" in line:
                raise UnsupportedFeature(f"line {ln}: multiple start states")
            start = int(line.split(":", 1)[1])
        elif line.startswith("AP:"):
            parts = line.split(":", 1)[1].split(None, 1)
            count = int(parts[0])
            names = re.findall(r'"([^"]*)"', parts[1] if len(parts) > 1 else "")
            if len(names) != count:
                raise HoaSyntaxError(ln, f"AP count mismatch")
            for name in names:
                m = re.fullmatch(r"(?:l|pi)(\d+)", name)
                if m is None:
                    raise UnsupportedFeature(f"line {ln}: AP name {name!r} is not an atom")
                aps.append(int(m.group(1)))
        elif line.startswith("Acceptance:"):
            spec = " ".join(line.split(":", 1)[1].split())
            if spec != "1 Inf(0)":
                raise UnsupportedFeature(f"line {ln}: acceptance {spec!r} is not Buchi")
            acceptance_ok = True
        elif line.startswith(("acc-name:", "name:", "tool:", "properties:", "owner:")):
            pass
        else:
            raise HoaSyntaxError(ln, f"unrecognized header {line.split(':')[0]!r}")
    if body_at is None:
        raise HoaSyntaxError("missing --BODY--")
    if n_states is None or start is None:
        raise HoaSyntaxError("missing States: or Start: header")
    if not acceptance_ok:
        raise HoaSyntaxError("missing Acceptance: header")

    accepting = set()
    edges = []
    cur = None
    for ln, raw in enumerate(lines[body_at:], body_at + 1):
        line = raw.strip()
        if not line:
            continue
        if line == "--END--":
            break
        if line.startswith("State:"):
            rest = line.split(":", 1)[1].strip()
            rest = re.sub(r'"[^"]*"', "", rest)  # drop the optional name
            m = re.fullmatch(r"(\d+)\s*(\{([\d\s]*)\})?", rest.strip())
            if m is None:
                raise HoaSyntaxError(ln, f"bad State line")
            cur = int(m.group(1))
            if cur >= n_states:
                raise HoaSyntaxError(ln, f"state {cur} out of range")
            if m.group(3) is not None:
                if m.group(3).split() != ["0"]:
                    raise UnsupportedFeature(f"line {ln}: acceptance sets other than {{0}}")
                accepting.add(cur)
        else:
            if cur is None:
                raise HoaSyntaxError(ln, f"edge before any State")
            m = re.fullmatch(r"\[([^\]]*)\]\s*(\d+)\s*(\{[\d\s]*\})?", line)
            if m is None:
                if re.fullmatch(r"\S+\s*\d+\s*&.*", line) or "&" in line.split("]")[-1]:
                    raise UnsupportedFeature(f"line {ln}: alternation is not supported")
                raise HoaSyntaxError(ln, f"bad edge line")
            if m.group(3) is not None:
                raise UnsupportedFeature(f"line {ln}: transition-based acceptance")
            dst = int(m.group(2))
            if dst >= n_states:
                raise HoaSyntaxError(ln, f"state {dst} out of range")
            disjuncts = _hoa_label_dnf(m.group(1), aps, ln)
            if disjuncts:
                edges.append((cur, Guard(disjuncts), dst))
    return Nba(
        n=n_states,
        init=start,
        accepting=frozenset(accepting),
        edges=tuple(edges),
        n_aps=max(aps, default=0),
    )


def to_hoa(b: Nba) -> str:
    """HOA v1 document for the automaton (state-based Buchi acceptance)."""
    aps = list(range(1, b.n_aps + 1))
    num = {lab: i for i, lab in enumerate(aps)}
    out = [
        "HOA: v1",
        f"States: {b.n}",
        f"Start: {b.init}",
        "AP: " + " ".join([str(len(aps))] + [f'"l{i}"' for i in aps]),
        "acc-name: Buchi",
        "Acceptance: 1 Inf(0)",
        "--BODY--",
    ]
    for s in range(b.n):
        mark = " {0}" if s in b.accepting else ""
        out.append(f"State: {s}{mark}")
        for (g, d) in b.out_edges[s]:
            wrap = len(g.disjuncts) > 1
            parts = []
            for disj in sorted(g.disjuncts, key=lambda x: sorted(x)):
                if not disj:
                    parts.append("t")
                else:
                    lits = "&".join(("" if pos else "!") + str(num[i]) for (i, pos) in sorted(disj))
                    parts.append("(" + lits + ")" if wrap else lits)
            out.append(f"[{' | '.join(parts)}] {d}")
    out.append("--END--")
    return "\n".join(out) + "\n"


# -- preprocessing ---------------------------------------------------------


def prune_infeasible(b: Nba, m: Optional[int] = None) -> Nba:
    """Remove edges whose guard no mutually-exclusive valuation satisfies."""
    mm = m if m is not None else b.n_aps
    kept = tuple((s, g, d) for (s, g, d) in b.edges if guard_sat(g, mm) is not None)
    return Nba(n=b.n, init=b.init, accepting=b.accepting, edges=kept, n_aps=b.n_aps)


def compute_rho(b: Nba) -> np.ndarray:
    """Hop-count distance table over the (pruned) transition graph.

    Off-diagonal entries are shortest nonempty path lengths; diagonal
    entries are shortest nonempty cycle lengths through the state (so a
    finite rho(q, q) means q can be revisited, not the trivial zero).
    Unreachable pairs are +inf.
    """
    n = b.n
    adj: list[set[int]] = [set() for _ in range(n)]
    for (s, _, d) in b.edges:
        adj[s].add(d)
    dist0 = np.full((n, n), np.inf)
    for src in range(n):
        dist0[src, src] = 0.0
        frontier = [src]
        d = 0
        while frontier:
            d += 1
            nxt = []
            for u in frontier:
                for v in adj[u]:
                    if dist0[src, v] == np.inf:
                        dist0[src, v] = d
                        nxt.append(v)
            frontier = nxt
    rho = dist0.copy()
    for q in range(n):
        best = np.inf
        for v in adj[q]:
            best = min(best, 1.0 + (dist0[v, q] if v != q else 0.0))
        rho[q, q] = best
    return rho


def feasible_accepting(b: Nba, rho: np.ndarray) -> frozenset[int]:
    """Accepting states reachable from init and lying on a cycle."""
    feas = frozenset(
        q for q in b.accepting
        if (rho[b.init, q] if q != b.init else 0.0) < np.inf and rho[q, q] < np.inf
    )
    if not feas:
        raise NoFeasibleAccepting("no accepting state is reachable and self-reachable")
    return feas


# -- prefix-suffix word acceptance -----------------------------------------


def _bool_closure(t: np.ndarray) -> np.ndarray:
    n = t.shape[0]
    c = t | np.eye(n, dtype=bool)
    while True:
        c2 = c | (c @ c)
        if (c2 == c).all():
            return c
        c = c2


def accepts_prefix_suffix(
    b: Nba,
    prefix: Sequence[Symbol],
    suffix: Sequence[Symbol],
    matrices: Optional[dict[Symbol, np.ndarray]] = None,
) -> bool:
    """Exact acceptance of prefix . suffix^omega.

    Decided on the finite product of automaton states and suffix positions:
    T relates states across one suffix traversal, F the same but passing an
    accepting state; the word is accepted iff some state a reachable after
    the prefix (plus whole suffix loops) satisfies F(a,b) with b able to
    return to a.
    """
    if len(suffix) == 0:
        raise EmptySuffix("suffix must be nonempty")
    mats = matrices if matrices is not None else {}

    def mat(sym: Symbol) -> np.ndarray:
        if sym not in mats:
            mats[sym] = b.symbol_matrix(sym)
        return mats[sym]

    n = b.n
    cur = np.zeros(n, dtype=bool)
    cur[b.init] = True
    for sym in prefix:
        cur = cur @ mat(sym)
        if not cur.any():
            return False
    acc = np.zeros(n, dtype=bool)
    for q in b.accepting:
        acc[q] = True
    t = np.eye(n, dtype=bool)
    f = np.diag(acc)
    for sym in suffix:
        m_ = mat(sym)
        t2 = t @ m_
        f = (f @ m_) | (t2 & acc[None, :])
        t = t2
    tstar = _bool_closure(t)
    reach = cur @ tstar  # states reachable after prefix plus whole loops
    # accepted iff exists a, b: reach[a] and F[a,b] and Tstar[b,a]
    cand = (f & tstar.T) & reach[:, None]
    return bool(cand.any())
