"""LTL without next: AST, parser, lasso-word semantics, and NBA translation.

Atomic propositions are region labels written ``l1..lm`` (or ``pi1..pim``).
Word symbols are label valuations: the empty set or a singleton region
index, since regions are disjoint.

The core syntax is {true, l_i, !, &, U}; ``|``, ``F``/``<>`` and
``G``/``[]`` are normalized away at parse/construction time, so every
Formula in circulation is already in core form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

from ltlplan.buchi import Guard, Nba

Symbol = frozenset  # empty or singleton set of 1-based label indices


class LtlError(Exception):
    pass


class LtlSyntaxError(LtlError):
    def __init__(self, offset: int, expected: list[str], found: str):
        self.offset = offset
        self.expected = expected
        self.found = found
        super().__init__(f"at offset {offset}: expected {' or '.join(expected)}, found {found}")


class EmptyCycle(LtlError):
    pass


# -- AST (core syntax only) ------------------------------------------------


@dataclass(frozen=True)
class Formula:
    pass


@dataclass(frozen=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True)
class AP(Formula):
    index: int  # 1-based region label


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula


TRUE = TrueF()


def Or(a: Formula, b: Formula) -> Formula:
    return Not(And(Not(a), Not(b)))


def Eventually(a: Formula) -> Formula:
    return Until(TRUE, a)


def Always(a: Formula) -> Formula:
    return Not(Eventually(Not(a)))


def normalize(f: Formula) -> Formula:
    """Identity on core formulas; kept as the documented contract point."""
    if isinstance(f, (TrueF, AP)):
        return f
    if isinstance(f, Not):
        return Not(normalize(f.arg))
    if isinstance(f, And):
        return And(normalize(f.left), normalize(f.right))
    if isinstance(f, Until):
        return Until(normalize(f.left), normalize(f.right))
    raise LtlError(f"not a core formula: {f!r}")


def atoms(f: Formula) -> set[int]:
    if isinstance(f, AP):
        return {f.index}
    if isinstance(f, Not):
        return atoms(f.arg)
    if isinstance(f, (And, Until)):
        return atoms(f.left) | atoms(f.right)
    return set()


def pretty_print(f: Formula) -> str:
    """Core-syntax ASCII rendering; parses back to the same AST."""
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, AP):
        return f"l{f.index}"
    if isinstance(f, Not):
        return f"!({pretty_print(f.arg)})"
    if isinstance(f, And):
        return f"({pretty_print(f.left)}) && ({pretty_print(f.right)})"
    if isinstance(f, Until):
        return f"({pretty_print(f.left)}) U ({pretty_print(f.right)})"
    raise LtlError(f"not a core formula: {f!r}")


# -- parser ----------------------------------------------------------------

def _tokenize(text: str) -> Iterator[tuple[str, str, int]]:
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        two = text[i : i + 2]
        if two in ("&&", "||", "<>", "[]"):
            yield ("op", two, i)
            i += 2
            continue
        if ch in "!&|()":
            yield ("op", ch, i)
            i += 1
            continue
        if ch.isalpha():
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            yield ("word", text[i:j], i)
            i = j
            continue
        raise LtlSyntaxError(i, ["token"], repr(ch))
    yield ("eof", "", n)


class _Parser:
    def __init__(self, text: str):
        self.toks = list(_tokenize(text))
        self.pos = 0

    def peek(self) -> tuple[str, str, int]:
        return self.toks[self.pos]

    def take(self) -> tuple[str, str, int]:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def parse(self) -> Formula:
        f = self.parse_or()
        kind, val, off = self.peek()
        if kind != "eof":
            raise LtlSyntaxError(off, ["end of input", "operator"], repr(val))
        return f

    def parse_or(self) -> Formula:
        f = self.parse_and()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in ("||", "|"):
                self.take()
                f = Or(f, self.parse_and())
            else:
                return f

    def parse_and(self) -> Formula:
        f = self.parse_until()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in ("&&", "&"):
                self.take()
                f = And(f, self.parse_until())
            else:
                return f

    def parse_until(self) -> Formula:
        f = self.parse_unary()
        kind, val, _ = self.peek()
        if kind == "word" and val == "U":
            self.take()
            return Until(f, self.parse_until())  # right-associative
        return f

    def parse_unary(self) -> Formula:
        kind, val, off = self.peek()
        if kind == "op" and val == "!":
            self.take()
            return Not(self.parse_unary())
        if (kind == "op" and val in ("[]", "<>")) or (kind == "word" and val in ("G", "F")):
            self.take()
            arg = self.parse_unary()
            return Always(arg) if val in ("[]", "G") else Eventually(arg)
        return self.parse_atom()

    def parse_atom(self) -> Formula:
        kind, val, off = self.peek()
        if kind == "op" and val == "(":
            self.take()
            f = self.parse_or()
            kind, val, off = self.peek()
            if not (kind == "op" and val == ")"):
                raise LtlSyntaxError(off, [")"], repr(val) if val else "end of input")
            self.take()
            return f
        if kind == "word":
            if val == "true":
                self.take()
                return TRUE
            if val == "false":
                self.take()
                return Not(TRUE)
            for prefix in ("l", "pi"):
                if val.startswith(prefix) and val[len(prefix) :].isdigit():
                    self.take()
                    return AP(int(val[len(prefix) :]))
        raise LtlSyntaxError(
            off, ["atomic proposition", "true", "(", "unary operator"], repr(val) if val else "end of input"
        )


def parse_ltl(text: str) -> Formula:
    """Parse an ASCII LTL (without next) formula into a core-syntax AST."""
    return _Parser(text).parse()


# -- lasso-word semantics (test oracle) ------------------------------------


def eval_lasso(f: Formula, prefix: Sequence[Symbol], cycle: Sequence[Symbol]) -> bool:
    """Does prefix . cycle^omega satisfy f under standard LTL semantics?

    Decided by a fixpoint-free walk: satisfaction at a position depends only
    on its lasso state, and the successor chain from any position revisits
    after at most len(prefix)+len(cycle) steps.
    """
    if len(cycle) == 0:
        raise EmptyCycle("cycle must be nonempty")
    word = list(prefix) + list(cycle)
    n = len(word)
    np_, nc = len(prefix), len(cycle)

    def succ(i: int) -> int:
        return i + 1 if i + 1 < n else np_

    memo: dict[tuple[int, int], bool] = {}

    def sat(g: Formula, i: int) -> bool:
        key = (id(g), i)
        if key in memo:
            return memo[key]
        if isinstance(g, TrueF):
            v = True
        elif isinstance(g, AP):
            v = g.index in word[i]
        elif isinstance(g, Not):
            v = not sat(g.arg, i)
        elif isinstance(g, And):
            v = sat(g.left, i) and sat(g.right, i)
        elif isinstance(g, Until):
            v = False
            j = i
            for _ in range(n + 1):
                if sat(g.right, j):
                    v = True
                    break
                if not sat(g.left, j):
                    break
                j = succ(j)
        else:
            raise LtlError(f"not a core formula: {g!r}")
        memo[key] = v
        return v

    return sat(f, 0)


# -- translation to NBA (tableau expansion, then degeneralization) ---------


@dataclass(frozen=True)
class _N:  # negation normal form nodes
    pass


@dataclass(frozen=True)
class _NTrue(_N):
    pass


@dataclass(frozen=True)
class _NFalse(_N):
    pass


@dataclass(frozen=True)
class _NLit(_N):
    index: int
    positive: bool


@dataclass(frozen=True)
class _NAnd(_N):
    left: _N
    right: _N


@dataclass(frozen=True)
class _NOr(_N):
    left: _N
    right: _N


@dataclass(frozen=True)
class _NUntil(_N):
    left: _N
    right: _N


@dataclass(frozen=True)
class _NRelease(_N):
    left: _N
    right: _N


def _nnf(f: Formula, neg: bool = False) -> _N:
    if isinstance(f, TrueF):
        return _NFalse() if neg else _NTrue()
    if isinstance(f, AP):
        return _NLit(f.index, not neg)
    if isinstance(f, Not):
        return _nnf(f.arg, not neg)
    if isinstance(f, And):
        a, b = _nnf(f.left, neg), _nnf(f.right, neg)
        return _NOr(a, b) if neg else _NAnd(a, b)
    if isinstance(f, Until):
        a, b = _nnf(f.left, neg), _nnf(f.right, neg)
        return _NRelease(a, b) if neg else _NUntil(a, b)
    raise LtlError(f"not a core formula: {f!r}")


class _Node:
    __slots__ = ("name", "incoming", "new", "old", "nxt")

    def __init__(self, name, incoming, new, old, nxt):
        self.name = name
        self.incoming = incoming  # set of node names ('init' included)
        self.new = new
        self.old = old
        self.nxt = nxt


def _expand(node: _Node, nodes: list[_Node], counter: list[int]) -> None:
    """Tableau expansion producing the generalized automaton's node set."""
    if not node.new:
        for nd in nodes:
            if nd.old == node.old and nd.nxt == node.nxt:
                nd.incoming |= node.incoming
                return
        nodes.append(node)
        counter[0] += 1
        succ = _Node(counter[0], {node.name}, frozenset(node.nxt), frozenset(), frozenset())
        _expand(succ, nodes, counter)
        return
    f = next(iter(node.new))
    new = node.new - {f}
    if isinstance(f, _NFalse):
        return
    if isinstance(f, _NTrue) or isinstance(f, _NLit):
        if isinstance(f, _NLit) and _NLit(f.index, not f.positive) in node.old:
            return  # contradiction
        old = node.old | ({f} if isinstance(f, _NLit) else frozenset())
        _expand(_Node(node.name, node.incoming, new, old, node.nxt), nodes, counter)
        return
    if isinstance(f, _NAnd):
        _expand(
            _Node(node.name, node.incoming, new | {f.left, f.right}, node.old | {f}, node.nxt),
            nodes,
            counter,
        )
        return
    # branching cases: Or, Until, Release
    if isinstance(f, _NOr):
        new1, new2 = new | {f.left}, new | {f.right}
        nxt1 = nxt2 = node.nxt
    elif isinstance(f, _NUntil):
        new1, nxt1 = new | {f.left}, node.nxt | {f}
        new2, nxt2 = new | {f.right}, node.nxt
    elif isinstance(f, _NRelease):
        new1, nxt1 = new | {f.right}, node.nxt | {f}
        new2, nxt2 = new | {f.left, f.right}, node.nxt
    else:
        raise LtlError(f"unexpected NNF node {f!r}")
    counter[0] += 1
    n1 = _Node(counter[0], set(node.incoming), new1, node.old | {f}, nxt1)
    _expand(n1, nodes, counter)
    counter[0] += 1
    n2 = _Node(counter[0], set(node.incoming), new2, node.old | {f}, nxt2)
    _expand(n2, nodes, counter)


def _untils(g: _N) -> list[_NUntil]:
    if isinstance(g, _NUntil):
        return [g] + _untils(g.left) + _untils(g.right)
    if isinstance(g, (_NAnd, _NOr, _NRelease)):
        return _untils(g.left) + _untils(g.right)
    return []


def ltl_to_nba(f: Formula) -> Nba:
    """Translate an LTL (without next) formula to a Büchi automaton.

    Tableau expansion to a generalized automaton (one acceptance set per
    until subformula, ordered lexically) followed by counter-based
    degeneralization.  Guards are conjunctions of literals, one DNF
    disjunct per transition.  The result has a unique initial state.
    """
    g = _nnf(normalize(f))
    nodes: list[_Node] = []
    counter = [1]
    _expand(_Node(1, {"init"}, frozenset({g}), frozenset(), frozenset()), nodes, counter)

    us = sorted(set(_untils(g)), key=repr)
    k = max(1, len(us))
    name_to_node = {nd.name: nd for nd in nodes}

    def in_acc(nd: _Node, idx: int) -> bool:
        # membership in generalized acceptance set idx: the until promise
        # is absent or already fulfilled at this node
        if not us:
            return True
        u = us[idx]
        return u not in nd.old or u.right in nd.old or isinstance(u.right, _NTrue)

    def guard_of(nd: _Node) -> Guard:
        lits = frozenset((o.index, o.positive) for o in nd.old if isinstance(o, _NLit))
        return Guard(frozenset({lits}))

    # degeneralized states: (node name, counter) plus a dedicated init
    state_ids: dict[tuple, int] = {}

    def sid(key: tuple) -> int:
        if key not in state_ids:
            state_ids[key] = len(state_ids)
        return state_ids[key]

    init_id = sid(("init",))
    edges: list[tuple[int, Guard, int]] = []
    for nd in sorted(nodes, key=lambda n: n.name):
        gd = guard_of(nd)
        for src_name in sorted(nd.incoming, key=str):
            if src_name == "init":
                edges.append((init_id, gd, sid((nd.name, 0))))
            else:
                src_nd = name_to_node[src_name]
                for i in range(k):
                    j = (i + 1) % k if in_acc(src_nd, i) else i
                    edges.append((sid((src_name, i)), gd, sid((nd.name, j))))

    accepting = frozenset(
        s for key, s in state_ids.items()
        if len(key) == 2 and key[1] == 0 and in_acc(name_to_node[key[0]], 0)
    )
    nba = Nba(
        n=len(state_ids),
        init=init_id,
        accepting=accepting,
        edges=tuple(edges),
        n_aps=max(atoms(f), default=0),
    ).restrict_reachable()
    return _merge_redundant_init(nba)


def _merge_redundant_init(b: Nba) -> Nba:
    """Fold the dedicated initial state into a state with identical exits."""
    init_out = frozenset((g, d) for (s, g, d) in b.edges if s == b.init)
    has_in = any(d == b.init for (_, _, d) in b.edges)
    if has_in:
        return b
    for q in range(b.n):
        if q == b.init:
            continue
        if frozenset((g, d) for (s, g, d) in b.edges if s == q) == init_out:
            edges = tuple(e for e in b.edges if e[0] != b.init)
            return Nba(
                n=b.n, init=q, accepting=b.accepting, edges=edges, n_aps=b.n_aps
            ).restrict_reachable()
    return b
