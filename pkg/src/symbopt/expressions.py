"""Expression trees for population update rules.

An update rule is a small arithmetic expression over population tensors
(current positions, bests, velocity, random peers, constants).  Rules are
built token by token as the pre-order traversal of a binary expression tree
of height 2..5, under a grammar mask that rules out degenerate shapes
(constant-only arithmetic, twin children of ``+``/``-``, variable-variable
products).  The partially built tree embeds into a fixed 124-bit vector
(31 slots x 4-bit token codes) that serves as the generator's input.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np


class GrammarViolation(ValueError):
    """A token placement or a finished rule breaks the construction grammar."""


class Token(IntEnum):
    PLUS = 0
    MINUS = 1
    TIMES = 2
    X = 3              # current positions
    BEST_GLOBAL = 4    # best-so-far solution
    WORST_GLOBAL = 5   # worst-so-far solution
    BEST_PERSONAL = 6  # per-individual best
    DELTA_X = 7        # previous-step displacement
    RANDOM_PEER = 8    # random member of the current population
    CONST = 9


N_TOKENS = 10
BINARY_TOKENS = (Token.PLUS, Token.MINUS, Token.TIMES)
OPERAND_TOKENS = tuple(t for t in Token if t not in BINARY_TOKENS)
# arity-0 tokens that are not constants; used by the mask fallback
VARIABLE_TOKENS = tuple(t for t in OPERAND_TOKENS if t is not Token.CONST)

# 4-bit slot code of each token inside the tree embedding (0 marks an
# empty slot, so codes run 1..10)
CODE4 = {
    Token.PLUS: 1,
    Token.TIMES: 2,
    Token.MINUS: 3,
    Token.CONST: 4,
    Token.X: 5,
    Token.BEST_GLOBAL: 6,
    Token.WORST_GLOBAL: 7,
    Token.DELTA_X: 8,
    Token.RANDOM_PEER: 9,
    Token.BEST_PERSONAL: 10,
}

MAX_HEIGHT = 5
MIN_HEIGHT = 2
N_SLOTS = 2 ** MAX_HEIGHT - 1  # 31
VTE_BITS = 4 * N_SLOTS         # 124

# constant grid: value = mantissa * 10**exponent
MANTISSA_VALUES = tuple(round(0.1 * k, 1) for k in range(-10, 11))
EXPONENT_VALUES = (0, -1)
N_MANTISSA = len(MANTISSA_VALUES)  # 21
N_EXPONENT = len(EXPONENT_VALUES)  # 2

_MNEMONIC = {
    Token.PLUS: "+",
    Token.MINUS: "-",
    Token.TIMES: "*",
    Token.X: "x",
    Token.BEST_GLOBAL: "xg",
    Token.WORST_GLOBAL: "xw",
    Token.BEST_PERSONAL: "xp",
    Token.DELTA_X: "dx",
    Token.RANDOM_PEER: "xr",
}
_FROM_MNEMONIC = {v: k for k, v in _MNEMONIC.items()}

_INFIX_NAME = {
    Token.X: "x",
    Token.BEST_GLOBAL: "x*",
    Token.WORST_GLOBAL: "x^-",
    Token.BEST_PERSONAL: "x_i*",
    Token.DELTA_X: "dx",
    Token.RANDOM_PEER: "x_r",
}


def const_value(mantissa_idx: int, exponent_idx: int) -> float:
    return MANTISSA_VALUES[mantissa_idx] * 10.0 ** EXPONENT_VALUES[exponent_idx]


def nearest_const_indices(value: float) -> tuple[int, int]:
    """Closest (mantissa, exponent) grid indices to ``value``.

    Ties prefer exponent index 0 and then the smaller mantissa index,
    so recovery is deterministic.
    """
    best = None
    for ei in range(N_EXPONENT):
        for mi in range(N_MANTISSA):
            err = abs(value - const_value(mi, ei))
            if best is None or err < best[0] - 1e-15:
                best = (err, mi, ei)
    return best[1], best[2]


@dataclass(frozen=True)
class Constant:
    """A constant leaf: the bound value plus its grid indices."""

    value: float
    mantissa_idx: int
    exponent_idx: int

    @classmethod
    def from_indices(cls, mantissa_idx: int, exponent_idx: int) -> "Constant":
        return cls(const_value(mantissa_idx, exponent_idx), mantissa_idx, exponent_idx)

    @classmethod
    def from_value(cls, value: float) -> "Constant":
        mi, ei = nearest_const_indices(value)
        return cls(float(value), mi, ei)

    def on_grid(self) -> bool:
        return self.value == const_value(self.mantissa_idx, self.exponent_idx)


def slot_depth(slot: int) -> int:
    """Depth of a heap slot, root counted at depth 1."""
    return (slot + 1).bit_length()


@dataclass(frozen=True)
class PartialTree:
    """A prefix of a pre-order traversal laid out on 31 heap slots.

    ``kinds[i]`` is the token at slot i or -1 when empty; slot 0 is the
    root and the children of slot i sit at 2i+1 and 2i+2.  ``frontier``
    is the slot filled next under pre-order (None once complete) and
    ``pending`` stacks the right-child slots still owed to their parents.
    """

    kinds: tuple[int, ...]
    frontier: int | None
    pending: tuple[int, ...]
    max_height: int = MAX_HEIGHT

    @classmethod
    def empty(cls, max_height: int = MAX_HEIGHT) -> "PartialTree":
        if not MIN_HEIGHT <= max_height <= MAX_HEIGHT:
            raise ValueError(f"max_height must lie in [{MIN_HEIGHT}, {MAX_HEIGHT}]")
        return cls(kinds=(-1,) * N_SLOTS, frontier=0, pending=(), max_height=max_height)

    @property
    def is_complete(self) -> bool:
        return self.frontier is None

    def _advance(self, token: Token) -> tuple[tuple[int, ...], int | None, tuple[int, ...]]:
        s = self.frontier
        kinds = list(self.kinds)
        kinds[s] = int(token)
        if token in BINARY_TOKENS:
            return tuple(kinds), 2 * s + 1, self.pending + (2 * s + 2,)
        if self.pending:
            return tuple(kinds), self.pending[-1], self.pending[:-1]
        return tuple(kinds), None, ()

    def append(self, token: Token) -> "PartialTree":
        if self.is_complete:
            raise GrammarViolation("cannot append to a complete tree")
        if not valid_token_mask(self)[int(token)]:
            raise GrammarViolation(f"token {Token(token).name} is masked at slot {self.frontier}")
        kinds, frontier, pending = self._advance(token)
        return PartialTree(kinds, frontier, pending, self.max_height)


def _subtrees_identical(kinds: tuple[int, ...] | list[int], a: int, b: int) -> bool:
    """Token-kind equality of the subtrees rooted at slots a and b.

    Constant leaves never match: their values are bound independently, so
    two subtrees containing constants are not considered the same term
    (the direct two-constant-children case has its own ban).
    """
    if kinds[a] != kinds[b]:
        return False
    if kinds[a] == int(Token.CONST):
        return False
    if kinds[a] in (int(Token.PLUS), int(Token.MINUS), int(Token.TIMES)):
        return (_subtrees_identical(kinds, 2 * a + 1, 2 * b + 1)
                and _subtrees_identical(kinds, 2 * a + 2, 2 * b + 2))
    return True


def _in_subtree(slot: int, root: int) -> bool:
    while slot > root:
        slot = (slot - 1) // 2
    return slot == root


def valid_token_mask(tree: PartialTree) -> np.ndarray:
    """Boolean vector over the 10 tokens allowed at the frontier slot.

    Enforced rules: minimum height 2 (the root must be an operator),
    maximum height (no operator whose children would overflow), no binary
    node with two constant children, a ``*`` node with exactly one constant
    child, and no ``+``/``-`` node whose second child would complete
    structurally identical to its first.  If everything ends up masked
    (unreachable under the rules above, guarded regardless) all non-constant
    operands are re-enabled so generation can terminate.
    """
    if tree.is_complete:
        raise GrammarViolation("mask requested for a complete tree")
    mask = np.ones(N_TOKENS, dtype=bool)
    s = tree.frontier

    if slot_depth(s) >= tree.max_height:
        for t in BINARY_TOKENS:
            mask[int(t)] = False
    if s == 0:
        # a bare operand would make a height-1 rule
        for t in OPERAND_TOKENS:
            mask[int(t)] = False
    else:
        parent = (s - 1) // 2
        pkind = tree.kinds[parent]
        left = 2 * parent + 1
        if pkind == int(Token.TIMES) and s == left + 1:
            if tree.kinds[left] == int(Token.CONST):
                mask[int(Token.CONST)] = False
            else:
                mask[:] = False
                mask[int(Token.CONST)] = True
                return mask
        elif (pkind in (int(Token.PLUS), int(Token.MINUS)) and s == left + 1
                and tree.kinds[left] == int(Token.CONST)):
            mask[int(Token.CONST)] = False  # both children constant
        # twin-children checks on +/- ancestors whose right subtree the
        # candidate operand would complete (operators never complete one)
        candidates = [t for t in OPERAND_TOKENS if mask[int(t)]]
        if candidates:
            kinds_sim, frontier_sim, pending_sim = tree._advance(candidates[0])
            open_slots = list(pending_sim)
            if frontier_sim is not None:
                open_slots.append(frontier_sim)
            node = s
            while node > 0:
                anc = (node - 1) // 2
                right = 2 * anc + 2
                if (tree.kinds[anc] in (int(Token.PLUS), int(Token.MINUS))
                        and _in_subtree(s, right)
                        and not any(_in_subtree(o, right) for o in open_slots)):
                    kinds_mut = list(kinds_sim)
                    for t in candidates:
                        kinds_mut[s] = int(t)
                        if _subtrees_identical(kinds_mut, 2 * anc + 1, right):
                            mask[int(t)] = False
                node = anc
    if not mask.any():
        for t in VARIABLE_TOKENS:
            mask[int(t)] = True
    return mask


def append_token(tree: PartialTree, token: Token) -> PartialTree:
    """Place ``token`` at the frontier; rejects masked tokens."""
    return tree.append(token)


def encode_vte(tree: PartialTree) -> np.ndarray:
    """124-bit embedding: 4 bits per slot, 0000 for empty slots."""
    out = np.zeros(VTE_BITS, dtype=np.float64)
    for i, k in enumerate(tree.kinds):
        if k >= 0:
            code = CODE4[Token(k)]
            for b in range(4):
                out[4 * i + b] = (code >> (3 - b)) & 1
    return out


@dataclass(frozen=True)
class UpdateRule:
    """A complete rule: pre-order token traversal plus bound constants."""

    tokens: tuple[Token, ...]
    constants: tuple[Constant, ...]

    def __post_init__(self):
        _check_traversal(self.tokens)
        n_const = sum(1 for t in self.tokens if t is Token.CONST)
        if n_const != len(self.constants):
            raise GrammarViolation(
                f"rule has {n_const} constant tokens but {len(self.constants)} values")

    @property
    def height(self) -> int:
        return _height(self.tokens, 0)[0]


def _check_traversal(tokens) -> None:
    if not tokens:
        raise GrammarViolation("empty traversal")
    pending = 1
    for i, t in enumerate(tokens):
        if pending == 0:
            raise GrammarViolation(f"traversal complete before token {i}")
        pending -= 1
        if t in BINARY_TOKENS:
            pending += 2
    if pending != 0:
        raise GrammarViolation(f"traversal ends with {pending} children pending")


def _height(tokens, i) -> tuple[int, int]:
    t = tokens[i]
    if t in BINARY_TOKENS:
        hl, i = _height(tokens, i + 1)
        hr, i = _height(tokens, i)
        return 1 + max(hl, hr), i
    return 1, i + 1


def make_rule(tokens, constants=()) -> UpdateRule:
    """Build an UpdateRule; plain floats are snapped to their grid indices."""
    consts = tuple(c if isinstance(c, Constant) else Constant.from_value(float(c))
                   for c in constants)
    return UpdateRule(tuple(Token(t) for t in tokens), consts)


def check_rule_invariants(rule: UpdateRule, require_grid: bool = True) -> None:
    """Raise GrammarViolation unless every structural invariant holds.

    Checked: complete traversal (constructor), height in [2, 5], constant
    grid membership, no binary node with two constant children, every ``*``
    node with exactly one constant child, no ``+``/``-`` node with
    structurally identical children.
    """
    if not MIN_HEIGHT <= rule.height <= MAX_HEIGHT:
        raise GrammarViolation(f"height {rule.height} outside [{MIN_HEIGHT}, {MAX_HEIGHT}]")
    if require_grid:
        for c in rule.constants:
            if not (0 <= c.mantissa_idx < N_MANTISSA and 0 <= c.exponent_idx < N_EXPONENT):
                raise GrammarViolation("constant indices off the grid")
            if not c.on_grid():
                raise GrammarViolation(f"constant {c.value} not on the mantissa/exponent grid")
    tokens = rule.tokens

    def walk(i):
        """Returns (end index, shape, contains_const)."""
        t = tokens[i]
        if t not in BINARY_TOKENS:
            return i + 1, (t,), t is Token.CONST
        jl = i + 1
        jr, left, lc = walk(jl)
        end, right, rc = walk(jr)
        n_const_children = (tokens[jl] is Token.CONST) + (tokens[jr] is Token.CONST)
        if n_const_children == 2:
            raise GrammarViolation("binary node with two constant children")
        if t is Token.TIMES and n_const_children != 1:
            raise GrammarViolation("'*' node without exactly one constant child")
        # constant-bearing subtrees are distinct terms (independent values)
        if t in (Token.PLUS, Token.MINUS) and left == right and not (lc or rc):
            raise GrammarViolation(f"'{t.name}' node with structurally identical children")
        return end, (t,) + left + right, lc or rc

    walk(0)


def rule_to_tree(rule: UpdateRule, max_height: int = MAX_HEIGHT) -> PartialTree:
    """Replay a rule's traversal through the masked builder."""
    tree = PartialTree.empty(max_height)
    for t in rule.tokens:
        tree = tree.append(t)
    return tree


def evaluate(rule: UpdateRule, pop, rng: np.random.Generator) -> np.ndarray:
    """Displacement matrix (Ps x D) produced by ``rule`` on a population.

    Operands resolve to Ps x D matrices (globals broadcast over rows);
    every RANDOM_PEER occurrence independently draws one population member
    per row.  Evaluation order is pre-order, left child before right, so
    results are reproducible bit for bit under a pinned random stream.
    """
    if not isinstance(rule, UpdateRule):
        raise GrammarViolation("evaluate requires a complete UpdateRule")
    positions = np.asarray(pop.positions, dtype=np.float64)
    ps, dim = positions.shape
    tokens = rule.tokens
    state = {"i": 0, "c": 0}

    def ev(i):
        t = tokens[i]
        if t is Token.PLUS:
            left, j = ev(i + 1)
            right, k = ev(j)
            return left + right, k
        if t is Token.MINUS:
            left, j = ev(i + 1)
            right, k = ev(j)
            return left - right, k
        if t is Token.TIMES:
            left, j = ev(i + 1)
            right, k = ev(j)
            return left * right, k
        if t is Token.X:
            return positions, i + 1
        if t is Token.BEST_GLOBAL:
            return np.asarray(pop.best_so_far_pos, dtype=np.float64), i + 1
        if t is Token.WORST_GLOBAL:
            return np.asarray(pop.worst_so_far_pos, dtype=np.float64), i + 1
        if t is Token.BEST_PERSONAL:
            return np.asarray(pop.personal_best_pos, dtype=np.float64), i + 1
        if t is Token.DELTA_X:
            return np.asarray(pop.velocities, dtype=np.float64), i + 1
        if t is Token.RANDOM_PEER:
            idx = rng.integers(0, ps, size=ps)
            return positions[idx], i + 1
        # CONST
        value = rule.constants[state["c"]].value
        state["c"] += 1
        return value, i + 1

    result, end = ev(0)
    assert end == len(tokens)
    result = np.asarray(result, dtype=np.float64)
    if result.shape != (ps, dim):
        result = np.broadcast_to(result, (ps, dim)).copy()
    return result


def to_infix(rule: UpdateRule) -> str:
    """Canonical infix string; the key used for rule-frequency counting.

    ``+``/``-`` nodes always carry their own parentheses, ``*`` prints the
    constant child first with two decimals, and binary operands of ``*``
    are parenthesized.  Identical rules render identically.
    """
    tokens = rule.tokens
    state = {"c": 0}

    def render(i):
        t = tokens[i]
        if t in (Token.PLUS, Token.MINUS):
            ls, j = render(i + 1)
            rs, k = render(j)
            op = "+" if t is Token.PLUS else "-"
            return f"({ls}{op}{rs})", k
        if t is Token.TIMES:
            jl = i + 1
            ls, jr = render(jl)
            rs, k = render(jr)
            if tokens[jl] is not Token.CONST and tokens[jr] is Token.CONST:
                ls, rs = rs, ls  # constant factor prints first
            if tokens[jl] is Token.TIMES or tokens[jr] is Token.TIMES:
                # nested product needs its own parentheses
                if not rs.startswith("("):
                    rs = f"({rs})"
            return f"{ls}*{rs}", k
        if t is Token.CONST:
            value = rule.constants[state["c"]].value
            state["c"] += 1
            return f"{value:.2f}", i + 1
        return _INFIX_NAME[t], i + 1

    text, end = render(0)
    assert end == len(tokens)
    return text


_INFIX_OPERANDS = sorted(_INFIX_NAME.items(), key=lambda kv: -len(kv[1]))


def _tokenize_infix(text: str) -> list:
    """Lex an infix rule string; maximal munch over the operand names, a
    leading ``-`` starts a number only where an operand is expected."""
    out = []
    i, n = 0, len(text)
    expect_operand = True
    while i < n:
        ch = text[i]
        if ch == " ":
            i += 1
            continue
        if ch == "(":
            out.append(("lpar", None))
            i += 1
            expect_operand = True
            continue
        if ch == ")":
            out.append(("rpar", None))
            i += 1
            expect_operand = False
            continue
        if ch in "+*" or (ch == "-" and not expect_operand):
            out.append(("op", ch))
            i += 1
            expect_operand = True
            continue
        if ch.isdigit() or ch == "." or (ch == "-" and expect_operand):
            j = i + 1
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            out.append(("num", float(text[i:j])))
            i = j
            expect_operand = False
            continue
        for token, name in _INFIX_OPERANDS:
            if text.startswith(name, i):
                out.append(("var", token))
                i += len(name)
                expect_operand = False
                break
        else:
            raise GrammarViolation(f"cannot lex rule string at {text[i:]!r}")
    return out


def parse_infix(text: str) -> UpdateRule:
    """Parse a canonical infix string back into a rule.

    Inverse of to_infix up to the 2-decimal rounding of constants; the
    result always satisfies the structural invariants of UpdateRule.
    """
    lexed = _tokenize_infix(text)
    pos = [0]

    def peek():
        return lexed[pos[0]] if pos[0] < len(lexed) else ("end", None)

    def take():
        kind, val = peek()
        pos[0] += 1
        return kind, val

    def parse_factor():
        kind, val = take()
        if kind == "lpar":
            node = parse_sum()
            k2, _ = take()
            if k2 != "rpar":
                raise GrammarViolation(f"missing ')' in {text!r}")
            return node
        if kind == "num":
            return (Token.CONST, val)
        if kind == "var":
            return (val,)
        raise GrammarViolation(f"unexpected {kind!r} in {text!r}")

    def parse_product():
        node = parse_factor()
        while peek() == ("op", "*"):
            take()
            node = (Token.TIMES, node, parse_factor())
        return node

    def parse_sum():
        node = parse_product()
        while peek()[0] == "op" and peek()[1] in "+-":
            _, op = take()
            node = (Token.PLUS if op == "+" else Token.MINUS,
                    node, parse_product())
        return node

    tree = parse_sum()
    if pos[0] != len(lexed):
        raise GrammarViolation(f"trailing input in {text!r}")

    tokens: list[Token] = []
    constants: list[Constant] = []

    def flatten(node):
        tokens.append(node[0])
        if node[0] is Token.CONST:
            constants.append(Constant.from_value(node[1]))
        elif node[0] in BINARY_TOKENS:
            flatten(node[1])
            flatten(node[2])

    flatten(tree)
    return UpdateRule(tuple(tokens), tuple(constants))


def serialize_rule(rule: UpdateRule) -> str:
    """One-line text form: space-separated mnemonics, constants inlined."""
    parts = []
    ci = 0
    for t in rule.tokens:
        if t is Token.CONST:
            parts.append(f"c:{rule.constants[ci].value!r}")
            ci += 1
        else:
            parts.append(_MNEMONIC[t])
    return " ".join(parts)


def parse_rule(text: str) -> UpdateRule:
    """Inverse of serialize_rule; off-grid constants keep their exact value."""
    tokens = []
    constants = []
    for part in text.split():
        if part.startswith("c:"):
            tokens.append(Token.CONST)
            constants.append(Constant.from_value(float(part[2:])))
        elif part in _FROM_MNEMONIC:
            tokens.append(_FROM_MNEMONIC[part])
        else:
            raise GrammarViolation(f"unknown rule token {part!r}")
    return UpdateRule(tuple(tokens), tuple(constants))
