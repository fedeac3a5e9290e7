"""Grammar, embedding, evaluation and serialization of symbolic rules."""

import numpy as np
import pytest

from symbopt.expressions import (BINARY_TOKENS, CODE4, EXPONENT_VALUES,
                                 MANTISSA_VALUES, MAX_HEIGHT, MIN_HEIGHT,
                                 N_SLOTS, VTE_BITS, Constant, GrammarViolation,
                                 PartialTree, Token, UpdateRule, append_token,
                                 check_rule_invariants, const_value,
                                 encode_vte, evaluate, make_rule,
                                 nearest_const_indices, parse_infix,
                                 parse_rule, serialize_rule, to_infix,
                                 valid_token_mask)
from symbopt.policy import generate_rule, init_params


def build(tokens):
    tree = PartialTree.empty()
    for t in tokens:
        tree = append_token(tree, t)
    return tree


class TestGrammarMasks:
    def test_root_must_be_binary(self):
        mask = valid_token_mask(PartialTree.empty())
        for t in BINARY_TOKENS:
            assert mask[t]
        for t in Token:
            if t not in BINARY_TOKENS:
                assert not mask[t], f"operand {t.name} allowed at root"

    def test_depth_limit_masks_binaries(self):
        # chain of Plus nodes down to depth 5: binaries must vanish there
        tree = build([Token.PLUS, Token.PLUS, Token.PLUS, Token.PLUS])
        mask = valid_token_mask(tree)
        for t in BINARY_TOKENS:
            assert not mask[t]
        assert mask[Token.X]

    def test_times_needs_exactly_one_const(self):
        # left child not a constant -> right child must be the constant
        tree = build([Token.TIMES, Token.X])
        mask = valid_token_mask(tree)
        assert mask[Token.CONST]
        assert not mask[Token.X] and not mask[Token.PLUS]
        # left child constant -> right child must not be another constant
        tree = build([Token.TIMES, Token.CONST])
        mask = valid_token_mask(tree)
        assert not mask[Token.CONST]
        assert mask[Token.X]

    def test_plus_minus_two_const_children_banned(self):
        for op in (Token.PLUS, Token.MINUS):
            tree = build([op, Token.CONST])
            assert not valid_token_mask(tree)[Token.CONST]

    def test_minus_identical_children_banned(self):
        # (x - x) is a null expression; completing the twin is masked
        tree = build([Token.MINUS, Token.X])
        assert not valid_token_mask(tree)[Token.X]
        assert valid_token_mask(tree)[Token.BEST_GLOBAL]

    def test_plus_identical_children_banned(self):
        tree = build([Token.PLUS, Token.DELTA_X])
        assert not valid_token_mask(tree)[Token.DELTA_X]

    def test_minus_identical_subtree_completion_banned(self):
        # (x + dx) - (x + ?): ? = dx would complete a twin subtree
        tree = build([Token.MINUS, Token.PLUS, Token.X, Token.DELTA_X,
                      Token.PLUS, Token.X])
        mask = valid_token_mask(tree)
        assert not mask[Token.DELTA_X]  # would mirror the left subtree
        assert not mask[Token.X]        # would twin the inner (x+x)
        assert mask[Token.BEST_GLOBAL]

    def test_const_subtrees_never_identical(self):
        # constants bind independent values: c*x - c*x stays legal
        tree = build([Token.MINUS, Token.TIMES, Token.CONST, Token.X,
                      Token.TIMES, Token.CONST])
        assert valid_token_mask(tree)[Token.X]

    def test_mask_never_empty_during_sampling(self):
        rng = np.random.default_rng(0)
        params, _ = init_params(0)
        for _ in range(200):
            tree = PartialTree.empty()
            while not tree.is_complete:
                mask = valid_token_mask(tree)
                assert mask.any()
                choices = np.flatnonzero(mask)
                tree = append_token(tree, Token(int(rng.choice(choices))))


class TestVte:
    def test_all_token_codes(self):
        expected = {Token.PLUS: 1, Token.TIMES: 2, Token.MINUS: 3,
                    Token.CONST: 4, Token.X: 5, Token.BEST_GLOBAL: 6,
                    Token.WORST_GLOBAL: 7, Token.DELTA_X: 8,
                    Token.RANDOM_PEER: 9, Token.BEST_PERSONAL: 10}
        assert CODE4 == expected

    def test_worked_partial_tree(self):
        # four generated tokens (+, x*, *, c) occupy slots 0, 1, 2 and 5
        tree = build([Token.PLUS, Token.BEST_GLOBAL, Token.TIMES, Token.CONST])
        vte = encode_vte(tree)
        assert vte.shape == (VTE_BITS,)

        def slot_bits(slot):
            return "".join(str(int(b)) for b in vte[4 * slot:4 * slot + 4])

        assert slot_bits(0) == "0001"   # +
        assert slot_bits(1) == "0110"   # x*
        assert slot_bits(2) == "0010"   # ×
        assert slot_bits(5) == "0100"   # c
        for slot in set(range(N_SLOTS)) - {0, 1, 2, 5}:
            assert slot_bits(slot) == "0000"

    def test_injective_over_random_partial_trees(self):
        rng = np.random.default_rng(1)
        seen = {}
        for _ in range(2000):
            tree = PartialTree.empty()
            steps = rng.integers(0, 12)
            for _ in range(steps):
                if tree.is_complete:
                    break
                choices = np.flatnonzero(valid_token_mask(tree))
                tree = append_token(tree, Token(int(rng.choice(choices))))
            key = encode_vte(tree).tobytes()
            if key in seen:
                assert seen[key] == tree.kinds
            seen[key] = tree.kinds


class TestConstants:
    def test_grid_definition(self):
        assert len(MANTISSA_VALUES) == 21
        assert MANTISSA_VALUES[0] == -1.0 and MANTISSA_VALUES[-1] == 1.0
        assert MANTISSA_VALUES[13] == 0.3
        assert EXPONENT_VALUES == (0, -1)
        assert const_value(13, 1) == pytest.approx(0.03)

    def test_nearest_indices_roundtrip(self):
        # the grid has duplicate values (0.0 twice, +/-0.1 twice), so the
        # round-trip is exact in value, not necessarily in indices
        for mi in range(21):
            for ei in range(2):
                value = const_value(mi, ei)
                assert const_value(*nearest_const_indices(value)) == value

    def test_off_grid_value_keeps_exact_value(self):
        c = Constant.from_value(0.18)
        assert c.value == 0.18
        assert not c.on_grid()
        assert const_value(*nearest_const_indices(0.18)) == pytest.approx(0.2)


class TestInvariants:
    def test_height_bounds(self):
        with pytest.raises(GrammarViolation):
            check_rule_invariants(make_rule([Token.X]))
        deep = make_rule([Token.PLUS] * 5 + [Token.X] * 6)
        with pytest.raises(GrammarViolation):
            check_rule_invariants(deep)

    def test_times_one_const(self):
        with pytest.raises(GrammarViolation):
            check_rule_invariants(make_rule([Token.TIMES, Token.X, Token.DELTA_X]))
        with pytest.raises(GrammarViolation):
            check_rule_invariants(make_rule([Token.TIMES, Token.CONST,
                                             Token.CONST], [0.1, 0.2]))
        check_rule_invariants(make_rule([Token.TIMES, Token.CONST, Token.X], [0.1]))

    def test_twin_children(self):
        with pytest.raises(GrammarViolation):
            check_rule_invariants(make_rule([Token.MINUS, Token.X, Token.X]))
        # twins containing constants are legal: values bind independently
        check_rule_invariants(make_rule(
            [Token.MINUS, Token.TIMES, Token.CONST, Token.X,
             Token.TIMES, Token.CONST, Token.X], [0.1, 0.2]))


def make_population(ps=3, dim=2):
    class Pop:
        positions = np.arange(ps * dim, dtype=float).reshape(ps, dim)
        velocities = np.full((ps, dim), 0.5)
        personal_best_pos = positions - 1.0
        best_so_far_pos = np.array([10.0, 20.0])
        worst_so_far_pos = np.array([-5.0, -6.0])
    Pop.ps = ps
    Pop.dim = dim
    return Pop()


class TestEvaluate:
    def test_de_mutation_rule_hand_computed(self):
        # (x_r1 - x) + 0.5*(x_r2 - x_r3) with pinned peer draws
        rule = make_rule(
            [Token.PLUS,
             Token.MINUS, Token.RANDOM_PEER, Token.X,
             Token.TIMES, Token.CONST,
             Token.MINUS, Token.RANDOM_PEER, Token.RANDOM_PEER],
            [0.5])
        pop = make_population()

        class PinnedRng:
            draws = iter([np.array([1, 2, 0]), np.array([0, 0, 1]),
                          np.array([2, 1, 1])])

            def integers(self, lo, hi, size=None):
                return next(self.draws)

        x = pop.positions
        expected = (x[[1, 2, 0]] - x) + 0.5 * (x[[0, 0, 1]] - x[[2, 1, 1]])
        result = evaluate(rule, pop, PinnedRng())
        assert np.array_equal(result, expected)

    def test_published_top_rule_hand_computed(self):
        # 0.18*(x* - x_r) + 0.42*(x_i* - x_r) with pinned peers
        rule = parse_rule("+ * c:0.18 - xg xr * c:0.42 - xp xr")
        pop = make_population()

        class PinnedRng:
            draws = iter([np.array([2, 0, 1]), np.array([1, 1, 0])])

            def integers(self, lo, hi, size=None):
                return next(self.draws)

        x = pop.positions
        expected = (0.18 * (pop.best_so_far_pos - x[[2, 0, 1]])
                    + 0.42 * (pop.personal_best_pos - x[[1, 1, 0]]))
        result = evaluate(rule, pop, PinnedRng())
        assert np.array_equal(result, expected)

    def test_operand_broadcasting(self):
        pop = make_population()
        rng = np.random.default_rng(0)
        for tok, expect in [(Token.X, pop.positions),
                            (Token.DELTA_X, pop.velocities),
                            (Token.BEST_PERSONAL, pop.personal_best_pos)]:
            rule = make_rule([Token.PLUS, tok, Token.CONST], [0.0])
            assert np.array_equal(evaluate(rule, pop, rng), expect)
        rule = make_rule([Token.MINUS, Token.BEST_GLOBAL, Token.WORST_GLOBAL])
        expected = np.broadcast_to(pop.best_so_far_pos - pop.worst_so_far_pos,
                                   (3, 2))
        assert np.array_equal(evaluate(rule, pop, rng), expected)


class TestSerialization:
    def test_mnemonic_roundtrip(self):
        text = "+ * c:0.18 - xg xr * c:0.42 - xp xr"
        rule = parse_rule(text)
        assert serialize_rule(rule) == text

    def test_infix_rendering(self):
        rule = parse_rule("+ * c:0.18 - xg xr * c:0.42 - xp xr")
        assert to_infix(rule) == "(0.18*(x*-x_r)+0.42*(x_i*-x_r))"
        assert to_infix(make_rule([Token.PLUS, Token.BEST_GLOBAL, Token.X])) == "(x*+x)"
        assert to_infix(make_rule([Token.TIMES, Token.DELTA_X, Token.CONST],
                                  [0.3])) == "0.30*dx"

    def test_infix_parse_fixed_point(self):
        rng = np.random.default_rng(3)
        params, _ = init_params(7)
        for _ in range(300):
            rule, *_ = generate_rule(params, rng.normal(size=9), rng)
            text = to_infix(rule)
            again = parse_infix(text)
            assert to_infix(again) == text
            check_rule_invariants(again, require_grid=False)

    def test_sampled_rules_roundtrip_serialization(self):
        rng = np.random.default_rng(4)
        params, _ = init_params(8)
        for _ in range(300):
            rule, *_ = generate_rule(params, rng.normal(size=9), rng)
            text = serialize_rule(rule)
            again = parse_rule(text)
            assert again.tokens == rule.tokens
            assert [c.value for c in again.constants] == \
                [c.value for c in rule.constants]
            assert serialize_rule(again) == text


class TestSampledGrammar:
    def test_fuzzed_rules_satisfy_invariants(self):
        rng = np.random.default_rng(5)
        for seed in range(3):
            params, _ = init_params(seed)
            for _ in range(500):
                rule, *_ = generate_rule(params, rng.normal(size=9), rng)
                check_rule_invariants(rule)
                assert MIN_HEIGHT <= rule.height <= MAX_HEIGHT
