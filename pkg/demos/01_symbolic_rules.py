"""Tour of the symbolic update-rule language.

Builds rules from pre-order token strings, shows the canonical infix form,
walks the grammar mask during autoregressive construction, prints the
124-bit variable tree embedding and evaluates a rule on a tiny population.
"""

import numpy as np

from symbopt import parse_rule, parse_infix, to_infix, evaluate, encode_vte
from symbopt.expressions import (PartialTree, Token, append_token,
                                 valid_token_mask)
from symbopt.population import init_population
from symbopt.problems import instance_from_seed

# ---------------------------------------------------------------------------
# 1. Rules are binary expression trees written here in pre-order.
#    The classic DE rand/1 mutation, (x_r1 - x) + F*(x_r2 - x_r3) with F=0.5:
rule = parse_rule("+ - xr x * c:0.5 - xr xr")
print("pre-order :", "+ - xr x * c:0.5 - xr xr")
print("infix     :", to_infix(rule))
print("height    :", rule.height)

# The infix form parses back to the same canonical string.
assert to_infix(parse_infix(to_infix(rule))) == to_infix(rule)

# ---------------------------------------------------------------------------
# 2. Construction is token-by-token under a grammar mask.  Watch the mask
#    evolve while building "x* - x":
tree = PartialTree.empty()
for tok in (Token.MINUS, Token.BEST_GLOBAL, Token.X):
    mask = valid_token_mask(tree)
    allowed = [Token(i).name for i in np.flatnonzero(mask)]
    print(f"next={tok.name:<12} allowed now: {allowed}")
    tree = append_token(tree, tok)
print("complete  :", tree.is_complete)

# The very first token must be a binary operator (a bare operand is not a
# displacement rule), and at the depth limit only operands remain legal.

# ---------------------------------------------------------------------------
# 3. Every partial tree has a unique 124-bit embedding (31 heap slots x 4
#    bits).  Non-zero slots for the tree built above:
vte = encode_vte(tree)
for slot in range(31):
    code = vte[4 * slot:4 * slot + 4]
    if code.any():
        print(f"slot {slot:2d} -> {''.join(str(int(b)) for b in code)}")

# ---------------------------------------------------------------------------
# 4. A rule maps a population state to a displacement matrix.  Apply the DE
#    mutation to a 5-point population on a shifted/rotated 2-D sphere:
problem = instance_from_seed("Sphere", 2, seed=42)
rng = np.random.default_rng(0)
pop = init_population(problem, ps=5, rng=rng, horizon=10)
delta = evaluate(rule, pop, rng)
print("\ndisplacements for", to_infix(rule))
print(np.array_str(delta, precision=3))
print("new positions would be x + delta, clipped to", problem.bounds)
