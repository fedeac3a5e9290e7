"""Recurrent rule generator and linear value baseline.

A single LSTM cell (hidden size 16) consumes the 124-bit embedding of the
partial expression tree; the cell state is initialized from the 9 landscape
features.  A 16x10 head produces token logits (grammar mask applied as -inf
before the softmax) and two further heads pick a constant's mantissa and
exponent at the step where a constant token is emitted.

Everything is plain numpy with hand-written backpropagation; the PPO
surrogate gradient is exact for this fixed architecture and is verified
against central finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .expressions import (
    N_EXPONENT,
    N_MANTISSA,
    N_TOKENS,
    MAX_HEIGHT,
    VTE_BITS,
    Constant,
    GrammarViolation,
    PartialTree,
    Token,
    UpdateRule,
    encode_vte,
    valid_token_mask,
)

HIDDEN = 16
N_GATES = 4 * HIDDEN  # input, forget, cell, output
N_FLA = 9
MAX_TOKENS = 31

# (name, shape, fan_in) of every learnable policy tensor
POLICY_TENSORS = (
    ("w_fla", (N_FLA, HIDDEN), N_FLA),
    ("b_fla", (HIDDEN,), None),
    ("w_in", (VTE_BITS, N_GATES), VTE_BITS),
    ("b_in", (N_GATES,), None),
    ("w_h", (HIDDEN, N_GATES), HIDDEN),
    ("b_h", (N_GATES,), None),
    ("w_tok", (HIDDEN, N_TOKENS), HIDDEN),
    ("b_tok", (N_TOKENS,), None),
    ("w_man", (HIDDEN, N_MANTISSA), HIDDEN),
    ("b_man", (N_MANTISSA,), None),
    ("w_exp", (HIDDEN, N_EXPONENT), HIDDEN),
    ("b_exp", (N_EXPONENT,), None),
)


@dataclass
class PolicyParams:
    w_fla: np.ndarray
    b_fla: np.ndarray
    w_in: np.ndarray
    b_in: np.ndarray
    w_h: np.ndarray
    b_h: np.ndarray
    w_tok: np.ndarray
    b_tok: np.ndarray
    w_man: np.ndarray
    b_man: np.ndarray
    w_exp: np.ndarray
    b_exp: np.ndarray

    def as_dict(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name, _, _ in POLICY_TENSORS}

    def copy(self) -> "PolicyParams":
        return PolicyParams(**{k: v.copy() for k, v in self.as_dict().items()})

    @classmethod
    def from_dict(cls, tensors: dict[str, np.ndarray]) -> "PolicyParams":
        for name, shape, _ in POLICY_TENSORS:
            if name not in tensors:
                raise KeyError(f"missing policy tensor {name}")
            if tuple(tensors[name].shape) != shape:
                raise ValueError(f"tensor {name} has shape {tensors[name].shape}, want {shape}")
        return cls(**{name: np.asarray(tensors[name], dtype=np.float64)
                      for name, _, _ in POLICY_TENSORS})

    @classmethod
    def zeros(cls) -> "PolicyParams":
        return cls(**{name: np.zeros(shape) for name, shape, _ in POLICY_TENSORS})


@dataclass
class CriticParams:
    w: np.ndarray  # (9,)
    b: float

    def copy(self) -> "CriticParams":
        return CriticParams(self.w.copy(), float(self.b))


def init_params(seed: int, scale: float = 1.0) -> tuple[PolicyParams, CriticParams]:
    """Uniform weights in [-scale/sqrt(fan_in), +scale/sqrt(fan_in)], zero biases."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape, fan_in in POLICY_TENSORS:
        if fan_in is None:
            tensors[name] = np.zeros(shape)
        else:
            bound = scale / np.sqrt(fan_in)
            tensors[name] = rng.uniform(-bound, bound, size=shape)
    critic = CriticParams(w=rng.uniform(-scale / 3.0, scale / 3.0, size=N_FLA), b=0.0)
    return PolicyParams.from_dict(tensors), critic


def critic_value(critic: CriticParams, fla) -> float:
    s = _fla_array(fla)
    return float(s @ critic.w + critic.b)


def _fla_array(fla) -> np.ndarray:
    if hasattr(fla, "as_array"):
        return fla.as_array()
    return np.asarray(fla, dtype=np.float64)


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _lstm_step(params: PolicyParams, x, h, c):
    """One cell update; works for (B, .) batches and bare vectors."""
    gates = x @ params.w_in + params.b_in + h @ params.w_h + params.b_h
    i = _sigmoid(gates[..., 0 * HIDDEN:1 * HIDDEN])
    f = _sigmoid(gates[..., 1 * HIDDEN:2 * HIDDEN])
    g = np.tanh(gates[..., 2 * HIDDEN:3 * HIDDEN])
    o = _sigmoid(gates[..., 3 * HIDDEN:4 * HIDDEN])
    c_new = f * c + i * g
    tanh_c = np.tanh(c_new)
    h_new = o * tanh_c
    return h_new, c_new, (i, f, g, o, tanh_c)


def _masked_log_softmax(logits, mask):
    """(logp, p, entropy) of a categorical restricted to masked-in entries."""
    neg = np.where(mask, logits, -np.inf)
    m = np.max(neg, axis=-1, keepdims=True)
    ex = np.where(mask, np.exp(neg - m), 0.0)
    total = np.sum(ex, axis=-1, keepdims=True)
    p = ex / total
    logp = np.where(mask, neg - (m + np.log(total)), 0.0)
    entropy = -np.sum(np.where(mask, p * logp, 0.0), axis=-1)
    return logp, p, entropy


def _sample_index(p: np.ndarray, rng: np.random.Generator) -> int:
    cdf = np.cumsum(p)
    k = int(np.searchsorted(cdf, rng.random(), side="right"))
    k = min(k, len(p) - 1)
    if p[k] <= 0.0:  # float-edge guard: never return a masked token
        k = int(np.argmax(p))
    return k


class DecisionStep(NamedTuple):
    """One autoregressive choice: the tree embedding seen, the grammar mask,
    the token taken and (for constants) the grid indices chosen."""

    vte: np.ndarray
    mask: np.ndarray
    token: int
    mantissa_idx: int   # -1 unless token is CONST
    exponent_idx: int


def decision_steps(rule: UpdateRule, max_height: int = MAX_HEIGHT) -> list[DecisionStep]:
    """Replay a rule through the masked builder, recording each choice."""
    tree = PartialTree.empty(max_height)
    steps = []
    ci = 0
    for t in rule.tokens:
        mask = valid_token_mask(tree)
        if not mask[int(t)]:
            raise GrammarViolation(
                f"rule is not mask-reachable: token {t.name} masked at step {len(steps)}")
        if t is Token.CONST:
            const = rule.constants[ci]
            ci += 1
            steps.append(DecisionStep(encode_vte(tree), mask, int(t),
                                      const.mantissa_idx, const.exponent_idx))
        else:
            steps.append(DecisionStep(encode_vte(tree), mask, int(t), -1, -1))
        tree = tree.append(t)
    return steps


def _score_steps(params: PolicyParams, fla, steps) -> tuple[float, float]:
    """Log-probability and entropy sum of a fixed decision sequence.

    The arithmetic order here is the one used during sampling, so replaying
    a generated rule reproduces its sampled log-probability.
    """
    s = _fla_array(fla)
    h = np.zeros(HIDDEN)
    c = s @ params.w_fla + params.b_fla
    logprob = 0.0
    entropy = 0.0
    for st in steps:
        h, c, _ = _lstm_step(params, st.vte, h, c)
        logits = h @ params.w_tok + params.b_tok
        logp, _, ent = _masked_log_softmax(logits, st.mask)
        logprob += float(logp[st.token])
        entropy += float(ent)
        if st.token == int(Token.CONST):
            full = np.ones(N_MANTISSA, dtype=bool)
            logp_m, _, ent_m = _masked_log_softmax(h @ params.w_man + params.b_man, full)
            logprob += float(logp_m[st.mantissa_idx])
            entropy += float(ent_m)
            full_e = np.ones(N_EXPONENT, dtype=bool)
            logp_e, _, ent_e = _masked_log_softmax(h @ params.w_exp + params.b_exp, full_e)
            logprob += float(logp_e[st.exponent_idx])
            entropy += float(ent_e)
    return logprob, entropy


def generate_rule(params: PolicyParams, fla, rng: np.random.Generator,
                  max_height: int = MAX_HEIGHT, return_steps: bool = False):
    """Sample a complete update rule autoregressively.

    Returns (rule, total log-prob, entropy sum); with ``return_steps`` the
    recorded decision sequence is appended (useful to avoid replaying the
    grammar when the rule is later re-scored in a training batch).
    """
    s = _fla_array(fla)
    tree = PartialTree.empty(max_height)
    h = np.zeros(HIDDEN)
    c = s @ params.w_fla + params.b_fla
    logprob = 0.0
    entropy = 0.0
    tokens: list[Token] = []
    constants: list[Constant] = []
    steps: list[DecisionStep] = []
    while not tree.is_complete:
        vte = encode_vte(tree)
        h, c, _ = _lstm_step(params, vte, h, c)
        mask = valid_token_mask(tree)
        logits = h @ params.w_tok + params.b_tok
        logp, p, ent = _masked_log_softmax(logits, mask)
        k = _sample_index(p, rng)
        logprob += float(logp[k])
        entropy += float(ent)
        mi = ei = -1
        if k == int(Token.CONST):
            full = np.ones(N_MANTISSA, dtype=bool)
            logp_m, p_m, ent_m = _masked_log_softmax(h @ params.w_man + params.b_man, full)
            mi = _sample_index(p_m, rng)
            logprob += float(logp_m[mi])
            entropy += float(ent_m)
            full_e = np.ones(N_EXPONENT, dtype=bool)
            logp_e, p_e, ent_e = _masked_log_softmax(h @ params.w_exp + params.b_exp, full_e)
            ei = _sample_index(p_e, rng)
            logprob += float(logp_e[ei])
            entropy += float(ent_e)
            constants.append(Constant.from_indices(mi, ei))
        token = Token(k)
        steps.append(DecisionStep(vte, mask, k, mi, ei))
        tokens.append(token)
        tree = tree.append(token)
    rule = UpdateRule(tuple(tokens), tuple(constants))
    if return_steps:
        return rule, logprob, entropy, steps
    return rule, logprob, entropy


def logprob_of(params: PolicyParams, fla, rule: UpdateRule,
               max_height: int = MAX_HEIGHT) -> tuple[float, float]:
    """Teacher-forced re-scoring of a rule: (log-prob, entropy sum)."""
    return _score_steps(params, fla, decision_steps(rule, max_height))


# ---------------------------------------------------------------------------
# batched scoring and exact gradients for PPO


@dataclass
class LossConfig:
    clip_eps: float = 0.2
    value_coef: float = 0.5
    entropy_coef: float = 0.01


@dataclass
class PpoBatch:
    """Padded decision sequences for a set of transitions."""

    fla: np.ndarray          # (B, 9)
    x: np.ndarray            # (B, L, 124) uint8 tree embeddings
    mask: np.ndarray         # (B, L, 10) bool
    token: np.ndarray        # (B, L) int, -1 on padding
    mantissa: np.ndarray     # (B, L) int, -1 unless const step
    exponent: np.ndarray     # (B, L) int
    active: np.ndarray       # (B, L) bool
    old_logprob: np.ndarray  # (B,)
    returns: np.ndarray      # (B,)
    advantage: np.ndarray    # (B,)

    @property
    def size(self) -> int:
        return self.fla.shape[0]


def prepare_batch(transitions, max_height: int = MAX_HEIGHT) -> PpoBatch:
    """Pack transitions (objects with fla, rule/steps, old_logprob, ret,
    advantage attributes) into padded arrays."""
    all_steps = []
    for tr in transitions:
        steps = getattr(tr, "steps", None)
        if steps is None:
            steps = decision_steps(tr.rule, max_height)
        all_steps.append(steps)
    b = len(transitions)
    length = max(len(s) for s in all_steps)
    x = np.zeros((b, length, VTE_BITS), dtype=np.uint8)
    mask = np.zeros((b, length, N_TOKENS), dtype=bool)
    token = np.full((b, length), -1, dtype=np.int64)
    mantissa = np.full((b, length), -1, dtype=np.int64)
    exponent = np.full((b, length), -1, dtype=np.int64)
    active = np.zeros((b, length), dtype=bool)
    for bi, steps in enumerate(all_steps):
        for ti, st in enumerate(steps):
            x[bi, ti] = st.vte
            mask[bi, ti] = st.mask
            token[bi, ti] = st.token
            mantissa[bi, ti] = st.mantissa_idx
            exponent[bi, ti] = st.exponent_idx
            active[bi, ti] = True
        # keep padded softmaxes well defined
        mask[bi, len(steps):, :] = True
    return PpoBatch(
        fla=np.stack([_fla_array(tr.fla) for tr in transitions]),
        x=x, mask=mask, token=token, mantissa=mantissa, exponent=exponent,
        active=active,
        old_logprob=np.array([tr.old_logprob for tr in transitions]),
        returns=np.array([tr.ret for tr in transitions]),
        advantage=np.array([tr.advantage for tr in transitions]),
    )


def _forward_batch(params: PolicyParams, batch: PpoBatch, keep_cache: bool):
    b, length, _ = batch.x.shape
    h = np.zeros((b, HIDDEN))
    c = batch.fla @ params.w_fla + params.b_fla
    logprob = np.zeros(b)
    entropy = np.zeros(b)
    cache = [] if keep_cache else None
    rows = np.arange(b)
    const_tok = int(Token.CONST)
    for t in range(length):
        x_t = batch.x[:, t].astype(np.float64)
        h_prev, c_prev = h, c
        h, c, gates = _lstm_step(params, x_t, h_prev, c_prev)
        act = batch.active[:, t]
        tok = np.where(act, batch.token[:, t], 0)

        logits = h @ params.w_tok + params.b_tok
        logp, p, ent = _masked_log_softmax(logits, batch.mask[:, t])
        logprob += np.where(act, logp[rows, tok], 0.0)
        entropy += np.where(act, ent, 0.0)

        is_const = act & (batch.token[:, t] == const_tok)
        mi = np.where(is_const, batch.mantissa[:, t], 0)
        ei = np.where(is_const, batch.exponent[:, t], 0)
        full_m = np.ones((b, N_MANTISSA), dtype=bool)
        logp_m, p_m, ent_m = _masked_log_softmax(h @ params.w_man + params.b_man, full_m)
        full_e = np.ones((b, N_EXPONENT), dtype=bool)
        logp_e, p_e, ent_e = _masked_log_softmax(h @ params.w_exp + params.b_exp, full_e)
        logprob += np.where(is_const, logp_m[rows, mi] + logp_e[rows, ei], 0.0)
        entropy += np.where(is_const, ent_m + ent_e, 0.0)

        if keep_cache:
            cache.append({
                "x": x_t, "h_prev": h_prev, "c_prev": c_prev, "h": h,
                "gates": gates,
                "p": p, "logp": logp, "ent": ent, "tok": tok, "act": act,
                "is_const": is_const, "mi": mi, "ei": ei,
                "p_m": p_m, "logp_m": logp_m, "ent_m": ent_m,
                "p_e": p_e, "logp_e": logp_e, "ent_e": ent_e,
            })
    return logprob, entropy, cache


def batch_logprobs(params: PolicyParams, batch: PpoBatch):
    """New log-probs and entropy sums for every transition in the batch."""
    logprob, entropy, _ = _forward_batch(params, batch, keep_cache=False)
    return logprob, entropy


def ppo_loss(params: PolicyParams, critic: CriticParams, batch: PpoBatch,
             cfg: LossConfig):
    """Clipped-surrogate PPO loss with value and entropy terms.

    L = -E[min(r A, clip(r) A)] + c_v E[(v - G)^2] - c_e E[entropy].
    """
    logprob, entropy, _ = _forward_batch(params, batch, keep_cache=False)
    ratio = np.exp(logprob - batch.old_logprob)
    adv = batch.advantage
    clipped = np.clip(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps)
    surrogate = np.minimum(ratio * adv, clipped * adv)
    values = batch.fla @ critic.w + critic.b
    value_loss = np.mean((values - batch.returns) ** 2)
    loss = (-np.mean(surrogate)
            + cfg.value_coef * value_loss
            - cfg.entropy_coef * np.mean(entropy))
    diagnostics = {
        "mean_ratio": float(np.mean(ratio)),
        "value_loss": float(value_loss),
        "entropy": float(np.mean(entropy)),
        "ratios": ratio,
    }
    return float(loss), diagnostics


def policy_gradient(params: PolicyParams, critic: CriticParams, batch: PpoBatch,
                    cfg: LossConfig):
    """Exact gradients of ppo_loss for every policy tensor and the critic.

    Returns (policy grads dict, critic grads dict, diagnostics).
    """
    if not (np.isfinite(batch.advantage).all() and np.isfinite(batch.returns).all()
            and np.isfinite(batch.old_logprob).all()):
        raise ValueError("non-finite inputs in PPO batch")
    b = batch.size
    logprob, entropy, cache = _forward_batch(params, batch, keep_cache=True)
    ratio = np.exp(logprob - batch.old_logprob)
    adv = batch.advantage
    lo, hi = 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps
    unclipped = ratio * adv
    clipped = np.clip(ratio, lo, hi) * adv
    use_unclipped = unclipped <= clipped
    inside = (ratio > lo) & (ratio < hi)
    # d(-mean min)/d logprob: ratio*adv through exp where the active branch
    # depends on logprob
    g_lp = -np.where(use_unclipped | inside, ratio * adv, 0.0) / b
    g_ent = -cfg.entropy_coef / b  # shared by every transition

    grads = {name: np.zeros(shape) for name, shape, _ in POLICY_TENSORS}
    length = len(cache)
    dh = np.zeros((b, HIDDEN))
    dc = np.zeros((b, HIDDEN))
    rows = np.arange(b)
    for t in reversed(range(length)):
        cc = cache[t]
        act = cc["act"]
        w_lp = np.where(act, g_lp, 0.0)[:, None]
        w_ent = np.where(act, g_ent, 0.0)[:, None]

        # token head
        p, logp = cc["p"], cc["logp"]
        onehot = np.zeros_like(p)
        onehot[rows, cc["tok"]] = 1.0
        mask_t = batch.mask[:, t]
        d_ent = np.where(mask_t, -p * (logp + cc["ent"][:, None]), 0.0)
        dlogits = w_lp * (onehot - p) + w_ent * d_ent
        dlogits = np.where(mask_t, dlogits, 0.0)
        grads["w_tok"] += cc["h"].T @ dlogits
        grads["b_tok"] += dlogits.sum(axis=0)
        dh_t = dlogits @ params.w_tok.T

        # constant heads
        wc_lp = np.where(cc["is_const"], g_lp, 0.0)[:, None]
        wc_ent = np.where(cc["is_const"], g_ent, 0.0)[:, None]
        for head, p_h, logp_h, ent_h, idx_h, n_h in (
                ("man", cc["p_m"], cc["logp_m"], cc["ent_m"], cc["mi"], N_MANTISSA),
                ("exp", cc["p_e"], cc["logp_e"], cc["ent_e"], cc["ei"], N_EXPONENT)):
            onehot_h = np.zeros((b, n_h))
            onehot_h[rows, idx_h] = 1.0
            d_ent_h = -p_h * (logp_h + ent_h[:, None])
            dl = wc_lp * (onehot_h - p_h) + wc_ent * d_ent_h
            grads[f"w_{head}"] += cc["h"].T @ dl
            grads[f"b_{head}"] += dl.sum(axis=0)
            dh_t = dh_t + dl @ getattr(params, f"w_{head}").T

        dh = dh + dh_t
        # LSTM cell backward
        i, f, g, o, tanh_c = cc["gates"]
        do = dh * tanh_c
        dcell = dc + dh * o * (1.0 - tanh_c * tanh_c)
        di = dcell * g
        df = dcell * cc["c_prev"]
        dg = dcell * i
        dc = dcell * f
        dpre = np.concatenate([
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            dg * (1.0 - g * g),
            do * o * (1.0 - o),
        ], axis=1)
        grads["w_in"] += cc["x"].T @ dpre
        grads["b_in"] += dpre.sum(axis=0)
        grads["w_h"] += cc["h_prev"].T @ dpre
        grads["b_h"] += dpre.sum(axis=0)
        dh = dpre @ params.w_h.T
    # initial cell state came from the feature embedder
    grads["w_fla"] += batch.fla.T @ dc
    grads["b_fla"] += dc.sum(axis=0)

    values = batch.fla @ critic.w + critic.b
    dv = 2.0 * cfg.value_coef * (values - batch.returns) / b
    critic_grads = {"w": batch.fla.T @ dv, "b": float(dv.sum())}

    value_loss = float(np.mean((values - batch.returns) ** 2))
    loss = (-float(np.mean(np.minimum(unclipped, clipped)))
            + cfg.value_coef * value_loss
            - cfg.entropy_coef * float(np.mean(entropy)))
    diagnostics = {
        "loss": loss,
        "mean_ratio": float(np.mean(ratio)),
        "value_loss": value_loss,
        "entropy": float(np.mean(entropy)),
    }
    return grads, critic_grads, diagnostics
