"""Analytic PPO gradients against central finite differences."""

import numpy as np

from symbopt.policy import (LossConfig, generate_rule, init_params,
                            policy_gradient, ppo_loss, prepare_batch)


def make_batch(params, rng, n=3):
    trs = []
    for _ in range(n):
        fla = rng.normal(size=9)
        rule, lp, ent, steps = generate_rule(params, fla, rng, return_steps=True)
        trs.append(type("T", (), dict(
            fla=fla, rule=rule, steps=steps,
            # keep ratios strictly inside the clip interval so the min() in
            # the surrogate is smooth at the probe point
            old_logprob=lp + rng.uniform(-0.05, 0.05),
            ret=rng.normal(), advantage=rng.normal()))())
    return prepare_batch(trs)


def relative_errors(params, critic, batch, cfg, rng, coords_per_tensor=6,
                    h=1e-5):
    grads, critic_grads, _ = policy_gradient(params, critic, batch, cfg)
    errors = []

    def fd_at(write, read):
        orig = read()
        write(orig + h)
        up, _ = ppo_loss(params, critic, batch, cfg)
        write(orig - h)
        down, _ = ppo_loss(params, critic, batch, cfg)
        write(orig)
        return (up - down) / (2 * h)

    for name, grad in grads.items():
        tensor = getattr(params, name)
        picks = rng.choice(tensor.size, size=min(coords_per_tensor, tensor.size),
                           replace=False)
        for flat in picks:
            ix = np.unravel_index(int(flat), tensor.shape)
            fd = fd_at(lambda v, ix=ix: tensor.__setitem__(ix, v),
                       lambda ix=ix: tensor[ix])
            an = grad[ix]
            errors.append(abs(fd - an) / max(abs(fd), abs(an), 1e-6))
    for j in range(critic.w.size):
        fd = fd_at(lambda v, j=j: critic.w.__setitem__(j, v),
                   lambda j=j: critic.w[j])
        errors.append(abs(fd - critic_grads["w"][j])
                      / max(abs(fd), abs(critic_grads["w"][j]), 1e-6))
    fd = fd_at(lambda v: setattr(critic, "b", v), lambda: critic.b)
    errors.append(abs(fd - critic_grads["b"])
                  / max(abs(fd), abs(critic_grads["b"]), 1e-6))
    return max(errors)


class TestFiniteDifferences:
    def test_all_tensors_match(self):
        rng = np.random.default_rng(0)
        cfg = LossConfig()
        for seed in range(3):
            params, critic = init_params(seed + 20)
            batch = make_batch(params, rng)
            assert relative_errors(params, critic, batch, cfg, rng) < 1e-4

    def test_gradient_loss_consistency(self):
        rng = np.random.default_rng(1)
        params, critic = init_params(30)
        batch = make_batch(params, rng)
        cfg = LossConfig()
        _, _, diag = policy_gradient(params, critic, batch, cfg)
        loss, _ = ppo_loss(params, critic, batch, cfg)
        assert diag["loss"] == loss

    def test_descent_direction(self):
        # a small step along the negative gradient must lower the loss
        rng = np.random.default_rng(2)
        params, critic = init_params(31)
        batch = make_batch(params, rng)
        cfg = LossConfig()
        grads, critic_grads, _ = policy_gradient(params, critic, batch, cfg)
        before, _ = ppo_loss(params, critic, batch, cfg)
        lr = 1e-3
        for name, g in grads.items():
            getattr(params, name)[...] -= lr * g
        critic.w -= lr * critic_grads["w"]
        critic.b -= lr * critic_grads["b"]
        after, _ = ppo_loss(params, critic, batch, cfg)
        assert after < before

    def test_clipped_transitions_have_zero_policy_gradient(self):
        # when every ratio sits outside the clip region on the clipped-worse
        # side, the policy part of the gradient vanishes
        rng = np.random.default_rng(3)
        params, critic = init_params(32)
        trs = []
        for _ in range(3):
            fla = rng.normal(size=9)
            rule, lp, ent, steps = generate_rule(params, fla, rng, return_steps=True)
            trs.append(type("T", (), dict(
                fla=fla, rule=rule, steps=steps,
                old_logprob=lp - 1.0,   # ratio ~ e > 1.2, advantage > 0
                ret=0.0, advantage=1.0))())
        batch = prepare_batch(trs)
        cfg = LossConfig(entropy_coef=0.0, value_coef=0.0)
        grads, _, _ = policy_gradient(params, critic, batch, cfg)
        for name, g in grads.items():
            assert np.all(g == 0.0), name
