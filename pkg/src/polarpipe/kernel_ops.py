"""Elementary Fast-SSC message operations.

All kernels act on the last axis, so a batch of frames can be passed as a
``(frames, span)`` array. ``quant=None`` means unsaturated float arithmetic.

Tie handling
------------
Every node decoder returns a maximum-likelihood codeword of its constituent
code. When several codewords are equally likely (zero LLRs, equal minimum
magnitudes, a zero repetition sum) the one whose u-domain vector is
lexicographically smallest is chosen. This is exactly the choice min-sum SC
makes with its "decide 0 on a tie" leaf rule, which keeps the pruned decoder
bit-exact with the SC oracle even for integer LLRs.
"""

from __future__ import annotations

import numpy as np

from .code_model import QuantSpec, polar_transform


def _pair(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"length mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    return a, b


def _sat(x, quant: QuantSpec | None):
    return x if quant is None else quant.saturate(x)


def hard_decision(alpha) -> np.ndarray:
    """1 where the LLR is negative; 0 and -0.0 both decide 0."""
    return (np.asarray(alpha) < 0).astype(np.uint8)


def f_op(a, b, quant: QuantSpec | None = None) -> np.ndarray:
    """Min-sum check-node update: sign(a) sign(b) min(|a|, |b|), with sign(0) = +."""
    a, b = _pair(a, b)
    mag = np.minimum(np.abs(a), np.abs(b))
    return np.where((a < 0) ^ (b < 0), -mag, mag)


def g_op(a, b, u, quant: QuantSpec | None = None) -> np.ndarray:
    """Variable-node update b + (1 - 2u) a, saturated in fixed mode."""
    a, b = _pair(a, b)
    u = np.asarray(u)
    if u.shape[-1] != a.shape[-1]:
        raise ValueError(f"length mismatch: bits {u.shape[-1]} vs llrs {a.shape[-1]}")
    return _sat(b + np.where(u.astype(bool), -a, a), quant)


def combine(beta_left, beta_right) -> np.ndarray:
    """Partial-sum merge [beta_l xor beta_r, beta_r]."""
    bl, br = _pair(beta_left, beta_right)
    bl = bl.astype(np.uint8)
    br = br.astype(np.uint8)
    return np.concatenate([bl ^ br, br], axis=-1)


def _check_len(alpha, minimum):
    alpha = np.asarray(alpha)
    if alpha.ndim == 0 or alpha.shape[-1] < minimum:
        raise ValueError(f"node length must be >= {minimum}")
    return alpha


def rate0_decode(alpha, quant: QuantSpec | None = None) -> np.ndarray:
    alpha = _check_len(alpha, 1)
    return np.zeros(alpha.shape, dtype=np.uint8)


def lexmin_completion(hard, free, parity_frozen: bool = False) -> np.ndarray:
    """Fill the ``free`` positions of a hard-decision word.

    Among all completions (restricted to even weight when ``parity_frozen``),
    returns the codeword whose u-domain vector is lexicographically smallest.
    Fixed positions are kept. Runs in O(s log s) per row using the same
    left/right split as the decoder tree: a position of the left-hand partial
    sum is free when either contributing position is free.
    """
    hard = np.asarray(hard, dtype=np.uint8)
    free = np.asarray(free, dtype=bool)
    s = hard.shape[-1]
    if s == 1:
        if parity_frozen:
            return np.zeros_like(hard)
        return np.where(free, 0, hard).astype(np.uint8)
    k = s // 2
    h_lo, h_hi = hard[..., :k], hard[..., k:]
    f_lo, f_hi = free[..., :k], free[..., k:]
    left = lexmin_completion(h_lo ^ h_hi, f_lo | f_hi, parity_frozen)
    h_right = np.where(f_hi, h_lo ^ left, h_hi).astype(np.uint8)
    right = lexmin_completion(h_right, f_lo & f_hi, False)
    return np.concatenate([left ^ right, right], axis=-1)


def rate1_decode(alpha, quant: QuantSpec | None = None) -> np.ndarray:
    """Elementwise hard decision; zero LLRs are resolved by the u-order tie rule."""
    alpha = _check_len(alpha, 1)
    hard = hard_decision(alpha)
    zero = alpha == 0
    if not zero.any():
        return hard
    return lexmin_completion(hard, zero)


def rep_decode(alpha, quant: QuantSpec | None = None) -> np.ndarray:
    """Repetition node: one decision on the summed LLRs, replicated.

    The sum is reduced by halving (first half plus second half) with a
    saturating adder at each level, the same adder tree SC walks through
    the node. A zero sum decides 0.
    """
    alpha = _check_len(alpha, 2)
    acc = alpha
    while acc.shape[-1] > 1:
        h = acc.shape[-1] // 2
        acc = _sat(acc[..., :h] + acc[..., h:], quant)
    return np.broadcast_to(hard_decision(acc), alpha.shape).astype(np.uint8)


def _subset_masks(s: int) -> np.ndarray:
    # row j = polar_transform(e_j): ones at every i whose bits are a subset of j's
    idx = np.arange(s)
    return ((idx[None, :] & idx[:, None]) == idx[None, :]).astype(np.uint8)


def _flip_lexmin(hard, candidates) -> np.ndarray:
    """Flip one candidate position per row, choosing the smallest resulting u."""
    s = hard.shape[-1]
    u_base = polar_transform(hard)
    masks = _subset_masks(s)
    alive = candidates.copy()
    for i in range(s):
        # u_i after flipping j is u_base[i] ^ masks[j, i]
        val = u_base[:, i : i + 1] ^ masks[None, :, i]
        zero_ok = (alive & (val == 0)).any(axis=1, keepdims=True)
        alive &= ~zero_ok | (val == 0)
    choice = alive.argmax(axis=1)
    out = hard.copy()
    out[np.arange(len(out)), choice] ^= 1
    return out


def spc_decode(alpha, quant: QuantSpec | None = None) -> np.ndarray:
    """Single-parity-check node (Wagner rule).

    Hard-decide, then if the parity is odd flip the least reliable position.
    A zero LLR makes parity free; equal minimum magnitudes make several flips
    equally likely. Both cases go through the u-order tie rule.
    """
    alpha = _check_len(alpha, 2)
    shape = alpha.shape
    a = alpha.reshape(-1, shape[-1])
    hard = hard_decision(a)
    out = hard.copy()
    zero = a == 0
    has_zero = zero.any(axis=1)
    if has_zero.any():
        out[has_zero] = lexmin_completion(hard[has_zero], zero[has_zero], parity_frozen=True)
    odd = ~has_zero & (hard.sum(axis=1) % 2 == 1)
    if odd.any():
        mags = np.abs(a[odd])
        cands = mags == mags.min(axis=1, keepdims=True)
        single = cands.sum(axis=1) == 1
        fixed = hard[odd]
        if single.any():
            rows = np.flatnonzero(single)
            fixed[rows, cands[rows].argmax(axis=1)] ^= 1
        if (~single).any():
            fixed[~single] = _flip_lexmin(fixed[~single], cands[~single])
        out[odd] = fixed
    return out.reshape(shape)


LEAF_DECODERS = {
    "Rate0": rate0_decode,
    "Rate1": rate1_decode,
    "Rep": rep_decode,
    "SPC": spc_decode,
}
