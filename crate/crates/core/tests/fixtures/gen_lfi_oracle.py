"""Regenerate lfi_oracle.tsv: local importance references from 60-digit arithmetic.

Columns: p, p_ablated, pseudo_label, pseudo_loss, prediction_ratio. Inputs are
printed with repr() so they parse back to the exact same doubles; the
reference values are evaluated on those doubles, not on rounded intermediates.
"""

import random

import mpmath

mpmath.mp.dps = 60
EPS = 1e-6


def draw_p(rng):
    kind = rng.random()
    if kind < 0.2:
        return 10 ** rng.uniform(-6, -1)
    if kind < 0.4:
        return 1 - 10 ** rng.uniform(-6, -1)
    return rng.uniform(EPS, 1 - EPS)


def draw_q(rng, p):
    if rng.random() < 0.5:
        q = p * (1 + rng.choice([-1, 1]) * 10 ** rng.uniform(-12, -0.5))
    else:
        q = draw_p(rng)
    return min(max(q, EPS), 1 - EPS)


def main():
    rng = random.Random(20240601)
    lines = ["# p\tp_ablated\tpseudo_label\tpseudo_loss\tprediction_ratio"]
    for _ in range(1000):
        p = draw_p(rng)
        q = draw_q(rng, p)
        y = rng.randint(0, 1)
        mp, mq = mpmath.mpf(p), mpmath.mpf(q)
        if y == 1:
            loss = mpmath.log(mq / mp)
        else:
            loss = mpmath.log((1 - mq) / (1 - mp))
        ratio = (mp - mq) / mp
        lines.append(
            "\t".join([repr(p), repr(q), str(y), mpmath.nstr(loss, 30), mpmath.nstr(ratio, 30)])
        )
    with open("lfi_oracle.tsv", "w") as f:
        f.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
