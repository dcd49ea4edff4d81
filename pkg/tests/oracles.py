"""Independent reference implementations used only by the tests.

None of these import the code paths they check: they count n-grams by
position, enumerate sequences with itertools.product and multiply
probabilities directly.
"""

import itertools
import math


def all_sequences(vocab_size, eos, max_len, include_capped=False):
    body = [t for t in range(vocab_size) if t != eos]
    for length in range(1, max_len + 1):
        for head in itertools.product(body, repeat=length - 1):
            yield head + (eos,)
    if include_capped:
        yield from itertools.product(body, repeat=max_len)


def seq_prob(model, src, ids, t=1.0):
    p = 1.0
    for i, tok in enumerate(ids):
        row = [float(x) ** (1.0 / t) for x in model.conditional(src, ids[:i])]
        p *= row[tok] / math.fsum(row)
    return p


def brute_topn(model, src, n, max_len, include_capped=False):
    scored = [
        (seq_prob(model, src, ids), ids)
        for ids in all_sequences(model.vocab_size, model.vocab.eos_id, max_len, include_capped)
    ]
    scored = [(p, ids) for p, ids in scored if p > 0]
    scored.sort(key=lambda e: (-e[0], e[1]))
    return scored[:n]


def ngram_list(tokens, n):
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def clipped_matches(hyp_grams, ref_grams):
    pool = list(ref_grams)
    m = 0
    for g in hyp_grams:
        if g in pool:
            pool.remove(g)
            m += 1
    return m


def bleu(h, r, max_order=4):
    h, r = list(h), list(r)
    if not h or not r:
        return 0.0
    prod = 1.0
    for n in range(1, max_order + 1):
        hg = ngram_list(h, n)
        if not hg:
            continue
        m = clipped_matches(hg, ngram_list(r, n))
        prod *= (m / len(hg)) if m else 1.0 / (len(hg) + 1)
    bp = 1.0 if len(h) > len(r) else math.exp(1 - len(r) / len(h))
    return bp * prod ** (1.0 / max_order)


def chrf(h, r, order=6, beta=2.0):
    h = "".join(h.split())
    r = "".join(r.split())
    if not h and not r:
        return 1.0
    if not h or not r:
        return 0.0
    ps, rs = [], []
    for n in range(1, order + 1):
        hg = [h[i:i + n] for i in range(len(h) - n + 1)]
        rg = [r[i:i + n] for i in range(len(r) - n + 1)]
        if not hg or not rg:
            continue
        m = clipped_matches(hg, rg)
        ps.append(m / len(hg))
        rs.append(m / len(rg))
    p, rc = sum(ps) / len(ps), sum(rs) / len(rs)
    if p + rc == 0:
        return 0.0
    return (1 + beta**2) * p * rc / (beta**2 * p + rc)


def kendall_tau_b(x, y):
    x, y = [float(a) for a in x], [float(b) for b in y]
    n = len(x)
    conc = disc = tx = ty = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = (x[i] > x[j]) - (x[i] < x[j])
            dy = (y[i] > y[j]) - (y[i] < y[j])
            if dx == 0 and dy == 0:
                continue
            if dx == 0:
                tx += 1
            elif dy == 0:
                ty += 1
            elif dx == dy:
                conc += 1
            else:
                disc += 1
    return (conc - disc) / math.sqrt((conc + disc + tx) * (conc + disc + ty))


def straight_line_mbr(seqs, utility):
    """Plain sampling MBR: every candidate is both hypothesis and reference."""
    n = len(seqs)
    best_i, best_mu = 0, None
    mus = []
    for i, h in enumerate(seqs):
        s = 0.0
        for r in seqs:
            s += utility(h, r)
        mu = s / n
        mus.append(mu)
        if best_mu is None or mu > best_mu:
            best_i, best_mu = i, mu
    return best_i, best_mu, mus
