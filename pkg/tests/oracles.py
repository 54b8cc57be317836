"""High-precision reference implementations used to freeze expected values.

Deliberately independent of the package: plain-Python mpmath arithmetic at
50 significant digits, no tensors, no shared helpers. Tests assert their
frozen literals against BOTH these oracles and the production code.
"""

from __future__ import annotations

from mpmath import mp, mpf, exp, log, sqrt

mp.dps = 50


def standardize_rows(rows, tau):
    out = []
    for row in rows:
        row = [mpf(v) for v in row]
        mean = sum(row) / len(row)
        std = sqrt(sum((v - mean) ** 2 for v in row) / len(row))
        out.append([(v - mean) / (std * mpf(tau)) for v in row])
    return out


def softmax_row(row):
    row = [mpf(v) for v in row]
    top = max(row)
    exps = [exp(v - top) for v in row]
    total = sum(exps)
    return [e / total for e in exps]


def kl_row(p, q):
    return sum(mpf(pk) * log(mpf(pk) / mpf(qk)) for pk, qk in zip(p, q) if pk > 0)


def kl_mean(p_rows, q_rows):
    terms = [kl_row(p, q) for p, q in zip(p_rows, q_rows)]
    return sum(terms) / len(terms)


def skd_pipeline(original_rows, synthetic_rows, tau):
    p = [softmax_row(r) for r in standardize_rows(original_rows, tau)]
    q = [softmax_row(r) for r in standardize_rows(synthetic_rows, tau)]
    return kl_mean(p, q)
