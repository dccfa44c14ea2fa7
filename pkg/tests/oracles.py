"""Loop-by-loop reference implementations used to cross-check the vectorized code."""

from __future__ import annotations

import math
from fractions import Fraction


def rho(y, f, q):
    return 2 * (1 - q) * (f - y) if y < f else 2 * q * (y - f)


def seasonal_error(y, m):
    total, n = 0.0, 0
    for t in range(m, len(y)):
        if math.isnan(y[t]) or math.isnan(y[t - m]):
            continue
        total += abs(y[t] - y[t - m])
        n += 1
    return total / n


def mase(Y, F, A):
    N, D, H = len(Y), len(Y[0]), len(Y[0][0])
    total, n = 0.0, 0
    for i in range(N):
        for d in range(D):
            for t in range(H):
                if math.isnan(Y[i][d][t]):
                    continue
                total += abs(Y[i][d][t] - F[i][d][t]) / A[i][d]
                n += 1
    return total / n


def sql(Y, QF, A, levels):
    N, D, H = len(Y), len(Y[0]), len(Y[0][0])
    total, n = 0.0, 0
    for i in range(N):
        for d in range(D):
            for t in range(H):
                if math.isnan(Y[i][d][t]):
                    continue
                for k, q in enumerate(levels):
                    total += rho(Y[i][d][t], QF[i][d][t][k], q) / A[i][d]
                n += 1
    return total / n


def wape(Y, F):
    num = den = 0.0
    for i, rows in enumerate(Y):
        for d, row in enumerate(rows):
            for t, y in enumerate(row):
                if math.isnan(y):
                    continue
                num += abs(y - F[i][d][t])
                den += abs(y)
    return num / den


def wql(Y, QF, levels):
    num = den = 0.0
    for i, rows in enumerate(Y):
        for d, row in enumerate(rows):
            for t, y in enumerate(row):
                if math.isnan(y):
                    continue
                num += sum(rho(y, QF[i][d][t][k], q) for k, q in enumerate(levels)) / len(levels)
                den += abs(y)
    return num / den


def win_credits(E):
    """Exact rational win rates by enumeration: (marginal list, pairwise dict)."""
    R, M = len(E), len(E[0])
    pair = {}
    for j in range(M):
        for k in range(M):
            if j == k:
                continue
            c = Fraction(0)
            for r in range(R):
                if E[r][j] < E[r][k]:
                    c += 1
                elif E[r][j] == E[r][k]:
                    c += Fraction(1, 2)
            pair[j, k] = c / R
    marginal = [sum(pair[j, k] for k in range(M) if k != j) / (M - 1) for j in range(M)]
    return marginal, pair


def midranks(E):
    R, M = len(E), len(E[0])
    out = []
    for j in range(M):
        total = Fraction(0)
        for r in range(R):
            less = sum(1 for k in range(M) if E[r][k] < E[r][j])
            tie = sum(1 for k in range(M) if k != j and E[r][k] == E[r][j])
            total += 1 + less + Fraction(tie, 2)
        out.append(total / R)
    return out
