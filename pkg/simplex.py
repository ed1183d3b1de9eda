"""Exact-rational simplex for small packing programs.

Solves  maximize c.y  subject to  A y <= b,  y >= 0  with b >= 0, so the slack
basis is feasible from the start and no first phase is needed. Pivoting follows
Bland's rule, which cannot cycle.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Sequence

logger = logging.getLogger("cover_engine")


@dataclass
class LinearProgramResult:
    value: Fraction
    primal: List[Fraction]
    # One price per constraint; an optimal solution of the dual program
    dual: List[Fraction]


class UnboundedProgram(Exception):
    pass


class SimplexTableau:
    """Dictionary-form tableau: basic = b - A . nonbasic, z = z0 + c . nonbasic"""

    def __init__(self, c: Sequence, A: Sequence[Sequence], b: Sequence):
        self.m = len(A)
        self.n = len(c)
        self.A = [[Fraction(v) for v in row] for row in A]
        self.b = [Fraction(v) for v in b]
        self.c = [Fraction(v) for v in c]
        self.z = Fraction(0)
        # Variables 0..n-1 are the program's, n..n+m-1 the slacks
        self.nb_vars = list(range(self.n))
        self.b_vars = list(range(self.n, self.n + self.m))
        if any(v < 0 for v in self.b):
            raise ValueError("right-hand side must be nonnegative")

    def pivot(self, i: int, j: int) -> None:
        piv = self.A[i][j]
        delta = self.c[j] / piv
        self.z += delta * self.b[i]
        for l in range(self.n):
            self.c[l] -= delta * self.A[i][l]
        self.c[j] = -delta

        row = self.A[i]
        for l in range(self.n):
            row[l] = 1 / piv if l == j else row[l] / piv
        self.b[i] /= piv

        for k in range(self.m):
            if k == i:
                continue
            f = self.A[k][j]
            if f == 0:
                continue
            for l in range(self.n):
                self.A[k][l] = -f / piv if l == j else self.A[k][l] - f * row[l]
            self.b[k] -= f * self.b[i]

        self.nb_vars[j], self.b_vars[i] = self.b_vars[i], self.nb_vars[j]

    def bland_step(self) -> bool:
        """One pivot; False once optimal"""
        candidates = [(self.nb_vars[j], j) for j in range(self.n) if self.c[j] > 0]
        if not candidates:
            return False
        _, j = min(candidates)
        rows = [
            (self.b[i] / self.A[i][j], self.b_vars[i], i)
            for i in range(self.m)
            if self.A[i][j] > 0
        ]
        if not rows:
            raise UnboundedProgram(f"variable {self.nb_vars[j]} can grow without bound")
        _, _, i = min(rows)
        self.pivot(i, j)
        return True

    def solve(self) -> LinearProgramResult:
        steps = 0
        while self.bland_step():
            steps += 1
        logger.debug(f"simplex optimal after {steps} pivots: {self.z}")

        primal = [Fraction(0)] * self.n
        for i, var in enumerate(self.b_vars):
            if var < self.n:
                primal[var] = self.b[i]
        dual = [Fraction(0)] * self.m
        for j, var in enumerate(self.nb_vars):
            if var >= self.n:
                dual[var - self.n] = -self.c[j]
        return LinearProgramResult(value=self.z, primal=primal, dual=dual)


def maximize(c: Sequence, A: Sequence[Sequence], b: Sequence) -> LinearProgramResult:
    return SimplexTableau(c, A, b).solve()
