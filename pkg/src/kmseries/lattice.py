"""Summation engines over the integer-lattice index sets used by the
identities: the hyperplane y_1+...+y_n = N (bilateral), the non-negative
orthant, the full lattice Z^n, finite boxes 0 <= x_i <= m_i, and
hyperplane-restricted boxes; plus the Vandermonde-ratio kernel common to
all the multivariable terms.

Infinite sums are accumulated shell by shell (shell s = max_i |y_i| for
bilateral geometries, total degree for the orthant) so the outermost shell
maximum is a meaningful tail estimate.  Terms are evaluated from scratch
per index; callers may share a :class:`~kmseries.qarith.Workspace` whose
Pochhammer cache provides the recurrence-accelerated path (validated
against the plain path in the tests).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Iterator

from gmpy2 import mpc, mpfr

from .errors import BudgetExceeded, DegenerateNodes, Diverged
from .qarith import Frac, Workspace

Term = Callable[[tuple[int, ...]], mpc]


@dataclass(frozen=True)
class TruncationPolicy:
    """How an infinite lattice sum is cut off."""

    radius: int = 24
    term_tol: float = 1e-30
    stagnation_window: int = 3
    max_terms: int = 2_000_000

    def __post_init__(self):
        if self.radius < 1:
            raise ValueError("radius must be >= 1")
        if not self.term_tol > 0:
            raise ValueError("term_tol must be positive")
        if self.stagnation_window < 1:
            raise ValueError("stagnation_window must be >= 1")
        if self.max_terms < 1:
            raise ValueError("max_terms must be >= 1")


@dataclass
class SumDiagnostics:
    """What the engine observed while summing."""

    terms_evaluated: int = 0
    largest_shell_tail: float = 0.0
    converged: bool = False
    pole_hits: int = 0

    @classmethod
    def exact(cls, terms: int = 1) -> "SumDiagnostics":
        """Diagnostics for a finite (truncation-free) sum."""
        return cls(terms_evaluated=terms, largest_shell_tail=0.0, converged=True)


def vandermonde_ratio(z: list, y: tuple[int, ...], ws: Workspace) -> mpc:
    """Delta(z q^y)/Delta(z) (q mode) or Delta(z+y)/Delta(z) (classical).

    ``z`` entries are raw mpc nodes; value is 1 for n = 1 or y = 0 and is
    invariant under simultaneous permutation of (z_i, y_i) pairs.
    """
    n = len(z)
    for i in range(n):
        for j in range(i + 1, n):
            if z[i] == z[j]:
                raise DegenerateNodes(f"z[{i}] == z[{j}] == {z[i]}")
    return Frac(ws).vandermonde([mpc(v) for v in z], y).value()


# ---------------------------------------------------------------------------
# finite sums
# ---------------------------------------------------------------------------


def sum_box(term: Term, m: tuple[int, ...]) -> mpc:
    """Exact sum of ``term`` over the box 0 <= x_i <= m_i, lexicographic order.

    The empty box (p = 0) contributes the single empty-index term.
    """
    total = mpc(0)
    for x in product(*(range(mi + 1) for mi in m)):
        total += term(x)
    return total


def iter_box_hyperplane(m: tuple[int, ...], N: int) -> Iterator[tuple[int, ...]]:
    """Lattice points of the box with coordinate sum N, lexicographic."""
    p = len(m)
    if p == 0:
        if N == 0:
            yield ()
        return

    def rec(i: int, remaining: int, prefix: tuple[int, ...]):
        if i == p - 1:
            if 0 <= remaining <= m[i]:
                yield prefix + (remaining,)
            return
        lo = max(0, remaining - sum(m[i + 1:]))
        hi = min(m[i], remaining)
        for v in range(lo, hi + 1):
            yield from rec(i + 1, remaining - v, prefix + (v,))

    yield from rec(0, N, ())


def sum_box_hyperplane(term: Term, m: tuple[int, ...], N: int) -> mpc:
    """Exact sum over box points with |x| = N (empty index set sums to 0)."""
    total = mpc(0)
    for x in iter_box_hyperplane(m, N):
        total += term(x)
    return total


# ---------------------------------------------------------------------------
# infinite sums
# ---------------------------------------------------------------------------


def _run_shells(
    shells: Iterator[list[tuple[int, ...]]],
    term: Term,
    policy: TruncationPolicy,
) -> tuple[mpc, SumDiagnostics]:
    total = mpc(0)
    diag = SumDiagnostics()
    window: list[float] = []
    prev_max = None
    growth_streak = 0
    seen_points = False
    for shell in shells:
        # shells below |N|/n are geometrically empty; they carry no
        # information and must not feed the stagnation window
        if not shell and not seen_points:
            continue
        seen_points = True
        shell_max = 0.0
        for y in shell:
            diag.terms_evaluated += 1
            if diag.terms_evaluated > policy.max_terms:
                raise BudgetExceeded(f"term budget {policy.max_terms} exhausted")
            t = term(y)
            total += t
            a = float(abs(t))
            if a > shell_max:
                shell_max = a
        diag.largest_shell_tail = shell_max
        window.append(shell_max)
        if len(window) > policy.stagnation_window:
            window.pop(0)
        if (
            len(window) == policy.stagnation_window
            and all(v <= policy.term_tol for v in window)
        ):
            diag.converged = True
            return total, diag
        if prev_max is not None and shell_max > prev_max > 0:
            growth_streak += 1
        else:
            growth_streak = 0
        prev_max = shell_max
    # shell maxima may grow transiently while |base q^s| > 1; only a tail
    # that is still growing when the radius is exhausted signals divergence
    if (
        growth_streak >= policy.stagnation_window
        and prev_max is not None
        and prev_max > 1e9 * policy.term_tol
    ):
        raise Diverged(f"shell maxima still growing at the radius, last = {prev_max}")
    # large interior shells do not make the partial sum inaccurate (their
    # terms are included); what matters at the radius is that the boundary
    # shell is quiet and the maxima are coming down toward it
    if (
        window
        and window[-1] <= policy.term_tol
        and all(window[i] >= window[i + 1] for i in range(len(window) - 1))
    ):
        diag.converged = True
    return total, diag


def _hyperplane_shell(n: int, N: int, s: int) -> list[tuple[int, ...]]:
    """Points with sum = N and max_i |y_i| = s, via the first n-1 coordinates."""
    if n == 1:
        return [(N,)] if abs(N) == s else []
    pts = []
    for head in product(range(-s, s + 1), repeat=n - 1):
        last = N - sum(head)
        if abs(last) > s:
            continue
        y = head + (last,)
        if max(abs(v) for v in y) == s:
            pts.append(y)
    return pts


def sum_hyperplane_bilateral(
    term: Term, n: int, N: int, policy: TruncationPolicy
) -> tuple[mpc, SumDiagnostics]:
    """Sum over all integer y with y_1+...+y_n = N, |y_i| <= radius."""
    shells = (_hyperplane_shell(n, N, s) for s in range(policy.radius + 1))
    return _run_shells(shells, term, policy)


def _lattice_shell(n: int, s: int) -> list[tuple[int, ...]]:
    if s == 0:
        return [(0,) * n]
    pts = []
    for y in product(range(-s, s + 1), repeat=n):
        if max(abs(v) for v in y) == s:
            pts.append(y)
    return pts


def sum_lattice_bilateral(
    term: Term, n: int, policy: TruncationPolicy
) -> tuple[mpc, SumDiagnostics]:
    """Sum over all of Z^n, shell s = max_i |y_i|."""
    shells = (_lattice_shell(n, s) for s in range(policy.radius + 1))
    return _run_shells(shells, term, policy)


def _orthant_shell(n: int, s: int) -> list[tuple[int, ...]]:
    return list(iter_box_hyperplane((s,) * n, s))


def sum_orthant(
    term: Term, n: int, policy: TruncationPolicy
) -> tuple[mpc, SumDiagnostics]:
    """Sum over y_i >= 0 by total-degree shells |y| = s."""
    shells = (_orthant_shell(n, s) for s in range(policy.radius + 1))
    return _run_shells(shells, term, policy)
