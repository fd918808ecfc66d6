"""Compiled inner loops of the design search."""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _bernoulli_entropy(p):
    h = 0.0
    if p > 0.0:
        h -= p * math.log(p)
    if p < 1.0:
        h -= (1.0 - p) * math.log1p(-p)
    return h


@njit(cache=True)
def hole_gain(cx, cy, q, xs, ys, ptab, etab, start, inv_step, out):
    """Mutual information for each candidate (xs[c], ys[c]).

    Row i of q holds the masses of the nodes centred at (cx[i], cy[i]), one
    column per radius (zero for pruned nodes).  ptab[r] / etab[r] tabulate
    p(1) and its Bernoulli entropy against the beam-to-centre distance,
    starting at start[r] with spacing 1/inv_step.  Below the table the
    first entry applies (beam fully inside, or d = 0); beyond it the beam
    is fully blocked.  A candidate whose distance to every centre lies
    below all tables, or beyond all of them, sees the same p at every node
    and gains nothing.
    """
    last = ptab.shape[1] - 1
    xlo, xhi, ylo, yhi = cx.min(), cx.max(), cy.min(), cy.max()
    inner = start.min()
    outer = (start + last / inv_step).max()
    for c in range(xs.size):
        x = xs[c]
        y = ys[c]
        dx_near = max(xlo - x, 0.0, x - xhi)
        dy_near = max(ylo - y, 0.0, y - yhi)
        dx_far = max(abs(x - xlo), abs(x - xhi))
        dy_far = max(abs(y - ylo), abs(y - yhi))
        if (dx_far ** 2 + dy_far ** 2 <= inner ** 2
                or dx_near ** 2 + dy_near ** 2 >= outer ** 2):
            out[c] = 0.0
            continue
        pbar = 0.0
        hsum = 0.0
        for i in range(cx.size):
            d = math.sqrt((x - cx[i]) ** 2 + (y - cy[i]) ** 2)
            for r in range(q.shape[1]):
                w = q[i, r]
                if w == 0.0:
                    continue
                u = (d - start[r]) * inv_step
                if u <= 0.0:
                    p = ptab[r, 0]
                    e = etab[r, 0]
                elif u >= last:
                    continue
                else:
                    k = int(u)
                    f = u - k
                    p = ptab[r, k] + f * (ptab[r, k + 1] - ptab[r, k])
                    e = etab[r, k] + f * (etab[r, k + 1] - etab[r, k])
                pbar += w * p
                hsum += w * e
        out[c] = _bernoulli_entropy(pbar) - hsum
    return out


@njit(cache=True)
def edge_gain(x0, sigma, a, q, m1, m2, xis, phi, pmax, out):
    """Mutual information for each candidate edge position xis[c].

    q[i, j, k] is the mass of node (x0[i], sigma[j], a[k]) (zero for pruned
    nodes).  With p = a g, the sum of q p ln p over one (x0, sigma) pair is
    ``g (m2 + m1 ln g)`` where m1 = sum_k q a and m2 = sum_k q a ln a, so
    erfc and log run once per pair.  (1 - p) ln(1 - p) is read from `phi`,
    a table on [0, pmax] (linear interpolation), and computed directly
    above pmax.  pmax = 0 gives the exact value.
    """
    scale = (phi.size - 1) / pmax if pmax > 0.0 else 0.0
    for c in range(xis.size):
        xi = xis[c]
        pbar = 0.0
        s = 0.0
        for i in range(x0.size):
            for j in range(sigma.size):
                g = 0.5 * math.erfc((xi - x0[i]) / (sigma[j] * 1.4142135623730951))
                if g <= 0.0 or m1[i, j] == 0.0:
                    continue
                pbar += g * m1[i, j]
                s += g * (m2[i, j] + m1[i, j] * math.log(g))
                for k in range(a.size):
                    w = q[i, j, k]
                    if w == 0.0:
                        continue
                    p = a[k] * g
                    if p < pmax:
                        u = p * scale
                        t = int(u)
                        s += w * (phi[t] + (u - t) * (phi[t + 1] - phi[t]))
                    elif p < 1.0:
                        s += w * (1.0 - p) * math.log1p(-p)
        out[c] = _bernoulli_entropy(pbar) + s
    return out


def warmup():
    """Compile (or load from cache) both kernels."""
    out = np.empty(1)
    z = np.zeros(1)
    hole_gain(z, z, np.zeros((1, 1)), z, z, np.zeros((1, 2)), np.zeros((1, 2)), z, 1.0, out)
    edge_gain(z, np.ones(1), np.ones(1), np.zeros((1, 1, 1)), np.zeros((1, 1)), np.zeros((1, 1)),
              z, np.zeros(2), 0.0, out)
