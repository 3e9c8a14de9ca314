"""Independent dense reference built from plain Jordan-Wigner matrices.

Modes are interleaved (site 0 up, site 0 down, site 1 up, ...) with conduction
sites first, unlike the package.  Sectors are selected with penalty terms
instead of basis enumeration, so nothing here shares code with the package.
"""

from functools import reduce

import numpy as np

SZ = np.diag([1.0, -1.0])
LOWER = np.array([[0.0, 1.0], [0.0, 0.0]])  # |1> -> |0>
I2 = np.eye(2)


def annihilators(n_modes):
    ops = []
    for k in range(n_modes):
        factors = [SZ] * k + [LOWER] + [I2] * (n_modes - k - 1)
        ops.append(reduce(np.kron, factors))
    return ops


class Fermions:
    def __init__(self, n_sites):
        self.n = n_sites
        self.a = annihilators(2 * n_sites)
        self.dim = 2 ** (2 * n_sites)
        self.I = np.eye(self.dim)

    def c(self, site, spin):
        return self.a[2 * site + spin]

    def cd(self, site, spin):
        return self.a[2 * site + spin].T

    def n_op(self, site, spin):
        return self.cd(site, spin) @ self.c(site, spin)

    def splus(self, site):
        return self.cd(site, 0) @ self.c(site, 1)

    def sz(self, site):
        return 0.5 * (self.n_op(site, 0) - self.n_op(site, 1))

    def total_number(self):
        return sum(self.n_op(s, sp) for s in range(self.n) for sp in (0, 1))

    def total_sz(self):
        return sum(self.sz(s) for s in range(self.n))

    def total_s2(self):
        Sp = sum(self.splus(s) for s in range(self.n))
        Sz = self.total_sz()
        return 0.5 * (Sp @ Sp.T + Sp.T @ Sp) + Sz @ Sz


def electron_terms(t, J, U, fs: Fermions):
    """(H_electron, list of n_x^c) with conduction sites 0..L-1 and localized L..L+O-1."""
    L, O = J.shape
    H = np.zeros((fs.dim, fs.dim))
    for x in range(L):
        for y in range(L):
            for s in (0, 1):
                H -= t[x, y] * fs.cd(x, s) @ fs.c(y, s)
    for x in range(L):
        for u in range(O):
            f = L + u
            H += J[x, u] * (0.5 * (fs.splus(x) @ fs.splus(f).T + fs.splus(x).T @ fs.splus(f)) + fs.sz(x) @ fs.sz(f))
    nc = [fs.n_op(x, 0) + fs.n_op(x, 1) for x in range(L)]
    for x in range(L):
        for y in range(L):
            H += U[x, y] * (nc[x] - fs.I) @ (nc[y] - fs.I)
    return H, nc


def sector_penalty(fs: Fermions, n_lambda):
    """Zero exactly on N electrons, S^z = 0, one electron per localized site."""
    N = fs.total_number()
    P = (N - fs.n * fs.I) @ (N - fs.n * fs.I) + fs.total_sz() @ fs.total_sz()
    for f in range(n_lambda, fs.n):
        nf = fs.n_op(f, 0) + fs.n_op(f, 1)
        P += (nf - fs.I) @ (nf - fs.I)
    return P


def full_hamiltonian(t, J, U, g, omega0, n_max):
    """Dense H on (electron Fock space) ⊗ (phonons truncated at n_max), plus helpers."""
    L, O = J.shape
    fs = Fermions(L + O)
    He, nc = electron_terms(np.asarray(t), np.asarray(J), np.asarray(U), fs)
    d = n_max + 1
    b1 = np.diag(np.sqrt(np.arange(1, d)), 1)
    Ib = np.eye(d)

    def boson(op, mode):
        return reduce(np.kron, [op if k == mode else Ib for k in range(L)]) if L else np.eye(1)

    Dph = d**L
    Iph = np.eye(Dph)
    H = np.kron(He, Iph)
    for y in range(L):
        B = boson(b1, y)
        H += omega0 * np.kron(fs.I, B.T @ B)
        for x in range(L):
            if g[x][y]:
                H += g[x][y] * np.kron(nc[x], B + B.T)
    return H, fs, Dph


def sector_ground_states(t, J, U, g, omega0, n_max, k=2, penalty=50.0):
    """Lowest k energies in the physical sector and <S²> of the lowest state."""
    H, fs, Dph = full_hamiltonian(t, J, U, g, omega0, n_max)
    P = np.kron(sector_penalty(fs, np.asarray(J).shape[0]), np.eye(Dph))
    w, V = np.linalg.eigh(H + penalty * P)
    psi = V[:, 0]
    S2 = np.kron(fs.total_s2(), np.eye(Dph))
    return w[:k], float(psi @ S2 @ psi)
