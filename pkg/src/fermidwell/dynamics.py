"""Ground-state solution and real-time Krylov propagation.

The ground state is obtained by implicitly restarted Lanczos (ARPACK) on the
matrix-free operator with a deterministic seeded start vector.  Real-time
evolution uses adaptive short-iterative Lanczos exponentiation; observable
output times inside an accepted step are evaluated from the same Krylov
subspace, so the step size is not limited by the output sampling interval.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import eigsh

from .fock import ManyBodyState

DEGENERACY_GAP = 1e-10


class ConvergenceError(RuntimeError):
    """Iterative eigensolver did not reach the requested residual."""


class PropagationError(RuntimeError):
    """Adaptive step-size control underflowed while the error stayed large."""


@dataclass(frozen=True)
class PropagationConfig:
    t_final: float = 200.0
    dt_out: float = 0.2
    krylov_dim: int = 20
    tol: float = 1e-9
    dt_max: float = 2.0

    def __post_init__(self):
        if self.t_final <= 0 or self.dt_out <= 0 or self.tol <= 0 or self.dt_max <= 0:
            raise ValueError("t_final, dt_out, tol and dt_max must be positive")
        if self.krylov_dim < 4:
            raise ValueError("krylov_dim must be at least 4")


@dataclass
class GroundStateResult:
    state: ManyBodyState
    energy: float
    residual: float
    iterations: int
    degenerate: bool = False


def ground_state(
    h, tol: float = 1e-10, seed: int = 1234, maxiter: int = 20000, guess: np.ndarray | None = None
) -> GroundStateResult:
    """Lowest eigenpair of the assembled Hamiltonian.

    Deterministic for a fixed seed; an optional real ``guess`` vector seeds
    the iteration (e.g. a non-interacting product determinant), which cuts
    the iteration count dramatically on large spaces.  Flags a
    (near-)degenerate ground state when the gap to the first excited level
    falls below 1e-10.
    """
    n = h.dimension
    if guess is not None:
        v0 = np.asarray(guess, dtype=np.float64).ravel().copy()
        if v0.shape != (n,):
            raise ValueError(f"guess vector must have length {n}")
    else:
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(n)
    v0 /= np.linalg.norm(v0)
    counter = {"n": 0}

    def counted_matvec(v):
        counter["n"] += 1
        return h.matvec(v)

    from scipy.sparse.linalg import LinearOperator

    # all matrix elements are real in the DVR orbital representation
    op = LinearOperator((n, n), matvec=counted_matvec, dtype=np.float64)
    # the second pair is only used for the degeneracy flag; skip it on large
    # spaces where converging it dominates the cost
    k = 2 if 2 < n <= 200_000 else 1
    try:
        vals, vecs = eigsh(op, k=k, which="SA", v0=v0, tol=min(tol, 1e-10), maxiter=maxiter)
    except Exception as exc:  # ARPACK non-convergence
        raise ConvergenceError(f"ground-state eigensolver failed: {exc}") from exc
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    psi = vecs[:, 0].astype(np.complex128)
    psi /= np.linalg.norm(psi)
    # fix the global phase deterministically
    pivot = np.argmax(np.abs(psi))
    psi *= np.exp(-1j * np.angle(psi[pivot]))
    residual = float(np.linalg.norm(h.matvec(psi) - vals[0] * psi))
    if residual > max(tol, 1e-10) * max(1.0, abs(vals[0])):
        raise ConvergenceError(f"ground-state residual {residual:.3e} exceeds tolerance {tol:.1e}")
    degenerate = bool(k == 2 and (vals[1] - vals[0]) < DEGENERACY_GAP)
    state = ManyBodyState(h.fock_a, h.fock_b, psi.reshape(h.dim_a, h.dim_b), time=0.0)
    return GroundStateResult(state, float(vals[0]), residual, counter["n"], degenerate)


def _lanczos_basis(h, psi: np.ndarray, k: int):
    """Full-reorthogonalization Lanczos factorization started from psi.

    Returns (V, alpha, beta, beta_resid) where V holds up to k orthonormal
    basis matrices, T = tridiag(alpha, beta) and beta_resid is the norm of
    the residual after the last retained vector (zero on happy breakdown).
    """
    v = [psi]
    alpha, beta = [], []
    w = h.apply(psi)
    a = np.vdot(psi, w).real
    alpha.append(a)
    w = w - a * psi
    for j in range(1, k):
        b = np.linalg.norm(w)
        if b < 1e-12:
            return v, np.array(alpha), np.array(beta), 0.0
        q = w / b
        # full reorthogonalization, two passes
        for _ in range(2):
            for u in v:
                q -= np.vdot(u, q) * u
        q /= np.linalg.norm(q)
        v.append(q)
        beta.append(b)
        w = h.apply(q)
        a = np.vdot(q, w).real
        alpha.append(a)
        w = w - a * q - b * v[-2]
    beta_resid = float(np.linalg.norm(w))
    return v, np.array(alpha), np.array(beta), beta_resid


def _krylov_coeffs(alpha, beta, tau):
    """exp(-i tau T) e1 in the Krylov basis."""
    theta, q = eigh_tridiagonal(alpha, beta)
    return q @ (np.exp(-1j * tau * theta) * q[0])


def propagate(state: ManyBodyState, h, cfg: PropagationConfig, sink=None) -> ManyBodyState:
    """Solve i d/dt psi = H psi from state.time to state.time + t_final.

    ``sink(snapshot)`` is invoked at every multiple of dt_out (including the
    initial and final times); snapshots carry their own coefficient copies.
    """
    psi = state.coeffs.astype(np.complex128).copy()
    t0 = state.time
    t = 0.0
    n_out = int(round(cfg.t_final / cfg.dt_out))
    out_times = np.arange(n_out + 1) * cfg.dt_out
    next_out = 0
    if sink is not None:
        sink(ManyBodyState(state.basis_a, state.basis_b, psi.copy(), t0))
        next_out = 1
    dt = cfg.dt_max
    while t < cfg.t_final - 1e-12:
        v, alpha, beta, beta_resid = _lanczos_basis(h, psi, cfg.krylov_dim)
        k = len(v)
        dt = min(dt, cfg.t_final - t)
        if beta_resid == 0.0:
            # happy breakdown: the Krylov space is invariant, step is exact
            step = cfg.t_final - t
            err = 0.0
        else:
            step = dt
            while True:
                u = _krylov_coeffs(alpha, beta, step)
                err = beta_resid * abs(u[-1]) if k > 1 else 0.0
                if err <= cfg.tol or step <= 1e-12:
                    break
                step *= 0.5
            if step <= 1e-12 and err > cfg.tol:
                raise PropagationError(
                    f"step underflow at t={t:.6g}: local error {err:.3e} > tol {cfg.tol:.1e}"
                )
        vmat = np.stack([b.ravel() for b in v], axis=1)
        if sink is not None:
            while next_out <= n_out and out_times[next_out] <= t + step + 1e-12:
                tau = out_times[next_out] - t
                u_tau = _krylov_coeffs(alpha, beta, tau)
                snap = (vmat @ u_tau).reshape(psi.shape)
                sink(ManyBodyState(state.basis_a, state.basis_b, snap, t0 + out_times[next_out]))
                next_out += 1
        u = _krylov_coeffs(alpha, beta, step)
        psi = (vmat @ u).reshape(psi.shape)
        t += step
        # grow cautiously toward the error budget
        if err > 0:
            dt = min(cfg.dt_max, step * min(2.0, 0.9 * (cfg.tol / err) ** (1.0 / k)))
        else:
            dt = cfg.dt_max
    return ManyBodyState(state.basis_a, state.basis_b, psi, t0 + cfg.t_final)
