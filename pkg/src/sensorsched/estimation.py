"""Linear process models, local Kalman filters, and covariance bookkeeping.

Each monitored process is a discrete-time linear Gaussian system

    x[k+1] = A x[k] + w[k],    w ~ N(0, W)
    y[k]   = C x[k] + v[k],    v ~ N(0, V)

whose sensor runs a Kalman filter that has reached steady state, so the
posterior covariance is the fixed point ``pbar`` of the Riccati recursion
and the filter gain is constant.  When the smart sensor's estimate reaches
the remote estimator its error covariance is ``pbar``; after ``tau``
consecutive steps without a delivery it is the tau-fold composition of the
open-loop propagation ``P -> A P A' + W`` applied to ``pbar``.  Schedulers
only ever need traces of those compositions, which are cached per process.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RiccatiConvergenceError

# Relative singular-value cutoff for rank tests, absolute eigenvalue slack
# for definiteness tests.
_RANK_TOL = 1e-8
_EIG_TOL = 1e-10


def _symmetrize(mat):
    return (mat + mat.T) * 0.5


def _as_matrix(value, name):
    arr = np.array(value, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    return arr


def _rank(mat):
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > _RANK_TOL * sv[0]))


def _psd_sqrt(mat):
    vals, vecs = np.linalg.eigh(mat)
    return vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def is_observable(A, C):
    """Rank test on the stacked observability matrix [C; CA; ...; CA^(n-1)]."""
    n = A.shape[0]
    blocks = [C]
    for _ in range(n - 1):
        blocks.append(blocks[-1] @ A)
    return _rank(np.vstack(blocks)) == n


def is_controllable(A, B):
    """Rank test on the controllability matrix [B, AB, ..., A^(n-1)B]."""
    n = A.shape[0]
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    return _rank(np.hstack(blocks)) == n


class ProcessModel:
    """Validated (A, C, W, V) quadruple for one monitored process.

    W must be symmetric PSD, V symmetric PD, (A, C) observable and
    (A, W^(1/2)) controllable so the filter Riccati recursion has a unique
    stabilizing fixed point.  ``check=False`` skips the structural checks;
    it exists for degenerate hand-built models in tests (e.g. noise-free
    systems) and leaves all guarantees to the caller.
    """

    def __init__(self, A, C, W, V, check=True):
        A = _as_matrix(A, "A")
        C = _as_matrix(C, "C")
        W = _as_matrix(W, "W")
        V = _as_matrix(V, "V")
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got shape {A.shape}")
        if C.shape[1] != n:
            raise ValueError(f"C has {C.shape[1]} columns, expected {n}")
        ny = C.shape[0]
        if W.shape != (n, n):
            raise ValueError(f"W must be {n}x{n}, got {W.shape}")
        if V.shape != (ny, ny):
            raise ValueError(f"V must be {ny}x{ny}, got {V.shape}")
        if not np.all(np.isfinite(A)) or not np.all(np.isfinite(C)) \
                or not np.all(np.isfinite(W)) or not np.all(np.isfinite(V)):
            raise ValueError("model matrices must be finite")
        if check:
            if not np.allclose(W, W.T, atol=_EIG_TOL):
                raise ValueError("W must be symmetric")
            if not np.allclose(V, V.T, atol=_EIG_TOL):
                raise ValueError("V must be symmetric")
            W = _symmetrize(W)
            V = _symmetrize(V)
            if np.linalg.eigvalsh(W).min() < -_EIG_TOL:
                raise ValueError("W must be positive semidefinite")
            if np.linalg.eigvalsh(V).min() <= _EIG_TOL:
                raise ValueError("V must be positive definite")
            if not is_observable(A, C):
                raise ValueError("(A, C) must be observable")
            if not is_controllable(A, _psd_sqrt(W)):
                raise ValueError("(A, W^(1/2)) must be controllable")
        self.A = A
        self.C = C
        self.W = W
        self.V = V
        self._w_sqrt = None
        self._v_sqrt = None

    @property
    def n_x(self):
        return self.A.shape[0]

    @property
    def n_y(self):
        return self.C.shape[0]

    @property
    def w_sqrt(self):
        if self._w_sqrt is None:
            self._w_sqrt = _psd_sqrt(self.W)
        return self._w_sqrt

    @property
    def v_sqrt(self):
        if self._v_sqrt is None:
            self._v_sqrt = _psd_sqrt(self.V)
        return self._v_sqrt

    def __repr__(self):
        return f"ProcessModel(n_x={self.n_x}, n_y={self.n_y})"


def propagate_covariance(A, W, P):
    """One open-loop step: A P A' + W, re-symmetrized against drift."""
    A = np.asarray(A, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    P = np.asarray(P, dtype=np.float64)
    if A.shape[0] != A.shape[1] or A.shape != W.shape or A.shape != P.shape:
        raise ValueError(
            f"conformability: A {A.shape}, W {W.shape}, P {P.shape}")
    return _symmetrize(A @ P @ A.T + W)


class SteadyStateCache:
    """Steady-state filter quantities plus cached open-loop trace powers.

    ``trace_powers[n]`` is tr of the n-fold open-loop propagation of
    ``pbar``; the table grows lazily on demand.  For unstable dynamics the
    entries can overflow float64, in which case every later entry is +inf
    (a deliberate representation of an unbounded covariance, not an error).
    Matrices are cached up to ``mat_cache_limit`` compositions; beyond that
    only traces are kept so long starvation runs stay cheap on memory.
    """

    def __init__(self, model, pbar, kalman_gain, n_max=256,
                 mat_cache_limit=4096):
        self.model = model
        self.pbar = _symmetrize(np.array(pbar, dtype=np.float64))
        self.kalman_gain = np.array(kalman_gain, dtype=np.float64)
        self._mat_cache_limit = int(mat_cache_limit)
        self.trace_powers = [float(np.trace(self.pbar))]
        self._mats = [self.pbar]
        self._tail = self.pbar
        self._frozen = False
        self._freeze_len = None  # first index whose trace overflowed
        self._grow(int(n_max))

    def _grow(self, n):
        A, W = self.model.A, self.model.W
        while len(self.trace_powers) <= n:
            if self._frozen:
                self.trace_powers.append(np.inf)
                continue
            with np.errstate(over="ignore", invalid="ignore"):
                nxt = _symmetrize(A @ self._tail @ A.T + W)
            tr = float(np.trace(nxt))
            if not np.isfinite(tr):
                self._frozen = True
                self._freeze_len = len(self.trace_powers)
                self.trace_powers.append(np.inf)
                continue
            self._tail = nxt
            self.trace_powers.append(tr)
            if len(self._mats) < self._mat_cache_limit:
                self._mats.append(nxt)

    def trace_at(self, n):
        """tr of the covariance after holding time n (n = 0 gives tr pbar)."""
        if n < 0:
            raise ValueError(f"holding time must be >= 0, got {n}")
        if n >= len(self.trace_powers):
            self._grow(n)
        return self.trace_powers[n]

    def cov_at(self, n):
        """Covariance matrix after holding time n."""
        if n < 0:
            raise ValueError(f"holding time must be >= 0, got {n}")
        self._grow(n)
        if self._frozen and n >= self._freeze_len:
            return np.full_like(self.pbar, np.inf)
        if n < len(self._mats):
            return self._mats[n].copy()
        mat = self._mats[-1]
        for _ in range(n - (len(self._mats) - 1)):
            mat = propagate_covariance(self.model.A, self.model.W, mat)
        return mat


def covariance_at_holding(cache, tau):
    """Error covariance at the remote estimator after tau missed deliveries."""
    return cache.cov_at(tau)


def steady_state_covariance(model, tol=1e-10, max_iters=100_000, n_max=256):
    """Fixed point of the posterior Riccati recursion, with gain and traces.

    Iterates the measurement-updated covariance map from P = W until the
    sup-norm step falls below ``tol`` (Joseph-form update for numerical
    robustness).  Raises RiccatiConvergenceError if the budget runs out.
    """
    A, C, W, V = model.A, model.C, model.W, model.V
    eye = np.eye(model.n_x)
    P = W.copy()
    for _ in range(max_iters):
        prior = A @ P @ A.T + W
        S = C @ prior @ C.T + V
        K = np.linalg.solve(S, C @ prior).T
        IKC = eye - K @ C
        P_next = _symmetrize(IKC @ prior @ IKC.T + K @ V @ K.T)
        if np.max(np.abs(P_next - P)) < tol:
            P = P_next
            break
        P = P_next
    else:
        raise RiccatiConvergenceError(
            f"no fixed point within {max_iters} iterations (tol={tol}) for "
            f"model with A={A.tolist()}")
    prior = A @ P @ A.T + W
    S = C @ prior @ C.T + V
    K = np.linalg.solve(S, C @ prior).T
    return SteadyStateCache(model, P, K, n_max=n_max)


@dataclass
class KalmanState:
    """True state and the sensor-side filtered estimate of one process."""
    xhat: np.ndarray
    x_true: np.ndarray


def local_kalman_step(model, cache, state, rng):
    """Advance the true process one step and run the steady-state filter."""
    w = model.w_sqrt @ rng.standard_normal(model.n_x)
    x_new = model.A @ state.x_true + w
    v = model.v_sqrt @ rng.standard_normal(model.n_y)
    y = model.C @ x_new + v
    pred = model.A @ state.xhat
    xhat_new = pred + cache.kalman_gain @ (y - model.C @ pred)
    return KalmanState(xhat=xhat_new, x_true=x_new)


def remote_estimate_update(model, local, prev_remote, received):
    """Remote estimate: the sensor's estimate if delivered, else A x_prev."""
    if received:
        return local.xhat.copy()
    return model.A @ prev_remote


def remote_error_by_holding(model, cache, receive_prob, collect_steps,
                            replicas, rng, burn_in=100, tau_max=3):
    """Monte-Carlo squared remote-estimation error, stratified by holding time.

    Simulates ``replicas`` independent copies of the process, each with a
    steady-state local filter and i.i.d. Bernoulli(receive_prob) deliveries,
    and accumulates ||x - xhat_remote||^2 per observed holding time.  The
    local error starts at N(0, pbar) so the filter is stationary from step
    one; ``burn_in`` steps let the holding-time distribution mix before
    collection.  Returns (counts, mean_sq_error) arrays of length tau_max+1.

    Deliberately recomputes nothing from the cached trace table: this is an
    independent check of covariance_at_holding, not a consumer of it.
    """
    A, C = model.A, model.C
    K = cache.kalman_gain
    n, ny = model.n_x, model.n_y
    sq_w, sq_v = model.w_sqrt, model.v_sqrt
    sq_p = _psd_sqrt(cache.pbar)

    xhat = np.zeros((replicas, n))
    x = xhat + rng.standard_normal((replicas, n)) @ sq_p.T
    remote = xhat.copy()
    tau = np.zeros(replicas, dtype=np.int64)
    sums = np.zeros(tau_max + 1)
    counts = np.zeros(tau_max + 1, dtype=np.int64)

    for step in range(burn_in + collect_steps):
        x = x @ A.T + rng.standard_normal((replicas, n)) @ sq_w.T
        y = x @ C.T + rng.standard_normal((replicas, ny)) @ sq_v.T
        pred = xhat @ A.T
        xhat = pred + (y - pred @ C.T) @ K.T
        received = rng.random(replicas) < receive_prob
        remote = np.where(received[:, None], xhat, remote @ A.T)
        tau = np.where(received, 0, tau + 1)
        if step < burn_in:
            continue
        err2 = ((x - remote) ** 2).sum(axis=1)
        mask = tau <= tau_max
        idx = tau[mask]
        sums += np.bincount(idx, weights=err2[mask], minlength=tau_max + 1)
        counts += np.bincount(idx, minlength=tau_max + 1)
    mean = np.divide(sums, counts, out=np.full(tau_max + 1, np.nan),
                     where=counts > 0)
    return counts, mean
