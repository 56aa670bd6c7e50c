"""ISAC hybrid beamformer design with beam-squint compensation.

The analog/digital factorization is found by alternating minimization of
|| F_RF Fbb_stacked - Fsc_stacked ||_F: a Riemannian conjugate-gradient stage
over the unit-modulus analog entries, a per-subcarrier least-squares digital
stage, a squint-compensating digital update driven by a virtual subcarrier-
dependent analog beamformer, and an orthogonal-Procrustes update of the
sensing auxiliary matrix.

Vectorization convention: vec() is column-major, so vec(F_RF @ Fbb) equals
(Fbb^T kron I_K) @ vec(F_RF); the Kronecker factor is never materialized.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .config import SystemConfig

# Armijo backtracking constants for the inner conjugate-gradient stage.
ARMIJO_C = 1e-4
ARMIJO_BACKTRACK = 0.5
ARMIJO_INITIAL_STEP = 1.0
ARMIJO_MAX_BACKTRACKS = 30

DEFAULT_MAX_INNER = 200
DEFAULT_MAX_OUTER = 30
DEFAULT_TOL_OUTER = 1e-4
GRAD_TOL = 1e-12


@dataclass
class HybridBeamformer:
    """Subcarrier-independent analog matrix plus per-subcarrier digital blocks.

    analog: (K, N_RF) with every entry of modulus 1/sqrt(K);
    digital: (M, N_RF, N_ds), scaled so ||analog @ digital[m]||_F^2 = N_ds.
    """

    analog: np.ndarray
    digital: np.ndarray
    converged: bool = True

    def product(self, m: int) -> np.ndarray:
        return self.analog @ self.digital[m]

    def products(self) -> np.ndarray:
        return np.einsum("kr,mrd->mkd", self.analog, self.digital)


@dataclass
class JscBeamformer:
    """Joint sensing-communications target per subcarrier plus its auxiliary."""

    per_subcarrier: np.ndarray   # (M, K, N_ds)
    aux: np.ndarray              # (T, M * N_ds), row-semi-unitary


@dataclass
class ManifoldState:
    """State of the conjugate-gradient iteration on the scaled-circle manifold."""

    point: np.ndarray
    k_sel: int
    gradient: np.ndarray | None = None
    search_direction: np.ndarray | None = None
    step: float = 0.0
    iteration: int = 0
    converged: bool = False
    objective: float = float("nan")


def comms_beamformer_full(H: np.ndarray, n_streams: int) -> np.ndarray:
    """Right singular vectors of H for the n_streams largest singular values.

    Columns are orthonormal. If the numerical rank of H is below n_streams the
    remaining columns are an orthonormal null-space completion (the SVD already
    provides one) and a warning is emitted.
    """
    if n_streams > min(H.shape):
        raise ValueError(f"n_streams={n_streams} exceeds min(H.shape)={min(H.shape)}")
    _, s, vh = np.linalg.svd(H, full_matrices=True)
    tol = max(H.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol))
    if rank < n_streams:
        warnings.warn(f"channel rank {rank} below requested {n_streams} streams; "
                      "filling with null-space completion", RuntimeWarning)
    return vh.conj().T[:, :n_streams]


def jsc_combine(F_C_m: np.ndarray, F_S: np.ndarray, D_m: np.ndarray,
                epsilon: float) -> np.ndarray:
    """Convex sensing/communications combination eps*F_C + (1-eps)*F_S D."""
    return epsilon * F_C_m + (1.0 - epsilon) * F_S @ D_m


def vec(A: np.ndarray) -> np.ndarray:
    return A.reshape(-1, order="F")


def unvec(v: np.ndarray, rows: int) -> np.ndarray:
    return v.reshape(rows, -1, order="F")


def fit_objective(f: np.ndarray, digital_stacked: np.ndarray,
                  target_stacked: np.ndarray) -> float:
    """|| F_RF @ digital_stacked - target_stacked ||_F^2 for f = vec(F_RF)."""
    F = unvec(f, target_stacked.shape[0])
    r = target_stacked - F @ digital_stacked
    return float(np.real(np.vdot(r, r)))


def euclidean_gradient(f: np.ndarray, digital_stacked: np.ndarray,
                       target_stacked: np.ndarray) -> np.ndarray:
    """Gradient -2 B^H (f_sc - B f) of the stacked fit, B = digital^T kron I_K.

    Computed matrix-wise as -2 (Fsc - F_RF Fbb) Fbb^H; its real and imaginary
    parts equal the partial derivatives of the squared residual with respect
    to the real and imaginary parts of f.
    """
    k = target_stacked.shape[0]
    F = unvec(f, k)
    residual = target_stacked - F @ digital_stacked
    return vec(-2.0 * residual @ digital_stacked.conj().T)


def riemannian_gradient(f: np.ndarray, grad_euclid: np.ndarray,
                        k_sel: int) -> np.ndarray:
    """Project the Euclidean gradient onto the tangent space at f.

    Entries of f live on circles of radius 1/sqrt(k_sel); the radial component
    removed per entry is k_sel * Re{g f*} f so that Re{(proj g) f*} = 0.
    """
    return grad_euclid - k_sel * np.real(grad_euclid * f.conj()) * f


def retract(f: np.ndarray, k_sel: int) -> np.ndarray:
    """Normalize every entry back to modulus 1/sqrt(k_sel)."""
    return f / (np.sqrt(k_sel) * np.abs(f))


def manifold_cg_step(state: ManifoldState, digital_stacked: np.ndarray,
                     target_stacked: np.ndarray) -> ManifoldState:
    """One Polak-Ribiere conjugate-gradient step with Armijo backtracking.

    The accepted step never increases the fit objective; when no Armijo step
    is accepted (stationary point) the state is returned unchanged with the
    converged flag set.
    """
    f = state.point
    k = state.k_sel
    obj = fit_objective(f, digital_stacked, target_stacked)
    g = riemannian_gradient(f, euclidean_gradient(f, digital_stacked, target_stacked), k)
    gnorm2 = float(np.real(np.vdot(g, g)))
    if gnorm2 <= GRAD_TOL:
        return ManifoldState(point=f, k_sel=k, gradient=g, search_direction=None,
                             step=0.0, iteration=state.iteration + 1,
                             converged=True, objective=obj)
    if state.gradient is None or state.search_direction is None:
        xi = -g
    else:
        # transport previous vectors by projecting onto the current tangent space
        g_prev = riemannian_gradient(f, state.gradient, k)
        beta = float(np.real(np.vdot(g, g - g_prev))
                     / np.real(np.vdot(state.gradient, state.gradient)))
        beta = max(beta, 0.0)  # restart on negative Polak-Ribiere coefficient
        xi = -g + beta * riemannian_gradient(f, state.search_direction, k)
    slope = float(np.real(np.vdot(g, xi)))
    if slope >= 0.0:  # not a descent direction: restart with steepest descent
        xi = -g
        slope = -gnorm2
    step = ARMIJO_INITIAL_STEP
    for _ in range(ARMIJO_MAX_BACKTRACKS):
        candidate = retract(f + step * xi, k)
        if fit_objective(candidate, digital_stacked, target_stacked) \
                <= obj + ARMIJO_C * step * slope:
            return ManifoldState(point=candidate, k_sel=k, gradient=g,
                                 search_direction=xi, step=step,
                                 iteration=state.iteration + 1, converged=False,
                                 objective=fit_objective(candidate, digital_stacked,
                                                         target_stacked))
        step *= ARMIJO_BACKTRACK
    return ManifoldState(point=f, k_sel=k, gradient=g, search_direction=xi,
                         step=0.0, iteration=state.iteration + 1,
                         converged=True, objective=obj)


def optimize_analog(F_RF: np.ndarray, digital_stacked: np.ndarray,
                    target_stacked: np.ndarray,
                    max_inner: int = DEFAULT_MAX_INNER) -> tuple[np.ndarray, list[float]]:
    """Run the conjugate-gradient stage; returns the analog matrix and the
    objective value after every accepted step (non-increasing)."""
    k = F_RF.shape[0]
    state = ManifoldState(point=vec(F_RF), k_sel=k)
    trace = [fit_objective(state.point, digital_stacked, target_stacked)]
    for _ in range(max_inner):
        state = manifold_cg_step(state, digital_stacked, target_stacked)
        trace.append(state.objective)
        if state.converged:
            break
    return unvec(state.point, k), trace


def baseband_ls(F_RF: np.ndarray, F_SC_m: np.ndarray) -> np.ndarray:
    """Least-squares digital block pinv(F_RF) @ F_SC[m].

    Rank-deficient analog matrices fall back to the minimum-norm solution the
    pseudoinverse already provides, with a warning.
    """
    if np.linalg.matrix_rank(F_RF) < F_RF.shape[1]:
        warnings.warn("analog beamformer is rank deficient; using minimum-norm "
                      "least squares", RuntimeWarning)
    return np.linalg.pinv(F_RF) @ F_SC_m


def sd_analog(F_RF: np.ndarray, eta_m: float) -> np.ndarray:
    """Virtual subcarrier-dependent analog beamformer, literal phase scaling.

    Entrywise (1/sqrt(K)) exp(j eta_m angle(F_RF)) with the principal phase in
    (-pi, pi]. Exact for eta_m = 1; see sd_analog_steered for the beam-aware
    variant used inside design_hybrid.
    """
    k = F_RF.shape[0]
    return np.exp(1j * eta_m * np.angle(F_RF)) / np.sqrt(k)


def sd_analog_steered(F_RF: np.ndarray, eta_m: float, directions_sin: np.ndarray,
                      element_indices0: np.ndarray) -> np.ndarray:
    """Virtual SD analog beamformer by repointing each column's beam direction.

    Column j is treated as a beam at spatial direction u_j = directions_sin[j];
    squint moves subcarrier-m responses to eta_m * u, so the compensator shifts
    the column's linear phase profile by -pi (eta_m - 1) idx u_j. For a pure
    steering column this equals scaling its unwrapped phase by eta_m; scaling
    the wrapped per-entry phase instead (sd_analog) loses the 2-pi-wrapped
    turns and does not repoint.
    """
    delta = -np.pi * (eta_m - 1.0) * np.outer(element_indices0,
                                              directions_sin[:F_RF.shape[1]])
    return F_RF * np.exp(1j * delta)


def bsc_update_baseband(F_RF: np.ndarray, F_RF_sd_m: np.ndarray,
                        F_BB_ls_m: np.ndarray) -> np.ndarray:
    """Squint-compensated digital block pinv(F_RF) @ F_RF_sd[m] @ F_BB_ls[m]."""
    return np.linalg.pinv(F_RF) @ F_RF_sd_m @ F_BB_ls_m


def identity_padded(t: int, cols: int) -> np.ndarray:
    out = np.zeros((t, cols), dtype=complex)
    out[:, :t] = np.eye(t)
    return out


def procrustes_update(F_S: np.ndarray, F_RF: np.ndarray,
                      digital_stacked: np.ndarray, comms_stacked: np.ndarray,
                      epsilon: float,
                      current: np.ndarray | None = None) -> np.ndarray:
    """Orthogonal-Procrustes update of the stacked auxiliary matrix.

    Minimizes || F_RF Fbb - eps Fc - (1-eps) F_S D ||_F over D with
    D D^H = I_T; the optimizer is U V^H from the thin SVD of
    F_S^H (F_RF Fbb - eps Fc). With epsilon = 1 the sensing term is absent
    and the current (identity-padded) auxiliary is returned unchanged.
    """
    t = F_S.shape[1]
    cols = digital_stacked.shape[1]
    if epsilon >= 1.0:
        return current if current is not None else identity_padded(t, cols)
    target = F_S.conj().T @ (F_RF @ digital_stacked - epsilon * comms_stacked)
    u, _, vh = np.linalg.svd(target, full_matrices=False)
    return u @ vh


def steering_column_direction(col: np.ndarray) -> float:
    """Spatial direction (sin theta) of a pure steering column from its mean
    phase increment; exact for contiguous half-wavelength elements."""
    inc = col[1:] * np.conj(col[:-1])
    return float(-np.angle(np.sum(inc)) / np.pi)


def esprit_directions(basis: np.ndarray, n_dirs: int) -> np.ndarray:
    """Spatial directions (sin theta) from a steering-span basis via the ULA
    shift invariance (rotational-invariance eigenvalues)."""
    v = basis[:, :n_dirs]
    lam = np.linalg.eigvals(np.linalg.pinv(v[:-1]) @ v[1:])
    return np.sort(-np.angle(lam) / np.pi)


# Coincident extracted directions would give the analog matrix duplicate
# steering columns and an unbounded condition number; nudging apart by this
# sin-space margin bounds the conditioning while moving a beam by well under
# a beamwidth.
MIN_BEAM_SEPARATION = 2e-3


def _nudge_apart(d: float, chosen: list[float], sep: float) -> float:
    for _ in range(64):
        clash = [c for c in chosen if abs(d - c) < sep]
        if not clash:
            return d
        anchor = min(clash, key=lambda c: abs(d - c))
        step = sep if d >= anchor else -sep
        d = anchor + step
        if not -1.0 <= d <= 1.0:
            d = anchor - step
    return d


def design_directions(F_C_full: np.ndarray, F_S_full: np.ndarray,
                      n_beams: int, n_paths: int) -> np.ndarray:
    """Spatial directions (sin theta) for the analog beams.

    Target directions come from the sensing steering columns (exact phase
    slope). Communications directions come from the dominant rank-n_paths
    subspace of the stacked comms beamformer via shift invariance. Extracted
    directions closer than MIN_BEAM_SEPARATION are nudged apart to keep the
    analog matrix well conditioned; extra beams (n_beams > targets + paths)
    are filled on an even spatial grid away from the extracted directions.
    """
    extracted = [steering_column_direction(F_S_full[:, t])
                 for t in range(F_S_full.shape[1])]
    stacked = np.concatenate(list(F_C_full), axis=1)
    u, _, _ = np.linalg.svd(stacked, full_matrices=False)
    extracted.extend(esprit_directions(u, n_paths))
    dirs: list[float] = []
    for d in extracted:
        dirs.append(_nudge_apart(float(d), dirs, MIN_BEAM_SEPARATION))
    for sep in (0.15, 0.02, 0.0):
        for cand in np.linspace(-0.95, 0.95, 77):
            if len(dirs) >= n_beams:
                break
            if all(abs(cand - d) > sep for d in dirs):
                dirs.append(float(cand))
    return np.asarray(dirs[:n_beams])


def design_hybrid(antenna_indices0: np.ndarray, F_C_full: np.ndarray,
                  F_S_full: np.ndarray, cfg: SystemConfig,
                  rng: np.random.Generator, use_bsc: bool = True,
                  directions_sin: np.ndarray | None = None,
                  analog_init: str = "steered",
                  max_outer: int = DEFAULT_MAX_OUTER,
                  max_inner: int = DEFAULT_MAX_INNER,
                  tol_outer: float = DEFAULT_TOL_OUTER,
                  trace_sink: list | None = None) -> HybridBeamformer:
    """Alternating hybrid design for one subarray.

    Per outer iteration: rebuild the joint target from the auxiliary matrix,
    refresh the least-squares digital stage, optimize the analog matrix on the
    unit-modulus manifold, recompute the least-squares digital blocks, apply
    the beam-squint-compensating digital update (when use_bsc), and update the
    auxiliary matrix by orthogonal Procrustes. Terminates when the stacked
    residual delta changes by at most tol_outer. Digital blocks are finally
    scaled to the per-subcarrier power budget.

    analog_init "steered" starts the analog phases at steering profiles toward
    `directions_sin` (estimated from the design references when not given);
    "random" uses uniform random phases. Random-phase analog matrices carry no
    beam structure for the squint compensator to repoint, so "steered" is the
    default.

    Args:
        antenna_indices0: zero-based selected element indices (length K).
        F_C_full: (M, N, N_ds) full-array communications beamformers.
        F_S_full: (N, T) full-array sensing steering matrix.
        trace_sink: optional list collecting (outer_iteration, delta) rows.
    """
    from .scenario import all_etas

    k = len(antenna_indices0)
    n_rf, n_ds, m_sub, t = cfg.N_RF, cfg.N_ds, cfg.M, cfg.T
    etas = all_etas(cfg)
    F_C = F_C_full[:, antenna_indices0, :]      # (M, K, N_ds)
    F_S = F_S_full[antenna_indices0, :]         # (K, T)
    comms_stacked = np.concatenate(list(F_C), axis=1)

    if directions_sin is None:
        directions_sin = design_directions(F_C_full, F_S_full, n_rf, cfg.L)
    if analog_init == "steered":
        psi = -np.pi * np.outer(antenna_indices0, directions_sin[:n_rf])
    elif analog_init == "random":
        psi = rng.uniform(0.0, 2 * np.pi, (k, n_rf))
    else:
        raise ValueError(f"unknown analog_init {analog_init!r}")
    F_RF = np.exp(1j * psi) / np.sqrt(k)

    D = identity_padded(t, m_sub * n_ds)
    delta_prev = None
    converged = False
    digital = np.zeros((m_sub, n_rf, n_ds), dtype=complex)
    for outer in range(1, max_outer + 1):
        F_SC = np.stack([jsc_combine(F_C[mi], F_S,
                                     D[:, mi * n_ds:(mi + 1) * n_ds], cfg.epsilon)
                         for mi in range(m_sub)])
        target_stacked = np.concatenate(list(F_SC), axis=1)
        # least-squares refresh so the manifold stage fights the current
        # residual only; the squint-compensated digital blocks are downstream
        # output and are not fed back into the analog subproblem
        ls_stacked = np.linalg.pinv(F_RF) @ target_stacked
        F_RF, _ = optimize_analog(F_RF, ls_stacked, target_stacked, max_inner)
        pinv_rf = np.linalg.pinv(F_RF)
        for mi in range(m_sub):
            ls_m = pinv_rf @ F_SC[mi]
            # at eta = 1 the compensation reduces to the least-squares block
            # exactly, so the identity case is not routed through the
            # pseudoinverse round trip
            if use_bsc and etas[mi] != 1.0:
                sd = sd_analog_steered(F_RF, float(etas[mi]), directions_sin,
                                       antenna_indices0)
                digital[mi] = pinv_rf @ sd @ ls_m
            else:
                digital[mi] = ls_m
        digital_stacked = np.concatenate(list(digital), axis=1)
        D = procrustes_update(F_S, F_RF, digital_stacked, comms_stacked,
                              cfg.epsilon, current=D)
        delta = float(np.linalg.norm(F_RF @ digital_stacked - target_stacked))
        if trace_sink is not None:
            trace_sink.append((outer, delta))
        if delta_prev is not None and abs(delta - delta_prev) <= tol_outer:
            converged = True
            break
        delta_prev = delta
    # non-convergence at max_outer returns the last iterate, flagged below
    for mi in range(m_sub):
        digital[mi] *= np.sqrt(n_ds) / np.linalg.norm(F_RF @ digital[mi])
    return HybridBeamformer(analog=F_RF, digital=digital, converged=converged)


def fd_jsc_beamformer(F_C_full: np.ndarray, F_S_full: np.ndarray,
                      epsilon: float, n_streams: int) -> np.ndarray:
    """Fully digital benchmark eps*Fc[m] + (1-eps)*Fs D[m], power normalized.

    D[m] aligns the sensing columns to the per-subcarrier communications
    beamformer (orthogonal Procrustes on F_S^H F_C[m]).
    """
    m_sub = F_C_full.shape[0]
    out = np.zeros_like(F_C_full)
    for mi in range(m_sub):
        if epsilon >= 1.0:
            f = F_C_full[mi].copy()
        else:
            u, _, vh = np.linalg.svd(F_S_full.conj().T @ F_C_full[mi],
                                     full_matrices=False)
            f = jsc_combine(F_C_full[mi], F_S_full, u @ vh, epsilon)
        out[mi] = f * (np.sqrt(n_streams) / np.linalg.norm(f))
    return out
