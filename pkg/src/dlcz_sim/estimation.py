#!/usr/bin/env python3

############################################################################
#
# MODULE:       lib with the estimators of dlcz_sim
#
# AUTHOR(S):    dlcz_sim developers
#
# PURPOSE:      fringe fits, mode occupation matrix, concurrence bound,
#               two-qubit tomography, Wootters concurrence, fidelity and
#               CHSH with Poisson and bootstrap errors
#
# COPYRIGHT:	(C) 2026 by the dlcz_sim developers
#
# 		This program is free software under the GNU General Public
# 		License (>=v2). Read the file COPYING that comes with dlcz_sim
# 		for details.
#
#############################################################################

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, minimize

from .errors import (
    CompletenessError,
    ShapeError,
    UndefinedEstimateError,
    ValidationError,
)
from .fock import DensityOperator, PureState, sanitize_matrix
from .messages import fatal, verbose, warning
from .node import POLARIZATION_REGISTER, bell_state
from .parallel import map_parallel
from .validation import NEGATIVE_EIGENVALUE_TOL, check_density_matrix

MIN_FRINGE_PHASES = 5
TOMOGRAPHY_SETTINGS = (
    "HH", "HV", "VV", "VH", "RH", "RV", "DV", "DH",
    "DR", "DD", "RD", "HD", "VD", "VL", "HL", "RL",
)  # fmt: skip
CHSH_SETTINGS = {
    "a,b": (0.0, -np.pi / 4),
    "a,b'": (0.0, -3 * np.pi / 4),
    "a',b": (np.pi / 2, -np.pi / 4),
    "a',b'": (np.pi / 2, -3 * np.pi / 4),
}
CHSH_SIGNS = {"a,b": 1, "a,b'": -1, "a',b": 1, "a',b'": 1}
CHSH_OUTCOMES = ("++", "+-", "-+", "--")
MLE_TOLERANCE = 1e-10
MLE_MAX_ITERATIONS = 10000

PAULI = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)

POLARIZATION_VECTORS = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([1, 1], dtype=complex) / np.sqrt(2),
    "A": np.array([1, -1], dtype=complex) / np.sqrt(2),
    "R": np.array([1, -1j], dtype=complex) / np.sqrt(2),
    "L": np.array([1, 1j], dtype=complex) / np.sqrt(2),
}


def _matrix(rho):
    if isinstance(rho, DensityOperator):
        return np.asarray(rho.matrix)
    return np.asarray(rho, dtype=complex)


def sqrt_psd(matrix):
    """Square root of a Hermitian PSD matrix via its eigen-decomposition."""
    eigenvalues, vectors = np.linalg.eigh((matrix + matrix.conj().T) / 2)
    return (vectors * np.sqrt(np.clip(eigenvalues, 0.0, None))) @ vectors.conj().T


@dataclass(frozen=True)
class FringeDataset:
    """Heralded coincidence counts per phase setting.

    n_plus are the D3 and n_minus the D4 coincidences.
    """

    phases: np.ndarray
    n_plus: np.ndarray
    n_minus: np.ndarray
    heralds: np.ndarray

    def __post_init__(self):
        names = ("phases", "n_plus", "n_minus", "heralds")
        arrays = [np.asarray(getattr(self, name), dtype=float) for name in names]
        if len({array.shape for array in arrays}) != 1 or arrays[0].ndim != 1:
            fatal("Fringe dataset columns differ in length", ShapeError)
        if any(np.any(array < 0) for array in arrays[1:]):
            fatal("Fringe counts must be >= 0", ValidationError)
        for name, array in zip(names, arrays):
            object.__setattr__(self, name, array)

    @classmethod
    def from_rows(cls, rows):
        """Build a dataset from (phase, N_plus, N_minus, heralds) rows."""
        rows = np.asarray(list(rows), dtype=float).reshape(-1, 4)
        return cls(rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3])

    def counts(self, channel):
        if channel == "plus":
            return self.n_plus
        if channel == "minus":
            return self.n_minus
        fatal(f"Fringe channel must be plus or minus, got <{channel}>", ValidationError)
        return None

    def scaled(self, factor):
        return FringeDataset(
            self.phases,
            self.n_plus * factor,
            self.n_minus * factor,
            self.heralds * factor,
        )

    def rows(self):
        return zip(self.phases, self.n_plus, self.n_minus, self.heralds)


@dataclass(frozen=True)
class FringeFit:
    visibility: float
    visibility_err: float
    phase: float
    phase_err: float
    amplitude: float
    channel: str = "plus"
    degenerate: bool = False
    bounded: bool = False

    def as_dict(self):
        return {
            "V": self.visibility,
            "V_err": self.visibility_err,
            "phase": self.phase,
            "phase_err": self.phase_err,
            "amplitude": self.amplitude,
            "channel": self.channel,
            "degenerate": self.degenerate,
            "bounded": self.bounded,
        }


def _bounded_fringe_fit(phases, counts, weights, start):
    """Refit A(1 + V cos(phi - phi0)) with 0 <= V <= 1."""
    amplitude, visibility, offset = start

    def residuals(params):
        amp, vis, phi0 = params
        return (counts - amp * (1 + vis * np.cos(phases - phi0))) * np.sqrt(weights)

    result = least_squares(
        residuals,
        x0=[amplitude, min(visibility, 1.0), offset],
        bounds=([0.0, 0.0, -np.inf], [np.inf, 1.0, np.inf]),
    )
    jacobian = result.jac
    covariance = np.linalg.pinv(jacobian.T @ jacobian)
    errors = np.sqrt(np.clip(np.diag(covariance), 0.0, None))
    return result.x, errors


def fit_fringe(data, channel="plus"):
    """Fit N(phi) = A(1 + V cos(phi - phi0)) to one detector channel.

    The fit is linear in (a, b, c) of a + b cos(phi) + c sin(phi) with
    Poisson weights 1/max(N, 1); V = sqrt(b^2 + c^2)/a. A visibility above
    one is refitted with V bounded to [0, 1].

    Args:
        data (FringeDataset): the counts
        channel (str): "plus" (D3) or "minus" (D4)
    Returns:
        (FringeFit): visibility and phase offset with errors

    """
    counts = data.counts(channel)
    phases = data.phases
    if len(np.unique(np.round(np.mod(phases, 2 * np.pi), 12))) < MIN_FRINGE_PHASES:
        fatal(
            f"A fringe fit needs at least {MIN_FRINGE_PHASES} distinct phases",
            ValidationError,
        )
    if counts.sum() <= 0:
        fatal(f"No counts in the {channel} channel", UndefinedEstimateError)
    weights = 1.0 / np.maximum(counts, 1.0)
    design = np.column_stack([np.ones_like(phases), np.cos(phases), np.sin(phases)])
    normal = design.T @ (design * weights[:, None])
    covariance = np.linalg.inv(normal)
    a, b, c = covariance @ (design.T @ (weights * counts))
    radius = np.hypot(b, c)
    visibility = radius / a if a > 0 else 0.0

    if np.ptp(counts) == 0 or radius <= 1e-12 * abs(a):
        sigma_v = float(np.sqrt(covariance[1, 1] + covariance[2, 2]) / a)
        warning(f"Fringe data of the {channel} channel is flat, V=0 is not informative")
        return FringeFit(0.0, sigma_v, 0.0, np.pi, float(a), channel, degenerate=True)

    offset = float(np.arctan2(c, b))
    gradient_v = np.array([-visibility / a, b / (a * radius), c / (a * radius)])
    gradient_phase = np.array([0.0, -c / radius**2, b / radius**2])
    sigma_v = float(np.sqrt(gradient_v @ covariance @ gradient_v))
    sigma_phase = float(np.sqrt(gradient_phase @ covariance @ gradient_phase))
    if visibility > 1 + 1e-9:
        verbose(f"Linear fringe fit gave V={visibility:.4f}, refitting with V <= 1")
        (amplitude, visibility, offset), errors = _bounded_fringe_fit(
            phases,
            counts,
            weights,
            (a, visibility, offset),
        )
        return FringeFit(
            float(visibility),
            float(errors[1]),
            float(np.angle(np.exp(1j * offset))),
            float(errors[2]),
            float(amplitude),
            channel,
            bounded=True,
        )
    return FringeFit(
        float(min(visibility, 1.0)),
        sigma_v,
        offset,
        sigma_phase,
        float(a),
        channel,
    )


@dataclass(frozen=True)
class ModeCounts:
    """Heralded anti-Stokes click statistics with the analyzer at 0 degree.

    n10 counts D3-only clicks (L mode), n01 D4-only clicks (R mode) and
    n11 double clicks.
    """

    heralds: int
    n10: int
    n01: int
    n11: int

    def __post_init__(self):
        for name in ("heralds", "n10", "n01", "n11"):
            if getattr(self, name) < 0:
                fatal(f"<{name}> must be >= 0", ValidationError)
        if self.n10 + self.n01 + self.n11 > self.heralds:
            fatal("More anti-Stokes events than heralds", ValidationError)


@dataclass(frozen=True)
class ModeDensityMatrix:
    p00: float
    p01: float
    p10: float
    p11: float
    d: float
    errors: dict = field(default_factory=dict)
    heralds: int = 0
    visibility: float = 0.0
    visibility_err: float = 0.0

    @property
    def c_max(self):
        """Concurrence of the ideal state with V = 1 and p11 = 0."""
        return self.p01 + self.p10

    def matrix(self):
        """4x4 matrix in the basis |00>, |01>, |10>, |11>."""
        matrix = np.diag([self.p00, self.p01, self.p10, self.p11]).astype(complex)
        matrix[1, 2] = matrix[2, 1] = self.d
        return matrix

    def as_dict(self):
        return {
            "p00": self.p00,
            "p01": self.p01,
            "p10": self.p10,
            "p11": self.p11,
            "d": self.d,
            "errors": dict(self.errors),
            "heralds": self.heralds,
            "V": self.visibility,
            "V_err": self.visibility_err,
            "C_max": self.c_max,
        }


def mode_matrix(counts, visibility, visibility_err=0.0):
    """Estimate the mode occupation matrix of the retrieved photons.

    Probabilities are conditional on a herald, d = V (p01 + p10) / 2.

    Args:
        counts (ModeCounts|dict): heralds, n10, n01 and n11
        visibility (float): fringe visibility entering d
        visibility_err (float): its standard error
    Returns:
        (ModeDensityMatrix): probabilities, coherence and Poisson errors

    """
    if isinstance(counts, dict):
        counts = ModeCounts(**counts)
    if counts.heralds == 0:
        fatal("No heralds, the mode matrix is undefined", UndefinedEstimateError)
    heralds = float(counts.heralds)
    p10 = counts.n10 / heralds
    p01 = counts.n01 / heralds
    p11 = counts.n11 / heralds
    p00 = 1.0 - p10 - p01 - p11
    errors = {
        "p10": np.sqrt(counts.n10) / heralds,
        "p01": np.sqrt(counts.n01) / heralds,
        "p11": np.sqrt(counts.n11) / heralds,
    }
    errors["p00"] = float(np.sqrt(errors["p10"] ** 2 + errors["p01"] ** 2 + errors["p11"] ** 2))
    d = visibility * (p01 + p10) / 2
    errors["d"] = float(
        np.sqrt(
            ((p01 + p10) / 2 * visibility_err) ** 2
            + (visibility / 2) ** 2 * (errors["p01"] ** 2 + errors["p10"] ** 2),
        ),
    )
    if d > np.sqrt(p01 * p10) + 3 * errors["d"]:
        warning(
            f"Coherence d={d:.3e} exceeds sqrt(p01 p10)={np.sqrt(p01 * p10):.3e} "
            "by more than 3 sigma, which is unphysical for the heralded state",
        )
    return ModeDensityMatrix(
        p00=p00,
        p01=p01,
        p10=p10,
        p11=p11,
        d=d,
        errors={key: float(value) for key, value in errors.items()},
        heralds=counts.heralds,
        visibility=visibility,
        visibility_err=visibility_err,
    )


@dataclass(frozen=True)
class ConcurrenceBound:
    value: float
    error: float
    bootstrap_error: float = None
    bootstrap_interval: tuple = None
    c_max: float = 0.0

    @property
    def sigmas(self):
        """Number of standard deviations above zero."""
        error = self.bootstrap_error if self.bootstrap_error else self.error
        return self.value / error if error > 0 else np.inf

    def as_dict(self):
        return {
            "C_p": self.value,
            "C_p_err": self.error,
            "C_p_bootstrap_err": self.bootstrap_error,
            "C_p_bootstrap_interval": self.bootstrap_interval,
            "C_max": self.c_max,
            "sigmas": self.sigmas,
        }


def _bound(d, p00, p11):
    return 2.0 * max(0.0, abs(d) - np.sqrt(max(p00, 0.0) * max(p11, 0.0)))


def concurrence_bound(matrix, bootstrap=0, rng=None):
    """Lower bound C_p = 2 max(0, |d| - sqrt(p00 p11)).

    Args:
        matrix (ModeDensityMatrix): the estimated mode matrix
        bootstrap (int): number of parametric bootstrap resamples (0: none)
        rng (numpy.random.Generator): random generator of the bootstrap
    Returns:
        (ConcurrenceBound): value, first-order error and bootstrap error

    """
    m = matrix
    value = _bound(m.d, m.p00, m.p11)
    sigma_d = m.errors.get("d", 0.0)
    sigma_11 = m.errors.get("p11", 0.0)
    sigma_00 = m.errors.get("p00", 0.0)
    if m.p11 > 0:
        sigma_root = 0.5 * np.hypot(
            np.sqrt(m.p00 / m.p11) * sigma_11,
            np.sqrt(m.p11 / m.p00) * sigma_00,
        )
    elif m.heralds:
        # no double clicks: one count as scale of p11
        sigma_root = np.sqrt(m.p00 / m.heralds)
    else:
        sigma_root = 0.0
    error = float(2.0 * np.hypot(sigma_d, sigma_root)) if value > 0 else 0.0

    bootstrap_error = None
    interval = None
    if bootstrap and m.heralds:
        rng = rng if rng is not None else np.random.default_rng()
        probabilities = np.clip([m.p00, m.p01, m.p10, m.p11], 0.0, None)
        samples = rng.multinomial(m.heralds, probabilities / probabilities.sum(), size=bootstrap)
        visibilities = np.clip(
            rng.normal(m.visibility, m.visibility_err, size=bootstrap),
            0.0,
            1.0,
        )
        values = np.array(
            [
                _bound(
                    vis * (n01 + n10) / (2 * m.heralds),
                    n00 / m.heralds,
                    n11 / m.heralds,
                )
                for (n00, n01, n10, n11), vis in zip(samples, visibilities)
            ],
        )
        bootstrap_error = float(np.std(values, ddof=1))
        interval = tuple(float(x) for x in np.percentile(values, [2.5, 97.5]))
    return ConcurrenceBound(value, error, bootstrap_error, interval, m.c_max)


def wootters_concurrence(rho):
    """Concurrence max(0, l1 - l2 - l3 - l4) of a two-qubit state.

    Args:
        rho (DensityOperator|array): physical 4x4 density matrix
    Returns:
        (float): concurrence in [0, 1]

    """
    matrix = check_density_matrix(_matrix(rho))
    if matrix.shape != (4, 4):
        fatal(f"Concurrence needs a 4x4 matrix, got {matrix.shape}", ShapeError)
    flip = np.kron(PAULI[2], PAULI[2])
    tilde = flip @ matrix.conj() @ flip
    root = sqrt_psd(matrix)
    product = root @ tilde @ root
    eigenvalues = np.sqrt(np.clip(np.linalg.eigvalsh((product + product.conj().T) / 2), 0.0, None))
    eigenvalues = np.sort(eigenvalues)[::-1]
    return float(min(1.0, max(0.0, eigenvalues[0] - eigenvalues[1:].sum())))


def fidelity(rho, target):
    """Overlap <target|rho|target> with a pure target state."""
    matrix = _matrix(rho)
    vector = target.amplitudes if isinstance(target, PureState) else np.asarray(target, dtype=complex)
    if matrix.shape != (vector.shape[0], vector.shape[0]):
        fatal(
            f"State of dimension {matrix.shape[0]} and target of dimension "
            f"{vector.shape[0]} differ",
            ShapeError,
        )
    return float(np.real(vector.conj() @ matrix @ vector))


def setting_projector(setting):
    """Projector of a two-letter polarization setting such as "HD"."""
    vector = np.kron(POLARIZATION_VECTORS[setting[0]], POLARIZATION_VECTORS[setting[1]])
    return np.outer(vector, vector.conj())


def setting_probabilities(rho, settings=TOMOGRAPHY_SETTINGS):
    """Coincidence probability of every tomography setting."""
    matrix = _matrix(rho)
    return np.array([np.real(np.trace(setting_projector(s) @ matrix)) for s in settings])


def _pauli_design(settings):
    """p_s = sum_k r_k A[s, k] with rho = sum_k r_k sigma_k / 4."""
    basis = [np.kron(PAULI[i], PAULI[j]) for i in range(4) for j in range(4)]
    return basis, np.array(
        [[np.real(np.trace(setting_projector(s) @ sigma)) / 4 for sigma in basis] for s in settings],
    )


@dataclass(frozen=True)
class TwoQubitTomoResult:
    rho: DensityOperator
    concurrence: float
    fidelity: float
    log_likelihood: float
    linear_rho: np.ndarray = field(repr=False, default=None)
    uncertainties: dict = field(default_factory=dict)
    method: str = "mle"
    converged: bool = True

    def as_dict(self):
        matrix = np.asarray(self.rho.matrix)
        return {
            "rho_real": matrix.real,
            "rho_imag": matrix.imag,
            "concurrence": self.concurrence,
            "fidelity": self.fidelity,
            "log_likelihood": self.log_likelihood,
            "uncertainties": dict(self.uncertainties),
            "method": self.method,
            "converged": self.converged,
        }


def _rho_from_t(params):
    lower = np.zeros((4, 4), dtype=complex)
    lower[np.diag_indices(4)] = params[:4]
    rows, cols = np.tril_indices(4, k=-1)
    lower[rows, cols] = params[4:10] + 1j * params[10:16]
    matrix = lower @ lower.conj().T
    return matrix / np.real(np.trace(matrix))


def _t_from_rho(matrix):
    regularized = matrix + 1e-6 * np.eye(4)
    lower = np.linalg.cholesky(regularized / np.real(np.trace(regularized)))
    rows, cols = np.tril_indices(4, k=-1)
    return np.concatenate(
        [np.real(np.diag(lower)), lower[rows, cols].real, lower[rows, cols].imag],
    )


def _negative_log_likelihood(matrix, projectors, frequencies):
    """Poisson likelihood with the total rate profiled out, per count."""
    probabilities = np.array([np.real(np.trace(p @ matrix)) for p in projectors])
    probabilities = np.clip(probabilities, 1e-300, None)
    used = frequencies > 0
    return float(
        -np.sum(frequencies[used] * np.log(probabilities[used])) + np.log(probabilities.sum()),
    )


def _counts_vector(counts, settings):
    if isinstance(counts, dict):
        settings = tuple(counts)
        values = np.array([counts[s] for s in settings], dtype=float)
    else:
        values = np.asarray(counts, dtype=float)
    if values.shape != (len(settings),):
        fatal(
            f"{values.shape[0]} count values for {len(settings)} settings",
            ShapeError,
        )
    if np.any(values < 0):
        fatal("Tomography counts must be >= 0", ValidationError)
    return values, tuple(settings)


def _reconstruct(values, settings):
    basis, design = _pauli_design(settings)
    if np.linalg.matrix_rank(design) < 16:
        fatal(
            f"The {len(settings)} settings are not informationally complete",
            CompletenessError,
        )
    if values.sum() <= 0:
        fatal("Tomography needs positive total counts", UndefinedEstimateError)
    solution = np.linalg.lstsq(design, values, rcond=None)[0]
    if solution[0] <= 0:
        fatal("Linear inversion gave a non-positive trace", UndefinedEstimateError)
    linear = sum(r * sigma for r, sigma in zip(solution / solution[0], basis)) / 4
    linear = (linear + linear.conj().T) / 2

    projectors = [setting_projector(s) for s in settings]
    frequencies = values / values.sum()
    eigenvalues, vectors = np.linalg.eigh(linear)
    seed = (vectors * np.clip(eigenvalues, 0.0, None)) @ vectors.conj().T
    seed = seed / np.real(np.trace(seed))
    result = minimize(
        lambda params: _negative_log_likelihood(_rho_from_t(params), projectors, frequencies),
        x0=_t_from_rho(seed),
        method="L-BFGS-B",
        options={"ftol": MLE_TOLERANCE, "gtol": MLE_TOLERANCE, "maxiter": MLE_MAX_ITERATIONS},
    )
    estimate = _rho_from_t(result.x)
    nll = result.fun
    method = "mle"
    if eigenvalues.min() >= -NEGATIVE_EIGENVALUE_TOL:
        linear_nll = _negative_log_likelihood(seed, projectors, frequencies)
        if linear_nll <= nll + 1e-12:
            estimate, nll, method = seed, linear_nll, "linear"
    if not result.success:
        verbose(f"MLE stopped: {result.message}")
    return linear, sanitize_matrix(estimate), -nll * values.sum(), method, bool(result.success)


def _bootstrap_tomography(args):
    values, settings, seed, target = args
    rng = np.random.default_rng(seed)
    _, estimate, _, _, _ = _reconstruct(rng.poisson(values).astype(float), settings)
    return wootters_concurrence(estimate), fidelity(estimate, target)


def tomography(counts, settings=TOMOGRAPHY_SETTINGS, target=None, bootstrap=0, seed=None, nprocs=1):
    """Maximum-likelihood two-qubit tomography.

    Linear inversion seeds a Poisson maximum-likelihood fit over physical
    states rho = T T^dag / Tr(T T^dag).

    Args:
        counts (dict|array): coincidences per setting (dict keys are the
                             settings), in the order of settings otherwise
        settings (tuple): two-letter projector settings
        target (PureState): reference state, the HH+VV Bell state if None
        bootstrap (int): number of Poisson bootstrap resamples
        seed (int): seed of the bootstrap
        nprocs (int): number of bootstrap processes
    Returns:
        (TwoQubitTomoResult): reconstructed state and figures of merit

    """
    values, settings = _counts_vector(counts, settings)
    target = bell_state() if target is None else target
    linear, estimate, log_likelihood, method, converged = _reconstruct(values, settings)
    rho = DensityOperator(POLARIZATION_REGISTER, estimate)
    uncertainties = {}
    if bootstrap:
        seeds = np.random.SeedSequence(seed).spawn(bootstrap)
        results = np.array(
            map_parallel(
                _bootstrap_tomography,
                [(values, settings, child, target) for child in seeds],
                nprocs,
            ),
        )
        uncertainties = {
            "concurrence": float(np.std(results[:, 0], ddof=1)),
            "fidelity": float(np.std(results[:, 1], ddof=1)),
        }
    return TwoQubitTomoResult(
        rho=rho,
        concurrence=wootters_concurrence(rho),
        fidelity=fidelity(rho, target),
        log_likelihood=log_likelihood,
        linear_rho=linear,
        uncertainties=uncertainties,
        method=method,
        converged=converged,
    )


def equatorial_projector(alpha, outcome):
    """Projector on (|H> + outcome e^(i alpha) |V>)/sqrt(2), outcome +1/-1."""
    vector = np.array([1, outcome * np.exp(1j * alpha)], dtype=complex) / np.sqrt(2)
    return np.outer(vector, vector.conj())


def chsh_probabilities(rho, alpha, beta):
    """Outcome probabilities ++, +-, -+, -- of one analyzer setting pair."""
    matrix = _matrix(rho)
    return np.array(
        [
            np.real(
                np.trace(
                    np.kron(equatorial_projector(alpha, s1), equatorial_projector(beta, s2))
                    @ matrix,
                ),
            )
            for s1, s2 in ((1, 1), (1, -1), (-1, 1), (-1, -1))
        ],
    )


@dataclass(frozen=True)
class ChshResult:
    correlations: dict
    correlation_errors: dict
    s_value: float
    sigma_s: float

    @property
    def violation_sigmas(self):
        return (self.s_value - 2.0) / self.sigma_s if self.sigma_s > 0 else np.inf

    def as_dict(self):
        return {
            "E": dict(self.correlations),
            "E_err": dict(self.correlation_errors),
            "S": self.s_value,
            "S_err": self.sigma_s,
            "violation_sigmas": self.violation_sigmas,
        }


def chsh(counts):
    """CHSH value from coincidence counts.

    Args:
        counts (dict): setting ("a,b", "a,b'", "a',b", "a',b'") ->
                       outcome ("++", "+-", "-+", "--") -> counts
    Returns:
        (ChshResult): correlations, S and Poisson errors

    """
    correlations = {}
    errors = {}
    for setting in CHSH_SETTINGS:
        if setting not in counts:
            fatal(f"CHSH setting <{setting}> is missing", ValidationError)
        outcome = {key: float(counts[setting].get(key, 0)) for key in CHSH_OUTCOMES}
        if any(value < 0 for value in outcome.values()):
            fatal(f"Negative counts in CHSH setting <{setting}>", ValidationError)
        total = sum(outcome.values())
        if total <= 0:
            fatal(f"CHSH setting <{setting}> has no counts", ValidationError)
        value = (outcome["++"] + outcome["--"] - outcome["+-"] - outcome["-+"]) / total
        correlations[setting] = value
        errors[setting] = float(np.sqrt(max(1.0 - value**2, 0.0) / total))
    s_value = abs(sum(CHSH_SIGNS[s] * correlations[s] for s in CHSH_SETTINGS))
    sigma_s = float(np.sqrt(sum(err**2 for err in errors.values())))
    return ChshResult(correlations, errors, float(s_value), sigma_s)
