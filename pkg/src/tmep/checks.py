"""Verification battery: the theory's identities as reproducible pass/fail reports.

Each check compares quantities computed along independent routes and reports
the largest residual next to the threshold it was held to.  Reports carry the
model fingerprint and the parameters needed to reproduce the run.  Checks
never mutate a model, so a battery can fan out over a thread pool.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .linalg import (
    DensityMatrix,
    FaithfulnessError,
    HermitianMatrix,
    fractional_power,
    matrix_log,
    propagator,
    psd_sqrt,
    spectral_decompose,
)
from .measures import (
    ATOM_MERGE_TOL,
    AbsoluteContinuityError,
    AtomicMeasure,
    cf_eval,
    distance_w1,
    match_atoms,
    moment,
    reflect,
)
from .modular import (
    SandwichMap,
    cesaro_average,
    connes_cocycle,
    dephase,
    evolve_state,
    relative_modular,
    relative_entropy,
    sandwich_residual,
    vector_representative,
)
from .models import (
    OpenSystemModel,
    ReservoirSpec,
    SystemModel,
    build_open_system,
    entropy_decomposition_check,
    kms_check,
    perturbed_reservoir_state,
    product_state,
    random_mixed_state,
    random_pure_state,
)
from .protocol import (
    NumericalIntegrityError,
    char_function_grid,
    ep_measure,
    ep_measure_spectral,
    ep_measure_spectral_at,
    joint_distribution,
    protocol_measure,
)

__all__ = [
    "CheckReport",
    "ScalingRow",
    "ScalingStudy",
    "threshold_for",
    "atomwise_residual",
    "check_mean_entropy",
    "check_strip_symmetry",
    "check_transpose_relation",
    "check_dephasing_invariance",
    "check_product_state_theorem",
    "check_modular_identities",
    "check_route_equivalence",
    "check_kms",
    "check_entropy_decomposition",
    "battery",
    "scaling_study",
    "DEFAULT_TIMES",
    "CESARO_RADII",
    "MIN_CESARO_RATE",
    "WEIGHT_FLOOR",
]

DEFAULT_TIMES = (0.25, 0.5, 1.0, 2.0)
DEFAULT_SEED = 20319
CESARO_RADII = (1e2, 1e3, 1e4)
MIN_CESARO_RATE = 0.8
WEIGHT_FLOOR = 1e-12
ALL_ROUTES = ("direct", "trace", "spectral", "cocycle-product")

_NUMERIC_ERRORS = (
    FaithfulnessError,
    NumericalIntegrityError,
    AbsoluteContinuityError,
    np.linalg.LinAlgError,
)


def threshold_for(dim: int) -> float:
    """Residual threshold by dimension; eigensolver backward error grows with size."""
    return 1e-9 if dim <= 512 else 1e-7


@dataclass
class CheckReport:
    check: str
    fingerprint: str
    params: dict
    residual_max: float
    threshold: float
    seconds: float

    @property
    def passed(self) -> bool:
        return self.residual_max <= self.threshold

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "fingerprint": self.fingerprint,
            "params": self.params,
            "residual_max": self.residual_max,
            "threshold": self.threshold,
            "verdict": self.verdict,
            "seconds": self.seconds,
        }


def _as_times(t) -> tuple[float, ...]:
    arr = np.atleast_1d(np.asarray(t, dtype=float))
    return tuple(float(x) for x in arr)


def _finish(check: str, model: SystemModel, params: dict, residual: float, t0: float) -> CheckReport:
    return CheckReport(
        check=check,
        fingerprint=model.fingerprint,
        params=params,
        residual_max=float(residual),
        threshold=threshold_for(model.dim),
        seconds=time.perf_counter() - t0,
    )


def atomwise_residual(
    p: AtomicMeasure,
    q: AtomicMeasure,
    *,
    match_tol: float = ATOM_MERGE_TOL,
    weight_floor: float = 0.0,
) -> float:
    """Largest weight discrepancy between two measures with matched supports.

    Matched atoms contribute |w_p - w_q|; an unmatched atom contributes its
    own weight unless it sits below weight_floor (eigensolver roundoff can
    produce stray atoms with masses tens of orders below every tolerance).
    """
    pairs, up, uq = match_atoms(p, q, match_tol)
    r = 0.0
    if pairs:
        idx = np.asarray(pairs)
        r = float(np.max(np.abs(p.weights[idx[:, 0]] - q.weights[idx[:, 1]])))
    for i in up:
        if p.weights[i] > weight_floor:
            r = max(r, float(p.weights[i]))
    for j in uq:
        if q.weights[j] > weight_floor:
            r = max(r, float(q.weights[j]))
    return r


def _trace_cf(omega_from: DensityMatrix, omega: DensityMatrix):
    """Evaluator for tr(omega_from^a omega^(1-a)) that is O(d^2) per point."""
    mu, u = omega_from.eig()
    lam, v = omega.eig()
    if np.any(mu <= 0) or np.any(lam <= 0):
        raise FaithfulnessError("trace formula needs faithful states")
    overlap = np.abs(u.conj().T @ v) ** 2
    log_mu = np.log(mu)
    log_lam = np.log(lam)

    def evaluate(alpha: complex) -> complex:
        return complex(np.exp(alpha * log_mu) @ overlap @ np.exp((1.0 - alpha) * log_lam))

    return evaluate


def check_mean_entropy(model: SystemModel, t=DEFAULT_TIMES) -> CheckReport:
    """First moment of Q against minus the relative entropy of the evolved state."""
    t0 = time.perf_counter()
    times = _as_times(t)
    omega, H = model.reference, model.hamiltonian
    resid = 0.0
    means = []
    for tau in times:
        q = protocol_measure(omega, omega, H, tau)
        m1 = moment(q, 1)
        ent = relative_entropy(evolve_state(omega, H, tau), omega)
        means.append(m1)
        resid = max(resid, abs(m1 + ent))
        if m1 < -1e-12:
            resid = max(resid, 1.0 + abs(m1))
    params = {"times": list(times), "means": means}
    return _finish("mean_entropy", model, params, resid, t0)


def check_strip_symmetry(
    model: SystemModel,
    t=DEFAULT_TIMES,
    *,
    re_points: int = 9,
    im_points: int = 9,
    im_max: float = 2.0,
) -> CheckReport:
    """Both strip symmetries of the characteristic function on a Re x Im grid.

    The forward/backward symmetry F_t(a) = conj F_{-t}(1 - conj a) holds for
    any model; the in-place variant F_t(a) = conj F_t(1 - conj a) additionally
    uses that every built model is fixed by entrywise conjugation.
    """
    t0 = time.perf_counter()
    times = _as_times(t)
    omega, H = model.reference, model.hamiltonian
    res = np.linspace(0.0, 1.0, re_points)
    ims = np.linspace(-im_max, im_max, im_points)
    alphas = (res[:, None] + 1j * ims[None, :]).ravel()
    resid = 0.0
    for tau in times:
        forward = _trace_cf(evolve_state(omega, H, -tau), omega)
        backward = _trace_cf(evolve_state(omega, H, tau), omega)
        for a in alphas:
            v = forward(a)
            mirrored = 1.0 - np.conj(a)
            resid = max(resid, abs(v - np.conj(backward(mirrored))))
            resid = max(resid, abs(v - np.conj(forward(mirrored))))
    params = {
        "times": list(times),
        "grid": {"re_points": re_points, "im_points": im_points, "im_max": im_max},
    }
    return _finish("strip_symmetry", model, params, resid, t0)


def check_transpose_relation(model: SystemModel, t=DEFAULT_TIMES) -> CheckReport:
    """Reflected measure against e^(-s) reweighting, atom by atom."""
    t0 = time.perf_counter()
    times = _as_times(t)
    omega, H = model.reference, model.hamiltonian
    resid = 0.0
    atoms_checked = 0
    for tau in times:
        q = protocol_measure(omega, omega, H, tau)
        qr = reflect(q)
        pairs, up, uq = match_atoms(qr, q)
        for i, j in pairs:
            wr, wq = float(qr.weights[i]), float(q.weights[j])
            if wq <= WEIGHT_FLOOR and wr <= WEIGHT_FLOOR:
                continue
            if wq <= WEIGHT_FLOOR:
                resid = np.inf
                continue
            target = float(np.exp(-q.locations[j]))
            resid = max(resid, abs(wr / wq - target) / target)
            atoms_checked += 1
        for i in up:
            if qr.weights[i] > WEIGHT_FLOOR:
                resid = np.inf
        for j in uq:
            if q.weights[j] > WEIGHT_FLOOR:
                resid = np.inf
    params = {"times": list(times), "atoms_checked": atoms_checked, "weight_floor": WEIGHT_FLOOR}
    return _finish("transpose_relation", model, params, resid, t0)


def _cocycle_product_observable(omega: DensityMatrix, omega_minus_t: DensityMatrix) -> np.ndarray:
    """The operator whose dephased expectation is the characteristic function at alpha = i."""
    u_plus = fractional_power(omega_minus_t, 0.5j) @ fractional_power(omega, -0.5j)
    u_minus = fractional_power(omega_minus_t, -0.5j) @ fractional_power(omega, 0.5j)
    return u_minus.conj().T @ u_plus


def check_dephasing_invariance(
    model: SystemModel,
    t=DEFAULT_TIMES,
    nu_samples=None,
    *,
    seed: int = DEFAULT_SEED,
    radii=CESARO_RADII,
) -> CheckReport:
    """Measurement statistics depend on the initial state only through its dephasing.

    Part one compares Q for each sampled state against Q for its dephased
    version, atom by atom.  Part two integrates the modular-flow average
    that produces the dephasing and fits the empirical convergence rate
    toward the analytic limit over the given radii.
    """
    t0 = time.perf_counter()
    times = _as_times(t)
    omega, H = model.reference, model.hamiltonian
    res = spectral_decompose(omega)
    rng = np.random.default_rng(seed)
    if nu_samples is None:
        nu_samples = [random_pure_state(model.dim, rng) for _ in range(5)]
        nu_samples += [random_mixed_state(model.dim, rng) for _ in range(4)]
        if isinstance(model, OpenSystemModel):
            nu_samples.append(product_state(model, random_mixed_state(model.dim_s, rng)))
        else:
            nu_samples.append(random_mixed_state(model.dim, rng))
    resid = 0.0
    for nu in nu_samples:
        nu_bar = dephase(nu, res)
        for tau in times:
            q_raw = ep_measure(joint_distribution(nu, res, H, tau), res)
            q_deph = ep_measure(joint_distribution(nu_bar, res, H, tau), res)
            resid = max(resid, atomwise_residual(q_raw, q_deph))

    # A fixed probe time keeps the averaged observable generic: canonical
    # time grids can conjugate the reference onto a commuting state, which
    # would leave nothing to average.
    tau = 1.0
    observable = _cocycle_product_observable(omega, evolve_state(omega, H, -tau))
    errors = []
    for radius in radii:
        ces = cesaro_average(nu_samples[0], omega, observable, radius)
        err = abs(ces.value - ces.limit)
        errors.append(err)
        resid = max(resid, max(0.0, err - ces.bound * (1.0 + 1e-9) - 1e-12))
    rate: float | None = None
    if max(errors) > 1e-13:
        slope = np.polyfit(np.log10(np.asarray(radii)), np.log10(np.maximum(errors, 1e-16)), 1)[0]
        rate = float(-slope)
        resid = max(resid, max(0.0, MIN_CESARO_RATE - rate))
    params = {
        "times": list(times),
        "samples": len(nu_samples),
        "cesaro": {"radii": list(radii), "errors": errors, "rate": rate, "time": tau},
    }
    return _finish("dephasing_invariance", model, params, resid, t0)


def check_product_state_theorem(model: OpenSystemModel, t=DEFAULT_TIMES, nu_s=None) -> CheckReport:
    """Exactness of the spectral route and the Radon-Nikodym bounds for product states."""
    t0 = time.perf_counter()
    if not isinstance(model, OpenSystemModel):
        raise TypeError("product-state check needs an open-system model")
    times = _as_times(t)
    omega, H = model.reference, model.hamiltonian
    if nu_s is None:
        weights = np.array([0.9, 0.1]) if model.dim_s == 2 else None
        if weights is None:
            weights = np.arange(model.dim_s, 0, -1, dtype=float)
            weights /= weights.sum()
        nu_s = DensityMatrix(np.diag(weights))
    gamma = float(nu_s.min_eigenvalue())
    n_sys = model.dim_s
    nu = product_state(model, nu_s)
    phi = vector_representative(nu)
    res = spectral_decompose(omega)
    resid = 0.0
    ratio_range = [np.inf, 0.0]
    for tau in times:
        q_nu = ep_measure(joint_distribution(nu, res, H, tau), res)
        q_spec = ep_measure_spectral_at(phi, omega, H, tau)
        resid = max(resid, atomwise_residual(q_nu, q_spec, weight_floor=WEIGHT_FLOOR))
        q_omega = ep_measure(joint_distribution(omega, res, H, tau), res)
        pairs, up, uq = match_atoms(q_nu, q_omega)
        ratios = [
            float(q_nu.weights[i] / q_omega.weights[j])
            for i, j in pairs
            if q_omega.weights[j] > WEIGHT_FLOOR
        ]
        ratios.extend(0.0 for j in uq if q_omega.weights[j] > WEIGHT_FLOOR)
        for i in up:
            if q_nu.weights[i] > WEIGHT_FLOOR:
                resid = np.inf
        if ratios:
            ratio_range = [min(ratio_range[0], min(ratios)), max(ratio_range[1], max(ratios))]
            resid = max(resid, max(ratios) - n_sys)
            if gamma > 1e-12:
                resid = max(resid, gamma * n_sys - min(ratios))
    params = {
        "times": list(times),
        "gamma": gamma,
        "dim_s": n_sys,
        "ratio_range": [float(ratio_range[0]), float(ratio_range[1])],
    }
    return _finish("product_state", model, params, resid, t0)


def _unit_spectral_norm(m: np.ndarray) -> np.ndarray:
    return m / np.linalg.norm(m, 2)


def _random_observable(dim: int, rng: np.random.Generator) -> np.ndarray:
    return _unit_spectral_norm(rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))


def _kms_residual(model: SystemModel, rng: np.random.Generator) -> tuple[float, dict]:
    """Equilibrium boundary condition, per reservoir when the model has them."""
    details: dict = {}
    worst = 0.0
    if isinstance(model, OpenSystemModel):
        for j, (spec, h_j, state) in enumerate(
            zip(model.reservoirs, model.reservoir_hamiltonians, model.reservoir_states)
        ):
            a = _random_observable(spec.dim, rng)
            b = _random_observable(spec.dim, rng)
            r = max(kms_check(state, h_j, spec.beta, a, b, tp) for tp in (0.0, 1.0, -1.0))
            details[f"reservoir_{j}"] = r
            worst = max(worst, r)
    else:
        modular_h = HermitianMatrix(-matrix_log(model.reference))
        a = _random_observable(model.dim, rng)
        b = _random_observable(model.dim, rng)
        worst = max(kms_check(model.reference, modular_h, 1.0, a, b, tp) for tp in (0.0, 1.0, -1.0))
        details["modular_hamiltonian"] = worst
    return worst, details


def check_kms(model: SystemModel, *, seed: int = DEFAULT_SEED) -> CheckReport:
    """Thermal boundary condition for the reference state's equilibrium data.

    Open-system models are checked reservoir by reservoir at their own
    temperatures; a bare model is checked against its modular Hamiltonian
    -log omega at inverse temperature one, which every faithful state obeys.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst, details = _kms_residual(model, rng)
    params = {"residuals": details, "probe_times": [0.0, 1.0, -1.0]}
    return _finish("kms", model, params, worst, t0)


def check_modular_identities(model: SystemModel, t=DEFAULT_TIMES, *, seed: int = DEFAULT_SEED) -> CheckReport:
    """Structural identities of the standard representation on the model's data.

    Covers the commutation of the dynamics with the reference's two-sided
    multiplications, the entrywise-conjugation involution (which fixes every
    built model), the cocycle chain rule and factorization certificate, the
    conjugation flip of the relative modular operator, and the thermal
    boundary condition.
    """
    t0 = time.perf_counter()
    times = _as_times(t)
    omega, H = model.reference, model.hamiltonian
    d = model.dim
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    y = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    mu = random_mixed_state(d, rng, real=True)
    parts: dict[str, float] = {}

    def record(name: str, value: float) -> None:
        parts[name] = max(parts.get(name, 0.0), float(value))

    # antiunitary involution: isometry up to conjugation, squares to one,
    # commutes with the modular conjugation
    record("conjugation_antiunitary", abs(np.trace(x.conj().T.conj() @ y.conj()) - np.conj(np.trace(x.conj().T @ y))))
    record("conjugation_involution", float(np.max(np.abs(x.conj().conj() - x))))
    record("conjugation_commutes_j", float(np.max(np.abs(x.conj().T.conj() - x.conj().conj().T))))
    record("conjugation_fixes_vacuum", float(np.max(np.abs(psd_sqrt(omega).imag))))
    commutator = H.entries @ x - x @ H.entries
    record(
        "conjugation_commutes_derivation",
        float(np.max(np.abs(commutator.conj() - (H.entries @ x.conj() - x.conj() @ H.entries)))),
    )

    omega_inv = fractional_power(omega, -1.0)
    omega_inv_sqrt = fractional_power(omega, -0.5)
    for tau in times:
        u = propagator(H, tau)
        omega_t = evolve_state(omega, H, tau)
        omega_mt = evolve_state(omega, H, -tau)

        inner = SandwichMap(u, u.conj().T)
        middle = SandwichMap(omega.entries, fractional_power(omega_t, -1.0))
        outer = SandwichMap(u.conj().T, u)
        record(
            "flow_identity",
            sandwich_residual(outer.compose(middle.compose(inner)), SandwichMap(omega_mt.entries, omega_inv)),
        )

        record(
            "conjugation_flips_modular",
            sandwich_residual(
                SandwichMap(psd_sqrt(omega_mt).conj(), omega_inv_sqrt.conj()),
                SandwichMap(psd_sqrt(omega_t), omega_inv_sqrt),
            ),
        )

        forward = relative_modular(omega_mt, omega, 1.0)
        flipped = SandwichMap(forward.right.conj().T, forward.left.conj().T)
        record("j_flip", sandwich_residual(flipped, relative_modular(omega, omega_mt, -1.0)))

        for s in (0.5, 1.0):
            u1, cert = connes_cocycle(omega_mt, omega, s)
            record("cocycle_certificate", max(cert.unitarity_residual, cert.factorization_residual))
            u2, _ = connes_cocycle(omega, mu, s)
            u3, _ = connes_cocycle(omega_mt, mu, s)
            record("cocycle_chain_rule", float(np.max(np.abs(u1 @ u2 - u3))))

    kms_worst, _ = _kms_residual(model, rng)
    record("kms", kms_worst)

    resid = max(parts.values())
    params = {"times": list(times), "parts": parts}
    return _finish("modular_identities", model, params, resid, t0)


def check_route_equivalence(
    model: SystemModel,
    t=DEFAULT_TIMES,
    *,
    points: int = 41,
    im_max: float = 10.0,
) -> CheckReport:
    """All four computational routes against each other for the reference state.

    Characteristic functions are compared on an imaginary grid (the common
    domain of every route) and the protocol and spectral measures atom by
    atom.
    """
    t0 = time.perf_counter()
    times = _as_times(t)
    omega, H = model.reference, model.hamiltonian
    alphas = 1j * np.linspace(-im_max, im_max, points)
    resid = 0.0
    for tau in times:
        grids = {route: char_function_grid(omega, omega, H, tau, alphas, route) for route in ALL_ROUTES}
        base = grids["direct"].values
        for route in ALL_ROUTES[1:]:
            resid = max(resid, float(np.max(np.abs(grids[route].values - base))))
        q_protocol = protocol_measure(omega, omega, H, tau)
        q_spectral = ep_measure_spectral_at(vector_representative(omega), omega, H, tau)
        resid = max(resid, atomwise_residual(q_protocol, q_spectral, weight_floor=WEIGHT_FLOOR))
    params = {"times": list(times), "alpha_points": points, "im_max": im_max, "routes": list(ALL_ROUTES)}
    return _finish("route_equivalence", model, params, resid, t0)


def check_entropy_decomposition(model: OpenSystemModel, t=DEFAULT_TIMES) -> CheckReport:
    """Entropy steps against temperature-weighted reservoir energy steps."""
    t0 = time.perf_counter()
    if not isinstance(model, OpenSystemModel):
        raise TypeError("entropy decomposition needs an open-system model")
    times = _as_times(t)
    omega, H = model.reference, model.hamiltonian
    res = spectral_decompose(omega)
    resid = 0.0
    checked = 0
    skipped: list[str] = []
    for tau in times:
        jd = joint_distribution(omega, res, H, tau)
        report = entropy_decomposition_check(model, jd)
        resid = max(resid, report.residual)
        checked += report.checked_pairs
        skipped.extend(msg for _, msg in report.skipped_clusters)
    params = {"times": list(times), "checked_pairs": checked, "skipped_clusters": sorted(set(skipped))}
    return _finish("entropy_decomposition", model, params, resid, t0)


_BATTERY_ERROR_RESIDUAL = float("inf")


def battery(
    model: SystemModel,
    *,
    times=DEFAULT_TIMES,
    seed: int = DEFAULT_SEED,
    jobs: int = 1,
    dephasing_samples=None,
) -> list[CheckReport]:
    """Run every applicable check; open-system models get two extra reports.

    A numeric failure inside one check is converted into a failing report so
    the rest of the battery still runs.
    """
    times = _as_times(times)
    model.reference.eig()
    model.hamiltonian.eig()

    tasks: list[tuple[str, object]] = [
        ("mean_entropy", lambda: check_mean_entropy(model, times)),
        ("strip_symmetry", lambda: check_strip_symmetry(model, times)),
        ("transpose_relation", lambda: check_transpose_relation(model, times)),
        (
            "dephasing_invariance",
            lambda: check_dephasing_invariance(model, times, dephasing_samples, seed=seed),
        ),
        ("modular_identities", lambda: check_modular_identities(model, times, seed=seed)),
        ("route_equivalence", lambda: check_route_equivalence(model, times)),
        ("kms", lambda: check_kms(model, seed=seed)),
    ]
    if isinstance(model, OpenSystemModel):
        tasks.append(("product_state", lambda: check_product_state_theorem(model, times)))
        tasks.append(("entropy_decomposition", lambda: check_entropy_decomposition(model, times)))

    def run(task):
        name, fn = task
        start = time.perf_counter()
        try:
            return fn()
        except _NUMERIC_ERRORS as exc:
            return CheckReport(
                check=name,
                fingerprint=model.fingerprint,
                params={"times": list(times), "error": f"{type(exc).__name__}: {exc}"},
                residual_max=_BATTERY_ERROR_RESIDUAL,
                threshold=threshold_for(model.dim),
                seconds=time.perf_counter() - start,
            )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run, tasks))
    return [run(task) for task in tasks]


@dataclass
class ScalingRow:
    chain_length: int
    dim: int
    w1: float
    reports: list[CheckReport]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)


@dataclass
class ScalingStudy:
    rows: list[ScalingRow]
    params: dict

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)

    def table(self) -> list[tuple[int, float]]:
        return [(row.chain_length, row.w1) for row in self.rows]


def _scaling_dephasing(model: OpenSystemModel, res, nu, q_nu, t: float) -> CheckReport:
    t0 = time.perf_counter()
    nu_bar = dephase(nu, res)
    q_bar = ep_measure(joint_distribution(nu_bar, res, model.hamiltonian, t), res)
    resid = atomwise_residual(q_nu, q_bar, weight_floor=WEIGHT_FLOOR)
    return _finish("scaling_dephasing", model, {"time": t}, resid, t0)


def _scaling_routes(
    model: OpenSystemModel,
    res,
    nu_pert: DensityMatrix,
    q_pert: AtomicMeasure,
    nu_ref: DensityMatrix,
    q_ref: AtomicMeasure,
    t: float,
    *,
    points: int = 9,
    im_max: float = 2.0,
) -> CheckReport:
    """Route agreement at scale: scalar routes on the perturbed state, the
    spectral route on the product reference state where it is exact."""
    t0 = time.perf_counter()
    omega, H = model.reference, model.hamiltonian
    alphas = 1j * np.linspace(-im_max, im_max, points)
    omega_mt = evolve_state(omega, H, -t)
    nu_bar = dephase(nu_pert, res)
    base = np.array([cf_eval(q_pert, a) for a in alphas])

    parts: dict[str, float] = {}
    left_powers = {a: fractional_power(omega_mt, a) for a in alphas}
    trace_vals = np.array(
        [np.trace(left_powers[a] @ fractional_power(omega, -a) @ nu_bar.entries) for a in alphas]
    )
    parts["trace"] = float(np.max(np.abs(trace_vals - base)))

    cocycle_vals = []
    for a in alphas:
        u_plus = fractional_power(omega_mt, a / 2.0) @ fractional_power(omega, -a / 2.0)
        u_minus = fractional_power(omega_mt, np.conj(a) / 2.0) @ fractional_power(omega, -np.conj(a) / 2.0)
        cocycle_vals.append(np.trace(nu_bar.entries @ u_minus.conj().T @ u_plus))
    parts["cocycle-product"] = float(np.max(np.abs(np.asarray(cocycle_vals) - base)))

    q_spec = ep_measure_spectral(vector_representative(nu_ref), omega_mt, omega)
    parts["spectral_product_reference"] = atomwise_residual(q_ref, q_spec, weight_floor=WEIGHT_FLOOR)

    params = {"time": t, "alpha_points": points, "im_max": im_max, "parts": parts}
    return _finish("scaling_routes", model, params, max(parts.values()), t0)


def scaling_study(
    chain_lengths=(1, 2, 3, 4, 5),
    *,
    betas=(1.0, 2.0),
    reservoir: int = 0,
    beta_prime: float | None = None,
    t: float = 1.0,
    nu_s=(0.9, 0.1),
    dim_s: int = 2,
    coupling_strength: float = 0.5,
    level_splitting: float = 1.0,
    dimension_cap: int | None = None,
) -> ScalingStudy:
    """Distance of the perturbed-reservoir statistics from the product-state
    statistics as the chains grow, with hard identity checks at every size.

    The perturbation replaces one reservoir's Gibbs factor by a locally
    re-thermalized one (default: half the inverse temperature on its first
    site).  The W1 column is reported as data; only the per-size dephasing
    and route identities are asserted.
    """
    nu_sys = DensityMatrix(np.diag(np.asarray(nu_s, dtype=float)))
    rows: list[ScalingRow] = []
    for n in chain_lengths:
        specs = [ReservoirSpec(chain_length=int(n), beta=float(b)) for b in betas]
        model = build_open_system(
            dim_s,
            specs,
            coupling_strength=coupling_strength,
            level_splitting=level_splitting,
            dimension_cap=dimension_cap,
        )
        bp = betas[reservoir] / 2.0 if beta_prime is None else beta_prime
        nu_ref = product_state(model, nu_sys)
        nu_pert = perturbed_reservoir_state(model, nu_sys, reservoir, bp)
        res = spectral_decompose(model.reference)
        q_pert = ep_measure(joint_distribution(nu_pert, res, model.hamiltonian, t), res)
        q_ref = ep_measure(joint_distribution(nu_ref, res, model.hamiltonian, t), res)
        w1 = distance_w1(q_pert, q_ref)
        reports = [
            _scaling_dephasing(model, res, nu_pert, q_pert, t),
            _scaling_routes(model, res, nu_pert, q_pert, nu_ref, q_ref, t),
        ]
        rows.append(ScalingRow(chain_length=int(n), dim=model.dim, w1=float(w1), reports=reports))
    params = {
        "betas": list(betas),
        "reservoir": reservoir,
        "beta_prime": betas[reservoir] / 2.0 if beta_prime is None else beta_prime,
        "time": t,
        "nu_s": list(np.asarray(nu_s, dtype=float)),
        "coupling_strength": coupling_strength,
        "dim_s": dim_s,
        "level_splitting": level_splitting,
    }
    return ScalingStudy(rows=rows, params=params)
