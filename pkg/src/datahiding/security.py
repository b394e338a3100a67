"""
Empirical security evaluation of scrambled codewords against separable measurements.

The scrambled codeword for message x is R_U(psi(x)) = (1/K) sum_k U_k psi(x) U_k^dag
with every U_k a product of n Haar unitaries. Because U_kj V_xj |0> is itself Haar
distributed, fresh scrambles are sampled directly as K independent Haar product
states; the message only matters when explicit unitaries are supplied.

Outputs of N^{(x)n} live on (B_1 C_1)(B_2 C_2)...; everything measured here is
first reordered to B_1..B_n C_1..C_n so that a :class:`ProductMeasurement`
with vectors on d_B^n and d_C^n applies directly.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import bounds as bnd
from . import channels as chn
from . import codes
from . import measurements as meas
from . import qlin
from .errors import DimensionMismatchError, InvalidParameterError, ResourceGuardError

LN2 = math.log(2.0)
MIN_U_SAMPLES = 30
NET_VERIFY_DIM = 4
NET_PROBES = 10**5
_MAX_BATCH_ENTRIES = 2 * 10**6


def _bipartite(channel) -> chn.BroadcastChannel:
    if not isinstance(channel, chn.BroadcastChannel) or not channel.is_bipartite:
        raise InvalidParameterError("security analysis needs a bipartite BroadcastChannel")
    return channel


def bc_order(n: int) -> list[int]:
    """Permutation taking factors (B1 C1 ... Bn Cn) to (B1 .. Bn C1 .. Cn)."""
    return list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))


def to_bc_order(op, channel: chn.BroadcastChannel, n: int) -> np.ndarray:
    """Reorder an n-site output operator (or vector, or stack of operators)."""
    dims = [channel.d_B, channel.d_C] * n
    op = np.asarray(op, dtype=complex)
    if n == 1:
        return op
    if op.ndim <= 2:
        return qlin.permute_subsystems(op, dims, bc_order(n))
    lead = op.shape[:-2]
    flat = op.reshape((-1,) + op.shape[-2:])
    out = np.stack([qlin.permute_subsystems(o, dims, bc_order(n)) for o in flat])
    return out.reshape(lead + op.shape[-2:])


def to_site_order(vec, channel: chn.BroadcastChannel, n: int) -> np.ndarray:
    """Inverse of :func:`to_bc_order` for vectors (..., D)."""
    vec = np.asarray(vec, dtype=complex)
    if n == 1:
        return vec
    inv = list(np.argsort(bc_order(n)))
    dims_bc = [channel.d_B] * n + [channel.d_C] * n
    lead = vec.shape[:-1]
    t = vec.reshape(lead + tuple(dims_bc))
    t = np.moveaxis(t, [len(lead) + i for i in inv], range(len(lead), len(lead) + 2 * n))
    return t.reshape(lead + (-1,))


def _check_measurement(channel: chn.BroadcastChannel, n: int, m: meas.ProductMeasurement) -> None:
    if (m.dim_b, m.dim_c) != (channel.d_B**n, channel.d_C**n):
        raise DimensionMismatchError(
            f"measurement acts on {m.dim_b}x{m.dim_c}, outputs are {channel.d_B**n}x{channel.d_C**n}"
        )


# --------------------------------------------------------------------------
# outcome statistics


def conditional_pmf(cb: codes.CodeBook, channel, x: int, m: meas.ProductMeasurement):
    """Outcome distribution of ``m`` on N^{(x)n}(rho(x)).

    Returns a :class:`qlin.Pmf` for projective measurements and the raw
    (sub-normalised) weight vector for quasi-measurements.
    """
    channel = _bipartite(channel)
    if channel.d_A != cb.d_A:
        raise DimensionMismatchError(f"codebook qudits have d_A={cb.d_A}, channel input is {channel.d_A}")
    _check_measurement(channel, cb.n, m)
    rho = np.asarray(codes.codeword(cb, x))
    out = to_bc_order(chn.apply_tensor_power(channel, rho, cb.n), channel, cb.n)
    p = m.probabilities(out)
    if m.kind == meas.PROJECTIVE:
        return qlin.Pmf(p)
    return p


def _scramble_from_vectors(w: np.ndarray) -> np.ndarray:
    """(1/K) sum_k |w_k><w_k| for rows w, batched over leading axes."""
    return np.einsum("...ki,...kj->...ij", w, w.conj()) / w.shape[-2]


def scrambled_inputs(d_A: int, n: int, K: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` independent draws of R_U(psi), shape (count, d_A^n, d_A^n)."""
    dim = d_A**n
    if dim > codes.MAX_WORKSPACE_DIM:
        raise ResourceGuardError(f"d_A^n = {dim} exceeds {codes.MAX_WORKSPACE_DIM}")
    out = np.empty((count, dim, dim), dtype=complex)
    per = max(1, _MAX_BATCH_ENTRIES // (K * dim))
    for start in range(0, count, per):
        c = min(per, count - start)
        sites = qlin.haar_states(d_A, c * K * n, rng).reshape(c, K, n, d_A)
        out[start:start + c] = _scramble_from_vectors(codes.kron_rows(sites))
    return out


def scrambled_outputs(channel, n: int, K: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """N^{(x)n}(R_U(psi)) for fresh scrambles, reordered to B^n C^n."""
    channel = _bipartite(channel)
    rho = scrambled_inputs(channel.d_A, n, K, count, rng)
    return to_bc_order(chn.apply_tensor_power(channel, rho, n), channel, n)


def explicit_scrambled_outputs(cb: codes.CodeBook, channel, x: int, u_tuples) -> np.ndarray:
    """Scrambled outputs for message x with explicit key unitaries (T, K, n, d, d)."""
    u_tuples = np.asarray(u_tuples, dtype=complex)
    if u_tuples.shape[2:] != (cb.n, cb.d_A, cb.d_A):
        raise DimensionMismatchError(f"u_tuples has shape {u_tuples.shape}")
    fid = cb.v[x][:, :, 0]
    sites = np.einsum("tkjab,jb->tkja", u_tuples, fid)
    rho = _scramble_from_vectors(codes.kron_rows(sites))
    return to_bc_order(chn.apply_tensor_power(channel, rho, cb.n), channel, cb.n)


def reference_pmf(channel, n: int, m: meas.ProductMeasurement) -> np.ndarray:
    """Outcome weights of ``m`` on N^{(x)n}(pi^{(x)n})."""
    pi = np.asarray(qlin.maximally_mixed(channel.d_A))
    out = qlin.tensor_power(chn.apply_array(channel, pi), n)
    return m.probabilities(to_bc_order(out, channel, n))


# --------------------------------------------------------------------------
# mutual information I(Y;U)


@dataclass
class MIEstimate:
    mi: float
    stderr: float
    bias: float
    h_y: float
    h_y_given_u: float
    u_samples: int
    n_outcomes: int
    deficit: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _entropies(p: np.ndarray) -> np.ndarray:
    return qlin.entropy_of_spectrum(p, axis=-1)


def mi_from_pmfs(pmfs) -> tuple[np.ndarray, np.ndarray]:
    """Plug-in I(Y;U) and its jackknife stderr from per-tuple PMFs.

    ``pmfs`` has shape (..., u, Y); returns arrays over the leading axes.
    """
    p = np.asarray(pmfs, dtype=float)
    u = p.shape[-2]
    h_each = _entropies(p)
    total = p.sum(axis=-2)
    mi = _entropies(total / u) - h_each.mean(axis=-1)
    loo_mean = (total[..., None, :] - p) / (u - 1)
    loo_hc = (h_each.sum(axis=-1)[..., None] - h_each) / (u - 1)
    loo = _entropies(loo_mean) - loo_hc
    se = np.sqrt((u - 1) / u * ((loo - loo.mean(axis=-1, keepdims=True)) ** 2).sum(axis=-1))
    return mi, se


def plugin_bias(n_outcomes: int, u_samples: int) -> float:
    """First-order upward bias of the plug-in estimate, (|Y| - 1)/(2 u ln 2)."""
    return (n_outcomes - 1) / (2 * u_samples * LN2)


def mi_estimate(pmfs) -> MIEstimate:
    p = np.asarray(pmfs, dtype=float)
    sums = p.sum(axis=-1)
    deficit = float(1.0 - sums.mean())
    p = p / sums[:, None]
    mi, se = mi_from_pmfs(p)
    u, ny = p.shape
    return MIEstimate(
        mi=float(mi), stderr=float(se), bias=plugin_bias(ny, u),
        h_y=qlin.shannon_entropy(p.mean(axis=0)), h_y_given_u=float(_entropies(p).mean()),
        u_samples=u, n_outcomes=ny, deficit=deficit,
    )


def mutual_info_y_u(channel, n: int, M: int, K: int, x: int, m: meas.ProductMeasurement,
                    u_samples: int, rng: np.random.Generator) -> MIEstimate:
    """Plug-in estimate of I(Y;U) for message x over ``u_samples`` fresh key tuples.

    Quasi-measurement PMFs are renormalised per tuple; the mean deficit is
    reported. The estimate is biased upward by roughly ``bias`` bits.
    """
    channel = _bipartite(channel)
    if u_samples < MIN_U_SAMPLES:
        raise InvalidParameterError(f"u_samples must be at least {MIN_U_SAMPLES}")
    if not 0 <= x < M:
        raise IndexError(f"message index {x} outside 0..{M - 1}")
    _check_measurement(channel, n, m)
    out = scrambled_outputs(channel, n, K, u_samples, rng)
    return mi_estimate(m.probabilities(out))


# --------------------------------------------------------------------------
# l1 security criterion


@dataclass
class TraceDistanceEstimate:
    value: float
    stderr: float
    samples: int
    mictodiactic: bool
    reference: str

    def __float__(self):
        return self.value


def security_trace_distance(cb: codes.CodeBook, channel, m: meas.ProductMeasurement, u_samples: int,
                            rng: np.random.Generator, exact_scramble: bool = False,
                            u_tuples=None) -> TraceDistanceEstimate:
    """Average over messages and key tuples of sum_y |p_{Y|U}(y) - p_Y(y)|.

    p_Y is the outcome distribution on N^{(x)n}(pi^{(x)n}), which is uniform
    for mictodiactic channels. ``exact_scramble`` replaces the key average by
    its exact value pi^{(x)n}; ``u_tuples`` (T, K, n, d, d) fixes the keys.
    """
    channel = _bipartite(channel)
    _check_measurement(channel, cb.n, m)
    micto = chn.is_mictodiactic(channel)
    ref = reference_pmf(channel, cb.n, m)
    if exact_scramble:
        out = qlin.tensor_power(chn.apply_array(channel, np.asarray(qlin.maximally_mixed(cb.d_A))), cb.n)
        p = m.probabilities(to_bc_order(out, channel, cb.n))[None, :]
    elif u_tuples is not None:
        p = np.concatenate([m.probabilities(explicit_scrambled_outputs(cb, channel, x, u_tuples))
                            for x in range(cb.M)])
    else:
        if u_samples < MIN_U_SAMPLES:
            raise InvalidParameterError(f"u_samples must be at least {MIN_U_SAMPLES}")
        p = m.probabilities(scrambled_outputs(channel, cb.n, cb.K, u_samples, rng))
    dist = np.abs(p - ref).sum(axis=-1)
    se = float(dist.std(ddof=1) / math.sqrt(dist.size)) if dist.size > 1 else 0.0
    return TraceDistanceEstimate(float(dist.mean()), se, int(dist.size), micto,
                                 "uniform" if micto else "measured-pi")


# --------------------------------------------------------------------------
# concentration bounds


def maurer_bound(expectation: float, second_moment: float, K: int, tau: float) -> float:
    """exp(-K tau^2 / (2 E[X^2])) bounding Pr{mean_K X < E[X] - tau}."""
    if not expectation > 0 or second_moment < expectation**2 * (1 - 1e-12):
        raise InvalidParameterError("need second_moment >= expectation^2 > 0")
    if tau <= 0 or K < 1:
        raise InvalidParameterError("need tau > 0 and K >= 1")
    return math.exp(-K * tau**2 / (2 * second_moment))


def chernoff_bound(mu: float, K: int, tau: float) -> float:
    """exp(-K tau^2 mu / (4 ln 2)) bounding Pr{mean_K X > (1 + tau) mu} for X in [0, 1]."""
    if mu < 0 or tau < 0 or K < 1:
        raise InvalidParameterError("need mu >= 0, tau >= 0, K >= 1")
    if (1 + tau) * mu > 1 + 1e-12:
        raise InvalidParameterError(f"(1 + tau) mu = {(1 + tau) * mu!r} exceeds 1")
    return math.exp(-K * tau**2 * mu / (4 * LN2))


def measurement_operator(channel, n: int, phi_b, phi_c) -> np.ndarray:
    """(N^{(x)n})^dag(phi_B (x) phi_C), so that X = <psi| A |psi> on the input."""
    channel = _bipartite(channel)
    phi_b = np.asarray(phi_b, dtype=complex).ravel()
    phi_c = np.asarray(phi_c, dtype=complex).ravel()
    if (phi_b.size, phi_c.size) != (channel.d_B**n, channel.d_C**n):
        raise DimensionMismatchError("measurement vectors do not match d_B^n, d_C^n")
    phi_b = phi_b / np.linalg.norm(phi_b)
    phi_c = phi_c / np.linalg.norm(phi_c)
    v = to_site_order(np.kron(phi_b, phi_c), channel, n)
    return chn.apply_tensor_power(channel, np.outer(v, v.conj()), n, adjoint=True)


def xk_samples(channel, n: int, phi_b, phi_c, count: int, rng: np.random.Generator,
               chunk: int = 65536) -> np.ndarray:
    """i.i.d. draws of X = Tr(phi N^{(x)n}(U psi U^dag)) with U a product of Haar unitaries."""
    a = measurement_operator(channel, n, phi_b, phi_c)
    d = channel.d_A
    out = np.empty(count)
    for start in range(0, count, chunk):
        c = min(chunk, count - start)
        psi = codes.kron_rows(qlin.haar_states(d, c * n, rng).reshape(c, n, d))
        out[start:start + c] = np.einsum("ci,ij,cj->c", psi.conj(), a, psi).real
    return np.clip(out, 0.0, 1.0)


def analytic_xk_moments(channel, n: int, phi_b, phi_c) -> tuple[float, float]:
    """Exact E[X], E[X^2] from the Haar first and second moments, site by site."""
    channel = _bipartite(channel)
    d = channel.d_A
    a = measurement_operator(channel, n, phi_b, phi_c)
    dim = d**n
    first = float(np.trace(a).real / dim)
    # E[psi psi^dag (x) psi psi^dag] per site is 2 P_sym / (d (d + 1)); reorder to (A1..An)(A1'..An')
    sym = 2 * np.asarray(qlin.symmetric_projector(d)) / (d * (d + 1))
    mom = qlin.tensor_power(sym, n)
    perm = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
    mom = qlin.permute_subsystems(mom, [d] * (2 * n), perm)
    second = float(np.trace(np.kron(a, a) @ mom).real)
    return first, second


@dataclass
class XkMoments:
    mean: float
    mean_stderr: float
    second_moment: float
    second_stderr: float
    gamma_empirical: float
    gamma_stderr: float
    gamma: float
    expected_mean: float
    samples: int
    mean_consistent: bool
    gamma_consistent: bool

    def to_dict(self) -> dict:
        return asdict(self)


def xk_moments(channel, n: int, phi_b, phi_c, mc_samples: int, rng: np.random.Generator,
               gamma: float | None = None) -> XkMoments:
    """Empirical mean and second moment of X_k and the ratio (E[X^2]/E[X]^2)^{1/n}.

    The consistency flags test the mean against (d_B d_C)^{-n} and the ratio
    against gamma, both at 4 standard errors (floored at 1e-12).
    """
    channel = _bipartite(channel)
    x = xk_samples(channel, n, phi_b, phi_c, mc_samples, rng)
    mean = float(x.mean())
    second = float((x**2).mean())
    se_mean = float(x.std(ddof=1) / math.sqrt(x.size))
    se_second = float((x**2).std(ddof=1) / math.sqrt(x.size))
    ratio = second / mean**2
    g_emp = ratio ** (1.0 / n)
    # delta method for r = m2 / m1^2 with the sample covariance of (X^2, X)
    cov = np.cov(np.vstack([x**2, x])) / x.size
    grad = np.array([1.0 / mean**2, -2.0 * second / mean**3])
    se_ratio = float(math.sqrt(max(grad @ cov @ grad, 0.0)))
    se_gamma = g_emp / (n * ratio) * se_ratio
    if gamma is None:
        gamma = bnd.gamma_mictodiactic(channel)
    expected = 1.0 / (channel.d_B * channel.d_C) ** n
    floor = 1e-12
    return XkMoments(
        mean=mean, mean_stderr=se_mean, second_moment=second, second_stderr=se_second,
        gamma_empirical=g_emp, gamma_stderr=se_gamma, gamma=gamma, expected_mean=expected,
        samples=int(x.size),
        mean_consistent=abs(mean - expected) <= 4 * se_mean + floor,
        gamma_consistent=g_emp <= gamma + 4 * se_gamma + floor,
    )


@dataclass
class TailCheck:
    bound: str
    K: int
    tau: float
    empirical: float
    limit: float
    ensembles: int

    @property
    def ok(self) -> bool:
        return self.empirical <= self.limit


def tail_checks(x_pool: np.ndarray, K: int, mean: float, second_moment: float,
                maurer_taus, chernoff_taus) -> list[TailCheck]:
    """Empirical tail frequencies of ensemble means against both bounds.

    ``x_pool`` has shape (ensembles, K); each row is one ensemble of i.i.d. X_k.
    """
    x_pool = np.asarray(x_pool, dtype=float)
    if x_pool.shape[1] != K:
        raise DimensionMismatchError("x_pool rows must hold K samples")
    means = x_pool.mean(axis=1)
    e = x_pool.shape[0]
    out = []
    for tau in maurer_taus:
        freq = float(np.mean(means < mean - tau))
        out.append(TailCheck("maurer", K, float(tau), freq, maurer_bound(mean, second_moment, K, tau), e))
    for tau in chernoff_taus:
        freq = float(np.mean(means > (1 + tau) * mean))
        out.append(TailCheck("chernoff", K, float(tau), freq, chernoff_bound(mean, K, tau), e))
    return out


# --------------------------------------------------------------------------
# epsilon nets


def pure_trace_distance(a, b) -> np.ndarray:
    """||a a^dag - b b^dag||_1 = 2 sqrt(1 - |<a|b>|^2) for unit vectors (broadcasts)."""
    ov = np.abs(np.sum(np.conj(a) * b, axis=-1)) ** 2
    return 2 * np.sqrt(np.clip(1 - ov, 0.0, None))


@dataclass
class EpsilonNet:
    vectors: np.ndarray
    epsilon: float
    verified: bool
    probes: int
    worst_probe_distance: float = field(default=float("nan"))

    def __len__(self):
        return self.vectors.shape[0]


def _nearest_distance(net: np.ndarray, probes: np.ndarray) -> np.ndarray:
    ov = np.max(np.abs(probes.conj() @ net.T) ** 2, axis=1)
    return 2 * np.sqrt(np.clip(1 - ov, 0.0, None))


def epsilon_net(dim: int, epsilon: float, rng: np.random.Generator, max_size: int = 10**4,
                probes: int = NET_PROBES, patience: int = 2000) -> EpsilonNet:
    """Greedy random epsilon-net of pure states in trace distance.

    Candidates are added when farther than ``epsilon`` from every member;
    construction stops after ``patience`` consecutive covered candidates.
    For dim <= 4 the net is then checked against ``probes`` fresh Haar
    states, uncovered probes are inserted and the check repeats. Larger
    dimensions return the greedy net unverified.
    """
    if dim < 1 or epsilon <= 0:
        raise InvalidParameterError("need dim >= 1 and epsilon > 0")
    if dim == 1:
        return EpsilonNet(np.ones((1, 1), dtype=complex), epsilon, True, 0, 0.0)
    net = list(qlin.haar_states(dim, 1, rng))
    covered = 0
    while covered < patience:
        batch = qlin.haar_states(dim, 256, rng)
        for v in batch:
            if _nearest_distance(np.array(net), v[None, :])[0] > epsilon:
                net.append(v)
                covered = 0
                if len(net) > max_size:
                    raise ResourceGuardError(f"epsilon-net exceeded max_size={max_size}")
            else:
                covered += 1
    if dim > NET_VERIFY_DIM:
        return EpsilonNet(np.array(net), epsilon, False, 0)
    while True:
        arr = np.array(net)
        p = qlin.haar_states(dim, probes, rng)
        dist = np.concatenate([_nearest_distance(arr, p[i:i + 8192]) for i in range(0, probes, 8192)])
        bad = np.flatnonzero(dist > epsilon)
        if bad.size == 0:
            return EpsilonNet(arr, epsilon, True, probes, float(dist.max()))
        for i in bad:
            if _nearest_distance(np.array(net), p[i][None, :])[0] > epsilon:
                net.append(p[i])
        if len(net) > max_size:
            raise ResourceGuardError(f"epsilon-net exceeded max_size={max_size}")


def eta_fn(x) -> np.ndarray:
    """eta(x) = -x log2 x with eta(0) = 0."""
    x = np.asarray(x, dtype=float)
    safe = np.where(x > 0, x, 1.0)
    return np.where(x > 0, -x * np.log2(safe), 0.0)


# --------------------------------------------------------------------------
# quasi-measurements and the error-probability identity


def quasi_penalty(D_B: int, D_C: int, s: int, f: float) -> float:
    """4 (D_B D_C)^2 exp(-s (f - 1)^2 / (2 ln 2 D_B D_C))."""
    if s < 1 or f <= 1:
        raise InvalidParameterError("need s >= 1 and f > 1")
    d = D_B * D_C
    return 4 * d**2 * math.exp(-s * (f - 1) ** 2 / (d * 2 * LN2))


def trace_dist_equals_error_prob(p_m, q_channel) -> tuple[float, float]:
    """Error probability of sending M through q versus half the l1 distance of joints.

    ``q_channel[j, i]`` is Pr{M' = j | M = i}. Returns (Pr{M' != M},
    1/2 ||p_{MM'} - q_{MM'}||_1) with p_{MM'} the perfectly correlated joint.
    """
    p = np.asarray(p_m, dtype=float).ravel()
    q = np.asarray(q_channel, dtype=float)
    if q.shape != (p.size, p.size):
        raise DimensionMismatchError(f"q_channel must be {p.size}x{p.size}")
    if np.any(q < -1e-12) or np.max(np.abs(q.sum(axis=0) - 1)) > 1e-10:
        raise InvalidParameterError("q_channel columns must be probability vectors")
    if np.any(p < -1e-12) or abs(p.sum() - 1) > 1e-10:
        raise InvalidParameterError("p_m must be a probability vector")
    err = float(np.dot(p, 1 - np.diag(q)))
    joint_q = q * p[None, :]
    joint_p = np.diag(p)
    return err, 0.5 * float(np.abs(joint_p - joint_q).sum())


# --------------------------------------------------------------------------
# worst-case sweep over sampled product measurements


@dataclass
class SweepRow:
    seed: int
    K: int
    measurement: int
    refined: bool
    mi: float
    mi_stderr: float
    l1_uniform: float
    l1_empirical: float
    pinsker_ok: bool


@dataclass
class SweepSummary:
    k_values: list
    k_threshold: float
    gamma: float
    delta2: float
    bias: float
    worst_mean: list
    worst_stderr: list
    non_increasing: bool
    below_threshold: bool
    pinsker_all: bool
    u_samples: int
    measurements: int
    refine_steps: int
    lower_bound_note: str = "worst case over sampled product bases; a lower bound on the supremum over separable measurements"

    def to_dict(self) -> dict:
        return asdict(self)


def _product_vectors(ub: np.ndarray, uc: np.ndarray) -> np.ndarray:
    """Outcome vectors col_i(ub) (x) col_j(uc), stacked (..., Db Dc, Db Dc)."""
    v = np.einsum("...ai,...bj->...ijab", ub, uc)
    db, dc = ub.shape[-1], uc.shape[-1]
    return v.reshape(v.shape[:-4] + (db * dc, db * dc))


def _basis_pmfs(vecs: np.ndarray, states: np.ndarray) -> np.ndarray:
    """p[..., t, y] = <v_y| sigma_t |v_y> for vecs (..., Y, D) and states (T, D, D)."""
    return np.clip(np.einsum("...yi,tij,...yj->...ty", vecs.conj(), states, vecs).real, 0.0, None)


def _l1_stats(pmfs: np.ndarray, ref: np.ndarray, mi: np.ndarray):
    l1_u = np.abs(pmfs - ref).sum(axis=-1).mean(axis=-1)
    l1_e = np.abs(pmfs - pmfs.mean(axis=-2, keepdims=True)).sum(axis=-1).mean(axis=-1)
    # Pinsker on the empirical joint of (Y, tuple), and against the exact reference
    d_ref = (pmfs * (np.log2(np.where(pmfs > 0, pmfs, 1.0)) - np.log2(ref))).sum(axis=-1).mean(axis=-1)
    ok = (l1_e <= np.sqrt(2 * LN2 * np.clip(mi, 0, None)) + 1e-12) & (
        l1_u <= np.sqrt(2 * LN2 * np.clip(d_ref, 0, None)) + 1e-12)
    return l1_u, l1_e, ok


def _sweep_seed(channel, n: int, seed: int, k_values, measurements: int, u_samples: int,
                refine_steps: int, ref: np.ndarray):
    db, dc = channel.d_B**n, channel.d_C**n
    rows: list[SweepRow] = []
    worst = []
    streams = np.random.SeedSequence(int(seed)).spawn(len(k_values))
    for K, ss in zip(k_values, streams):
        rng = np.random.default_rng(ss)
        states = scrambled_outputs(channel, n, K, u_samples, rng)
        ub = qlin.haar_unitaries(db, measurements, rng)
        uc = qlin.haar_unitaries(dc, measurements, rng)
        pm = _basis_pmfs(_product_vectors(ub, uc), states)
        mi, se = mi_from_pmfs(pm)
        l1_u, l1_e, ok = _l1_stats(pm, ref, mi)
        for j in range(measurements):
            rows.append(SweepRow(int(seed), K, j, False, float(mi[j]), float(se[j]),
                                 float(l1_u[j]), float(l1_e[j]), bool(ok[j])))
        best = int(np.argmax(mi))
        top = float(mi[best])
        if refine_steps > 0:
            def objective(b, c):
                return float(mi_from_pmfs(_basis_pmfs(_product_vectors(b, c), states))[0])

            rb, rc, _ = meas.coordinate_ascent(objective, ub[best], uc[best], refine_steps, rng)
            pr = _basis_pmfs(_product_vectors(rb, rc), states)
            rmi, rse = mi_from_pmfs(pr)
            r_u, r_e, r_ok = _l1_stats(pr, ref, rmi)
            rows.append(SweepRow(int(seed), K, measurements, True, float(rmi), float(rse),
                                 float(r_u), float(r_e), bool(r_ok)))
            top = max(top, float(rmi))
        worst.append(top)
    return rows, worst


def leakage_sweep(channel, n: int, delta2: float, k_values, seeds, measurements: int = 200,
                          u_samples: int = 64, refine_steps: int = 20, gamma: float | None = None,
                          threads: int = 1):
    """Worst sampled-measurement I(Y;U) across key sizes K and seeds.

    For every (seed, K) pair ``u_samples`` scrambles are shared by
    ``measurements`` Haar-random product bases; the worst basis is then refined
    by coordinate ascent on the same scrambles. Seeds run as independent
    tasks on ``threads`` workers; results are gathered in seed order.
    Returns (rows, summary).
    """
    channel = _bipartite(channel)
    if u_samples < MIN_U_SAMPLES:
        raise InvalidParameterError(f"u_samples must be at least {MIN_U_SAMPLES}")
    db, dc = channel.d_B**n, channel.d_C**n
    if gamma is None:
        gamma = bnd.gamma_mictodiactic(channel)
    kt = codes.k_threshold(n, channel.d_B, channel.d_C, delta2, gamma)
    k_values = [int(k) for k in k_values]
    ref = reference_pmf(channel, n, meas.computational_measurement(db, dc))

    def task(seed):
        return _sweep_seed(channel, n, seed, k_values, measurements, u_samples, refine_steps, ref)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(task, seeds))
    else:
        results = [task(s) for s in seeds]
    rows = [r for res in results for r in res[0]]
    worst = np.array([res[1] for res in results])
    mean = worst.mean(axis=0)
    se = worst.std(axis=0, ddof=1) / math.sqrt(len(seeds)) if len(seeds) > 1 else np.zeros_like(mean)
    order = np.argsort(k_values)
    mono = all(
        mean[order[i + 1]] <= mean[order[i]] + 3 * math.hypot(se[order[i]], se[order[i + 1]])
        for i in range(len(order) - 1)
    )
    bias = plugin_bias(db * dc, u_samples)
    limit = delta2 * math.log2(channel.d_A**n) + bias
    below = all(mean[i] <= limit for i, k in enumerate(k_values) if k >= kt)
    summary = SweepSummary(
        k_values=k_values, k_threshold=kt, gamma=gamma, delta2=delta2, bias=bias,
        worst_mean=[float(v) for v in mean], worst_stderr=[float(v) for v in se],
        non_increasing=bool(mono), below_threshold=bool(below),
        pinsker_all=all(r.pinsker_ok for r in rows), u_samples=u_samples,
        measurements=measurements, refine_steps=refine_steps,
    )
    return rows, summary
