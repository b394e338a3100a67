"""
Capacity bounds for data hiding over broadcast channels.

Lower bound (mictodiactic channels)::

    kappa_lower = chi - log2(d_plus) - log2(gamma)

with ``chi`` the Holevo information of the uniform (Haar) input ensemble and
``gamma`` the second-moment amplification factor computed from the image of
the symmetric projector under N (x) N. Also here: the coherent-state upper
bound for the bosonic broadcast channel and a heuristic estimate of the
regularised upper bound I(X;BC) - I_acc over product measurements.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import mpmath
import numpy as np

from . import channels as chn
from . import qlin
from .errors import InvalidParameterError, ResourceGuardError
from .measurements import (
    computational_measurement,
    coordinate_ascent,
    mutual_information,
    product_basis_measurement,
)

DEFAULT_CHI_SAMPLES = 20000
GAMMA_MAX_DA = 12
_CHUNK = 4096


class OutsideScopeWarning(UserWarning):
    """Quantity evaluated on a channel the lower bound does not cover."""


# --------------------------------------------------------------------------
# Holevo information of the uniform ensemble


def output_entropy_average(channel, samples: int, rng: np.random.Generator) -> tuple[float, float]:
    """Monte-Carlo mean of S(N(psi)) over Haar-random pure inputs, with its standard error."""
    if samples < 2:
        raise InvalidParameterError("need at least two samples")
    ch = chn._kraus_of(channel)
    ent = np.empty(samples)
    for start in range(0, samples, _CHUNK):
        stop = min(samples, start + _CHUNK)
        psi = qlin.haar_states(ch.dim_in, stop - start, rng)
        rho = np.einsum("ki,kj->kij", psi, psi.conj())
        ent[start:stop] = qlin.von_neumann_entropies(chn.apply_array(ch, rho))
    return float(ent.mean()), float(ent.std(ddof=1) / math.sqrt(samples))


def holevo_uniform(channel, samples: int, rng: np.random.Generator) -> tuple[float, float]:
    """chi(N) = S(N(pi)) - E_psi S(N(psi)) and the standard error of the second term.

    The first term is exact: the Haar average of psi is pi, so the average
    output is N(pi) by linearity. Only the concave second term is sampled.
    """
    if samples < 100:
        raise InvalidParameterError("holevo_uniform needs at least 100 samples")
    ch = chn._kraus_of(channel)
    s_max = qlin.von_neumann_entropy(chn.apply_array(ch, np.eye(ch.dim_in) / ch.dim_in))
    s_avg, se = output_entropy_average(ch, samples, rng)
    return s_max - s_avg, se


def depolarizing_chi_closed_form(d: int, p: float) -> float:
    """Holevo information of the d-dimensional depolarizing channel on the uniform ensemble."""
    if d < 2 or not 0.0 <= p <= 1.0:
        raise InvalidParameterError("need d >= 2 and p in [0, 1]")
    a = p + (1 - p) / d
    b = (1 - p) / d

    def xlogx(x):
        return x * math.log2(x) if x > 0 else 0.0

    return math.log2(d) + xlogx(a) + (d - 1) * xlogx(b)


# --------------------------------------------------------------------------
# gamma


def two_copy_symmetric_image(channel) -> np.ndarray:
    """(N (x) N)(P_sym), one tensor factor at a time."""
    ch = chn._kraus_of(channel)
    if ch.dim_in > GAMMA_MAX_DA:
        raise ResourceGuardError(f"d_A = {ch.dim_in} exceeds the two-copy workspace limit {GAMMA_MAX_DA}")
    ps = qlin.symmetric_projector(ch.dim_in).data
    return chn.apply_tensor_power(ch, ps, 2)


def _gamma(channel: chn.BroadcastChannel) -> float:
    d_a = channel.d_A
    out_sq = math.prod(d * d for d in channel.d_list)
    return 2 * out_sq / (d_a * (d_a + 1)) * qlin.operator_inf_norm(two_copy_symmetric_image(channel))


def _warn_scope(channel) -> None:
    if not chn.is_mictodiactic(channel):
        warnings.warn("channel is not mictodiactic; gamma is evaluated outside the scope of the lower bound",
                      OutsideScopeWarning, stacklevel=3)


def gamma_mictodiactic(channel: chn.BroadcastChannel) -> float:
    """2 d_B^2 d_C^2 / (d_A (d_A + 1)) * ||(N (x) N)(P_sym)||_inf."""
    _warn_scope(channel)
    return _gamma(channel)


def gamma_multipartite(channel: chn.BroadcastChannel) -> float:
    """Same as :func:`gamma_mictodiactic` with prod_j d_j^2 over all receivers."""
    if math.prod(channel.d_list) != channel.d_out:
        raise InvalidParameterError("receiver dimensions do not multiply to the output dimension")
    _warn_scope(channel)
    return _gamma(channel)


def gamma_depolarizing_closed_form(d: int, p: float) -> float:
    return 1 + p * p * (2 * d / (d + 1) - 1)


def gamma_entropy_variant(channel, delta: float = 0.0) -> float:
    """2^(2 S - S_2 + 3 delta), S = S(N(pi)), S_2 = S(N^(x)2(P_sym / Tr P_sym))."""
    if delta < 0:
        raise InvalidParameterError("delta must be non-negative")
    ch = chn._kraus_of(channel)
    d = ch.dim_in
    s = qlin.von_neumann_entropy(chn.apply_array(ch, np.eye(d) / d))
    s2 = qlin.von_neumann_entropy(two_copy_symmetric_image(ch) * (2 / (d * (d + 1))))
    return 2.0 ** (2 * s - s2 + 3 * delta)


# --------------------------------------------------------------------------
# report


@dataclass
class BoundReport:
    channel: str
    d_A: int
    d_list: list
    d_plus: int
    chi: float
    chi_stderr: float
    s_out_avg: float
    s_out_avg_stderr: float
    s_max_mixed: float
    gamma: float
    kappa_lower: float
    kappa_lower_clamped: float
    chi_samples: int
    seed: int | None
    mictodiactic: bool
    unital: bool
    methods: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    kappa_upper_estimate: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **extra) -> str:
        return json.dumps({**self.to_dict(), **extra}, indent=2, sort_keys=True, default=_json_default)

    CSV_FIELDS = (
        "channel", "d_A", "d_list", "d_plus", "chi", "chi_stderr", "s_out_avg", "s_out_avg_stderr",
        "s_max_mixed", "gamma", "kappa_lower", "kappa_lower_clamped", "chi_samples", "seed",
        "mictodiactic", "unital",
    )

    def csv_row(self) -> dict:
        d = self.to_dict()
        d["d_list"] = "x".join(str(v) for v in self.d_list)
        return {k: d[k] for k in self.CSV_FIELDS}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=self.CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerow({k: format_value(v) for k, v in self.csv_row().items()})
        return buf.getvalue()


def format_value(v) -> str:
    """Locale-independent, shortest round-trip text for CSV cells."""
    if isinstance(v, bool) or v is None:
        return str(v).lower() if v is not None else ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o)}")


def kappa_lower(channel: chn.BroadcastChannel, chi_samples: int = DEFAULT_CHI_SAMPLES,
                rng: np.random.Generator | None = None, seed: int | None = None) -> BoundReport:
    """Assemble chi, gamma and the lower bound into a :class:`BoundReport`.

    The bound is reported as computed, negative values included; the clamped
    field records the trivially achievable rate max(0, kappa_lower).
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    ch = channel.base
    mict = chn.is_mictodiactic(channel)
    s_max = qlin.von_neumann_entropy(chn.apply_array(ch, np.eye(ch.dim_in) / ch.dim_in))
    s_avg, se = output_entropy_average(ch, chi_samples, rng)
    chi = s_max - s_avg
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OutsideScopeWarning)
        gamma = _gamma(channel)
    kl = chi - math.log2(channel.d_plus) - math.log2(gamma)
    notes = []
    if not mict:
        notes.append("outside the scope of the lower bound: channel is not mictodiactic")
    if kl < 0:
        notes.append("kappa_lower is negative; only the trivial rate 0 is certified")
    return BoundReport(
        channel=channel.name,
        d_A=channel.d_A,
        d_list=list(channel.d_list),
        d_plus=channel.d_plus,
        chi=chi,
        chi_stderr=se,
        s_out_avg=s_avg,
        s_out_avg_stderr=se,
        s_max_mixed=s_max,
        gamma=gamma,
        kappa_lower=kl,
        kappa_lower_clamped=max(0.0, kl),
        chi_samples=chi_samples,
        seed=seed,
        mictodiactic=mict,
        unital=ch.is_unital(),
        methods={
            "s_max_mixed": "exact entropy of N(pi)",
            "s_out_avg": "Monte-Carlo mean over Haar-random pure inputs",
            "gamma": "largest eigenvalue of (N x N)(P_sym)",
            "log_base": "2",
        },
        notes=notes,
    )


# --------------------------------------------------------------------------
# coherent-state upper bound


@dataclass(frozen=True)
class CoherentBoundInput:
    n_s: float
    eta: float = 0.5

    def __post_init__(self):
        if not self.n_s >= 0:
            raise InvalidParameterError(f"mean photon number must be non-negative, got {self.n_s}")
        if not 0.0 < self.eta < 1.0:
            raise InvalidParameterError(f"transmissivity must lie in (0, 1), got {self.eta}")


def g_function(x: float) -> float:
    """(x+1) log2(x+1) - x log2 x, written as log2(1+x) + x log2(1+1/x) for stability."""
    if x < 0:
        raise InvalidParameterError(f"g is defined for x >= 0, got {x}")
    if x == 0:
        return 0.0
    return (math.log1p(x) + x * math.log1p(1.0 / x)) / math.log(2)


def coherent_state_upper_bound(inp: CoherentBoundInput) -> float:
    """g(N_S) - log2(1 + N_S); does not depend on eta."""
    x = inp.n_s
    if x == 0:
        return 0.0
    return x * math.log1p(1.0 / x) / math.log(2)


def heterodyne_covariance(inp: CoherentBoundInput) -> np.ndarray:
    """Covariance of the real parts of Bob's and Charlie's heterodyne outcomes."""
    n, eta = inp.n_s, inp.eta
    off = math.sqrt(eta * (1 - eta)) * n / 2
    return np.array([[eta * n / 2 + 0.5, off], [off, (1 - eta) * n / 2 + 0.5]])


def heterodyne_mutual_info(inp: CoherentBoundInput) -> float:
    """log2 of det(signal + noise covariance) / det(noise covariance).

    Real and imaginary quadratures are two independent parallel Gaussian
    channels, each contributing half of this log-determinant ratio.
    The determinant cancels catastrophically in double precision for large
    N_S, so the explicit matrix is evaluated at 50 significant digits.
    """
    with mpmath.workdps(50):
        n, eta = mpmath.mpf(inp.n_s), mpmath.mpf(inp.eta)
        off = mpmath.sqrt(eta * (1 - eta)) * n / 2
        cov = mpmath.matrix([[eta * n / 2 + mpmath.mpf(1) / 2, off],
                             [off, (1 - eta) * n / 2 + mpmath.mpf(1) / 2]])
        noise_det = mpmath.mpf(1) / 4
        return float(mpmath.log(mpmath.det(cov) / noise_det, 2))


# --------------------------------------------------------------------------
# heuristic upper-bound estimate


@dataclass
class UpperEstimate:
    value: float
    holevo_x_bc: float
    accessible_found: float
    measurement_trials: int
    refine_steps: int
    heuristic: bool = True
    note: str = ("heuristic: accessible information is searched over product rank-one "
                 "measurements only, so the estimate can only overstate the true bound")


def kappa_upper_estimate(channel: chn.BroadcastChannel, ensemble, measurement_trials: int,
                         rng: np.random.Generator, refine_steps: int = 50) -> UpperEstimate:
    """I(X;BC) minus the best I(X;Y) found over product projective measurements.

    ``ensemble`` is a sequence of (probability, state) pairs on the input.
    Candidates: the computational product basis, then ``measurement_trials``
    Haar-random local bases; the best is refined by coordinate ascent.
    Post-processing the outcome Y into a guess cannot raise I(X;Y), so the
    raw outcome statistics are used directly.
    """
    probs = qlin.Pmf([p for p, _ in ensemble]).probs
    outs = np.stack([chn.apply_array(channel, qlin.as_matrix(s)) for _, s in ensemble])
    avg = np.einsum("x,xij->ij", probs, outs)
    holevo = qlin.von_neumann_entropy(avg) - float(np.dot(probs, qlin.von_neumann_entropies(outs)))
    db, dc = channel.d_B, channel.d_C

    def objective(ub, uc):
        m = product_basis_measurement(ub, uc)
        return mutual_information(probs, m.probabilities(outs))

    comp = computational_measurement(db, dc)
    best_val = mutual_information(probs, comp.probabilities(outs))
    best_b, best_c = np.eye(db, dtype=complex), np.eye(dc, dtype=complex)
    for _ in range(measurement_trials):
        ub = qlin.haar_unitaries(db, 1, rng)[0]
        uc = qlin.haar_unitaries(dc, 1, rng)[0]
        val = objective(ub, uc)
        if val > best_val:
            best_val, best_b, best_c = val, ub, uc
    if refine_steps > 0 and len(probs) > 1:
        best_b, best_c, best_val = coordinate_ascent(objective, best_b, best_c, refine_steps, rng)
    value = max(0.0, holevo - best_val)
    return UpperEstimate(value, holevo, best_val, measurement_trials, refine_steps)
