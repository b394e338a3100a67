"""
Random bit-hiding codes and their exact decoding at small block length.

A codebook holds M message unitaries V_x and K scrambling unitaries U_k, each
an n-fold tensor product of d_A-dimensional Haar unitaries. The codeword for
message x is the mixture (1/K) sum_k U_k V_x |0..0><0..0| V_x^dag U_k^dag.
Decoding of the pair (x, k) uses the square-root (pretty-good) measurement.

Message and key indices are 0-based.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import bounds
from . import channels as chn
from . import qlin
from .errors import InvalidParameterError, ResourceGuardError

MAX_WORKSPACE_DIM = 4096
MAX_TYPICAL_STRINGS = 10**6
# upper limit on stored complex entries for the stack of decoder outputs
MAX_DECODER_ENTRIES = 6 * 10**7


def _as_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng, None
    return np.random.default_rng(rng), rng


@dataclass(frozen=True, eq=False)
class CodeBook:
    n: int
    M: int
    K: int
    d_A: int
    v: np.ndarray
    u: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        if self.n < 1 or self.d_A < 1:
            raise InvalidParameterError("n and d_A must be positive")
        if self.M < 1 or self.K < 1:
            raise InvalidParameterError("a codebook needs at least one message and one key")
        v = np.asarray(self.v, dtype=complex)
        u = np.asarray(self.u, dtype=complex)
        d = self.d_A
        if v.shape != (self.M, self.n, d, d) or u.shape != (self.K, self.n, d, d):
            raise InvalidParameterError(f"unitary arrays have shapes {v.shape}, {u.shape}")
        eye = np.eye(d)
        for name, arr in (("v", v), ("u", u)):
            defect = np.max(np.abs(np.einsum("...ji,...jk->...ik", arr.conj(), arr) - eye))
            if defect > 1e-10:
                raise InvalidParameterError(f"{name} contains a non-unitary matrix (defect {defect:.3g})")
        v.setflags(write=False)
        u.setflags(write=False)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "u", u)

    @classmethod
    def from_unitaries(cls, v, u, seed=None) -> "CodeBook":
        """Build from explicit (M, n, d, d) and (K, n, d, d) arrays; for analytically solvable instances."""
        v = np.asarray(v, dtype=complex)
        u = np.asarray(u, dtype=complex)
        m, n, d, _ = v.shape
        return cls(n=n, M=m, K=u.shape[0], d_A=d, v=v, u=u, seed=seed)

    @property
    def input_dim(self) -> int:
        return self.d_A**self.n

    def to_dict(self) -> dict:
        def enc(a):
            return np.stack([a.real, a.imag], axis=-1).tolist()

        return {"n": self.n, "M": self.M, "K": self.K, "d_A": self.d_A, "seed": self.seed,
                "v": enc(self.v), "u": enc(self.u)}

    @classmethod
    def from_dict(cls, obj: dict) -> "CodeBook":
        def dec(a):
            a = np.asarray(a, dtype=float)
            return a[..., 0] + 1j * a[..., 1]

        return cls(n=obj["n"], M=obj["M"], K=obj["K"], d_A=obj["d_A"], v=dec(obj["v"]), u=dec(obj["u"]),
                   seed=obj.get("seed"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def generate_codebook(n: int, M: int, K: int, d_A: int, rng) -> CodeBook:
    """Draw all n (M + K) qudit unitaries i.i.d. from the Haar measure.

    ``rng`` is a numpy Generator or an integer seed (recorded in the codebook).
    """
    if min(n, M, K, d_A) < 1:
        raise InvalidParameterError("n, M, K and d_A must all be at least 1")
    if d_A**n > MAX_WORKSPACE_DIM:
        raise ResourceGuardError(f"d_A^n = {d_A}^{n} = {d_A**n} exceeds {MAX_WORKSPACE_DIM}")
    gen, seed = _as_rng(rng)
    v = qlin.haar_unitaries(d_A, M * n, gen).reshape(M, n, d_A, d_A)
    u = qlin.haar_unitaries(d_A, K * n, gen).reshape(K, n, d_A, d_A)
    return CodeBook(n=n, M=M, K=K, d_A=d_A, v=v, u=u, seed=seed)


def _check_message(cb: CodeBook, x: int) -> None:
    if not 0 <= x < cb.M:
        raise IndexError(f"message index {x} outside 0..{cb.M - 1}")


def codeword_site_vectors(cb: CodeBook, x: int) -> np.ndarray:
    """U_kj V_xj |0> for every key k and site j, shape (K, n, d_A)."""
    _check_message(cb, x)
    fid = cb.v[x][:, :, 0]
    return np.einsum("kjab,jb->kja", cb.u, fid)


def kron_rows(site_vectors: np.ndarray) -> np.ndarray:
    """Tensor the site vectors: (..., n, d) -> (..., d^n)."""
    out = site_vectors[..., 0, :]
    for j in range(1, site_vectors.shape[-2]):
        out = np.einsum("...a,...b->...ab", out, site_vectors[..., j, :]).reshape(out.shape[:-1] + (-1,))
    return out


def codeword_vectors(cb: CodeBook, x: int) -> np.ndarray:
    """Pure states psi_k(x) = U_k V_x |0..0>, shape (K, d_A^n)."""
    return kron_rows(codeword_site_vectors(cb, x))


def codeword(cb: CodeBook, x: int) -> qlin.DensityMatrix:
    """rho(x) = (1/K) sum_k psi_k(x)."""
    psi = codeword_vectors(cb, x)
    return qlin.DensityMatrix(psi.T @ psi.conj() / cb.K)


# --------------------------------------------------------------------------
# pretty-good measurement


def pgm_elements(gammas, rel_cutoff: float = 1e-12) -> tuple[np.ndarray, float]:
    """Square-root measurement T^{-1/2} Gamma_i T^{-1/2}, T = sum_i Gamma_i.

    Returns the stacked elements and the trace-norm completeness defect
    ||sum_i Lambda_i - Pi_support||_1.
    """
    g = np.asarray(gammas, dtype=complex)
    if g.ndim != 3 or g.shape[1] != g.shape[2]:
        raise InvalidParameterError("expected a stack of square operators")
    if not np.any(np.abs(g) > 0):
        raise InvalidParameterError("all decoder inputs are zero")
    r, support = qlin.inverse_sqrt_on_support(g.sum(axis=0), rel_cutoff)
    lam = r @ g @ r
    lam = (lam + np.conj(np.swapaxes(lam, -1, -2))) / 2
    defect = qlin.trace_norm(lam.sum(axis=0) - support)
    return lam, defect


def pgm_decoder(output_states) -> list[qlin.HermitianOperator]:
    lam, _ = pgm_elements(np.stack([qlin.as_matrix(s) for s in output_states]))
    return [qlin.HermitianOperator(e) for e in lam]


# --------------------------------------------------------------------------
# typicality


def _string_log_probs(spectra) -> np.ndarray:
    """log2 p(y^n) for all strings over a list of per-site spectra, row-major order."""
    total = math.prod(len(s) for s in spectra)
    if total > MAX_TYPICAL_STRINGS:
        raise ResourceGuardError(f"{total} eigenvalue strings exceed the enumeration limit {MAX_TYPICAL_STRINGS}")
    acc = np.zeros(1)
    for s in spectra:
        s = np.clip(np.asarray(s, dtype=float), 0.0, None)
        with np.errstate(divide="ignore"):
            ls = np.log2(s)
        acc = np.add.outer(acc, ls).ravel()
    return acc


def typical_mask(spectra, delta: float, reference: float) -> np.ndarray:
    """Strings y^n with | -(1/n) log2 p(y^n) - reference | <= delta."""
    n = len(spectra)
    lp = _string_log_probs(spectra)
    with np.errstate(invalid="ignore"):
        return np.isfinite(lp) & (np.abs(-lp / n - reference) <= delta)


def typical_projector(spectrum, n: int, delta: float) -> qlin.HermitianOperator:
    """Weakly typical projector of rho^{(x) n}, diagonal in the eigenbasis power of rho."""
    p = qlin.Pmf(spectrum).probs
    if n < 1 or delta < 0:
        raise InvalidParameterError("need n >= 1 and delta >= 0")
    mask = typical_mask([p] * n, delta, qlin.shannon_entropy(p))
    return qlin.HermitianOperator(np.diag(mask.astype(complex)))


def _eig_desc(rho):
    lam, w = np.linalg.eigh(qlin.as_matrix(rho))
    return np.clip(lam[::-1], 0.0, None), w[:, ::-1]


def _projector_from_mask(bases, mask) -> np.ndarray:
    w = qlin.tensor(*bases)
    wk = w[:, mask]
    return wk @ wk.conj().T


# --------------------------------------------------------------------------
# decoding


@dataclass
class DecodeResult:
    avg_error: float
    success: np.ndarray
    povm_completeness_defect: float
    use_typicality: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["success"] = self.success.tolist()
        return d


def _channel_outputs(cb: CodeBook, channel: chn.BroadcastChannel) -> tuple[np.ndarray, np.ndarray]:
    """Per-site outputs (M, K, n, d_out, d_out) and full outputs (M*K, D, D)."""
    if channel.d_A != cb.d_A:
        raise InvalidParameterError(f"codebook dimension {cb.d_A} but channel input {channel.d_A}")
    D = channel.d_out**cb.n
    if D > MAX_WORKSPACE_DIM:
        raise ResourceGuardError(f"(d_B*d_C)^n = {channel.d_out}^{cb.n} = {D} exceeds {MAX_WORKSPACE_DIM}")
    if cb.M * cb.K * D * D > MAX_DECODER_ENTRIES:
        raise ResourceGuardError(f"M*K*D^2 = {cb.M * cb.K * D * D} exceeds {MAX_DECODER_ENTRIES}")
    site = np.stack([codeword_site_vectors(cb, x) for x in range(cb.M)])  # (M, K, n, d)
    site_rho = np.einsum("...a,...b->...ab", site, site.conj())
    site_out = chn.apply_array(channel, site_rho)
    full = site_out[:, :, 0]
    for j in range(1, cb.n):
        full = np.einsum("...ab,...cd->...acbd", full, site_out[:, :, j])
        s = full.shape
        full = full.reshape(s[:-4] + (s[-4] * s[-3], s[-2] * s[-1]))
    return site_out, full.reshape(cb.M * cb.K, D, D)


def decode_error(cb: CodeBook, channel: chn.BroadcastChannel, use_typicality: bool = False,
                 delta0: float = 0.0, delta1: float = 0.0, s_out_avg: float | None = None) -> DecodeResult:
    """Exact average error of jointly decoding (x, k) with the square-root measurement.

    Without typicality the decoder is built from the channel outputs
    themselves. With ``use_typicality`` each output is replaced by
    Pi0 Pi_{k,x} Pi0, where Pi0 is the delta0-typical projector of
    N(pi)^{(x) n} and Pi_{k,x} the delta1-conditionally typical projector of
    the output, measured against the average output entropy ``s_out_avg``
    (estimated from 20000 seeded samples when not supplied).
    """
    site_out, outs = _channel_outputs(cb, channel)
    n = cb.n
    if use_typicality:
        if delta0 < 0 or delta1 < 0:
            raise InvalidParameterError("typicality parameters must be non-negative")
        if s_out_avg is None:
            s_out_avg, _ = bounds.output_entropy_average(channel, 20000, np.random.default_rng(0))
        mixed = chn.apply_array(channel, np.eye(cb.d_A) / cb.d_A)
        lam0, w0 = _eig_desc(mixed)
        mask0 = typical_mask([lam0] * n, delta0, qlin.shannon_entropy(lam0))
        pi0 = _projector_from_mask([w0] * n, mask0)
        gammas = np.empty_like(outs)
        flat_sites = site_out.reshape((cb.M * cb.K,) + site_out.shape[2:])
        for i, sites in enumerate(flat_sites):
            eig = [_eig_desc(s) for s in sites]
            mask = typical_mask([e[0] for e in eig], delta1, s_out_avg)
            pik = _projector_from_mask([e[1] for e in eig], mask)
            gammas[i] = pi0 @ pik @ pi0
    else:
        gammas = outs
    lam, defect = pgm_elements(gammas)
    succ = np.einsum("iab,iba->i", lam, outs).real.reshape(cb.M, cb.K)
    return DecodeResult(avg_error=float(1.0 - succ.mean()), success=succ,
                        povm_completeness_defect=defect, use_typicality=use_typicality)


# --------------------------------------------------------------------------
# rates


@dataclass
class RatePlan:
    n: int
    d_A: int
    d_B: int
    d_C: int
    s_max_mixed: float
    s_out_avg: float
    delta0: float
    delta1: float
    lam: float
    gamma: float
    log_M_rate: float
    log_K_rate: float

    @property
    def negative_message_rate(self) -> bool:
        return self.log_M_rate < 0

    def sizes(self) -> tuple[int, int]:
        """(M, K) = 2^{n * rate} rounded down, at least 1."""
        m = max(1, math.floor(2.0 ** (self.n * self.log_M_rate) + 1e-9))
        k = max(1, math.floor(2.0 ** (self.n * self.log_K_rate) + 1e-9))
        return m, k


def rate_plan(n: int, d_A: int, d_B: int, d_C: int, s_max_mixed: float, s_out_avg: float,
              delta0: float, delta1: float, lam: float, gamma: float) -> RatePlan:
    """Split of the correctness budget between message and key rates (bits per use).

    Key rate: log2 d_plus + log2 gamma + lam log2(n) / n.
    Message rate: S(N(pi)) - S_* - 2 delta0 - 2 delta1 - key rate.
    """
    if min(delta0, delta1, lam) < 0 or n < 1:
        raise InvalidParameterError("deltas and lambda must be non-negative, n >= 1")
    if gamma <= 0:
        raise InvalidParameterError("gamma must be positive")
    log_k = math.log2(max(d_B, d_C)) + math.log2(gamma) + lam * math.log2(n) / n
    log_m = s_max_mixed - s_out_avg - 2 * delta0 - 2 * delta1 - log_k
    return RatePlan(n, d_A, d_B, d_C, s_max_mixed, s_out_avg, delta0, delta1, lam, gamma, log_m, log_k)


def k_threshold(n: int, d_B: int, d_C: int, delta2: float, gamma: float) -> float:
    """8 d_plus^n gamma^n delta2^-2 log2(10 d^n / delta2), d = d_B d_C."""
    if not 0.0 < delta2 < 1.0:
        raise InvalidParameterError(f"delta2 must lie in (0, 1), got {delta2}")
    d_plus = max(d_B, d_C)
    d = d_B * d_C
    return 8 * d_plus**n * gamma**n / delta2**2 * math.log2(10 * d**n / delta2)
