"""
Quantum channels in Kraus form and broadcast channels with a B/C output split.

Channels are applied through their row-major Liouville matrix
``S = sum_i K_i (x) conj(K_i)``, which acts on ``rho.reshape(-1)``. This keeps
batched application (stacks of states) and application to one tensor factor
of a multi-site operator cheap.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from . import qlin
from .errors import ChannelFormatError, DimensionMismatchError, InvalidParameterError

COMPLETENESS_TOL = 1e-9
MICTODIACTIC_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """CPTP map given by Kraus operators of shape (dim_out, dim_in)."""

    kraus: tuple

    def __post_init__(self):
        ks = [np.asarray(k, dtype=complex) for k in self.kraus]
        if not ks:
            raise ChannelFormatError("channel needs at least one Kraus operator")
        shape = ks[0].shape
        if len(shape) != 2 or 0 in shape:
            raise ChannelFormatError(f"Kraus operator 0 has invalid shape {shape}")
        for i, k in enumerate(ks):
            if k.shape != shape:
                raise ChannelFormatError(f"Kraus operator {i} has shape {k.shape}, expected {shape}")
        stack = np.stack(ks)
        stack.setflags(write=False)
        object.__setattr__(self, "kraus", stack)
        defect = self.completeness_defect()
        if defect > COMPLETENESS_TOL:
            raise ChannelFormatError(f"Kraus operators are not trace preserving (defect {defect:.3g})")

    @property
    def dim_in(self) -> int:
        return self.kraus.shape[2]

    @property
    def dim_out(self) -> int:
        return self.kraus.shape[1]

    def completeness_defect(self) -> float:
        s = np.einsum("kji,kjl->il", self.kraus.conj(), self.kraus)
        return float(np.max(np.abs(s - np.eye(self.dim_in))))

    @cached_property
    def liouville(self) -> np.ndarray:
        k = self.kraus
        s = np.einsum("kab,kcd->acbd", k, k.conj())
        return s.reshape(self.dim_out**2, self.dim_in**2)

    def is_unital(self, tol: float = COMPLETENESS_TOL) -> bool:
        if self.dim_in != self.dim_out:
            return False
        s = np.einsum("kij,klj->il", self.kraus, self.kraus.conj())
        return bool(np.max(np.abs(s - np.eye(self.dim_out))) <= tol)

    def __call__(self, rho):
        return apply(self, rho)


@dataclass(frozen=True, eq=False)
class BroadcastChannel:
    """Channel A -> B C (or A -> B_1 ... B_l when ``d_list`` has more than two entries)."""

    base: KrausChannel
    d_B: int
    d_C: int
    d_list: tuple = field(default=None)
    name: str = "custom"

    def __post_init__(self):
        if self.d_list is None:
            object.__setattr__(self, "d_list", (int(self.d_B), int(self.d_C)))
        else:
            object.__setattr__(self, "d_list", tuple(int(d) for d in self.d_list))
        if any(d < 1 for d in self.d_list):
            raise ChannelFormatError(f"receiver dimensions must be positive, got {self.d_list}")
        if math.prod(self.d_list) != self.base.dim_out:
            raise ChannelFormatError(
                f"receiver dimensions {self.d_list} do not multiply to output dimension {self.base.dim_out}"
            )
        if len(self.d_list) == 2 and tuple(self.d_list) != (self.d_B, self.d_C):
            raise ChannelFormatError("d_list disagrees with (d_B, d_C)")

    @property
    def d_A(self) -> int:
        return self.base.dim_in

    @property
    def d_out(self) -> int:
        return self.base.dim_out

    @property
    def d_plus(self) -> int:
        return max(self.d_list)

    @property
    def is_bipartite(self) -> bool:
        return len(self.d_list) == 2

    def __call__(self, rho):
        return apply(self.base, rho)


def _kraus_of(channel) -> KrausChannel:
    return channel.base if isinstance(channel, BroadcastChannel) else channel


# --------------------------------------------------------------------------
# application


def apply_array(channel, rho) -> np.ndarray:
    """Apply to a single matrix or a stack (..., d_in, d_in); returns raw arrays."""
    ch = _kraus_of(channel)
    rho = np.asarray(rho, dtype=complex)
    if rho.shape[-2:] != (ch.dim_in, ch.dim_in):
        raise DimensionMismatchError(f"input shape {rho.shape[-2:]} but channel expects dimension {ch.dim_in}")
    lead = rho.shape[:-2]
    flat = rho.reshape(-1, ch.dim_in**2)
    out = flat @ ch.liouville.T
    return out.reshape(lead + (ch.dim_out, ch.dim_out))


def apply(channel, rho) -> qlin.DensityMatrix:
    """Output state sum_i K_i rho K_i^dagger."""
    return qlin.DensityMatrix(apply_array(channel, rho))


def apply_local(channel, op, dims: Sequence[int], site: int, adjoint: bool = False) -> np.ndarray:
    """Apply ``channel`` (or its adjoint) to tensor factor ``site`` of a multi-site operator.

    ``op`` may carry leading batch axes. Returns the operator with factor
    ``site`` replaced by its image.
    """
    ch = _kraus_of(channel)
    d_from, d_to = (ch.dim_out, ch.dim_in) if adjoint else (ch.dim_in, ch.dim_out)
    mat = ch.liouville.conj() if adjoint else ch.liouville.T
    dims = [int(d) for d in dims]
    if dims[site] != d_from:
        raise DimensionMismatchError(f"site {site} has dimension {dims[site]}, expected {d_from}")
    op = np.asarray(op, dtype=complex)
    lead = op.shape[:-2]
    n = len(dims)
    t = op.reshape((-1,) + tuple(dims) + tuple(dims))
    t = np.moveaxis(t, (1 + site, 1 + n + site), (-2, -1))
    sh = t.shape
    t = (t.reshape(-1, d_from**2) @ mat).reshape(sh[:-2] + (d_to, d_to))
    t = np.moveaxis(t, (-2, -1), (1 + site, 1 + n + site))
    new_total = math.prod(dims) // d_from * d_to
    return t.reshape(lead + (new_total, new_total))


def apply_tensor_power(channel, op, n: int, adjoint: bool = False) -> np.ndarray:
    """N^{(x) n} (or its adjoint) applied to an n-site operator; batch axes allowed."""
    ch = _kraus_of(channel)
    d_from, d_to = (ch.dim_out, ch.dim_in) if adjoint else (ch.dim_in, ch.dim_out)
    dims = [d_from] * n
    out = np.asarray(op, dtype=complex)
    for j in range(n):
        out = apply_local(ch, out, dims, j, adjoint)
        dims[j] = d_to
    return out


def two_fold(channel) -> KrausChannel:
    """N (x) N, with Kraus set {K_i (x) K_j}."""
    ch = _kraus_of(channel)
    ks = [np.kron(a, b) for a in ch.kraus for b in ch.kraus]
    return KrausChannel(tuple(ks))


def is_mictodiactic(channel, tol: float = MICTODIACTIC_TOL) -> bool:
    """True iff the channel maps the maximally mixed input to the maximally mixed output."""
    ch = _kraus_of(channel)
    out = apply_array(ch, np.eye(ch.dim_in) / ch.dim_in)
    return qlin.trace_distance(out, np.eye(ch.dim_out) / ch.dim_out) <= tol


# --------------------------------------------------------------------------
# constructors


def heisenberg_weyl(d: int) -> list[np.ndarray]:
    """The d^2 clock-and-shift unitaries X^a Z^b, (a, b) = (0, 0) first."""
    w = np.exp(2j * np.pi / d)
    x = np.roll(np.eye(d), 1, axis=0)
    z = np.diag(w ** np.arange(d))
    ops = []
    for a in range(d):
        for b in range(d):
            ops.append(np.linalg.matrix_power(x, a) @ np.linalg.matrix_power(z, b))
    return ops


def default_split(d: int) -> tuple[int, int]:
    """Most balanced factorisation d = d_B * d_C with d_B >= d_C."""
    best = (d, 1)
    for c in range(1, int(math.isqrt(d)) + 1):
        if d % c == 0:
            best = (d // c, c)
    return best


def _split(d: int, d_B: int | None, d_C: int | None) -> tuple[int, int]:
    if d_B is None and d_C is None:
        return default_split(d)
    if d_B is None:
        d_B = d // d_C
    if d_C is None:
        d_C = d // d_B
    if d_B * d_C != d:
        raise ChannelFormatError(f"split {d_B}x{d_C} does not factor output dimension {d}")
    return d_B, d_C


def depolarizing(d: int, p: float, d_B: int | None = None, d_C: int | None = None,
                 d_list: Sequence[int] | None = None) -> BroadcastChannel:
    """N(X) = p X + (1 - p) Tr(X) I / d as a unitary mixture over Heisenberg-Weyl operators."""
    if not 0.0 <= p <= 1.0:
        raise InvalidParameterError(f"depolarizing parameter must lie in [0, 1], got {p}")
    if d < 1:
        raise InvalidParameterError("dimension must be positive")
    hw = heisenberg_weyl(d)
    w0 = math.sqrt(p + (1 - p) / d**2)
    w = math.sqrt((1 - p) / d**2)
    ks = [w0 * hw[0]] + ([w * u for u in hw[1:]] if w > 0 else [])
    if d_list is not None:
        d_list = tuple(d_list)
        return BroadcastChannel(KrausChannel(tuple(ks)), d_list[0], math.prod(d_list[1:]), d_list,
                                name=f"depolarizing(d={d},p={p})")
    d_B, d_C = _split(d, d_B, d_C)
    return BroadcastChannel(KrausChannel(tuple(ks)), d_B, d_C, name=f"depolarizing(d={d},p={p})")


def identity(d: int, d_B: int | None = None, d_C: int | None = None,
             d_list: Sequence[int] | None = None) -> BroadcastChannel:
    return depolarizing(d, 1.0, d_B, d_C, d_list)


def amplitude_damping(gamma: float) -> BroadcastChannel:
    """Qubit amplitude damping; not unital for gamma > 0. Output split 2x1."""
    if not 0.0 <= gamma <= 1.0:
        raise InvalidParameterError(f"damping must lie in [0, 1], got {gamma}")
    k0 = np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex)
    k1 = np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex)
    return BroadcastChannel(KrausChannel((k0, k1)), 2, 1, name=f"amplitude_damping(g={gamma})")


def random_unitary_mixture(d: int, terms: int, rng: np.random.Generator,
                           d_B: int | None = None, d_C: int | None = None) -> BroadcastChannel:
    """Random mixture of Haar unitaries; unital, hence mictodiactic."""
    w = rng.dirichlet(np.ones(terms))
    us = qlin.haar_unitaries(d, terms, rng)
    ks = [math.sqrt(wi) * u for wi, u in zip(w, us)]
    d_B, d_C = _split(d, d_B, d_C)
    return BroadcastChannel(KrausChannel(tuple(ks)), d_B, d_C, name="random_unitary_mixture")


# --------------------------------------------------------------------------
# channel file format


def _parse_matrix(obj, index: int, rows: int, cols: int) -> np.ndarray:
    try:
        a = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ChannelFormatError(f"kraus[{index}]: entries must be [re, im] number pairs ({exc})") from None
    if a.shape != (rows, cols, 2):
        raise ChannelFormatError(f"kraus[{index}]: expected shape {rows}x{cols} of [re, im] pairs, got {a.shape}")
    return a[..., 0] + 1j * a[..., 1]


def channel_from_dict(obj: dict) -> BroadcastChannel:
    for key in ("d_in", "d_out", "d_B", "d_C", "kraus"):
        if key not in obj:
            raise ChannelFormatError(f"missing field {key!r}")
    try:
        d_in, d_out, d_B, d_C = (int(obj[k]) for k in ("d_in", "d_out", "d_B", "d_C"))
    except (TypeError, ValueError):
        raise ChannelFormatError("dimension fields must be integers") from None
    if not isinstance(obj["kraus"], list) or not obj["kraus"]:
        raise ChannelFormatError("'kraus' must be a non-empty list")
    ks = tuple(_parse_matrix(k, i, d_out, d_in) for i, k in enumerate(obj["kraus"]))
    d_list = obj.get("d_list")
    return BroadcastChannel(KrausChannel(ks), d_B, d_C, tuple(d_list) if d_list else None,
                            name=obj.get("name", "file"))


def channel_to_dict(channel: BroadcastChannel) -> dict:
    ks = channel.base.kraus
    out = {
        "d_in": channel.d_A,
        "d_out": channel.d_out,
        "d_B": channel.d_B,
        "d_C": channel.d_C,
        "kraus": [[[[float(z.real), float(z.imag)] for z in row] for row in k] for k in ks],
    }
    if not channel.is_bipartite:
        out["d_list"] = list(channel.d_list)
    return out


def load_channel(path) -> BroadcastChannel:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ChannelFormatError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(obj, dict):
        raise ChannelFormatError(f"{path}: top-level value must be an object")
    return channel_from_dict(obj)


def save_channel(channel: BroadcastChannel, path) -> None:
    Path(path).write_text(json.dumps(channel_to_dict(channel)))
