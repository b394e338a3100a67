import json

import numpy as np
import pytest

from datahiding import channels as chn
from datahiding import qlin
from datahiding.errors import ChannelFormatError, DimensionMismatchError, InvalidParameterError

from oracles import apply_kraus


def affine_depolarizing(x, p):
    d = x.shape[0]
    return p * x + (1 - p) * np.trace(x) * np.eye(d) / d


def matrix_units(d):
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = 1
            yield e


class TestApply:
    def test_identity(self, rng):
        rho = qlin.DensityMatrix(np.diag([0.2, 0.3, 0.5, 0.0]))
        assert np.allclose(chn.apply(chn.identity(4), rho).data, rho.data)

    def test_fully_depolarizing(self):
        out = chn.apply(chn.depolarizing(2, 0.0), np.diag([1.0, 0.0]))
        assert np.allclose(out.data, np.eye(2) / 2)

    def test_half_depolarizing_qubit(self):
        out = chn.apply(chn.depolarizing(2, 0.5), np.diag([1.0, 0.0]))
        assert np.allclose(out.data, np.diag([0.75, 0.25]), atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            chn.apply(chn.identity(2), np.eye(3) / 3)

    def test_trace_and_positivity(self, rng):
        ch = chn.random_unitary_mixture(3, 4, rng)
        ad = chn.amplitude_damping(0.4)
        for c, d in ((ch, 3), (ad, 2)):
            for _ in range(10):
                psi = qlin.haar_states(d, 1, rng)[0]
                out = chn.apply_array(c, np.outer(psi, psi.conj()))
                assert abs(np.trace(out) - 1) < 1e-10
                assert np.linalg.eigvalsh(out).min() >= -1e-8

    def test_batched_equals_kraus_sum(self, rng):
        ad = chn.amplitude_damping(0.3)
        rhos = np.stack([np.outer(v, v.conj()) for v in qlin.haar_states(2, 6, rng)])
        batched = chn.apply_array(ad, rhos)
        for r, b in zip(rhos, batched):
            assert np.allclose(b, apply_kraus(ad.base.kraus, r), atol=1e-13)


class TestDepolarizing:
    @pytest.mark.parametrize("d", [2, 3, 4, 6])
    @pytest.mark.parametrize("p", [0.0, 0.3, 1.0])
    def test_matches_affine_formula(self, d, p):
        ch = chn.depolarizing(d, p)
        for e in matrix_units(d):
            assert np.max(np.abs(chn.apply_array(ch, e) - affine_depolarizing(e, p))) < 1e-10

    def test_d4_half(self):
        out = chn.apply_array(chn.depolarizing(4, 0.5, 2, 2), np.diag([1.0, 0, 0, 0]))
        assert np.allclose(out, 0.5 * np.diag([1.0, 0, 0, 0]) + 0.125 * np.eye(4), atol=1e-12)

    def test_rejects_bad_p(self):
        with pytest.raises(InvalidParameterError):
            chn.depolarizing(2, 1.5)

    def test_split_must_factor(self):
        with pytest.raises(ChannelFormatError):
            chn.depolarizing(4, 0.5, 3, 2)

    def test_default_split(self):
        assert chn.default_split(4) == (2, 2)
        assert chn.default_split(6) == (3, 2)
        assert chn.default_split(5) == (5, 1)


class TestMictodiactic:
    @pytest.mark.parametrize("p", [0.0, 0.25, 0.5, 1.0])
    def test_depolarizing(self, p):
        assert chn.is_mictodiactic(chn.depolarizing(4, p, 2, 2))

    def test_amplitude_damping(self):
        ad = chn.amplitude_damping(0.3)
        out = apply_kraus(ad.base.kraus, np.eye(2) / 2)
        assert np.abs(out - np.eye(2) / 2).sum() > 0.1
        assert not chn.is_mictodiactic(ad)

    def test_identity(self):
        assert chn.is_mictodiactic(chn.identity(3))


class TestTwoFold:
    def test_identity(self):
        tf = chn.two_fold(chn.identity(2).base)
        e = np.arange(16).reshape(4, 4).astype(complex)
        assert np.allclose(chn.apply_array(tf, e), e)

    def test_factorises(self, rng):
        ad = chn.amplitude_damping(0.25).base
        tf = chn.two_fold(ad)
        assert tf.completeness_defect() < 1e-9
        for _ in range(5):
            a, b = (np.outer(v, v.conj()) for v in qlin.haar_states(2, 2, rng))
            assert np.allclose(chn.apply_array(tf, np.kron(a, b)), np.kron(apply_kraus(ad.kraus, a), apply_kraus(ad.kraus, b)),
                               atol=1e-10)

    @pytest.mark.parametrize("d,p", [(2, 0.5), (3, 0.7), (4, 0.2)])
    def test_symmetric_state_image(self, d, p):
        ps = qlin.symmetric_projector(d).data
        ps = ps / np.trace(ps)
        out = chn.apply_array(chn.two_fold(chn.depolarizing(d, p).base), ps)
        assert np.allclose(out, p * p * ps + (1 - p * p) * np.eye(d * d) / d**2, atol=1e-12)

    def test_unital_contractive(self, rng):
        for _ in range(5):
            ch = chn.random_unitary_mixture(3, 3, rng)
            img = chn.apply_array(chn.two_fold(ch.base), qlin.symmetric_projector(3).data)
            assert qlin.operator_inf_norm(img) <= 1 + 1e-9


class TestLocalApplication:
    def test_apply_local_matches_kron(self, rng):
        ad = chn.amplitude_damping(0.2)
        a, b = (np.outer(v, v.conj()) for v in qlin.haar_states(2, 2, rng))
        out = chn.apply_local(ad, np.kron(a, b), [2, 2], 1)
        assert np.allclose(out, np.kron(a, apply_kraus(ad.base.kraus, b)))

    def test_adjoint_duality(self, rng):
        ad = chn.amplitude_damping(0.3)
        psi = qlin.haar_states(4, 1, rng)[0]
        rho = np.outer(psi, psi.conj())
        y = rng.standard_normal((4, 4))
        y = y + y.T
        lhs = np.trace(y @ chn.apply_tensor_power(ad, rho, 2))
        rhs = np.trace(chn.apply_tensor_power(ad, y, 2, adjoint=True) @ rho)
        assert abs(lhs - rhs) < 1e-12


class TestChannelFiles:
    def test_roundtrip(self, tmp_path, rng):
        ch = chn.random_unitary_mixture(4, 2, rng, 2, 2)
        path = tmp_path / "ch.json"
        chn.save_channel(ch, path)
        back = chn.load_channel(path)
        assert (back.d_A, back.d_B, back.d_C) == (4, 2, 2)
        for a, b in zip(ch.base.kraus, back.base.kraus):
            assert np.array_equal(a, b)

    def test_bad_entry_names_index(self, tmp_path):
        obj = chn.channel_to_dict(chn.identity(2, 2, 1))
        obj["kraus"].append([[1, 0], [0, 1]])
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(obj))
        with pytest.raises(ChannelFormatError, match=r"kraus\[1\]"):
            chn.load_channel(path)

    def test_incomplete_kraus_rejected(self):
        obj = chn.channel_to_dict(chn.identity(2, 2, 1))
        obj["kraus"][0][0][0] = [0.5, 0.0]
        with pytest.raises(Exception, match="trace preserving"):
            chn.channel_from_dict(obj)

    def test_missing_field(self):
        with pytest.raises(ChannelFormatError, match="kraus"):
            chn.channel_from_dict({"d_in": 2, "d_out": 2, "d_B": 2, "d_C": 1})

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "x.json"
        path.write_text("{not json")
        with pytest.raises(ChannelFormatError):
            chn.load_channel(path)
