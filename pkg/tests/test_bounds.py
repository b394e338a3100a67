import json
import math
import warnings

import numpy as np
import pytest

from datahiding import bounds as bnd
from datahiding import channels as chn
from datahiding import qlin
from datahiding.errors import InvalidParameterError, ResourceGuardError

from oracles import apply_kraus, kraus_power

LOG2E = math.log2(math.e)


def chi_oracle(d, p):
    # output spectrum of a pure input: one eigenvalue p + (1-p)/d, d-1 copies of (1-p)/d
    lam = np.array([p + (1 - p) / d] + [(1 - p) / d] * (d - 1))
    lam = lam[lam > 0]
    return math.log2(d) + float(np.sum(lam * np.log2(lam)))


def gamma_oracle(kraus, d_in, d_out_list):
    ps = np.zeros((d_in * d_in, d_in * d_in))
    for i in range(d_in):
        for j in range(d_in):
            a = np.zeros(d_in * d_in)
            b = np.zeros(d_in * d_in)
            a[i * d_in + j] += 1
            b[j * d_in + i] += 1
            ps += np.outer(a, a + b) / 2
    img = apply_kraus(kraus_power(kraus, 2), ps)
    norm = np.abs(np.linalg.eigvalsh((img + img.conj().T) / 2)).max()
    return 2 * math.prod(d * d for d in d_out_list) / (d_in * (d_in + 1)) * norm


class TestHolevo:
    def test_identity_qubit(self, rng):
        chi, se = bnd.holevo_uniform(chn.identity(2), 500, rng)
        assert abs(chi - 1.0) < 1e-9

    def test_fully_depolarizing(self, rng):
        chi, _ = bnd.holevo_uniform(chn.depolarizing(2, 0.0), 500, rng)
        assert abs(chi) < 1e-9

    def test_half_depolarizing_qubit(self, rng):
        chi, se = bnd.holevo_uniform(chn.depolarizing(2, 0.5), 2000, rng)
        assert abs(chi - 0.18872) < 3 * se + 1e-5

    def test_sample_floor(self, rng):
        with pytest.raises(InvalidParameterError):
            bnd.holevo_uniform(chn.identity(2), 99, rng)

    def test_amplitude_damping_in_range(self, rng):
        chi, se = bnd.holevo_uniform(chn.amplitude_damping(0.3), 2000, rng)
        assert -3 * se <= chi <= 1 + 3 * se


class TestChiClosedForm:
    @pytest.mark.parametrize("d", [2, 3, 4, 6])
    def test_endpoints(self, d):
        assert bnd.depolarizing_chi_closed_form(d, 1.0) == pytest.approx(math.log2(d), abs=1e-12)
        assert bnd.depolarizing_chi_closed_form(d, 0.0) == pytest.approx(0.0, abs=1e-12)

    def test_value(self):
        assert bnd.depolarizing_chi_closed_form(2, 0.5) == pytest.approx(0.188722, abs=1e-6)

    @pytest.mark.parametrize("d", [2, 4, 5])
    @pytest.mark.parametrize("p", [0.1, 0.37, 0.9])
    def test_against_spectrum(self, d, p):
        assert bnd.depolarizing_chi_closed_form(d, p) == pytest.approx(chi_oracle(d, p), abs=1e-12)


class TestGamma:
    @pytest.mark.parametrize("p,expected", [(0.0, 1.0), (1.0, 1.6), (0.5, 1.15)])
    def test_depolarizing_d4(self, p, expected):
        g = bnd.gamma_mictodiactic(chn.depolarizing(4, p, 2, 2))
        assert abs(g - expected) < 1e-10
        assert abs(bnd.gamma_depolarizing_closed_form(4, p) - expected) < 1e-12

    def test_against_bruteforce(self, rng):
        ch = chn.random_unitary_mixture(4, 3, rng, 2, 2)
        assert bnd.gamma_mictodiactic(ch) == pytest.approx(gamma_oracle(list(ch.base.kraus), 4, [2, 2]), abs=1e-10)

    def test_multipartite_reduces(self):
        ch = chn.depolarizing(4, 0.3, 2, 2)
        assert abs(bnd.gamma_multipartite(ch) - bnd.gamma_mictodiactic(ch)) < 1e-12

    def test_multipartite_d8(self):
        ch = chn.depolarizing(8, 0.0, d_list=[2, 2, 2])
        g = bnd.gamma_multipartite(ch)
        assert abs(g - 1.0) < 1e-10
        assert abs(g - gamma_oracle(list(ch.base.kraus), 8, [2, 2, 2])) < 1e-10

    def test_split_independence(self):
        a = bnd.gamma_mictodiactic(chn.identity(6, 3, 2))
        b = bnd.gamma_mictodiactic(chn.identity(6, 6, 1))
        assert abs(a - b) < 1e-12

    def test_unital_ceiling(self, rng):
        for _ in range(5):
            ch = chn.random_unitary_mixture(4, 2, rng, 2, 2)
            assert bnd.gamma_mictodiactic(ch) <= 2 * 16 / 20 + 1e-9

    def test_guard(self):
        with pytest.raises(ResourceGuardError):
            bnd.gamma_mictodiactic(chn.identity(13))

    def test_warns_outside_scope(self):
        with pytest.warns(bnd.OutsideScopeWarning):
            bnd.gamma_mictodiactic(chn.amplitude_damping(0.3))


class TestEntropyVariant:
    @pytest.mark.parametrize("d", [2, 3, 4])
    def test_identity(self, d):
        assert bnd.gamma_entropy_variant(chn.identity(d)) == pytest.approx(2 * d / (d + 1), abs=1e-10)

    def test_delta_scaling(self):
        ch = chn.depolarizing(3, 0.4)
        assert bnd.gamma_entropy_variant(ch, 1.0) == pytest.approx(8 * bnd.gamma_entropy_variant(ch, 0.0))

    def test_fully_depolarizing(self):
        assert bnd.gamma_entropy_variant(chn.depolarizing(2, 0.0)) == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("d", [2, 3, 4, 6])
    @pytest.mark.parametrize("p", [0.0, 0.25, 0.5, 0.75, 1.0])
    def test_not_above_gamma(self, d, p):
        ch = chn.depolarizing(d, p)
        gv, gm = bnd.gamma_entropy_variant(ch), bnd.gamma_mictodiactic(ch)
        if gv > gm + 1e-9:
            warnings.warn(f"entropy variant exceeds gamma at d={d}, p={p}: {gv} > {gm}")
        assert gv <= gm + 1e-9


class TestKappaLower:
    def test_identity_d4(self):
        r = bnd.kappa_lower(chn.identity(4, 2, 2), chi_samples=500, seed=1)
        assert r.chi == pytest.approx(2.0, abs=1e-9)
        assert r.gamma == pytest.approx(1.6, abs=1e-10)
        assert r.kappa_lower == pytest.approx(2 - 1 - math.log2(1.6), abs=1e-9)
        assert abs(r.kappa_lower - 0.32193) < 1e-5

    def test_fully_depolarizing(self):
        r = bnd.kappa_lower(chn.depolarizing(4, 0.0, 2, 2), chi_samples=500, seed=1)
        assert r.kappa_lower == pytest.approx(-1.0, abs=1e-9)
        assert r.kappa_lower_clamped == 0.0
        assert any("negative" in n for n in r.notes)

    def test_field_consistency(self, rng):
        ch = chn.random_unitary_mixture(4, 3, rng, 2, 2)
        r = bnd.kappa_lower(ch, chi_samples=2000, seed=3)
        assert abs(r.kappa_lower - (r.chi - math.log2(r.d_plus) - math.log2(r.gamma))) < 1e-12
        assert -3 * r.chi_stderr <= r.chi <= 2 + 3 * r.chi_stderr

    def test_unital_looser_bound(self, rng):
        for _ in range(4):
            ch = chn.random_unitary_mixture(4, 3, rng, 2, 2)
            r = bnd.kappa_lower(ch, chi_samples=500, seed=2)
            assert r.kappa_lower >= r.chi - 1 - math.log2(8 / 5) - 1e-12

    def test_non_mictodiactic_flagged(self):
        r = bnd.kappa_lower(chn.amplitude_damping(0.3), chi_samples=500, seed=0)
        assert not r.mictodiactic
        assert any("scope" in n for n in r.notes)

    def test_serialisation(self):
        r = bnd.kappa_lower(chn.depolarizing(4, 0.5, 2, 2), chi_samples=500, seed=4)
        obj = json.loads(r.to_json(extra_field=1))
        assert obj["seed"] == 4 and obj["extra_field"] == 1
        lines = r.to_csv().splitlines()
        assert len(lines) == 2 and lines[0].startswith("channel,")
        assert repr(r.chi) in lines[1]

    def test_seed_determinism(self):
        a = bnd.kappa_lower(chn.amplitude_damping(0.2), chi_samples=300, seed=9)
        b = bnd.kappa_lower(chn.amplitude_damping(0.2), chi_samples=300, seed=9)
        assert a.to_csv() == b.to_csv()


class TestCoherent:
    def test_g_values(self):
        assert bnd.g_function(0.0) == 0.0
        assert bnd.g_function(1.0) == pytest.approx(2.0, abs=1e-14)
        with pytest.raises(InvalidParameterError):
            bnd.g_function(-1.0)

    def test_g_direct_formula(self):
        for x in (0.1, 2.5, 40.0):
            direct = (x + 1) * math.log2(x + 1) - x * math.log2(x)
            assert bnd.g_function(x) == pytest.approx(direct, rel=1e-12)

    def test_g_monotone(self):
        vals = [bnd.g_function(x) for x in np.linspace(0, 50, 1000)]
        assert np.all(np.diff(vals) > 0)

    def test_bound_values(self):
        assert bnd.coherent_state_upper_bound(bnd.CoherentBoundInput(1e-12)) < 1e-10
        assert bnd.coherent_state_upper_bound(bnd.CoherentBoundInput(1.0)) == pytest.approx(1.0, abs=1e-14)
        assert abs(bnd.coherent_state_upper_bound(bnd.CoherentBoundInput(1e4)) - 1.4427) < 0.01

    def test_bound_independent_of_eta(self):
        vals = {bnd.coherent_state_upper_bound(bnd.CoherentBoundInput(3.0, eta)) for eta in (0.1, 0.5, 0.9)}
        assert len(vals) == 1

    def test_covariance_example(self):
        cov = bnd.heterodyne_covariance(bnd.CoherentBoundInput(1.0, 0.5))
        assert np.allclose(cov, [[0.75, 0.25], [0.25, 0.75]])
        assert np.linalg.det(cov) == pytest.approx(0.5)
        assert bnd.heterodyne_mutual_info(bnd.CoherentBoundInput(1.0, 0.5)) == pytest.approx(1.0, abs=1e-14)

    def test_heterodyne_zero(self):
        assert bnd.heterodyne_mutual_info(bnd.CoherentBoundInput(0.0, 0.3)) == pytest.approx(0.0, abs=1e-15)

    def test_heterodyne_eta_grid(self):
        for ns in (0.01, 1.0, 37.0, 1e5):
            for eta in np.linspace(0.01, 0.99, 25):
                v = bnd.heterodyne_mutual_info(bnd.CoherentBoundInput(ns, float(eta)))
                assert abs(v - math.log2(1 + ns)) < 1e-12

    def test_input_validation(self):
        with pytest.raises(InvalidParameterError):
            bnd.CoherentBoundInput(-1.0)
        with pytest.raises(InvalidParameterError):
            bnd.CoherentBoundInput(1.0, 1.0)


class TestUpperEstimate:
    def test_locally_orthogonal_ensemble(self, rng):
        e0 = np.zeros(4)
        e0[0] = 1
        e3 = np.zeros(4)
        e3[3] = 1
        ens = [(0.5, np.outer(e0, e0)), (0.5, np.outer(e3, e3))]
        est = bnd.kappa_upper_estimate(chn.identity(4, 2, 2), ens, 20, rng)
        assert est.value < 1e-9
        assert est.heuristic

    def test_single_state(self, rng):
        psi = qlin.haar_states(4, 1, rng)[0]
        est = bnd.kappa_upper_estimate(chn.identity(4, 2, 2), [(1.0, np.outer(psi, psi.conj()))], 10, rng)
        assert est.value == 0.0

    def test_bell_pair(self, rng):
        phi_p = np.array([1, 0, 0, 1]) / math.sqrt(2)
        phi_m = np.array([1, 0, 0, -1]) / math.sqrt(2)
        ens = [(0.5, np.outer(phi_p, phi_p)), (0.5, np.outer(phi_m, phi_m))]
        est = bnd.kappa_upper_estimate(chn.identity(4, 2, 2), ens, 200, rng)
        assert est.holevo_x_bc == pytest.approx(1.0, abs=1e-10)
        assert 0.0 <= est.value <= 1.0
        # brute-force subtrahend over random product bases; the search must do at least as well
        outs = np.stack([s for _, s in ens])
        best = 0.0
        for _ in range(10_000 // 20):
            ub = qlin.haar_unitaries(2, 20, rng)
            uc = qlin.haar_unitaries(2, 20, rng)
            for a, b in zip(ub, uc):
                vecs = np.array([np.kron(a[:, i], b[:, j]) for i in range(2) for j in range(2)])
                p = np.abs(np.einsum("yi,xij,yj->xy", vecs.conj(), outs, vecs))
                py = p.mean(axis=0)
                h = lambda q: -np.sum(q[q > 0] * np.log2(q[q > 0]))
                best = max(best, h(py) - 0.5 * (h(p[0]) + h(p[1])))
        assert est.accessible_found >= best - 1e-3
