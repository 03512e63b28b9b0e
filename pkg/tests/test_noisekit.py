import numpy as np
import pytest

from stchain.analysis import total_variation
from stchain.eigen import ground_state, lowest_k_states
from stchain.errors import EnsembleError
from stchain.hamiltonians import build_model
from stchain.noisekit import (DisorderConfig, ensemble_average, rng_stream,
                              sample_nuclear_fields, thermal_scan)
from stchain.stmeasure import binomial_profile, standard_layout, triplet_profile


class TestNuclearFieldSampling:
    def test_zero_strength(self):
        rng = rng_stream(1, 0)
        fields = sample_nuclear_fields(6, 0.0, rng)
        assert not np.any(fields)

    def test_component_moments(self):
        rng = rng_stream(99, 0)
        bn = 0.2
        draws = sample_nuclear_fields(10000, bn, rng)  # rows as iid draws
        assert np.abs(draws.mean(axis=0)).max() < 4 * bn / np.sqrt(10000)
        var = draws.var(axis=0, ddof=1)
        assert np.abs(var - bn ** 2).max() < 0.1 * bn ** 2

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            sample_nuclear_fields(4, -0.1, rng_stream(1, 1))

    def test_streams_are_independent_of_order(self):
        a = sample_nuclear_fields(4, 0.1, rng_stream(7, 3))
        _ = sample_nuclear_fields(4, 0.1, rng_stream(7, 2))
        b = sample_nuclear_fields(4, 0.1, rng_stream(7, 3))
        assert np.array_equal(a, b)


class TestDisorderConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            DisorderConfig("bogus", 0.1, 10, 1)
        with pytest.raises(ValueError):
            DisorderConfig("nuclear_fields", 0.1, 0, 1)
        with pytest.raises(ValueError):
            DisorderConfig("nuclear_fields", -0.1, 5, 1)


class TestEnsembleAverage:
    def test_zero_strength_matches_clean(self):
        model = build_model("ring", 8)
        config = DisorderConfig("random_couplings", 0.0, 6, master_seed=5)
        res = ensemble_average(config, model, {"profile", "fidelity"})
        clean = triplet_profile(ground_state(model).vector, standard_layout(8)).probs
        assert np.abs(res.mean_profile.probs - clean).max() < 1e-12
        assert res.stderr_profile.max() < 1e-12
        assert res.mean_fidelity == pytest.approx(1.0, abs=1e-10)
        assert res.stderr_fidelity == pytest.approx(0.0, abs=1e-12)

    def test_reproducible_and_worker_independent(self):
        model = build_model("ring", 6)
        config = DisorderConfig("nuclear_fields", 0.15, 8, master_seed=11,
                                convergence_tol=0.0)
        a = ensemble_average(config, model, {"profile"}, workers=1)
        b = ensemble_average(config, model, {"profile"}, workers=2)
        assert np.array_equal(a.mean_profile.probs, b.mean_profile.probs)
        assert a.samples_used == b.samples_used == 8

    def test_nuclear_noise_breaks_singlet_null(self):
        model = build_model("ring", 8)
        p1 = []
        for bn in (0.1, 0.3):
            config = DisorderConfig("nuclear_fields", bn, 12, master_seed=3,
                                    convergence_tol=0.0)
            res = ensemble_average(config, model, {"profile"})
            p1.append(res.mean_profile.probs[1])
        assert p1[0] > 1e-6
        assert p1[1] > p1[0]

    def test_coupling_noise_keeps_singlet_null(self):
        model = build_model("ring", 8)
        config = DisorderConfig("random_couplings", 0.1, 10, master_seed=3,
                                convergence_tol=0.0)
        res = ensemble_average(config, model, {"profile", "fidelity"})
        assert res.mean_profile.probs[1] <= 1e-9
        assert res.mean_fidelity > 0.9

    def test_localization_under_weak_fields(self):
        model = build_model("open", 8)
        config = DisorderConfig("nuclear_fields", 0.1, 10, master_seed=17,
                                convergence_tol=0.0)
        res = ensemble_average(config, model, {"localization"})
        assert res.mean_concurrence >= 0.7
        assert res.mean_q0 > 0.1
        assert res.samples_used == 10

    def test_invalid_observables(self):
        model = build_model("ring", 6)
        config = DisorderConfig("nuclear_fields", 0.1, 4, master_seed=1)
        with pytest.raises(ValueError):
            ensemble_average(config, model, {"bogus"})

    def test_field_base_model_rejected(self):
        from stchain.hamiltonians import with_random_fields

        model = with_random_fields(build_model("ring", 4), np.full((4, 3), 0.1))
        config = DisorderConfig("nuclear_fields", 0.1, 4, master_seed=1)
        with pytest.raises(ValueError):
            ensemble_average(config, model, {"profile"})

    def test_early_stop_triggers(self):
        model = build_model("ring", 6)
        config = DisorderConfig("random_couplings", 0.02, 100, master_seed=2,
                                convergence_tol=0.5)
        res = ensemble_average(config, model, {"fidelity"})
        assert res.samples_used < 100

    def test_ensemble_mean_couplings_match_clean(self):
        from stchain.noisekit import _perturbed_model

        model = build_model("ring", 6)
        draws = np.array([
            [J for (_, _, J) in _perturbed_model(model, "random_couplings", 0.1,
                                                 rng_stream(5, i)).bonds]
            for i in range(400)
        ])
        assert np.abs(draws.mean(axis=0) - 1.0).max() < 3 * 0.1 / np.sqrt(400) * 2

    def test_json_payload(self):
        model = build_model("ring", 6)
        config = DisorderConfig("random_couplings", 0.05, 4, master_seed=9,
                                convergence_tol=0.0)
        res = ensemble_average(config, model, {"fidelity", "localization"})
        payload = res.to_json()
        assert payload["config"]["master_seed"] == 9
        assert payload["samples_used"] == 4
        assert "mean_fidelity" in payload and "stderr_q0" in payload


class TestThermalScan:
    def test_cold_profile_matches_ground_state(self):
        model = build_model("ring", 10)
        results = thermal_scan(model, [1.0 / 0.2], {"profile"})
        gs_probs = triplet_profile(ground_state(model).vector, standard_layout(10)).probs
        assert total_variation(results[0]["profile"].probs, gs_probs) <= 0.05

    def test_hot_profile_approaches_classical_binomial(self):
        model = build_model("ring", 8)
        tvs = []
        for kt in (1.0, 5.0, 50.0):
            res = thermal_scan(model, [1.0 / kt], {"profile"})[0]
            tvs.append(total_variation(res["profile"].probs, binomial_profile(4, 0.75)))
        assert tvs[0] > tvs[1] > tvs[2]
        assert tvs[2] <= 0.05

    def test_low_temperature_entanglement_plateau(self):
        # perfect entanglement survives at temperatures well inside the gap;
        # the measured N=8 plateau holds C >= 0.99 up to kT ~ gap/8
        model = build_model("open", 8)
        gap = np.diff([p.energy for p in lowest_k_states(model, 2)])[0]
        res = thermal_scan(model, [15.0 / gap, 4.0 / gap], {"localization"})
        assert res[0]["concurrence"] >= 0.99
        assert res[0]["q0"] > 0.1
        assert res[1]["concurrence"] < 0.9  # plateau has ended by kT = gap/4

    def test_thermal_herald_matches_dense_oracle(self):
        from stchain.analysis import concurrence
        from stchain.eigen import thermal_state
        from stchain.stmeasure import herald_all_singlet, middle_layout
        from tests.conftest import kron_hamiltonian, singlet_projector_dense

        model = build_model("open", 6)
        beta = 0.8
        h = kron_hamiltonian(model)
        evals, evecs = np.linalg.eigh(h)
        w = np.exp(-beta * (evals - evals.min()))
        w /= w.sum()
        rho = (evecs * w) @ evecs.conj().T
        proj = np.eye(64, dtype=complex)
        for pair in middle_layout(6).pairs:
            proj = proj @ singlet_projector_dense(6, pair)
        projected = proj @ rho @ proj.conj().T
        q0_oracle = float(np.trace(projected).real)
        t = projected.reshape([2] * 12)  # axes: r6..r1, c6..c1
        red = np.einsum("abcdefAbcdeF->afAF", t).reshape(4, 4) / q0_oracle

        q0, end = herald_all_singlet(thermal_state(model, beta), middle_layout(6))
        assert q0 == pytest.approx(q0_oracle, abs=1e-12)
        assert np.abs(end.to_matrix() - red).max() < 1e-10
        assert concurrence(end) == pytest.approx(concurrence(red), abs=1e-10)

    def test_invalid_observables(self):
        with pytest.raises(ValueError):
            thermal_scan(build_model("ring", 4), [1.0], {"fidelity"})
