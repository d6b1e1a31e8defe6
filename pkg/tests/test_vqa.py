import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qexciton.analysis import Encoding, binary_populations
from qexciton.errors import ConfigError, NumericalError
from qexciton.exact import evolve_exact
from qexciton.hamiltonians import FrenkelSnapshot, encode_frenkel_binary, frenkel_pauli_sum, section_v_model
from qexciton.pauli import PauliString, PauliSum
from qexciton.sim import Circuit, basis_prep, basis_state
from qexciton.vqa import (
    Ansatz,
    Backend,
    ParameterVector,
    VqaConfig,
    build_mv_analytic,
    build_mv_sampled,
    hamiltonian_ansatz,
    make_default_ansatz,
    read_theta_csv,
    run_vqa,
    solve_thetadot,
    tangent_state,
    write_theta_csv,
)


def one_param(generator="X"):
    return Ansatz(Circuit(1), (PauliString(generator),))


class TestAnsatz:
    def test_counts(self):
        assert make_default_ansatz(2).num_parameters == 15
        assert [str(g) for g in make_default_ansatz(1).generators] == ["X", "Y", "Z"]
        assert make_default_ansatz(3, layers=2).num_parameters == 72

    def test_generator_order(self):
        gens = [str(g) for g in make_default_ansatz(2).generators]
        assert gens[:6] == ["XI", "YI", "ZI", "IX", "IY", "IZ"]
        assert gens[6:] == ["XX", "XY", "XZ", "YX", "YY", "YZ", "ZX", "ZY", "ZZ"]

    def test_hamiltonian_ansatz(self):
        a = hamiltonian_ansatz(frenkel_pauli_sum(section_v_model()), basis_prep(0, 2))
        assert [str(g) for g in a.generators] == ["IX", "XX", "ZI"]
        assert a.labels() == ["L1:IX", "L1:XX", "L1:ZI"]

    def test_validation(self):
        with pytest.raises(ConfigError):
            Ansatz(Circuit(2), ())
        with pytest.raises(ConfigError):
            Ansatz(Circuit(2), (PauliString("X"),))
        with pytest.raises(ConfigError):
            make_default_ansatz(2).state(np.zeros(3))
        with pytest.raises(NumericalError):
            one_param().state([np.nan])

    @given(st.integers(0, 2**32 - 1))
    def test_state_normalized(self, seed):
        a = make_default_ansatz(2)
        theta = np.random.default_rng(seed).uniform(-math.pi, math.pi, a.num_parameters)
        assert abs(np.linalg.norm(a.state(theta)) - 1) < 1e-12


class TestTangents:
    def test_single_generator(self):
        theta = 0.4
        t = tangent_state(one_param(), [theta], 0)
        psi = one_param().state([theta])
        assert np.allclose(t, 1j * PauliString("X").to_matrix() @ psi)
        assert np.linalg.norm(t) == pytest.approx(1)

    def test_at_zero(self):
        a = make_default_ansatz(2, psi0_prep=basis_prep(1, 2))
        psi0 = basis_state(1, 2)
        for k, g in enumerate(a.parameter_generators):
            assert np.allclose(tangent_state(a, np.zeros(15), k), 1j * g.to_matrix() @ psi0)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_finite_differences(self, rng, n):
        a = make_default_ansatz(n, psi0_prep=basis_prep(0, n))
        theta = rng.uniform(-1, 1, a.num_parameters)
        eps = 1e-5
        for k in range(a.num_parameters):
            e = np.zeros_like(theta)
            e[k] = eps
            fd = (a.state(theta + e) - a.state(theta - e)) / (2 * eps)
            assert np.linalg.norm(fd - tangent_state(a, theta, k)) <= 1e-6

    def test_index_range(self):
        with pytest.raises(ConfigError):
            tangent_state(one_param(), [0.0], 1)


class TestMV:
    def test_one_parameter_sign(self):
        c = 0.3
        m, v = build_mv_analytic(one_param(), [0.0], PauliSum([(c, "X")]))
        assert np.allclose(m, [[1.0]])
        assert np.allclose(v, [-c])

    def test_one_parameter_tracks_exact(self):
        c = 0.04
        h = PauliSum([(c, "X")])
        params, states = run_vqa(h, one_param(), VqaConfig(dt=1.0, total_time=30.0, eps=0.0))
        exact = evolve_exact(h, basis_state(0, 1), [p.t for p in params])
        for s, e in zip(states, exact):
            assert abs(np.vdot(e, s)) == pytest.approx(1, abs=1e-12)

    def test_no_overlap_direction(self):
        _, v = build_mv_analytic(one_param(), [0.0], PauliSum([(0.7, "Z")]))
        assert np.allclose(v, [0.0])

    def test_duplicate_generator(self):
        a = Ansatz(Circuit(1), (PauliString("X"), PauliString("X")))
        m, _ = build_mv_analytic(a, [0.2, -0.5], PauliSum([(1.0, "Z")]))
        assert np.allclose(m, np.ones((2, 2)))

    @given(st.integers(0, 2**32 - 1))
    def test_m_symmetric_psd(self, seed):
        a = make_default_ansatz(2)
        theta = np.random.default_rng(seed).uniform(-math.pi, math.pi, a.num_parameters)
        m, _ = build_mv_analytic(a, theta, frenkel_pauli_sum(section_v_model()))
        assert np.max(np.abs(m - m.T)) <= 1e-10
        assert np.linalg.eigvalsh(m).min() >= -1e-10

    def test_sampled_infinite_shots_matches(self, rng):
        a = make_default_ansatz(2, psi0_prep=basis_prep(0, 2))
        h = frenkel_pauli_sum(section_v_model())
        theta = rng.uniform(-math.pi, math.pi, a.num_parameters)
        m0, v0 = build_mv_analytic(a, theta, h)
        m1, v1 = build_mv_sampled(a, theta, h, Backend("sampled"))
        assert np.max(np.abs(m1 - m0)) <= 1e-10
        assert np.max(np.abs(v1 - v0)) <= 1e-10

    def test_sampled_identity_term(self, rng):
        a = make_default_ansatz(1, psi0_prep=basis_prep(0, 1))
        h = PauliSum([(0.5, "I"), (0.2, "X"), (0.1, "Z")])
        theta = rng.uniform(-1, 1, 3)
        _, v0 = build_mv_analytic(a, theta, h)
        _, v1 = build_mv_sampled(a, theta, h, Backend("sampled"))
        assert np.allclose(v0, v1, atol=1e-10)

    def test_sampled_within_five_sigma(self, rng):
        a = hamiltonian_ansatz(frenkel_pauli_sum(section_v_model()), basis_prep(0, 2))
        h = frenkel_pauli_sum(section_v_model())
        theta = rng.uniform(-1, 1, a.num_parameters)
        m0, v0 = build_mv_analytic(a, theta, h)
        est = build_mv_sampled(a, theta, h, Backend("sampled", 8192, seed=3), return_sigma=True)
        iu = np.triu_indices(3, 1)
        assert np.all(np.abs(est.m - m0)[iu] <= 5 * est.m_sigma[iu] + 1e-12)
        assert np.all(np.abs(est.v - v0) <= 5 * est.v_sigma + 1e-12)

    def test_noise_shrinks_v(self):
        h = frenkel_pauli_sum(section_v_model())
        a = hamiltonian_ansatz(h, basis_prep(0, 2))
        theta = np.array([0.3, -0.2, 0.5])
        _, v0 = build_mv_analytic(a, theta, h)
        norms = [np.linalg.norm(build_mv_sampled(a, theta, h, Backend.noisy(0.2, 8192, seed=s))[1]) for s in range(20)]
        assert np.mean(norms) < np.linalg.norm(v0)

    def test_analytic_backend_rejected(self):
        with pytest.raises(ConfigError):
            build_mv_sampled(one_param(), [0.0], PauliSum([(1.0, "X")]), Backend())


class TestSolve:
    def test_identity(self):
        assert np.allclose(solve_thetadot(np.eye(3), [1.0, 2.0, 3.0], eps=0), [1, 2, 3])

    def test_rank_deficient(self):
        x = solve_thetadot(np.diag([1.0, 0.0]), [1.0, 0.0])
        assert np.allclose(x, [1, 0], atol=1e-5)

    def test_random_spd(self, rng):
        a = rng.normal(size=(6, 6))
        m = a @ a.T + 0.1 * np.eye(6)
        v = rng.normal(size=6)
        assert np.linalg.norm(m @ solve_thetadot(m, v, eps=0) - v) <= 1e-8

    def test_singular_without_regularization(self):
        with pytest.raises(NumericalError):
            solve_thetadot(np.zeros((2, 2)), [1.0, 0.0], eps=0)

    def test_shape_checks(self):
        with pytest.raises(ConfigError):
            solve_thetadot(np.eye(2), [1.0])
        with pytest.raises(ConfigError):
            solve_thetadot(np.eye(2), [1.0, 1.0], eps=-1)


class TestRunVqa:
    def test_zero_hamiltonian(self):
        a = make_default_ansatz(2)
        theta0 = np.linspace(0, 1, 15)
        params, _ = run_vqa(PauliSum([], 2), a, VqaConfig(dt=1.0, total_time=5.0), theta0)
        assert all(np.allclose(p.theta, theta0) for p in params)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            VqaConfig(dt=0, total_time=1)
        with pytest.raises(ConfigError):
            VqaConfig(dt=1, total_time=1, eps=-1)
        with pytest.raises(ConfigError):
            VqaConfig(dt=1, total_time=1, alpha=0)

    def test_alpha_relabels_time(self):
        h = frenkel_pauli_sum(section_v_model())
        a = hamiltonian_ansatz(h, basis_prep(0, 2))
        p1, _ = run_vqa(h, a, VqaConfig(dt=1.0, total_time=5.0))
        p2, _ = run_vqa(h, a, VqaConfig(dt=1.0, total_time=5.0, alpha=2.0))
        assert np.allclose([p.t for p in p2], [p.t / 2 for p in p1])
        assert all(np.allclose(x.theta, y.theta) for x, y in zip(p1, p2))

    def test_energy_shift_does_not_change_populations(self):
        base = section_v_model()
        shifted = FrenkelSnapshot(base.energies + 0.3, base.couplings)
        h0, _ = encode_frenkel_binary(base)
        h1, off = encode_frenkel_binary(shifted)
        h1_full = h1 + PauliSum([(off, "II")])
        a = make_default_ansatz(2, psi0_prep=basis_prep(0, 2))
        cfg = VqaConfig(dt=0.5, total_time=10.0)
        _, s0 = run_vqa(h0, a, cfg)
        _, s1 = run_vqa(h1_full, a, cfg)
        for x, y in zip(s0, s1):
            assert np.allclose(binary_populations(x, 4), binary_populations(y, 4), atol=1e-8)

    def test_time_dependent_source(self):
        h = frenkel_pauli_sum(section_v_model())
        a = hamiltonian_ansatz(h, basis_prep(0, 2))
        p_static, _ = run_vqa(h, a, VqaConfig(dt=1.0, total_time=4.0))
        p_fn, _ = run_vqa(lambda t: h, a, VqaConfig(dt=1.0, total_time=4.0))
        assert np.allclose(p_static[-1].theta, p_fn[-1].theta)

    def test_seeded_sampled_run_repeatable(self):
        h = frenkel_pauli_sum(section_v_model())
        a = hamiltonian_ansatz(h, basis_prep(0, 2))
        cfg = VqaConfig(dt=2.0, total_time=6.0, backend=Backend("sampled", 1000, seed=9))
        p1, _ = run_vqa(h, a, cfg)
        p2, _ = run_vqa(h, a, cfg)
        assert np.array_equal(p1[-1].theta, p2[-1].theta)

    def test_theta_csv_round_trip(self, tmp_path):
        params = [ParameterVector(0.1 * i, np.array([0.1 * i, 1.0 / 3.0, -2.5])) for i in range(4)]
        write_theta_csv(params, tmp_path / "theta.csv")
        back = read_theta_csv(tmp_path / "theta.csv")
        assert (tmp_path / "theta.csv").read_text().startswith("t_fs,theta_1,theta_2,theta_3")
        assert all(a.t == b.t and np.array_equal(a.theta, b.theta) for a, b in zip(params, back))
