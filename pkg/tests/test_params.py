import numpy as np
import pytest

from plds import (DynamicParams, StaticParams, default_dynamics, load_model,
                  model_from_dict, model_to_dict, require_valid, save_model,
                  validate)
from plds.errors import InvalidModelError
from plds.params import (ObservationCache, bhattacharyya_distance,
                         conditioned_update, residual_quad)

from conftest import random_model, random_spd
from oracles import mvn_logpdf_ref


def identity_model():
    theta = StaticParams(A=np.eye(2)[None], b=np.zeros((1, 2)),
                         Sigma=np.eye(2)[None], pi=np.ones(1),
                         gamma=np.zeros((1, 2)), Gamma=np.eye(2)[None])
    phi = DynamicParams(C=np.eye(2)[None], Q=np.eye(2)[None],
                        tau=np.ones((1, 1)))
    return theta, phi


def test_valid_identity_model_gives_empty_report():
    theta, phi = identity_model()
    assert validate(theta, phi) == []


def test_tau_column_sum_violation():
    theta, phi = identity_model()
    phi = DynamicParams(C=phi.C, Q=phi.Q, tau=np.array([[0.9]]))
    codes = [v.code for v in validate(theta, phi)]
    assert "TAU_COLUMN_STOCHASTIC" in codes


def test_rank_deficient_c_flagged():
    theta, phi = identity_model()
    phi = DynamicParams(C=np.zeros((1, 2, 2)), Q=phi.Q, tau=phi.tau)
    codes = [v.code for v in validate(theta, phi)]
    assert "C_RANK_DEFICIENT" in codes


def test_non_spd_sigma_flagged():
    theta, phi = identity_model()
    bad = np.array([[[1.0, 0.0], [0.0, -1.0]]])
    theta = StaticParams(A=theta.A, b=theta.b, Sigma=bad, pi=theta.pi,
                         gamma=theta.gamma, Gamma=theta.Gamma)
    codes = [v.code for v in validate(theta, phi)]
    assert "SIGMA_NOT_SPD" in codes


def test_pi_simplex_violation():
    theta, phi = identity_model()
    theta = StaticParams(A=theta.A, b=theta.b, Sigma=theta.Sigma,
                         pi=np.array([0.7]), gamma=theta.gamma,
                         Gamma=theta.Gamma)
    codes = [v.code for v in validate(theta, phi)]
    assert "PI_NOT_SIMPLEX" in codes


def test_require_valid_raises_with_report():
    theta, phi = identity_model()
    phi = DynamicParams(C=phi.C, Q=phi.Q, tau=np.array([[0.5]]))
    with pytest.raises(InvalidModelError):
        require_valid(theta, phi)


def test_validation_never_raises_on_garbage():
    theta, phi = identity_model()
    theta = StaticParams(A=np.full((1, 2, 2), np.nan), b=theta.b,
                         Sigma=theta.Sigma, pi=theta.pi, gamma=theta.gamma,
                         Gamma=theta.Gamma)
    report = validate(theta, phi)
    assert any(v.code == "NONFINITE_VALUE" for v in report)


def test_model_json_round_trip(tmp_path, rng):
    theta, phi = random_model(rng, K=3, D=4, L=2)
    path = tmp_path / "model.json"
    save_model(path, theta, phi)
    theta2, phi2 = load_model(path)
    for a, b in [(theta.A, theta2.A), (theta.b, theta2.b),
                 (theta.Sigma, theta2.Sigma), (theta.pi, theta2.pi),
                 (theta.gamma, theta2.gamma), (theta.Gamma, theta2.Gamma),
                 (phi.C, phi2.C), (phi.Q, phi2.Q), (phi.tau, phi2.tau)]:
        np.testing.assert_array_equal(a, b)


def test_dict_round_trip_keeps_diagonal_flag(rng):
    theta, phi = random_model(rng, K=2, D=3, L=2)
    theta = StaticParams(A=theta.A, b=theta.b,
                         Sigma=np.stack([np.diag(np.diag(s)) for s in theta.Sigma]),
                         pi=theta.pi, gamma=theta.gamma, Gamma=theta.Gamma,
                         sigma_diagonal=True)
    theta2, _ = model_from_dict(model_to_dict(theta, phi))
    assert theta2.sigma_diagonal
    np.testing.assert_allclose(theta2.Sigma, theta.Sigma)


def test_bhattacharyya_zero_for_identical(rng):
    cov = random_spd(rng, 3)
    mean = rng.standard_normal(3)
    assert bhattacharyya_distance(mean, cov, mean, cov) == pytest.approx(0.0, abs=1e-12)


def test_bhattacharyya_grows_with_separation():
    c = np.eye(2)
    near = bhattacharyya_distance(np.zeros(2), c, np.ones(2), c)
    far = bhattacharyya_distance(np.zeros(2), c, 5 * np.ones(2), c)
    assert 0 < near < far


def test_default_dynamics_structure(rng):
    theta, _ = random_model(rng, K=3, D=2, L=2)
    phi = default_dynamics(theta)
    np.testing.assert_allclose(phi.C, np.broadcast_to(np.eye(2), (3, 2, 2)))
    np.testing.assert_allclose(phi.Q, np.broadcast_to(np.eye(2), (3, 2, 2)))
    np.testing.assert_allclose(phi.tau.sum(axis=0), np.ones(3), atol=1e-12)
    # closer initial-state components get more transition mass
    assert validate(theta, phi) == []


def test_observation_cache_loglik(rng):
    theta, _ = random_model(rng, K=2, D=3, L=2)
    cache = ObservationCache(theta)
    y = rng.standard_normal(3)
    x_mean = rng.standard_normal((2, 2))
    obs_means = np.einsum("kdl,kl->kd", theta.A, x_mean) + theta.b
    got = cache.loglik_all(y, obs_means)
    for k in range(2):
        want = mvn_logpdf_ref(y, obs_means[k], theta.Sigma[k])
        assert got[k] == pytest.approx(want, abs=1e-10)


def test_conditioned_update_matches_direct_bayes(rng):
    # information-form posterior + determinant-lemma evidence vs the
    # plain joint-Gaussian computation
    theta, _ = random_model(rng, K=2, D=4, L=2)
    cache = ObservationCache(theta)
    for k in range(2):
        prior_mean = rng.standard_normal(2)
        prior_cov = random_spd(rng, 2)
        prior_prec = np.linalg.inv(prior_cov)
        sign, prior_logdet = np.linalg.slogdet(prior_cov)
        y = rng.standard_normal(4)

        mean, cov, ev = conditioned_update(cache, k, y, prior_mean,
                                           prior_prec, prior_logdet)

        A, b, Sig = theta.A[k], theta.b[k], theta.Sigma[k]
        S = A @ prior_cov @ A.T + Sig
        G = prior_cov @ A.T @ np.linalg.inv(S)
        resid = y - A @ prior_mean - b
        want_mean = prior_mean + G @ resid
        want_cov = prior_cov - G @ A @ prior_cov
        want_ev = mvn_logpdf_ref(resid, np.zeros(4), S)

        np.testing.assert_allclose(mean, want_mean, atol=1e-10)
        np.testing.assert_allclose(cov, want_cov, atol=1e-10)
        assert ev == pytest.approx(want_ev, abs=1e-9)


def test_residual_quad_matches_direct(rng):
    theta, _ = random_model(rng, K=2, D=3, L=2)
    cache = ObservationCache(theta)
    d = rng.standard_normal(3)
    for k in range(2):
        want = d @ np.linalg.inv(theta.Sigma[k]) @ d
        assert residual_quad(cache, k, d) == pytest.approx(want, abs=1e-10)


def test_diagonal_cache_agrees_with_full(rng):
    # same Sigma held both ways must produce identical observation llks
    D, L = 3, 2
    diag = rng.uniform(0.5, 2.0, (2, D))
    Sigma = np.stack([np.diag(v) for v in diag])
    theta_full, _ = random_model(rng, K=2, D=D, L=L)
    theta_full = StaticParams(A=theta_full.A, b=theta_full.b, Sigma=Sigma,
                              pi=theta_full.pi, gamma=theta_full.gamma,
                              Gamma=theta_full.Gamma)
    theta_diag = StaticParams(A=theta_full.A, b=theta_full.b, Sigma=Sigma,
                              pi=theta_full.pi, gamma=theta_full.gamma,
                              Gamma=theta_full.Gamma, sigma_diagonal=True)
    cf, cd = ObservationCache(theta_full), ObservationCache(theta_diag)
    y = rng.standard_normal(D)
    means = rng.standard_normal((2, D))
    np.testing.assert_allclose(cf.loglik_all(y, means),
                               cd.loglik_all(y, means), atol=1e-10)
    np.testing.assert_allclose(cf.AtSinvA, cd.AtSinvA, atol=1e-10)
