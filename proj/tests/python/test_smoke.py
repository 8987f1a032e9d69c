import math

import _qem as qem


def test_normal_quantile():
    assert qem.std_normal_quantile(0.5) == 0.0
    assert abs(qem.std_normal_quantile(0.975) - 1.959964) < 1e-5


def test_qem_mean_on_gaussian_quantiles():
    taus = qem.default_tau_grid(64)
    qhat = [0.3 + 1.5 * qem.std_normal_quantile(t) for t in taus]
    fit = qem.wls_fit(qhat, taus, order=3)
    assert abs(fit["coefficients"][0] - 0.3) < 1e-8
    assert abs(fit["coefficients"][1] - 1.5) < 1e-8
    assert abs(qem.qem_mean(qhat, taus) - 0.3) < 1e-8


def test_variance_machinery():
    taus = qem.default_tau_grid(32)
    z = [qem.std_normal_quantile(t) for t in taus]
    v = [1.5 if (t <= 0.1 or t >= 0.9) else 1.0 for t in taus]
    assert qem.variance_f(v, z) > 0.0
    assert qem.em_variance_theoretical([1.0] * 16) == 1.0 / 16.0
    assert qem.simulate_f_min(8, 2.0, 500, "even", seed=1) > 0.0


def test_projections():
    atoms = qem.quantile_project([1.0, 2.0, 3.0, 4.0], [0.25] * 4, qem.default_tau_grid(4))
    assert atoms == [1.0, 2.0, 3.0, 4.0]
    probs = qem.categorical_project([1.5], [1.0], [0.0, 1.0, 2.0, 3.0])
    assert abs(probs[1] - 0.5) < 1e-12 and abs(probs[2] - 0.5) < 1e-12
    assert qem.wasserstein1([0.0, 1.0], [1.0, 2.0]) == 1.0


def test_mdps_and_value_iteration():
    lake = qem.build_frozen_lake()
    assert lake.n_states == 16
    values, policy = qem.value_iteration(lake)
    assert policy[0] == 0  # LEFT at the start state
    assert abs(values[0] - 0.7847) < 2e-3

    five = qem.build_five_state(0.999)
    assert abs(0.999**2 * five.reward_mean(3, 0) - 1.2) < 1e-12


def test_training_determinism():
    mdp = qem.build_five_state(0.999)
    r1 = qem.run_training(mdp, estimator="qem", mode="evaluation", n_quantiles=16,
                          steps=2000, seed=5)
    r2 = qem.run_training(mdp, estimator="qem", mode="evaluation", n_quantiles=16,
                          steps=2000, seed=5)
    assert r1["q_em"] == r2["q_em"]
    assert r1["q_qem"] == r2["q_qem"]
    assert math.isfinite(r1["q_qem"][0])
