"""Hidden-Markov detection layer.

Small-sequence behavior is checked against exhaustive path enumeration,
which is exact for a two-state chain on short streams.
"""

import itertools
import math
from dataclasses import replace

import numpy as np
import pytest

from dpqlsim.dataio import read_keyvalues, write_keyvalues
from dpqlsim.hmm_detector import (
    STATE_NAMES,
    DecodedSeries,
    DetectionMetrics,
    EstimationError,
    HmmParams,
    baum_welch,
    bayes_posterior,
    default_params,
    estimate_params_supervised,
    evaluate,
    forward_backward,
    viterbi,
    write_decoded_csv,
)
from dpqlsim.trajectory_sim import ExperimentConfig, simulate_hours


def brute_force_posteriors(params, obs):
    """Exact joint enumeration over all hidden paths."""
    n = len(obs)
    total = 0.0
    marg = np.zeros(n)
    best_prob, best_path = -1.0, None
    for path in itertools.product((0, 1), repeat=n):
        prob = params.initial[path[0]] * params.emit[path[0], obs[0]]
        for t in range(1, n):
            prob *= params.trans[path[t - 1], path[t]] * params.emit[path[t], obs[t]]
        total += prob
        for t in range(n):
            if path[t] == 1:
                marg[t] += prob
        if prob > best_prob:
            best_prob, best_path = prob, path
    return marg / total, math.log(total), np.array(best_path)


class TestHmmParams:
    def test_row_sums_enforced(self):
        with pytest.raises(ValueError):
            HmmParams(
                trans=np.array([[0.9, 0.2], [0.1, 0.9]]),
                emit=np.array([[0.97, 0.03], [0.28, 0.72]]),
                initial=np.array([0.5, 0.5]),
            )

    def test_negative_entries_rejected(self):
        with pytest.raises(ValueError):
            HmmParams(
                trans=np.array([[1.1, -0.1], [0.1, 0.9]]),
                emit=np.array([[0.97, 0.03], [0.28, 0.72]]),
                initial=np.array([0.5, 0.5]),
            )

    def test_initial_shape(self):
        with pytest.raises(ValueError):
            HmmParams(
                trans=np.eye(2),
                emit=np.array([[0.97, 0.03], [0.28, 0.72]]),
                initial=np.array([1.0, 0.0, 0.0]),
            )

    def test_mapping_round_trip(self):
        p = default_params()
        back = HmmParams.from_mapping(p.to_mapping())
        assert np.allclose(back.trans, p.trans)
        assert np.allclose(back.emit, p.emit)
        assert np.allclose(back.initial, p.initial)

    def test_mapping_missing_key(self):
        m = default_params().to_mapping()
        del m["emit_11"]
        with pytest.raises(ValueError):
            HmmParams.from_mapping(m)

    def test_mapping_rejects_broken_rows(self):
        m = default_params().to_mapping()
        m["emit_10"] = 0.5  # row now sums to 1.22
        with pytest.raises(ValueError):
            HmmParams.from_mapping(m)

    def test_keyvalue_file_round_trip(self, tmp_path):
        path = tmp_path / "hmm.kv"
        p = default_params()
        write_keyvalues(path, p.to_mapping())
        back = HmmParams.from_mapping(read_keyvalues(path))
        assert np.allclose(back.trans, p.trans, atol=1e-9)
        assert np.allclose(back.emit, p.emit, atol=1e-9)


class TestDefaultParams:
    def test_structure(self):
        p = default_params()
        assert p.emit[0, 1] == pytest.approx(0.03)
        assert p.emit[1, 1] == pytest.approx(0.72)
        assert p.trans[1, 0] == pytest.approx(0.015)
        assert p.initial[1] == pytest.approx(0.0047)

    def test_entry_rate_balances_occupancy(self):
        # Stationary signal weight of the chain equals the thermal p_g.
        p = default_params()
        entry, exit_ = p.trans[0, 1], p.trans[1, 0]
        assert entry == pytest.approx(0.0047 * 0.015 / (1.0 - 0.0047), rel=1e-12)
        assert entry / (entry + exit_) == pytest.approx(0.0047, rel=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            default_params(p_b=-0.1)
        with pytest.raises(ValueError):
            default_params(p_g=1.0)


class TestForwardBackward:
    def test_against_exhaustive_enumeration(self):
        p = default_params(p_b=0.1, p_d=0.7, p_s=0.1, p_g=0.2)
        obs = np.array([0, 1, 1, 0, 1, 0, 0, 1])
        exact_marg, exact_ll, _ = brute_force_posteriors(p, obs)
        d = forward_backward(p, obs)
        assert np.allclose(d.posteriors, exact_marg, atol=1e-12)
        assert d.log_likelihood == pytest.approx(exact_ll, abs=1e-10)

    def test_posteriors_are_probabilities(self):
        d = forward_backward(default_params(), [0, 1] * 30)
        assert np.all((d.posteriors >= 0.0) & (d.posteriors <= 1.0))
        assert d.states.dtype == np.int8

    def test_empty_stream(self):
        d = forward_backward(default_params(), [])
        assert d.states.size == 0
        assert d.posteriors.size == 0
        assert d.log_likelihood == 0.0

    def test_impossible_sequence(self):
        p = HmmParams(
            trans=default_params().trans,
            emit=np.array([[1.0, 0.0], [1.0, 0.0]]),  # dark impossible
            initial=np.array([0.9953, 0.0047]),
        )
        with pytest.raises(ValueError):
            forward_backward(p, [0, 0, 1])

    def test_invalid_observations(self):
        with pytest.raises(ValueError):
            forward_backward(default_params(), [0, 2])
        with pytest.raises(ValueError):
            forward_backward(default_params(), np.zeros((2, 2), dtype=int))

    def test_all_bright_stays_quiet(self):
        d = forward_backward(default_params(), np.zeros(20, dtype=int))
        assert float(d.posteriors.max()) == pytest.approx(2.8571882337758397e-05, rel=1e-9)
        assert not d.states.any()

    def test_uniform_emission_returns_stationary_prior(self):
        # With uninformative emissions and the stationary initial vector
        # the posterior is the prior at every record.
        base = default_params()
        p = HmmParams(
            trans=base.trans,
            emit=np.array([[0.5, 0.5], [0.5, 0.5]]),
            initial=base.initial,
        )
        d = forward_backward(p, [0, 1, 1, 0, 1])
        assert np.allclose(d.posteriors, 0.0047, atol=1e-9)

    @pytest.mark.parametrize("run_length,mean_posterior", [(10, 0.993601), (15, 0.995734)])
    def test_dark_run_posterior(self, run_length, mean_posterior):
        # Mean smoothed posterior over an embedded dark run; the edge
        # records carry the ambiguity about exactly when the episode
        # started and ended.
        obs = np.array([0] * 40 + [1] * run_length + [0] * 40)
        d = forward_backward(default_params(), obs)
        run = d.posteriors[40 : 40 + run_length]
        assert float(run.mean()) == pytest.approx(mean_posterior, abs=2e-6)
        assert float(run.min()) == pytest.approx(0.969361, abs=2e-6)
        assert run.max() > 0.9999


class TestViterbi:
    def test_against_exhaustive_enumeration(self):
        p = default_params(p_b=0.1, p_d=0.7, p_s=0.1, p_g=0.2)
        obs = np.array([0, 1, 1, 0, 1, 1, 1, 0])
        _, _, exact_path = brute_force_posteriors(p, obs)
        assert np.array_equal(viterbi(p, obs), exact_path)

    def test_dark_segment_covered_exactly(self):
        obs = np.array([0] * 20 + [1] * 15 + [0] * 20)
        path = viterbi(default_params(), obs)
        flagged = np.nonzero(path)[0]
        assert flagged.min() == 20 and flagged.max() == 34
        assert flagged.size == 15

    def test_isolated_dark_ignored(self):
        obs = np.array([0] * 10 + [1] + [0] * 10)
        assert not viterbi(default_params(), obs).any()

    def test_empty_stream(self):
        assert viterbi(default_params(), []).size == 0

    def test_noise_only_stream_has_no_detections(self):
        rng = np.random.default_rng(99)
        noise = (rng.random(20000) < 0.03).astype(int)
        p = default_params()
        assert viterbi(p, noise).sum() == 0
        assert forward_backward(p, noise).states.sum() == 0


class TestSupervisedEstimation:
    def test_recovers_simulator_rates(self):
        ds = simulate_hours(replace(ExperimentConfig(), rng_seed=55), 1.0)
        est = estimate_params_supervised([ds])
        assert abs(est.emit[0, 1] - 0.03) < 0.005
        assert abs(est.emit[1, 1] - 0.72) < 0.05
        assert 0.003 < est.trans[1, 0] < 0.03

    def test_accepts_plain_pairs(self):
        obs = np.array([0, 1, 1, 0, 0])
        labels = np.array([0, 1, 1, 0, 0])
        est = estimate_params_supervised([(obs, labels)])
        assert est.emit[1, 1] > est.emit[0, 1]

    def test_missing_state_named_in_error(self):
        obs = np.array([0, 0, 1, 0])
        labels = np.zeros(4, dtype=int)
        with pytest.raises(EstimationError) as err:
            estimate_params_supervised([(obs, labels)])
        assert STATE_NAMES[1] in str(err.value)

    def test_unlabeled_dataset_rejected(self):
        ds = simulate_hours(ExperimentConfig(rng_seed=1), 0.01)
        stripped = [(ds.outcomes(), None)]
        with pytest.raises((EstimationError, Exception)):
            estimate_params_supervised(stripped)

    def test_no_data_rejected(self):
        with pytest.raises(EstimationError):
            estimate_params_supervised([])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            estimate_params_supervised([(np.zeros(3, dtype=int), np.zeros(4, dtype=int))])

    def test_error_shrinks_with_more_data(self):
        # Deterministic seeds; the 8x larger corpus must estimate the
        # emission rates more accurately on average.
        def mean_error(hours):
            errs = []
            for seed in (60, 61, 66):
                ds = simulate_hours(replace(ExperimentConfig(), rng_seed=seed), hours)
                est = estimate_params_supervised([ds])
                errs.append(
                    abs(est.emit[1, 1] - 0.72) + abs(est.emit[0, 1] - 0.03)
                )
            return float(np.mean(errs))

        assert mean_error(8.0) < mean_error(1.0)


class TestBaumWelch:
    def synthetic_stream(self, n=1500, seed=17):
        truth = default_params(p_b=0.03, p_d=0.7, p_s=0.02, p_g=0.2)
        rng = np.random.default_rng(seed)
        obs = np.empty(n, dtype=int)
        s = 1
        for t in range(n):
            obs[t] = rng.random() < truth.emit[s, 1]
            if s == 0:
                s = int(rng.random() < truth.trans[0, 1])
            else:
                s = int(rng.random() >= truth.trans[1, 0])
        return obs

    def test_likelihood_monotone_and_improves(self):
        obs = self.synthetic_stream()
        start = default_params(p_b=0.05, p_d=0.5, p_s=0.05, p_g=0.2)
        refined, history = baum_welch(obs, start, max_iter=25)
        assert len(history) >= 2
        assert all(b >= a - 1e-9 for a, b in zip(history, history[1:]))
        assert history[-1] > history[0] + 1.0
        # The refined fidelity moves from the deliberately wrong 0.5
        # toward the generating 0.7.
        assert abs(refined.emit[1, 1] - 0.7) < abs(0.5 - 0.7)

    def test_requires_two_observations(self):
        with pytest.raises(ValueError):
            baum_welch([1], default_params())

    def test_converged_input_is_stable(self):
        obs = self.synthetic_stream(n=800)
        start = default_params(p_b=0.03, p_d=0.7, p_s=0.02, p_g=0.2)
        refined, history = baum_welch(obs, start, max_iter=30, tol=1e-9)
        # Started at the generating parameters: little room to move.
        assert abs(refined.emit[1, 1] - 0.7) < 0.1


class TestBayesPosterior:
    def test_frozen_example(self):
        assert bayes_posterior(0.9, 1e-5, 0.0047) == pytest.approx(
            0.9976525683185639, rel=1e-12
        )

    def test_equal_likelihoods_return_prior(self):
        assert bayes_posterior(0.3, 0.3, 0.25) == pytest.approx(0.25, rel=1e-12)

    def test_zero_prior(self):
        assert bayes_posterior(0.9, 0.1, 0.0) == 0.0

    def test_both_zero_likelihoods(self):
        with pytest.raises(ValueError):
            bayes_posterior(0.0, 0.0, 0.5)

    def test_validation(self):
        with pytest.raises(ValueError):
            bayes_posterior(-1.0, 0.1, 0.5)
        with pytest.raises(ValueError):
            bayes_posterior(0.1, 0.1, 1.5)


class TestEvaluate:
    def test_perfect_prediction(self):
        m = evaluate([0, 1, 1, 0], [0, 1, 1, 0])
        assert (m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0)
        assert m.correct_positive == 2
        assert m.incorrect_positive == 0
        assert m.incorrect_negative == 0

    def test_counts(self):
        m = evaluate([1, 1, 0, 0], [1, 0, 1, 0])
        assert m.correct_positive == 1
        assert m.incorrect_positive == 1
        assert m.incorrect_negative == 1
        assert m.precision == pytest.approx(0.5)
        assert m.recall == pytest.approx(0.5)
        assert m.f1 == pytest.approx(0.5)

    def test_f1_between_precision_and_recall(self):
        m = evaluate([1, 1, 1, 0, 0, 0], [1, 0, 0, 1, 0, 0])
        assert min(m.precision, m.recall) <= m.f1 <= max(m.precision, m.recall)

    def test_empty_positive_edge_cases(self):
        quiet = evaluate([0, 0], [0, 0])
        assert (quiet.precision, quiet.recall, quiet.f1) == (1.0, 1.0, 1.0)
        missed = evaluate([0, 0], [0, 1])
        assert missed.precision == 0.0
        assert missed.recall == 0.0
        assert missed.f1 == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            evaluate([0, 1], [0, 1, 0])


class TestDecodedCsv:
    def test_round_trip(self, tmp_path):
        obs = np.array([0] * 5 + [1] * 6 + [0] * 5)
        decoded = forward_backward(default_params(), obs)
        path = tmp_path / "decoded.csv"
        write_decoded_csv(path, obs, decoded)
        lines = path.read_text().splitlines()
        assert lines[0] == "index,outcome,predicted_state,posterior"
        assert len(lines) == 17
        cells = lines[6].split(",")
        assert cells[0] == "5" and cells[1] == "1"
        assert 0.0 <= float(cells[3]) <= 1.0

    def test_custom_indices(self, tmp_path):
        obs = np.array([0, 1])
        decoded = forward_backward(default_params(), obs)
        path = tmp_path / "decoded.csv"
        write_decoded_csv(path, obs, decoded, indices=[100, 101])
        assert path.read_text().splitlines()[1].startswith("100,")

    def test_length_mismatch(self, tmp_path):
        obs = np.array([0, 1, 0])
        decoded = forward_backward(default_params(), obs[:2])
        with pytest.raises(ValueError):
            write_decoded_csv(tmp_path / "x.csv", obs, decoded)
