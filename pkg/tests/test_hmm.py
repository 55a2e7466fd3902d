import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from hmmtts.features import ObservationSequence
from hmmtts.hmm import (LOG_ZERO, AlignmentError, DurationModel, GaussianStream, LeftRightHMM,
                        MissingModelError, ModelSet, MSDStream, StateEmission,
                        accumulate_and_update, compose_utterance_hmm, emission_loglik,
                        forward_backward, gaussian_logpdf, load_models, msd_logpdf, save_models,
                        viterbi)
from oracles import brute_force, emission_table, random_chain, random_emission, random_obs


# --- densities ---

def test_gaussian_standard_values():
    g1 = GaussianStream([0.0], [1.0])
    assert gaussian_logpdf([0.0], g1) == pytest.approx(-0.5 * np.log(2 * np.pi), abs=1e-15)
    assert gaussian_logpdf([0.0], g1) == pytest.approx(-0.91894, abs=1e-5)
    g2 = GaussianStream([0.0, 0.0], [1.0, 1.0])
    assert abs(np.exp(gaussian_logpdf([0.0, 0.0], g2)) - 1 / (2 * np.pi)) < 1e-12


@pytest.mark.parametrize("mean, var", [(0.0, 1.0), (2.5, 0.04), (-1.0, 9.0)])
def test_gaussian_integrates_to_one(mean, var):
    g = GaussianStream([mean], [var])
    total, _ = quad(lambda x: np.exp(gaussian_logpdf([x], g)), -np.inf, np.inf, epsabs=1e-12)
    assert abs(total - 1.0) < 1e-6


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=4), st.floats(0.1, 5), st.floats(-3, 3))
def test_density_peaks_at_mean(mean, var, shift):
    g = GaussianStream(mean, np.full(len(mean), var))
    assert gaussian_logpdf(mean, g) >= gaussian_logpdf(np.array(mean) + shift, g)


def test_gaussian_rejects_bad_parameters():
    with pytest.raises(ValueError):
        GaussianStream([0.0], [0.0])
    with pytest.raises(ValueError):
        gaussian_logpdf([0.0, 1.0], GaussianStream([0.0], [1.0]))


def test_msd_cases():
    g = GaussianStream([5.0], [0.1])
    assert msd_logpdf(None, MSDStream(0.3, g)) == pytest.approx(np.log(0.7))
    assert msd_logpdf(np.nan, MSDStream(0.3, g)) == pytest.approx(np.log(0.7))
    assert msd_logpdf([5.0], MSDStream(1.0, g)) == pytest.approx(gaussian_logpdf([5.0], g))
    assert msd_logpdf([5.0], MSDStream(0.0, g)) == LOG_ZERO
    assert msd_logpdf(None, MSDStream(1.0, g)) == LOG_ZERO


def test_msd_marginalizes_nan_components():
    g = GaussianStream([5.0, 0.0, 0.0], [0.1, 0.2, 0.3])
    s = MSDStream(0.6, g)
    expected = np.log(0.6) + gaussian_logpdf([5.1], GaussianStream([5.0], [0.1]))
    assert msd_logpdf([5.1, np.nan, np.nan], s) == pytest.approx(expected)


def test_emission_loglik_matches_per_frame(rng):
    chain = random_chain(rng, 4, dim=5)
    obs = random_obs(rng, 12, dim=5)
    assert np.allclose(emission_loglik(chain, obs), emission_table(chain, obs), atol=1e-10)


# --- inference ---

def test_one_state_chain(rng):
    chain = random_chain(rng, 1)
    obs = random_obs(rng, 6)
    path, _ = viterbi(chain, obs)
    assert np.all(path == 0)
    assert np.allclose(forward_backward(chain, obs).gamma, 1.0)


def test_forced_one_frame_per_state(rng):
    chain = random_chain(rng, 5)
    path, _ = viterbi(chain, random_obs(rng, 5))
    assert list(path) == [0, 1, 2, 3, 4]


def test_too_short_raises(rng):
    chain = random_chain(rng, 4)
    with pytest.raises(AlignmentError):
        viterbi(chain, random_obs(rng, 3))
    with pytest.raises(AlignmentError):
        forward_backward(chain, random_obs(rng, 3))


@pytest.mark.parametrize("seed", range(20))
def test_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    t = int(rng.integers(n, 9))
    chain, obs = random_chain(rng, n), random_obs(rng, t)
    best_path, best, total, gamma, selfs = brute_force(chain, obs)
    path, score = viterbi(chain, obs)
    assert score == pytest.approx(best, abs=1e-9)
    assert np.array_equal(path, best_path)
    fb = forward_backward(chain, obs)
    assert fb.loglik == pytest.approx(total, abs=1e-9)
    assert np.allclose(fb.gamma, gamma, atol=1e-9)
    assert np.allclose(fb.self_counts, selfs, atol=1e-9)


def test_two_state_three_frames(rng):
    chain, obs = random_chain(rng, 2), random_obs(rng, 3)
    b = emission_table(chain, obs)
    a0, a1 = chain.self_loop
    # paths must start in state 0 and end in state 1, leaving two candidates
    paths = {
        (0, 0, 1): b[0, 0] + np.log(a0) + b[1, 0] + np.log(1 - a0) + b[2, 1],
        (0, 1, 1): b[0, 0] + np.log(1 - a0) + b[1, 1] + np.log(a1) + b[2, 1],
    }
    total = np.logaddexp(*paths.values()) + np.log(1 - a1)
    assert forward_backward(chain, obs).loglik == pytest.approx(total, abs=1e-12)


def test_gamma_rows_sum_to_one(rng):
    chain, obs = random_chain(rng, 6), random_obs(rng, 40)
    gamma = forward_backward(chain, obs).gamma
    assert np.allclose(gamma.sum(axis=1), 1.0, atol=1e-10)


def test_long_sequence_stays_finite(rng):
    chain, obs = random_chain(rng, 10), random_obs(rng, 3000)
    fb = forward_backward(chain, obs)
    assert np.isfinite(fb.loglik)
    _, score = viterbi(chain, obs)
    assert score <= fb.loglik + 1e-6


# --- composition ---

def _modelset(rng, phones, n_states=5, dim=3):
    hmms = {ph: random_chain(rng, n_states, dim) for ph in phones}
    durs = {ph: DurationModel(np.full(n_states, 3.0), np.ones(n_states)) for ph in phones}
    return ModelSet(hmms, durs, {"order": dim // 3 - 1}, spectral_floor=np.full(dim, 1e-6))


def test_compose_counts_and_labels(rng):
    models = _modelset(rng, ["sil", "p", "a", "l"])
    chain = compose_utterance_hmm(["sil", "p", "a", "l", "a", "sil"], models)
    assert chain.n_states == 30
    assert chain.labels[7] == ("p", 2)
    assert chain.emissions[10] is models.hmms["a"].emissions[0]
    a = chain.transition_matrix()
    assert np.allclose(a.sum(axis=1), 1.0)
    assert np.count_nonzero(np.triu(a, 2)) == 0 and np.count_nonzero(np.tril(a[:, :-1], -1)) == 0


def test_compose_single_phone_is_identity(rng):
    models = _modelset(rng, ["a"])
    chain = compose_utterance_hmm(["a"], models)
    assert np.array_equal(chain.self_loop, models.hmms["a"].self_loop)


def test_compose_missing_model(rng):
    with pytest.raises(MissingModelError, match="'x'"):
        compose_utterance_hmm(["x"], _modelset(rng, ["a"]))


# --- re-estimation ---

def _one_state_models(mean, var, weight=0.5, floor=1e-6):
    em = StateEmission(GaussianStream(mean, var),
                       MSDStream(weight, GaussianStream([5.0, 0, 0], [1.0, 1, 1])))
    return ModelSet({"a": LeftRightHMM([0.5], [em])},
                    {"a": DurationModel([1.0], [1.0])},
                    spectral_floor=np.full(len(mean), floor), lf0_floor=1e-4)


def _update(models, obs_list):
    batch = []
    for obs in obs_list:
        chain = compose_utterance_hmm(["a"], models)
        batch.append((chain, obs, forward_backward(chain, obs)))
    return accumulate_and_update(models, batch)[0].hmms["a"]


def test_identical_frames_hit_floor():
    models = _one_state_models([0.0, 0.0], [1.0, 1.0], floor=1e-3)
    obs = ObservationSequence(np.tile([2.0, -1.0], (10, 1)), np.full((10, 3), np.nan))
    hmm = _update(models, [obs])
    em = hmm.emissions[0]
    assert np.allclose(em.spectral.mean, [2.0, -1.0])
    assert np.allclose(em.spectral.var, 1e-3)
    assert em.pitch.voiced_weight == 0.0


def test_two_frame_hand_computed_step():
    models = _one_state_models([0.0], [1.0])
    lf0 = np.array([[5.0, np.nan, np.nan], [np.nan] * 3])
    obs = ObservationSequence(np.array([[1.0], [3.0]]), lf0)
    hmm = _update(models, [obs])
    em = hmm.emissions[0]
    # single state: both frames have occupancy 1
    assert em.spectral.mean[0] == pytest.approx(2.0)
    assert em.spectral.var[0] == pytest.approx(1.0)
    assert em.pitch.voiced_weight == pytest.approx(0.5)
    assert em.pitch.voiced_gauss.mean[0] == pytest.approx(5.0)
    # undefined delta components keep their previous values
    assert np.allclose(em.pitch.voiced_gauss.mean[1:], 0.0)
    # one self transition out of two occupied frames
    assert hmm.self_loop[0] == pytest.approx(0.5)


def test_update_matches_brute_force_weighting(rng):
    models = _modelset(rng, ["a"], n_states=2)
    obs = random_obs(rng, 5)
    _, _, _, gamma, selfs = brute_force(compose_utterance_hmm(["a"], models), obs)
    hmm = _update(models, [obs])
    for j in range(2):
        w = gamma[:, j]
        mean = w @ obs.spectral / w.sum()
        var = w @ (obs.spectral - mean) ** 2 / w.sum()
        assert np.allclose(hmm.emissions[j].spectral.mean, mean, atol=1e-10)
        assert np.allclose(hmm.emissions[j].spectral.var, np.maximum(var, 1e-6), atol=1e-10)
        assert hmm.self_loop[j] == pytest.approx(np.clip(selfs[j] / w.sum(), 1e-6, 1 - 1e-6))


def test_em_steps_do_not_decrease_likelihood(rng):
    models = _modelset(rng, ["a", "b"], n_states=3)
    utterances = [(["a", "b"], random_obs(rng, 15)), (["b", "a", "b"], random_obs(rng, 20))]
    trace = []
    for _ in range(8):
        batch, total = [], 0.0
        for phones, obs in utterances:
            chain = compose_utterance_hmm(phones, models)
            fb = forward_backward(chain, obs)
            batch.append((chain, obs, fb))
            total += fb.loglik
        trace.append(total)
        models, _ = accumulate_and_update(models, batch)
    assert np.all(np.diff(trace) >= -1e-6)


def test_unseen_phone_unchanged(rng):
    models = _modelset(rng, ["a", "b"], n_states=2)
    obs = random_obs(rng, 6)
    chain = compose_utterance_hmm(["a"], models)
    new, unseen = accumulate_and_update(models, [(chain, obs, forward_backward(chain, obs))])
    assert unseen == ["b"]
    assert new.hmms["b"] is models.hmms["b"]


# --- persistence ---

def test_model_file_roundtrip(tmp_path, rng):
    models = _modelset(rng, ["a", "sil"], n_states=3, dim=6)
    models.flags["untrained"] = ["sil"]
    first, second = tmp_path / "m1.json", tmp_path / "m2.json"
    save_models(models, first)
    loaded = load_models(first)
    save_models(loaded, second)
    assert first.read_bytes() == second.read_bytes()
    obs = random_obs(rng, 9, dim=6)
    for ph in ("a", "sil"):
        assert np.array_equal(emission_loglik(loaded.hmms[ph], obs), emission_loglik(models.hmms[ph], obs))
    assert loaded.flags == models.flags


def test_model_file_rejects_other_formats(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"format": "something-else", "version": 1}')
    with pytest.raises(ValueError):
        load_models(path)
