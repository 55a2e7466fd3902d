"""Independent reference implementations used by the tests."""

import itertools

import numpy as np
from scipy.special import logsumexp

from hmmtts.features import ObservationSequence
from hmmtts.hmm import (GaussianStream, LeftRightHMM, MSDStream, StateEmission, gaussian_logpdf,
                        msd_logpdf)


def random_emission(rng, dim):
    spectral = GaussianStream(rng.normal(0, 1, dim), rng.uniform(0.3, 2.0, dim))
    pitch = MSDStream(rng.uniform(0.1, 0.9),
                      GaussianStream(rng.normal(5, 0.2, 3), rng.uniform(0.05, 0.5, 3)))
    return StateEmission(spectral, pitch)


def random_chain(rng, n_states, dim=3):
    return LeftRightHMM(rng.uniform(0.05, 0.95, n_states),
                        [random_emission(rng, dim) for _ in range(n_states)])


def random_obs(rng, n_frames, dim=3):
    spectral = rng.normal(0, 1.2, (n_frames, dim))
    lf0 = rng.normal(5, 0.4, (n_frames, 3))
    lf0[rng.uniform(size=n_frames) < 0.3] = np.nan      # unvoiced frames
    partial = rng.uniform(size=n_frames) < 0.2
    lf0[partial, 1:] = np.nan                            # undefined deltas
    return ObservationSequence(spectral, lf0)


def emission_table(chain, obs):
    """(T, N) log emissions evaluated one frame and state at a time."""
    out = np.empty((len(obs), chain.n_states))
    for t in range(len(obs)):
        for j, em in enumerate(chain.emissions):
            out[t, j] = gaussian_logpdf(obs.spectral[t], em.spectral) + msd_logpdf(obs.lf0[t], em.pitch)
    return out


def monotone_paths(n_states, n_frames):
    """Every path starting in state 0, ending in state n-1, moving by 0 or +1."""
    for moves in itertools.combinations(range(1, n_frames), n_states - 1):
        path = np.zeros(n_frames, dtype=int)
        for t in moves:
            path[t:] += 1
        yield path


def path_scores(chain, obs):
    """List of ``(path, log joint)`` including the final exit transition."""
    a = chain.transition_matrix()
    with np.errstate(divide="ignore"):
        log_a = np.log(a)
    b = emission_table(chain, obs)
    n = chain.n_states
    out = []
    for path in monotone_paths(n, len(obs)):
        score = b[0, path[0]]
        for t in range(1, len(path)):
            score += log_a[path[t - 1], path[t]] + b[t, path[t]]
        score += log_a[n - 1, n]
        out.append((path, score))
    return out


def brute_force(chain, obs):
    """(best path, best score, total loglik, gamma, expected self transitions)."""
    scored = path_scores(chain, obs)
    scores = np.array([s for _, s in scored])
    total = logsumexp(scores)
    post = np.exp(scores - total)
    gamma = np.zeros((len(obs), chain.n_states))
    selfs = np.zeros(chain.n_states)
    for (path, _), w in zip(scored, post):
        gamma[np.arange(len(path)), path] += w
        for t in range(1, len(path)):
            if path[t] == path[t - 1]:
                selfs[path[t]] += w
    best = int(np.argmax(scores))
    return scored[best][0], scores[best], total, gamma, selfs


def dense_mlpg(means, variances):
    """Normal equations solved densely: ``(W' P W) c = W' P mu`` per dimension."""
    means = np.asarray(means, dtype=float)
    variances = np.asarray(variances, dtype=float)
    _, n_frames, n_dim = means.shape
    windows = explicit_windows(n_frames)
    out = np.empty((n_frames, n_dim))
    for d in range(n_dim):
        w = np.vstack(windows)
        prec = np.concatenate([np.where(np.isinf(variances[k, :, d]), 0.0, 1.0 / variances[k, :, d])
                               for k in range(3)])
        mu = np.concatenate([means[k, :, d] for k in range(3)])
        lhs = w.T @ (prec[:, None] * w)
        out[:, d] = np.linalg.solve(lhs, w.T @ (prec * mu))
    return out


def explicit_windows(n_frames):
    """Window matrices written out from the difference formulas with edge replication."""
    eye = np.eye(n_frames)
    first = np.zeros((n_frames, n_frames))
    second = np.zeros((n_frames, n_frames))
    for t in range(n_frames):
        prev, nxt = max(t - 1, 0), min(t + 1, n_frames - 1)
        first[t, nxt] += 0.5
        first[t, prev] -= 0.5
        second[t, nxt] += 1.0
        second[t, t] -= 2.0
        second[t, prev] += 1.0
    return eye, first, second
