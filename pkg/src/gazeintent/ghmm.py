"""Gaussian hidden Markov models for one-vs-all intention scoring.

Two fully connected 4-state models (one per action hypothesis) with
diagonal Gaussian emissions are trained by Baum-Welch on candidate-
rearranged sequences and score sliding windows with the forward
algorithm. A window's total log-likelihood above 0 counts as a confident
prediction; scores are strongly bimodal in practice, very negative until
the model locks onto a candidate.

Training runs a scaled forward-backward over all sequences at once
(padded + masked), which keeps the Python-level loop at O(max length)
instead of O(total frames).
"""

from __future__ import annotations

import enum
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence as Seq

import numpy as np
from scipy.cluster.vq import kmeans2

from .scene import Action

_LOG_2PI = float(np.log(2.0 * np.pi))


class WindowStatus(enum.Enum):
    OK = "ok"
    WARMING_UP = "warming_up"


@dataclass
class GhmmModel:
    pi: np.ndarray  # (K,)
    trans: np.ndarray  # (K, K), rows sum to 1
    means: np.ndarray  # (K, D)
    variances: np.ndarray  # (K, D) diagonal, floored
    hypothesis: Optional[Action] = None
    var_floor: float | np.ndarray = 1e-3  # scalar or per-dimension
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=float)
        self.trans = np.asarray(self.trans, dtype=float)
        self.means = np.asarray(self.means, dtype=float)
        self.variances = np.asarray(self.variances, dtype=float)
        if np.ndim(self.var_floor):
            self.var_floor = np.asarray(self.var_floor, dtype=float)
        if abs(self.pi.sum() - 1.0) > 1e-9:
            raise ValueError("initial distribution must sum to 1")
        if np.abs(self.trans.sum(axis=1) - 1.0).max() > 1e-9:
            raise ValueError("transition rows must sum to 1")
        if (self.variances < np.asarray(self.var_floor) * (1.0 - 1e-12)).any():
            raise ValueError("variances below the floor")

    @property
    def n_states(self) -> int:
        return len(self.pi)

    @property
    def n_features(self) -> int:
        return self.means.shape[1]


def _log_emissions(model: GhmmModel, obs: np.ndarray) -> np.ndarray:
    """Per-frame per-state diagonal Gaussian log densities, shape (N, K)."""
    inv = 1.0 / model.variances  # (K, D)
    const = -0.5 * (model.n_features * _LOG_2PI + np.log(model.variances).sum(axis=1))
    quad = (
        obs**2 @ inv.T
        - 2.0 * (obs @ (model.means * inv).T)
        + (model.means**2 * inv).sum(axis=1)[None, :]
    )
    return const[None, :] - 0.5 * quad


def _log_pi(model: "GhmmModel") -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(model.pi)


def _log_forward(logpi: np.ndarray, trans: np.ndarray, logb: np.ndarray) -> np.ndarray:
    """Batched log-space forward pass; logb is (B, T, K), returns (B,).

    -inf entries (zero probabilities) flow through exp/log correctly.
    """
    with np.errstate(divide="ignore"):
        alpha = logpi[None, :] + logb[:, 0, :]
        for t in range(1, logb.shape[1]):
            m = alpha.max(axis=1, keepdims=True)
            alpha = m + np.log(np.exp(alpha - m) @ trans) + logb[:, t, :]
        m = alpha.max(axis=1)
        return m + np.log(np.exp(alpha - m[:, None]).sum(axis=1))


def log_likelihood(model: GhmmModel, window: np.ndarray) -> float:
    """Exact total log p(window | model) via the forward algorithm."""
    window = np.atleast_2d(np.asarray(window, dtype=float))
    logb = _log_emissions(model, window)[None, :, :]
    return float(_log_forward(_log_pi(model), model.trans, logb)[0])


def log_likelihood_batch(model: GhmmModel, windows: np.ndarray) -> np.ndarray:
    """Scores for a stack of equal-length windows, shape (B, T, D) -> (B,)."""
    windows = np.asarray(windows, dtype=float)
    B, T, D = windows.shape
    logb = _log_emissions(model, windows.reshape(B * T, D)).reshape(B, T, -1)
    return _log_forward(_log_pi(model), model.trans, logb)


def sliding_window_scores(model: GhmmModel, rows: np.ndarray, length: int) -> np.ndarray:
    """Log-likelihood of every length-L window ending at each frame.

    ``rows`` is (C, T, D) (C independent candidate streams); the result is
    (C, T) with NaN wherever fewer than ``length`` frames precede the end.
    All windows advance in lockstep, so the Python loop is O(length).
    """
    rows = np.asarray(rows, dtype=float)
    C, T, D = rows.shape
    out = np.full((C, T), np.nan)
    n_windows = T - length + 1
    if n_windows <= 0:
        return out
    logb = _log_emissions(model, rows.reshape(C * T, D)).reshape(C, T, -1)
    with np.errstate(divide="ignore"):
        alpha = _log_pi(model)[None, None, :] + logb[:, 0:n_windows, :]
        for l in range(1, length):
            m = alpha.max(axis=2, keepdims=True)
            alpha = m + np.log(np.exp(alpha - m) @ model.trans) + logb[:, l : l + n_windows, :]
        m = alpha.max(axis=2)
        out[:, length - 1 :] = m + np.log(np.exp(alpha - m[:, :, None]).sum(axis=2))
    return out


def sample(model: GhmmModel, n_frames: int, rng: np.random.Generator) -> np.ndarray:
    """Draw one observation sequence from the generative model."""
    states = np.empty(n_frames, dtype=int)
    states[0] = rng.choice(model.n_states, p=model.pi)
    for t in range(1, n_frames):
        states[t] = rng.choice(model.n_states, p=model.trans[states[t - 1]])
    noise = rng.standard_normal((n_frames, model.n_features))
    return model.means[states] + noise * np.sqrt(model.variances[states])


# ---------------------------------------------------------------------------
# Training


def _pack(sequences: Seq[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    lengths = np.array([len(s) for s in sequences])
    B, Tmax, D = len(sequences), int(lengths.max()), sequences[0].shape[1]
    obs = np.zeros((B, Tmax, D))
    for i, s in enumerate(sequences):
        obs[i, : len(s)] = s
    return obs, lengths


def _em_step(obs, lengths, mask, pi, trans, means, variances, var_floor):
    """One E+M pass; returns new parameters and the log-likelihood of the
    *current* parameters on the training data."""
    B, Tmax, D = obs.shape
    K = len(pi)
    flat = obs.reshape(B * Tmax, D)
    model = GhmmModel(pi=pi, trans=trans, means=means, variances=variances, var_floor=var_floor)
    logb = _log_emissions(model, flat).reshape(B, Tmax, K)
    shift = logb.max(axis=2)
    shift[~mask] = 0.0
    b = np.exp(logb - shift[:, :, None])
    b[~mask] = 1.0  # padded frames are neutral for the recursions

    alpha = np.empty((B, Tmax, K))
    c = np.empty((B, Tmax))
    a = pi[None, :] * b[:, 0, :]
    c[:, 0] = a.sum(axis=1)
    alpha[:, 0] = a / c[:, 0, None]
    for t in range(1, Tmax):
        a = (alpha[:, t - 1] @ trans) * b[:, t]
        c[:, t] = a.sum(axis=1)
        alpha[:, t] = a / c[:, t, None]

    beta = np.empty((B, Tmax, K))
    beta[:, Tmax - 1] = 1.0
    for t in range(Tmax - 2, -1, -1):
        beta[:, t] = ((b[:, t + 1] * beta[:, t + 1]) @ trans.T) / c[:, t + 1, None]

    loglik = float((np.log(c) + shift)[mask].sum())

    gamma = alpha * beta
    gamma[~mask] = 0.0
    # xi accumulation: valid transitions are t -> t+1 with t+1 inside the sequence
    post_next = b[:, 1:] * beta[:, 1:] / c[:, 1:, None]
    post_next = post_next * mask[:, 1:, None]
    xi = trans * np.einsum("bti,btk->ik", alpha[:, :-1], post_next)

    new_pi = gamma[:, 0, :].sum(axis=0)
    new_pi /= new_pi.sum()
    row = xi.sum(axis=1, keepdims=True)
    new_trans = np.where(row > 0, xi / np.where(row > 0, row, 1.0), 1.0 / K)

    w = gamma.sum(axis=(0, 1))  # (K,)
    gx = np.einsum("btk,btd->kd", gamma, obs)
    gx2 = np.einsum("btk,btd->kd", gamma, obs**2)
    safe_w = np.where(w > 1e-12, w, 1.0)
    new_means = gx / safe_w[:, None]
    new_vars = gx2 / safe_w[:, None] - new_means**2
    empty = w <= 1e-12
    if empty.any():
        total = float(mask.sum())
        gmean = obs[mask].mean(axis=0) if total else np.zeros(D)
        gvar = obs[mask].var(axis=0) if total else np.ones(D)
        new_means[empty] = gmean
        new_vars[empty] = gvar
    new_vars = np.maximum(new_vars, var_floor)
    return new_pi, new_trans, new_means, new_vars, loglik


def _init_params(obs, lengths, mask, K, var_floor, rng):
    D = obs.shape[2]
    rows = obs[mask]
    n_rows = len(rows)
    if n_rows > 50_000:
        idx = rng.choice(n_rows, size=50_000, replace=False)
        sample = rows[idx]
    else:
        sample = rows
    global_var = np.maximum(sample.var(axis=0), var_floor)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # empty clusters are handled below
            centroids, labels = kmeans2(sample, K, minit="++", iter=20, rng=rng)
    except Exception:
        centroids = sample[rng.choice(len(sample), size=K)]
        labels = rng.integers(0, K, size=len(sample))
    means = np.asarray(centroids, dtype=float)
    variances = np.empty((K, D))
    for k in range(K):
        members = sample[labels == k]
        if len(members) > 1:
            variances[k] = np.maximum(members.var(axis=0), var_floor)
        else:
            variances[k] = global_var
            if len(members) == 0:
                means[k] = sample[rng.integers(0, len(sample))]
    pi = np.full(K, 1.0 / K) + rng.uniform(0.0, 0.01, size=K)
    pi /= pi.sum()
    trans = np.full((K, K), 1.0 / K) + rng.uniform(0.0, 0.01, size=(K, K))
    trans /= trans.sum(axis=1, keepdims=True)
    return pi, trans, means, variances


def fit(
    sequences: Seq[np.ndarray],
    K: int = 4,
    max_iter: int = 50,
    tol: float = 1e-4,
    seed: int = 0,
    n_restarts: int = 5,
    var_floor: float | np.ndarray = 1e-3,
    pi_floor: float = 5e-3,
    trans_floor: float = 1e-4,
    hypothesis: Optional[Action] = None,
    dataset_hash: Optional[str] = None,
) -> GhmmModel:
    """Baum-Welch fit with seeded k-means init; best of ``n_restarts``.

    ``tol`` applies to the per-frame log-likelihood improvement; the
    variance floor may be per-dimension. The returned model's metadata
    carries the per-iteration log-likelihood history of the winning
    restart (non-decreasing by construction). After EM the initial and
    transition probabilities are floored and renormalized: scored windows
    start mid-sequence, and an exact zero learned from sequence starts
    would veto any state path from there.
    """
    sequences = [np.atleast_2d(np.asarray(s, dtype=float)) for s in sequences]
    if not sequences:
        raise ValueError("no training sequences")
    var_floor = np.asarray(var_floor, dtype=float) if np.ndim(var_floor) else float(var_floor)
    obs, lengths = _pack(sequences)
    mask = np.arange(obs.shape[1])[None, :] < lengths[:, None]
    n_frames = int(lengths.sum())
    if n_frames < K:
        raise ValueError(f"need at least {K} observation rows")
    pooled_var = obs[mask].var(axis=0)
    degenerate = bool((pooled_var < np.asarray(var_floor)).all())

    best = None
    restart_lls: list[float] = []
    histories: list[list[float]] = []
    for r in range(n_restarts):
        rng = np.random.default_rng([seed, r])
        pi, trans, means, variances = _init_params(obs, lengths, mask, K, var_floor, rng)
        history: list[float] = []
        for _ in range(max_iter):
            pi, trans, means, variances, ll = _em_step(
                obs, lengths, mask, pi, trans, means, variances, var_floor
            )
            history.append(ll)
            if len(history) > 1 and (history[-1] - history[-2]) < tol * n_frames:
                break
        final_model = GhmmModel(
            pi=pi, trans=trans, means=means, variances=variances,
            hypothesis=hypothesis, var_floor=var_floor,
        )
        final_ll = _total_loglik(final_model, obs, mask)
        history.append(final_ll)
        histories.append(history)
        restart_lls.append(final_ll)
        if best is None or final_ll > best[0]:
            best = (final_ll, final_model, history)

    _, model, history = best
    model.pi = np.maximum(model.pi, pi_floor)
    model.pi /= model.pi.sum()
    model.trans = np.maximum(model.trans, trans_floor)
    model.trans /= model.trans.sum(axis=1, keepdims=True)
    model.metadata = {
        "seed": seed,
        "n_restarts": n_restarts,
        "max_iter": max_iter,
        "tol": tol,
        "n_sequences": len(sequences),
        "n_frames": n_frames,
        "loglik_history": history,
        "restart_logliks": restart_lls,
        "degenerate": degenerate,
        "dataset_hash": dataset_hash,
    }
    return model


def _total_loglik(model: GhmmModel, obs: np.ndarray, mask: np.ndarray) -> float:
    B, Tmax, D = obs.shape
    logb = _log_emissions(model, obs.reshape(B * Tmax, D)).reshape(B, Tmax, -1)
    shift = logb.max(axis=2)
    shift[~mask] = 0.0
    b = np.exp(logb - shift[:, :, None])
    b[~mask] = 1.0
    a = model.pi[None, :] * b[:, 0, :]
    c = np.empty((B, Tmax))
    c[:, 0] = a.sum(axis=1)
    a = a / c[:, 0, None]
    for t in range(1, Tmax):
        raw = (a @ model.trans) * b[:, t]
        c[:, t] = raw.sum(axis=1)
        a = raw / c[:, t, None]
    return float((np.log(c) + shift)[mask].sum())


# ---------------------------------------------------------------------------
# Serialization


MODEL_FORMAT_VERSION = 1


def save_model(model: GhmmModel, path) -> None:
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": "gaussian_hmm",
        "hypothesis": model.hypothesis.value if model.hypothesis else None,
        "pi": model.pi.tolist(),
        "trans": model.trans.tolist(),
        "means": model.means.tolist(),
        "variances": model.variances.tolist(),
        "var_floor": np.asarray(model.var_floor).tolist() if np.ndim(model.var_floor) else model.var_floor,
        "metadata": model.metadata,
    }
    Path(path).write_text(json.dumps(payload, indent=1))


def load_model(path) -> GhmmModel:
    payload = json.loads(Path(path).read_text())
    version = payload.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"model format_version {version!r} not supported")
    return GhmmModel(
        pi=payload["pi"],
        trans=payload["trans"],
        means=payload["means"],
        variances=payload["variances"],
        hypothesis=Action(payload["hypothesis"]) if payload["hypothesis"] else None,
        var_floor=payload["var_floor"],
        metadata=payload.get("metadata", {}),
    )


# ---------------------------------------------------------------------------
# One-vs-all classification


@dataclass
class ClassifierOutput:
    scores: dict[tuple[Action, str], float]
    prediction: Optional[tuple[Action, str]]
    threshold: float
    window_status: WindowStatus

    @property
    def confident(self) -> bool:
        return self.prediction is not None


def classify_scores(
    scores: Mapping[tuple[Action, str], float],
    threshold: float = 0.0,
    window_status: WindowStatus = WindowStatus.OK,
) -> ClassifierOutput:
    """Pick the best-scoring candidate if it clears the threshold."""
    prediction = None
    if window_status is WindowStatus.OK and scores:
        best = max(scores, key=lambda k: scores[k])
        if scores[best] > threshold:
            prediction = best
    return ClassifierOutput(
        scores=dict(scores),
        prediction=prediction,
        threshold=threshold,
        window_status=window_status,
    )


def classify(
    models: Mapping[Action, GhmmModel],
    stream,
    layout,
    t_end: Optional[float] = None,
    candidates: Optional[list[tuple[Action, str]]] = None,
    dt: float = 0.45,
    rate_hz: float = 120.0,
    threshold: float = 0.0,
) -> ClassifierOutput:
    """Assemble the feature window under every candidate and classify.

    ``stream`` is a features.RawFeatureStream; candidates default to the
    12 scene objects of the layout (6 pick + 6 place hypotheses).
    """
    from .features import extract_window

    if candidates is None:
        candidates = layout.candidates()
    t_end = float(stream.times[-1]) if t_end is None else t_end
    windows = {}
    for hyp, cand in candidates:
        rows = stream.assemble(hyp, cand, layout)
        win = extract_window(stream.times, rows, t_end, dt, rate_hz, cand, hyp)
        windows[(hyp, cand)] = None if win is None else win.values
    return classify_windows(models, windows, threshold)


def classify_windows(
    models: Mapping[Action, GhmmModel],
    windows: Mapping[tuple[Action, str], Optional[np.ndarray]],
    threshold: float = 0.0,
) -> ClassifierOutput:
    """Score one assembled window per candidate with the matching model.

    Any missing window means the shared history is too short: the output
    is flagged warming-up, which is distinct from "all scores below
    threshold".
    """
    if any(w is None for w in windows.values()):
        return ClassifierOutput(
            scores={}, prediction=None, threshold=threshold,
            window_status=WindowStatus.WARMING_UP,
        )
    scores = {
        key: log_likelihood(models[key[0]], win) for key, win in windows.items()
    }
    return classify_scores(scores, threshold)
