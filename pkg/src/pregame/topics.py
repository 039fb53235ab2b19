"""Topic modeling over interview documents and confidence interpretation.

LDA is fit by collapsed Gibbs sampling (dense count tables, numba-compiled
inner loop). After burn-in, the sampler averages posterior estimates of the
topic-word and document-topic distributions every few sweeps. Unseen
documents are folded in against the frozen topic-word table. The number of
topics is chosen by mean NPMI coherence of the top words per topic.

Interpretation starts from prediction records: each record's document gets
a topic mixture, records vote +1/-1 by thresholded confidence, and the
topic with the largest signed mixture mass is the positive-class topic
(symmetrically for the negative class). Binned confidence curves and
confidence/topic correlation matrices complete the picture.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .storage import DataError, read_store, sha256_hex, write_store


@njit(cache=True)
def _gibbs_train(words, doc_of, n_docs, n_vocab, k, alpha, beta,
                 iters, burn_in, sample_every, seed, check):
    n = words.shape[0]
    nwk = np.zeros((k, n_vocab), dtype=np.int64)
    nk = np.zeros(k, dtype=np.int64)
    ndk = np.zeros((n_docs, k), dtype=np.int64)
    nd = np.zeros(n_docs, dtype=np.int64)
    z = np.empty(n, dtype=np.int64)

    np.random.seed(seed)
    for i in range(n):
        t = np.random.randint(0, k)
        z[i] = t
        nwk[t, words[i]] += 1
        nk[t] += 1
        ndk[doc_of[i], t] += 1
        nd[doc_of[i]] += 1

    phi_acc = np.zeros((k, n_vocab))
    theta_acc = np.zeros((n_docs, k))
    p = np.empty(k)
    n_samples = 0
    violations = 0

    for it in range(1, iters + 1):
        for i in range(n):
            w = words[i]
            d = doc_of[i]
            t = z[i]
            nwk[t, w] -= 1
            nk[t] -= 1
            ndk[d, t] -= 1
            total = 0.0
            for kk in range(k):
                pk = (nwk[kk, w] + beta) / (nk[kk] + beta * n_vocab) * (ndk[d, kk] + alpha)
                p[kk] = pk
                total += pk
            u = np.random.random() * total
            acc = 0.0
            t_new = k - 1
            for kk in range(k):
                acc += p[kk]
                if u < acc:
                    t_new = kk
                    break
            z[i] = t_new
            nwk[t_new, w] += 1
            nk[t_new] += 1
            ndk[d, t_new] += 1

        if check:
            s = 0
            for kk in range(k):
                s += nk[kk]
            if s != n:
                violations += 1
            s = 0
            for d in range(n_docs):
                for kk in range(k):
                    s += ndk[d, kk]
            if s != n:
                violations += 1

        if it > burn_in and (it - burn_in) % sample_every == 0:
            for kk in range(k):
                denom = nk[kk] + beta * n_vocab
                for w in range(n_vocab):
                    phi_acc[kk, w] += (nwk[kk, w] + beta) / denom
            for d in range(n_docs):
                denom = nd[d] + alpha * k
                for kk in range(k):
                    theta_acc[d, kk] += (ndk[d, kk] + alpha) / denom
            n_samples += 1

    if n_samples == 0:
        for kk in range(k):
            denom = nk[kk] + beta * n_vocab
            for w in range(n_vocab):
                phi_acc[kk, w] += (nwk[kk, w] + beta) / denom
        for d in range(n_docs):
            denom = nd[d] + alpha * k
            for kk in range(k):
                theta_acc[d, kk] += (ndk[d, kk] + alpha) / denom
        n_samples = 1

    return phi_acc, theta_acc, n_samples, violations


@njit(cache=True)
def _gibbs_fold_in(words, doc_ptr, phi, alpha, iters, seed):
    k = phi.shape[0]
    n_docs = doc_ptr.shape[0] - 1
    theta = np.zeros((n_docs, k))
    p = np.empty(k)
    np.random.seed(seed)
    for d in range(n_docs):
        start = doc_ptr[d]
        end = doc_ptr[d + 1]
        n = end - start
        ndk = np.zeros(k, dtype=np.int64)
        zd = np.empty(n, dtype=np.int64)
        for i in range(n):
            t = np.random.randint(0, k)
            zd[i] = t
            ndk[t] += 1
        acc = np.zeros(k)
        n_acc = 0
        for it in range(1, iters + 1):
            for i in range(n):
                w = words[start + i]
                t = zd[i]
                ndk[t] -= 1
                total = 0.0
                for kk in range(k):
                    pk = phi[kk, w] * (ndk[kk] + alpha)
                    p[kk] = pk
                    total += pk
                u = np.random.random() * total
                acc_p = 0.0
                t_new = k - 1
                for kk in range(k):
                    acc_p += p[kk]
                    if u < acc_p:
                        t_new = kk
                        break
                zd[i] = t_new
                ndk[t_new] += 1
            if it > iters // 2:
                denom = n + alpha * k
                for kk in range(k):
                    acc[kk] += (ndk[kk] + alpha) / denom
                n_acc += 1
        if n_acc == 0:
            denom = n + alpha * k
            for kk in range(k):
                acc[kk] = (ndk[kk] + alpha) / denom
            n_acc = 1
        for kk in range(k):
            theta[d, kk] = acc[kk] / n_acc
    return theta


@dataclass
class TopicModel:
    k: int
    alpha: float
    beta: float
    iters: int
    burn_in: int
    sample_every: int
    seed: int
    vocab: list
    doc_ids: list
    phi: np.ndarray  # (k, |vocab|), rows sum to 1
    theta: np.ndarray  # (n_docs, k), rows sum to 1
    n_samples: int
    conservation_violations: int

    @property
    def vocab_hash(self) -> str:
        return sha256_hex("\n".join(self.vocab))

    def theta_by_doc(self) -> dict:
        return {d: self.theta[i] for i, d in enumerate(self.doc_ids)}


def _encode(docs, vocab_index):
    words = []
    doc_of = []
    doc_ptr = [0]
    for d, doc in enumerate(docs):
        for t in doc:
            j = vocab_index.get(t)
            if j is not None:
                words.append(j)
                doc_of.append(d)
        doc_ptr.append(len(words))
    return (np.asarray(words, dtype=np.int64),
            np.asarray(doc_of, dtype=np.int64),
            np.asarray(doc_ptr, dtype=np.int64))


def train_lda(docs: list, k: int, alpha: float | None = None, beta: float = 0.01,
              iters: int = 1000, burn_in: int = 200, sample_every: int = 10,
              seed: int = 0, doc_ids: list | None = None,
              stopwords=frozenset(), check_conservation: bool = False) -> TopicModel:
    """Fit LDA on token-list documents.

    ``alpha`` defaults to 50/k. Samples are drawn every ``sample_every``
    sweeps after ``burn_in`` and averaged; if no sample window fits, the
    final state is the single sample.
    """
    if k < 1:
        raise ValueError(f"k must be positive: {k}")
    if not docs:
        raise ValueError("empty corpus")
    if doc_ids is None:
        doc_ids = [str(i) for i in range(len(docs))]
    if len(doc_ids) != len(docs):
        raise ValueError("doc_ids and docs differ in length")
    if len(set(doc_ids)) != len(doc_ids):
        raise ValueError("doc_ids contain duplicates")
    if alpha is None:
        alpha = 50.0 / k
    vocab = sorted({t for doc in docs for t in doc} - set(stopwords))
    if not vocab:
        raise ValueError("empty vocabulary after stopword removal")
    vocab_index = {t: j for j, t in enumerate(vocab)}
    words, doc_of, _ = _encode(docs, vocab_index)

    phi_acc, theta_acc, n_samples, violations = _gibbs_train(
        words, doc_of, len(docs), len(vocab), k, float(alpha), float(beta),
        int(iters), int(burn_in), int(sample_every), int(seed) & 0x7FFFFFFF,
        check_conservation,
    )
    return TopicModel(
        k=k, alpha=float(alpha), beta=float(beta), iters=int(iters),
        burn_in=int(burn_in), sample_every=int(sample_every), seed=int(seed),
        vocab=vocab, doc_ids=list(doc_ids),
        phi=phi_acc / n_samples, theta=theta_acc / n_samples,
        n_samples=int(n_samples), conservation_violations=int(violations),
    )


def infer_theta(model: TopicModel, docs: list, iters: int = 50, seed: int = 0) -> np.ndarray:
    """Fold new documents into a trained model; tokens outside the model
    vocabulary are skipped. A document with no known tokens gets the
    uniform prior mixture."""
    vocab_index = {t: j for j, t in enumerate(model.vocab)}
    words, _, doc_ptr = _encode(docs, vocab_index)
    return _gibbs_fold_in(words, doc_ptr, model.phi, model.alpha,
                          int(iters), int(seed) & 0x7FFFFFFF)


def top_words(model: TopicModel, topic: int, n: int = 10) -> list:
    if not 0 <= topic < model.k:
        raise ValueError(f"topic {topic} out of range")
    if n > len(model.vocab):
        raise ValueError(f"asked for {n} words from a {len(model.vocab)}-term vocabulary")
    order = np.argsort(-model.phi[topic], kind="stable")
    return [model.vocab[i] for i in order[:n]]


def npmi(d_i: int, d_j: int, d_ij: int, n_docs: int) -> float:
    """Smoothed normalized pointwise mutual information from document
    counts. Words that always co-occur score exactly 1; independence
    scores 0; never co-occurring frequent words score below 0."""
    p_ij = (d_ij + 1.0) / (n_docs + 1.0)
    p_i = (d_i + 1.0) / (n_docs + 1.0)
    p_j = (d_j + 1.0) / (n_docs + 1.0)
    if d_ij == d_i == d_j:
        return 1.0
    return math.log(p_ij / (p_i * p_j)) / (-math.log(p_ij))


@dataclass
class CoherenceResult:
    per_topic: list
    mean: float


def coherence(model: TopicModel, docs: list, top_n: int = 10) -> CoherenceResult:
    """Mean NPMI over the top-word pairs of each topic, on ``docs``."""
    tops = [top_words(model, z, top_n) for z in range(model.k)]
    needed = {w for ws in tops for w in ws}
    doc_sets = [set(doc) & needed for doc in docs]
    n_docs = len(docs)
    d_single: dict = {w: 0 for w in needed}
    for s in doc_sets:
        for w in s:
            d_single[w] += 1
    per_topic = []
    for ws in tops:
        scores = []
        for a in range(len(ws)):
            for b in range(a + 1, len(ws)):
                wi, wj = ws[a], ws[b]
                d_ij = sum(1 for s in doc_sets if wi in s and wj in s)
                scores.append(npmi(d_single[wi], d_single[wj], d_ij, n_docs))
        per_topic.append(float(np.mean(scores)) if scores else 0.0)
    return CoherenceResult(per_topic=per_topic, mean=float(np.mean(per_topic)))


@dataclass
class KSelection:
    k_star: int
    scores: dict  # k -> mean coherence


def select_k(docs: list, grid, seed: int = 0, top_n: int = 10,
             **train_kwargs) -> KSelection:
    """Train one model per candidate k (same corpus, same seed) and keep
    the k with the best mean coherence; ties go to the smaller k."""
    grid = sorted(set(int(k) for k in grid))
    if not grid:
        raise ValueError("empty k grid")
    scores = {}
    best_k = None
    for k in grid:
        model = train_lda(docs, k, seed=seed, **train_kwargs)
        scores[k] = coherence(model, docs, top_n=top_n).mean
        if best_k is None or scores[k] > scores[best_k]:
            best_k = k
    return KSelection(k_star=best_k, scores=scores)


@dataclass
class ClassTopicResult:
    metric: str
    positive_topic: int
    negative_topic: int
    positive_score: float
    negative_score: float
    positive_words: list
    negative_words: list


def _theta_row(theta_by_doc: dict, record) -> np.ndarray:
    row = theta_by_doc.get(record.interview_id)
    if row is None:
        raise DataError(f"no topic mixture for interview {record.interview_id!r}")
    return row


def class_topics(records: list, theta_by_doc: dict, model: TopicModel,
                 top_n: int = 10) -> ClassTopicResult:
    """Signed-vote class topics for one metric's predictions.

    Every record votes its document's topic mixture, weighted +1 when its
    confidence crosses 0.5 and -1 otherwise. The positive-class topic
    maximizes the signed sum; the negative-class topic maximizes its
    negation. Exact ties resolve to the lowest topic index.
    """
    if not records:
        raise ValueError("no prediction records")
    metrics = {r.metric for r in records}
    if len(metrics) > 1:
        raise ValueError(f"records mix metrics: {sorted(metrics)}")
    s = np.zeros(model.k)
    for r in records:
        sign = 1.0 if r.predicted == 1 else -1.0
        s += sign * _theta_row(theta_by_doc, r)
    pos = int(np.argmax(s))
    neg = int(np.argmax(-s))
    return ClassTopicResult(
        metric=records[0].metric,
        positive_topic=pos, negative_topic=neg,
        positive_score=float(s[pos]), negative_score=float(-s[neg]),
        positive_words=top_words(model, pos, top_n),
        negative_words=top_words(model, neg, top_n),
    )


@dataclass
class BinnedCurve:
    topic: int
    edges: list  # upper edge of each bin: 0.1, 0.2, ..., 1.0
    means: list  # mean confidence per bin, None where empty
    counts: list


def _bin_index(value: float) -> int:
    """Bins (j-0.1, j]; the boundary value lands in the bin it closes."""
    idx = math.ceil(value * 10.0 - 1e-9)
    return min(10, max(1, idx)) - 1


def confidence_curve(records: list, theta_by_doc: dict, topic: int) -> BinnedCurve:
    """Mean prediction confidence as a function of binned topic mass."""
    if not records:
        raise ValueError("no prediction records")
    sums = [0.0] * 10
    counts = [0] * 10
    for r in records:
        row = _theta_row(theta_by_doc, r)
        if not 0 <= topic < row.shape[0]:
            raise ValueError(f"topic {topic} out of range")
        b = _bin_index(float(row[topic]))
        sums[b] += r.confidence
        counts[b] += 1
    means = [sums[i] / counts[i] if counts[i] else None for i in range(10)]
    edges = [round((i + 1) / 10.0, 1) for i in range(10)]
    return BinnedCurve(topic=topic, edges=edges, means=means, counts=counts)


def _pearson(x: np.ndarray, y: np.ndarray):
    xc = x - x.mean()
    yc = y - y.mean()
    sx = math.sqrt(float(xc @ xc))
    sy = math.sqrt(float(yc @ yc))
    if sx == 0.0 or sy == 0.0:
        return None
    return float((xc @ yc) / (sx * sy))


def _average_ranks(v: np.ndarray) -> np.ndarray:
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.shape[0])
    i = 0
    n = v.shape[0]
    while i < n:
        j = i
        while j + 1 < n and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


@dataclass
class CorrelationResult:
    method: str
    metrics: list
    matrix: list  # per metric: list of K entries, None where undefined


def correlations(records_by_metric: dict, theta_by_doc: dict,
                 method: str = "pearson") -> CorrelationResult:
    """Correlation between confidence and each topic's mass, per metric."""
    if method not in ("pearson", "spearman"):
        raise ValueError(f"unknown method: {method!r}")
    metrics = sorted(records_by_metric)
    matrix = []
    for metric in metrics:
        records = records_by_metric[metric]
        if len(records) < 3:
            raise ValueError(f"metric {metric}: need at least 3 predictions, "
                             f"got {len(records)}")
        conf = np.array([r.confidence for r in records])
        thetas = np.vstack([_theta_row(theta_by_doc, r) for r in records])
        row = []
        for z in range(thetas.shape[1]):
            x, y = conf, thetas[:, z]
            if method == "spearman":
                x, y = _average_ranks(x), _average_ranks(y)
            row.append(_pearson(x, y))
        matrix.append(row)
    return CorrelationResult(method=method, metrics=metrics, matrix=matrix)


def save_topic_model(path, model: TopicModel, config_hash: str = "") -> str:
    header = {
        "store": "topic_model", "config_hash": config_hash,
        "k": model.k, "alpha": model.alpha, "beta": model.beta,
        "iters": model.iters, "burn_in": model.burn_in,
        "sample_every": model.sample_every, "seed": model.seed,
        "n_samples": model.n_samples,
        "conservation_violations": model.conservation_violations,
        "vocab_hash": model.vocab_hash,
    }

    def rows():
        yield {"row": "vocab", "terms": model.vocab}
        for z in range(model.k):
            yield {"row": "phi", "topic": z, "values": model.phi[z].tolist()}
        for i, d in enumerate(model.doc_ids):
            yield {"row": "theta", "doc_id": d, "values": model.theta[i].tolist()}

    return write_store(path, header, rows())


def load_topic_model(path) -> TopicModel:
    header, records = read_store(path, expect="topic_model")
    vocab = None
    phi_rows: dict = {}
    doc_ids = []
    theta_rows = []
    for rec in records:
        if rec["row"] == "vocab":
            vocab = rec["terms"]
        elif rec["row"] == "phi":
            phi_rows[rec["topic"]] = rec["values"]
        elif rec["row"] == "theta":
            doc_ids.append(rec["doc_id"])
            theta_rows.append(rec["values"])
        else:
            raise DataError(f"{path}: unknown row kind {rec['row']!r}")
    k = header["k"]
    if vocab is None or sorted(phi_rows) != list(range(k)):
        raise DataError(f"{path}: incomplete topic model")
    model = TopicModel(
        k=k, alpha=header["alpha"], beta=header["beta"], iters=header["iters"],
        burn_in=header["burn_in"], sample_every=header["sample_every"],
        seed=header["seed"], vocab=vocab, doc_ids=doc_ids,
        phi=np.array([phi_rows[z] for z in range(k)]),
        theta=np.array(theta_rows) if theta_rows else np.zeros((0, k)),
        n_samples=header["n_samples"],
        conservation_violations=header["conservation_violations"],
    )
    if model.vocab_hash != header["vocab_hash"]:
        raise DataError(f"{path}: vocabulary hash mismatch")
    return model
