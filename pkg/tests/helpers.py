"""Shared fixture builders for the test suite.

Everything here is deterministic given an explicit seed.  Builders return
plain Python structures (CSV rows, Interview objects, LabeledExample lists)
so individual tests can hand-check small cases against the real modules.
"""

import numpy as np

from pregame.interviews import Interview, tokenize
from pregame.metrics import LAG_ORDER, LabeledExample

# column layout matching the default play-by-play schema:
# game_id, period, kind, actor, secondary_actor, points, shot_x, shot_y,
# attempt_value, home 9..13, away 14..18
N_COLS = 19

HOME = ["H1", "H2", "H3", "H4", "H5"]
AWAY = ["A1", "A2", "A3", "A4", "A5"]


def row(game_id="G1", period=1, kind="shot", actor="H1", secondary="",
        points="", attempt="", x="", y="", home=None, away=None):
    cells = [""] * N_COLS
    cells[0] = str(game_id)
    cells[1] = str(period)
    cells[2] = kind
    cells[3] = actor
    cells[4] = secondary
    cells[5] = str(points)
    cells[6] = str(x)
    cells[7] = str(y)
    cells[8] = str(attempt)
    h = HOME if home is None else home
    a = AWAY if away is None else away
    cells[9:14] = h
    cells[14:19] = a
    return ",".join(cells)


def rows_to_text(rows):
    return "\n".join(rows) + "\n"


def shot(actor, x, y, points, game_id="G1", period=1, attempt="", **kw):
    return row(game_id, period, "shot", actor, points=points,
               attempt=attempt, x=x, y=y, **kw)


def miss(actor, x, y, game_id="G1", period=1, attempt="", **kw):
    return row(game_id, period, "miss", actor, points=0,
               attempt=attempt, x=x, y=y, **kw)


def make_interview(player, game_id, answers, interview_id=None,
                   questions=None):
    """Minimal valid interview from a list of answer strings."""
    if questions is None:
        questions = ["How do you feel today?"] * len(answers)
    sentences, roles = [], []
    for q, a in zip(questions, answers):
        for s in tokenize(q):
            sentences.append(s)
            roles.append("q")
        for s in tokenize(a):
            sentences.append(s)
            roles.append("a")
    iv = Interview(
        interview_id=interview_id or f"{player}@{game_id}",
        player=player,
        game_id=game_id,
        qa_pairs=list(zip(questions, answers)),
        sentences=sentences,
        roles=roles,
    )
    iv.validate()
    return iv


def make_example(player, unit, metric, label, lags=None, interview_id=None,
                 mode=None):
    """LabeledExample with the mode inferred from the populated fields."""
    if mode is None:
        if lags is not None and interview_id is not None:
            mode = "combined"
        elif lags is not None:
            mode = "metric"
        else:
            mode = "text"
    return LabeledExample(
        player=player,
        unit=tuple(unit),
        metric=metric,
        label=int(label),
        interview_id=interview_id,
        lags=None if lags is None else tuple(lags),
        mode=mode,
    )


def lag_vector(metric, same_metric_lags):
    """Flat 21-lag vector with the given same-metric lags, zeros elsewhere."""
    lut = {(metric, j): int(v) for j, v in enumerate(same_metric_lags, start=1)}
    return tuple(lut.get(key, 0) for key in LAG_ORDER)


def ar_examples(labels, metric="PTS", player="P1"):
    """Lagged examples from a binary label series (targets start at t=3)."""
    out = []
    for t in range(3, len(labels)):
        lags = lag_vector(metric, (labels[t - 1], labels[t - 2], labels[t - 3]))
        out.append(make_example(player, (f"G{t}",), metric, labels[t],
                                lags=lags))
    return out


def random_grouped_examples(rng, n_groups=40, metric="PTS",
                            pos_rate=0.5, max_per_group=3):
    """Examples whose group ids repeat, for split/grouping tests.

    Every example in a group shares one interview id, so a grouped split
    must keep the whole group on one side.
    """
    examples = []
    for g in range(n_groups):
        player = f"P{g % 7}"
        label = int(rng.random() < pos_rate)
        size = int(rng.integers(1, max_per_group + 1))
        iid = f"{player}@G{g}"
        for j in range(size):
            examples.append(make_example(
                player, (f"G{g}", j + 1), metric, label, interview_id=iid))
    return examples


def planted_text_dataset(rng, n=240, bayes=0.8, vocab_noise=30):
    """Interview/label pairs where two marker words carry the signal.

    Each document gets one marker: the label-matched marker with
    probability ``bayes``, the opposite one otherwise.  The best possible
    classifier therefore has accuracy ``bayes``.  Noise words are drawn
    uniformly and carry no signal.
    """
    docs = []
    examples = []
    noise = [f"filler{i}" for i in range(vocab_noise)]
    for i in range(n):
        target = int(rng.random() < 0.5)
        marker_label = target if rng.random() < bayes else 1 - target
        marker = "upbeat" if marker_label == 1 else "flat"
        words = [marker] + [noise[int(rng.integers(0, vocab_noise))]
                            for _ in range(12)]
        rng.shuffle(words)
        player = f"P{i % 6}"
        game = f"G{i}"
        iv = make_interview(player, game, [" ".join(words) + "."])
        docs.append(iv)
        examples.append(make_example(
            player, (game,), "PTS", target, interview_id=iv.interview_id))
    return docs, examples


def topic_corpus(rng, k=5, n_docs=500, doc_len=100, words_per_topic=50):
    """Disjoint-support corpus: topic t owns words t*W .. t*W+W-1.

    Each document draws from a single topic's word block, so the
    recovered topics should reproduce the blocks.
    """
    docs = []
    truth = []
    for i in range(n_docs):
        t = int(rng.integers(0, k))
        base = t * words_per_topic
        words = [f"w{base + int(rng.integers(0, words_per_topic)):03d}"
                 for _ in range(doc_len)]
        docs.append(words)
        truth.append(t)
    return docs, truth


PIPELINE_PLAYERS = ["P1", "P2", "P3", "P4"]

_ANSWER_POOLS = [
    ["defense", "rotations", "stops", "rebounding", "closeouts", "effort"],
    ["shooting", "rhythm", "spacing", "release", "catch", "screens"],
    ["pace", "transition", "outlet", "lanes", "running", "pressure"],
    ["film", "scouting", "matchups", "coverage", "reads", "calls"],
]


def _pipeline_answer(rng):
    pool = _ANSWER_POOLS[int(rng.integers(0, len(_ANSWER_POOLS)))]
    words = [pool[int(rng.integers(0, len(pool)))] for _ in range(8)]
    return ("We worked on " + " ".join(words[:4]) + ". "
            "I feel good about our " + " ".join(words[4:]) + ".")


def write_pipeline_dataset(root, n_games=15, seed=8):
    """Synthetic season under ``root``: events.csv plus manifest.jsonl.

    Per-period box lines are drawn at random so every metric fluctuates
    around its per-player mean; each interviewed player gets one two-answer
    transcript per game.
    """
    import json

    rng = np.random.default_rng(seed)
    home = PIPELINE_PLAYERS + ["F5"]
    away = ["Q1", "Q2", "Q3", "Q4", "Q5"]
    lines = []
    for g in range(1, n_games + 1):
        gid = f"G{g:02d}"
        for period in range(1, 5):
            for p in PIPELINE_PLAYERS:
                kw = dict(game_id=gid, period=period, home=home, away=away)
                for _ in range(int(rng.integers(0, 3))):
                    lines.append(shot(p, float(rng.integers(3, 21)), 0.0,
                                      2, **kw))
                for _ in range(int(rng.integers(0, 3))):
                    lines.append(miss(p, float(rng.integers(3, 21)), 0.0,
                                      **kw))
                for _ in range(int(rng.integers(0, 2))):
                    lines.append(shot(p, float(rng.integers(24, 28)), 0.0,
                                      3, **kw))
                for _ in range(int(rng.integers(0, 2))):
                    lines.append(miss(p, float(rng.integers(24, 28)), 0.0,
                                      **kw))
                if rng.random() < 0.5:
                    lines.append(row(gid, period, "ft_made", p, points=1,
                                     home=home, away=away))
                for _ in range(int(rng.integers(0, 3))):
                    lines.append(row(gid, period, "assist", p, home=home,
                                     away=away))
                for _ in range(int(rng.integers(0, 2))):
                    lines.append(row(gid, period, "turnover", p, home=home,
                                     away=away))
                for _ in range(int(rng.integers(0, 2))):
                    lines.append(row(gid, period, "foul", p, home=home,
                                     away=away))
    (root / "events.csv").write_text(rows_to_text(lines))

    manifest = []
    for g in range(1, n_games + 1):
        gid = f"G{g:02d}"
        for p in PIPELINE_PLAYERS:
            text = (f"Q: How was practice?\n{p}: {_pipeline_answer(rng)}\n"
                    f"Q: What is the focus tonight?\n"
                    f"{p}: {_pipeline_answer(rng)}\n")
            manifest.append(json.dumps(
                {"player": p, "game_id": gid, "text": text}))
    (root / "manifest.jsonl").write_text("\n".join(manifest) + "\n")
    return root / "events.csv", root / "manifest.jsonl"
