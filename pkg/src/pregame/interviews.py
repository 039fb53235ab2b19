"""Interview transcript ingestion.

A manifest (JSONL, one object per line, chronological) names each transcript
and links it to a player and a game:

    {"player": "p7", "game_id": "G12", "text": "Q: ...\\nP SMITH: ..."}
    {"player": "p7", "game_id": "G13", "file": "transcripts/p7_g13.txt"}

``file`` paths are resolved relative to the manifest. Transcripts are plain
text dialogue: lines starting with the question prefix (default ``Q:``) open
a question, lines matching the answer pattern (an upper-case speaker label
ending in a colon) open an answer, and unmarked lines continue the open
segment. Questions that never get an answer and answers with no preceding
question are dropped and counted. A transcript with no recognizable markers
at all is an error, not an empty interview.

Text is split into sentences on ``.!?`` runs and lowercased into tokens of
letters and digits with internal apostrophes or hyphens. Each sentence keeps
its role (question or answer) so downstream consumers can exclude the
interviewer's side.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .storage import DataError, read_store, write_store

DEFAULT_QUESTION_PREFIX = "Q:"
DEFAULT_ANSWER_PATTERN = r"^[A-Z][A-Z0-9 .'’-]{0,40}:"

_SENTENCE_SPLIT = re.compile(r"[.!?]+(?:\s+|$)")
_TOKEN = re.compile(r"[a-z0-9]+(?:['’-][a-z0-9]+)*")


def tokenize(text: str) -> list[list[str]]:
    """Sentences of lowercase tokens; empty sentences are dropped."""
    sentences = []
    for raw in _SENTENCE_SPLIT.split(text):
        tokens = _TOKEN.findall(raw.lower())
        if tokens:
            sentences.append(tokens)
    return sentences


@dataclass
class Interview:
    interview_id: str
    player: str
    game_id: str
    qa_pairs: list  # [(question text, answer text), ...]
    sentences: list  # token lists, transcript order
    roles: list  # "q" or "a", parallel to sentences

    @property
    def token_count(self) -> int:
        return sum(len(s) for s in self.sentences)

    def validate(self) -> None:
        if not self.qa_pairs:
            raise DataError(f"interview {self.interview_id!r} has no question-answer pairs")
        if any(not s for s in self.sentences):
            raise DataError(f"interview {self.interview_id!r} contains an empty sentence")
        if len(self.sentences) != len(self.roles):
            raise DataError(f"interview {self.interview_id!r}: sentence/role length mismatch")

    def doc_sentences(self, include_questions: bool = True) -> list[list[str]]:
        if include_questions:
            return self.sentences
        return [s for s, r in zip(self.sentences, self.roles) if r == "a"]

    def flat_tokens(self, include_questions: bool = True) -> list[str]:
        return [t for s in self.doc_sentences(include_questions) for t in s]


def parse_transcript(text: str,
                     question_prefix: str = DEFAULT_QUESTION_PREFIX,
                     answer_pattern: str = DEFAULT_ANSWER_PATTERN) -> tuple[list, dict]:
    """Pair questions with their answers.

    Returns ``(qa_pairs, counters)`` where counters track dropped
    unanswered questions and orphan answers.
    """
    answer_re = re.compile(answer_pattern)
    segments: list[tuple[str, str]] = []  # (role, text)
    role = None
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith(question_prefix):
            segments.append(("q", stripped[len(question_prefix):].strip()))
            role = "q"
        elif answer_re.match(stripped):
            body = stripped.split(":", 1)[1].strip()
            segments.append(("a", body))
            role = "a"
        elif role is not None:
            prev_role, prev_text = segments[-1]
            segments[-1] = (prev_role, (prev_text + " " + stripped).strip())
        else:
            raise DataError("transcript has no dialogue markers before content")
    if not segments:
        raise DataError("empty transcript")

    pairs = []
    counters = {"unanswered_questions": 0, "orphan_answers": 0}
    pending_q = None
    pending_a: list[str] = []

    def flush():
        nonlocal pending_q, pending_a
        if pending_q is not None:
            if pending_a:
                pairs.append((pending_q, " ".join(pending_a)))
            else:
                counters["unanswered_questions"] += 1
        pending_q, pending_a = None, []

    for seg_role, seg_text in segments:
        if seg_role == "q":
            flush()
            pending_q = seg_text
        else:
            if pending_q is None:
                counters["orphan_answers"] += 1
            else:
                pending_a.append(seg_text)
    flush()
    return pairs, counters


def _build_interview(interview_id: str, player: str, game_id: str,
                     qa_pairs: Sequence) -> Interview:
    sentences: list = []
    roles: list = []
    for q, a in qa_pairs:
        for s in tokenize(q):
            sentences.append(s)
            roles.append("q")
        for s in tokenize(a):
            sentences.append(s)
            roles.append("a")
    iv = Interview(interview_id=interview_id, player=player, game_id=game_id,
                   qa_pairs=list(qa_pairs), sentences=sentences, roles=roles)
    iv.validate()
    return iv


def merge_two(a: Interview, b: Interview) -> Interview:
    """Concatenate two sessions held before the same game.

    Counts are additive and concatenation is associative. Operands must
    agree on player and game and each satisfy the interview invariants.
    """
    if (a.player, a.game_id) != (b.player, b.game_id):
        raise DataError(
            f"cannot merge interviews of ({a.player}, {a.game_id}) "
            f"and ({b.player}, {b.game_id})")
    a.validate()
    b.validate()
    return Interview(
        interview_id=a.interview_id,
        player=a.player,
        game_id=a.game_id,
        qa_pairs=a.qa_pairs + b.qa_pairs,
        sentences=a.sentences + b.sentences,
        roles=a.roles + b.roles,
    )


def merge_consecutive(interviews: Sequence[Interview]) -> tuple[list, int]:
    """Fold adjacent interviews of the same (player, game) into one document.

    Returns the merged list and how many records were folded away.
    """
    merged: list[Interview] = []
    n_merged = 0
    for iv in interviews:
        if merged and (merged[-1].player, merged[-1].game_id) == (iv.player, iv.game_id):
            merged[-1] = merge_two(merged[-1], iv)
            n_merged += 1
        else:
            merged.append(iv)
    return merged, n_merged


@dataclass
class CorpusStats:
    per_player: dict  # player -> n_interviews / avg_qa_pairs / avg_sentences / avg_words
    n_interviews: int
    n_players: int
    total_qa_pairs: int
    total_sentences: int
    total_words: int


def corpus_stats(interviews: Sequence[Interview]) -> CorpusStats:
    """Per-player and global interview counts and averages."""
    if not interviews:
        raise ValueError("corpus statistics need at least one interview")
    by_player: dict[str, list[Interview]] = {}
    for iv in interviews:
        by_player.setdefault(iv.player, []).append(iv)
    per_player = {}
    for player in sorted(by_player):
        ivs = by_player[player]
        n = len(ivs)
        per_player[player] = {
            "n_interviews": n,
            "avg_qa_pairs": sum(len(iv.qa_pairs) for iv in ivs) / n,
            "avg_sentences": sum(len(iv.sentences) for iv in ivs) / n,
            "avg_words": sum(iv.token_count for iv in ivs) / n,
        }
    return CorpusStats(
        per_player=per_player,
        n_interviews=len(interviews),
        n_players=len(by_player),
        total_qa_pairs=sum(len(iv.qa_pairs) for iv in interviews),
        total_sentences=sum(len(iv.sentences) for iv in interviews),
        total_words=sum(iv.token_count for iv in interviews),
    )


def ingest_interviews(manifest_path: str | Path,
                      question_prefix: str = DEFAULT_QUESTION_PREFIX,
                      answer_pattern: str = DEFAULT_ANSWER_PATTERN) -> tuple[list, dict]:
    """Read a manifest, parse every transcript, merge per (player, game)."""
    manifest_path = Path(manifest_path)
    counters = {
        "manifest_records": 0,
        "merged_records": 0,
        "unanswered_questions": 0,
        "orphan_answers": 0,
    }
    raw: list[Interview] = []
    with open(manifest_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            counters["manifest_records"] += 1
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{manifest_path}:{lineno}: bad manifest record: {exc}") from exc
            for key in ("player", "game_id"):
                if not rec.get(key):
                    raise DataError(f"{manifest_path}:{lineno}: missing {key}")
            if "text" in rec:
                text = rec["text"]
            elif "file" in rec:
                tpath = manifest_path.parent / rec["file"]
                try:
                    text = tpath.read_text(encoding="utf-8")
                except OSError as exc:
                    raise DataError(f"{manifest_path}:{lineno}: cannot read {tpath}: {exc}") from exc
            else:
                raise DataError(f"{manifest_path}:{lineno}: record has neither text nor file")
            try:
                pairs, tc = parse_transcript(text, question_prefix, answer_pattern)
            except DataError as exc:
                raise DataError(f"{manifest_path}:{lineno}: {exc}") from exc
            counters["unanswered_questions"] += tc["unanswered_questions"]
            counters["orphan_answers"] += tc["orphan_answers"]
            interview_id = rec.get("interview_id") or f"{rec['player']}@{rec['game_id']}"
            raw.append(_build_interview(interview_id, rec["player"], rec["game_id"], pairs))

    merged, n_merged = merge_consecutive(raw)
    counters["merged_records"] = n_merged
    counters["interviews"] = len(merged)
    return merged, counters


def write_interviews(path, interviews: Sequence[Interview], counters: dict,
                     config_hash: str = "") -> str:
    header = {"store": "interviews", "config_hash": config_hash, "counters": counters}
    records = (
        {"interview_id": iv.interview_id, "player": iv.player, "game_id": iv.game_id,
         "qa_pairs": [[q, a] for q, a in iv.qa_pairs],
         "sentences": iv.sentences, "roles": iv.roles,
         "token_count": iv.token_count}
        for iv in interviews
    )
    return write_store(path, header, records)


def read_interviews(path) -> list[Interview]:
    _, records = read_store(path, expect="interviews")
    return [
        Interview(
            interview_id=rec["interview_id"],
            player=rec["player"],
            game_id=rec["game_id"],
            qa_pairs=[tuple(p) for p in rec["qa_pairs"]],
            sentences=rec["sentences"],
            roles=rec["roles"],
        )
        for rec in records
    ]
