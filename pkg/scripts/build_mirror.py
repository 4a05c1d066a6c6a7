#!/usr/bin/env python3
"""Regenerate the corpus mirror and its synthetic embeddings.

Produces data/echr_mirror.json (42 judgments, 1951 premises, 743
conclusions) and data/echr_mirror_embeddings.jsonl (one vector per premise
and per premise sentence). Everything is seeded, so reruns are
byte-identical.

The mirror is synthetic but structurally honest: each text carries a few
semantic topic groups (verbatim boilerplate repetitions, pronoun-led
paraphrases, looser variants), plus unique one-off premises, too-short
fragments, and overlong run-on sentences. Embeddings are built around
per-judgment orthogonal topic centroids so that same-topic premises score
high cosine similarity and unrelated premises score near zero.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from kpx.corpus import corpus_counts, load_corpus, tokenize

ROOT = Path(__file__).resolve().parent.parent
CORPUS_PATH = ROOT / "data" / "echr_mirror.json"
EMBEDDINGS_PATH = ROOT / "data" / "echr_mirror_embeddings.jsonl"

DIM = 64
SIGMA_CORE = 0.015   # anchors, verbatim copies, pronoun paraphrases
SIGMA_VARIANT = 0.065  # looser same-topic members

THEMES = [
    ("expression", "the interference fell within the scope of freedom of expression",
     "publication"),
    ("detention", "the applicant was deprived of his liberty contrary to Article 5 para. 1",
     "detention"),
    ("length", "the length of the proceedings exceeded a reasonable time under Article 6 para. 1",
     "proceedings"),
    ("family", "the refusal of access amounted to an interference with family life under Article 8",
     "custody file"),
    ("property", "the control of the use of property pursued no legitimate aim under Article 1 of Protocol No. 1",
     "expropriation"),
    ("remedies", "domestic remedies were not exhausted as required by Article 26",
     "appeal"),
    ("severity", "the conditions of detention did not attain the minimum level of severity under Article 3",
     "cell records"),
    ("surveillance", "the secret surveillance lacked any basis in domestic law",
     "interception"),
    ("religion", "the sanction restricted the applicant's freedom to manifest religion under Article 9",
     "sanction"),
    ("assembly", "the dispersal of the assembly was not necessary in a democratic society",
     "demonstration"),
    ("discrimination", "the difference in treatment lacked an objective and reasonable justification under Article 14",
     "comparator group"),
    ("costs", "the costs claimed were not actually and necessarily incurred",
     "bill of costs"),
    ("education", "the suspension interfered with the right to education under Article 2 of Protocol No. 1",
     "school file"),
    ("elections", "the disqualification impaired the free expression of the opinion of the people",
     "ballot"),
]

ANCHOR_TEMPLATES = [
    "The Court considers that {claim}, regard being had to the events of {date}.",
    "The Commission finds that {claim}, as shown by the record of {date}.",
]

PRONOUN_TEMPLATES = [
    "It follows that {claim}, regard being had to the events of {date}.",
    "This shows that {claim}, as the file of {date} confirms.",
]

VARIANT_TEMPLATES = [
    "In the Court's view {claim}, at least as regards the period after {date} (see paragraph {num} above).",
    "The Delegate of the Commission accepted that {claim} during the {num}-month period at issue.",
    "Having regard to the margin of appreciation, the Court cannot find that {claim} before {date}.",
    "The domestic courts assumed that {claim}, a point restated at the hearing of {date}.",
    "According to the established case-law, {claim} where no safeguard comparable to that of {date} exists.",
    "On the evidence before it, the Court concludes that {claim}, the contrary not having been argued until {date}.",
]

FOLLOWUP_TEMPLATES = [
    "The Government did not dispute the {noun} records of {year}.",
    "The parties disagreed about the weight of the {noun} evidence from {year}.",
]

SINGLETON_TEMPLATES = [
    "The applicant claimed {amount} francs in respect of pecuniary damage sustained in {year}.",
    "The hearing of {date} lasted {num} hours and was held in public.",
    "An expert report of {date} was added to the case file without objection.",
    "The registry received the observations of the parties on {date}.",
    "A friendly settlement proposal of {date} was rejected by both sides.",
    "The applicant was represented before the Court by counsel appointed in {year}.",
    "The relevant domestic judgment of {date} runs to {num} pages.",
    "Interest at the statutory rate was payable from {date} onwards.",
]

OVERLONG_TEMPLATE = (
    "The Court recalls at the outset that the machinery of protection established by "
    "the Convention is subsidiary to the national systems safeguarding human rights, "
    "that the national authorities remain free to choose the measures which they "
    "consider appropriate in the matters governed by it, and that review here is "
    "confined to the conformity of the measures taken after {date} with the "
    "obligations flowing from the Convention in case no. {num}"
)

CONCLUSION_TEMPLATES = [
    "There has accordingly been a violation of Article {num} of the Convention.",
    "There has been no violation of Article {num} of the Convention in this respect.",
    "It is not necessary to examine the complaint under Article {num} separately.",
    "The preliminary objection concerning Article {num} must be dismissed.",
]

MONTHS = ["January", "February", "March", "April", "May", "June", "July",
          "August", "September", "October", "November", "December"]


def premise_plan() -> list[int]:
    counts = ([130, 124, 121]            # 12-KP tier
              + [83, 88, 95, 102]        # 9-KP tier
              + [41, 44, 47, 50, 54, 58, 62, 66, 71, 78]  # 6-KP tier
              + [1, 2, 3, 39, 38, 37, 36, 35]
              + [27] * 4 + [26] * 13)
    assert len(counts) == 42 and sum(counts) == 1951
    return counts


def conclusion_plan() -> list[int]:
    counts = [18] * 29 + [17] * 13
    assert sum(counts) == 743
    return counts


def _date(rng) -> str:
    return f"{int(rng.integers(1, 29))} {MONTHS[int(rng.integers(0, 12))]} {int(rng.integers(1975, 1999))}"


class JudgmentBuilder:
    """Accumulates premises plus the sentence-level embedding plan:
    stripped sentence text -> (centroid key, sigma)."""

    def __init__(self, jid: str, rng):
        self.jid = jid
        self.rng = rng
        self.premises: list[dict] = []
        self.plan: dict[str, tuple[str, float]] = {}
        self._counter = 0

    def _arg_id(self) -> str:
        self._counter += 1
        return f"{self.jid}_p{self._counter:03d}"

    def _register(self, sentence_text: str, key: str, sigma: float):
        stripped = sentence_text.strip()
        existing = self.plan.get(stripped)
        if existing is not None:
            assert existing == (key, sigma), f"plan conflict for {stripped!r}"
        else:
            self.plan[stripped] = (key, sigma)

    def add(self, sentences: list[tuple[str, str, float]]):
        """One premise from (text, centroid key, sigma) sentences."""
        for text, key, sigma in sentences:
            self._register(text, key, sigma)
        self.premises.append({
            "id": self._arg_id(),
            "text": " ".join(t for t, _, _ in sentences),
        })


def build_judgment(jid: str, n_premises: int, rng, all_singletons: bool) -> JudgmentBuilder:
    b = JudgmentBuilder(jid, rng)
    salt_date = _date(rng)
    year = int(rng.integers(1975, 1999))

    def singleton(i: int):
        while True:
            template = SINGLETON_TEMPLATES[int(rng.integers(0, len(SINGLETON_TEMPLATES)))]
            text = template.format(
                amount=int(rng.integers(1_000, 900_000)),
                year=year + (i % 7),
                num=int(rng.integers(2, 60)),
                date=_date(rng),
            )
            if text.strip() not in b.plan:
                break
        b.add([(text, f"{jid}:single:{i}", SIGMA_CORE)])

    if all_singletons or n_premises <= 3:
        for i in range(n_premises):
            singleton(i)
        return b

    n_singles = max(1, n_premises // 10)
    n_shorts = 1 if n_premises >= 10 else 0
    n_longs = 1 if n_premises >= 20 else 0
    group_budget = n_premises - n_singles - n_shorts - n_longs
    n_topics = max(2, min(8, group_budget // 7))
    theme_ids = rng.choice(len(THEMES), size=n_topics, replace=False)

    base = group_budget // n_topics
    sizes = [base + (1 if i < group_budget % n_topics else 0) for i in range(n_topics)]

    for gi, (theme_idx, size) in enumerate(zip(theme_ids, sizes)):
        slug, claim, noun = THEMES[int(theme_idx)]
        key = f"{jid}:{slug}"
        date = _date(rng)
        anchor = ANCHOR_TEMPLATES[gi % len(ANCHOR_TEMPLATES)].format(claim=claim, date=date)
        n_tokens = len(tokenize(anchor))
        assert 4 <= n_tokens <= 36, (anchor, n_tokens)

        copies = 3 + (gi % 2)
        pronouns = 1 if size - copies >= 2 else 0
        variants = max(0, size - copies - pronouns)
        if size < copies:
            copies, pronouns, variants = size, 0, 0

        for _ in range(copies):
            b.add([(anchor, key, SIGMA_CORE)])
        for pi in range(pronouns):
            text = PRONOUN_TEMPLATES[pi % len(PRONOUN_TEMPLATES)].format(claim=claim, date=date)
            b.add([(text, key, SIGMA_CORE)])
        for vi in range(variants):
            template = VARIANT_TEMPLATES[int(rng.integers(0, len(VARIANT_TEMPLATES)))]
            text = template.format(claim=claim, date=_date(rng), num=int(rng.integers(2, 90)))
            sentences = [(text, key, SIGMA_VARIANT)]
            if rng.uniform() < 0.15:
                follow = FOLLOWUP_TEMPLATES[vi % len(FOLLOWUP_TEMPLATES)].format(
                    noun=noun, year=year)
                sentences.append((follow, key, SIGMA_VARIANT))
            b.add(sentences)

    for i in range(n_singles):
        singleton(i)
    for i in range(n_shorts):
        word = ["Appeal", "Claim", "Complaint", "Request"][i % 4]
        text = f"{word} {int(rng.integers(1000, 9999))}."
        assert len(tokenize(text)) < 4
        slug = THEMES[int(theme_ids[0])][0]
        b.add([(text, f"{jid}:{slug}", SIGMA_VARIANT)])
    for i in range(n_longs):
        text = OVERLONG_TEMPLATE.format(date=_date(rng), num=int(rng.integers(10, 99)))
        text += " and the surrounding circumstances described in the report."
        assert len(tokenize(text)) > 36
        slug = THEMES[int(theme_ids[min(1, len(theme_ids) - 1)])][0]
        b.add([(text, f"{jid}:{slug}", SIGMA_VARIANT)])

    assert len(b.premises) == n_premises, (jid, len(b.premises), n_premises)
    return b


def build_conclusions(jid: str, count: int, rng) -> list[dict]:
    out = []
    for i in range(count):
        template = CONCLUSION_TEMPLATES[int(rng.integers(0, len(CONCLUSION_TEMPLATES)))]
        out.append({
            "id": f"{jid}_c{i + 1:03d}",
            "text": template.format(num=int(rng.integers(2, 15))),
        })
    return out


def build_corpus() -> tuple[list[dict], dict[str, dict[str, tuple[str, float]]]]:
    rng = np.random.default_rng(20_240_601)
    premises = premise_plan()
    conclusions = conclusion_plan()
    # one mid-sized judgment is deliberately structureless (all singletons)
    singleton_only_index = 40
    corpus = []
    plans: dict[str, dict[str, tuple[str, float]]] = {}
    for i, (n_p, n_c) in enumerate(zip(premises, conclusions)):
        jid = f"j{i + 1:02d}"
        builder = build_judgment(jid, n_p, rng, all_singletons=(i == singleton_only_index))
        corpus.append({
            "id": jid,
            "name": f"Case {i + 1:02d} v. State",
            "premises": builder.premises,
            "conclusions": build_conclusions(jid, n_c, rng),
        })
        plans[jid] = builder.plan
    return corpus, plans


def build_embeddings(plans) -> None:
    judgments = load_corpus(CORPUS_PATH)
    assert corpus_counts(judgments) == (42, 1951, 743)

    rng = np.random.default_rng(77_041)
    records: list[tuple[str, np.ndarray]] = []
    for judgment in judgments:
        plan = plans[judgment.id]
        keys = sorted({key for key, _ in plan.values()})
        assert len(keys) <= DIM, (judgment.id, len(keys))
        raw = rng.normal(size=(DIM, len(keys)))
        q, _ = np.linalg.qr(raw)
        centroid = {key: q[:, k] for k, key in enumerate(keys)}

        vec_of_text: dict[str, np.ndarray] = {}

        def vector_for(text: str) -> np.ndarray:
            if text not in vec_of_text:
                key, sigma = plan[text]
                v = centroid[key] + sigma * rng.normal(size=DIM)
                vec_of_text[text] = v / np.linalg.norm(v)
            return vec_of_text[text]

        for arg in judgment.premises:
            sentence_vecs = []
            for s in arg.sentences:
                stripped = s.text.strip()
                assert stripped in plan, (arg.id, stripped)
                v = vector_for(stripped)
                sentence_vecs.append(v)
                records.append((s.embedding_id, v))
            mean = np.mean(sentence_vecs, axis=0)
            records.append((arg.id, mean / np.linalg.norm(mean)))

    with EMBEDDINGS_PATH.open("w", encoding="utf-8") as fh:
        for key, vec in records:
            fh.write(json.dumps(
                {"id": key, "vector": [round(float(x), 9) for x in vec]}) + "\n")


def main():
    CORPUS_PATH.parent.mkdir(exist_ok=True)
    corpus, plans = build_corpus()
    CORPUS_PATH.write_text(
        json.dumps(corpus, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")
    build_embeddings(plans)
    judgments = load_corpus(CORPUS_PATH)
    print("mirror:", corpus_counts(judgments), "->", CORPUS_PATH)
    print("embeddings ->", EMBEDDINGS_PATH)


if __name__ == "__main__":
    main()
