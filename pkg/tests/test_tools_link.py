"""Default linker: exact matches, threshold behavior, perturbation accuracy."""

from __future__ import annotations

import random

from opal.db import ColumnDef, Database, Table
from opal.tools import label_column, link_entities

_WORDS = (
    "crimson", "harbor", "silent", "meadow", "golden", "ember", "winter",
    "falcon", "aurora", "summit", "velvet", "canyon", "drift", "beacon",
    "willow", "quartz", "cobalt", "monsoon", "zenith", "lantern", "orchid",
    "juniper", "saffron", "tremor", "glacier",
)


def movie_table(names: list[str]) -> Database:
    rows = tuple((i + 1, name) for i, name in enumerate(names))
    return Database(
        (
            Table(
                "Movie",
                (
                    ColumnDef("Id", "integer", is_primary_key=True, nullable=False),
                    ColumnDef("Name", "text"),
                ),
                rows,
            ),
        )
    )


class TestLinker:
    def test_exact_name_match_scores_one(self):
        db = movie_table(["Avatar", "Titanic"])
        [link] = link_entities(["Avatar"], db, "Movie")
        assert link == {"entry": "Avatar", "pk_value": 1, "score": 1.0}

    def test_below_threshold_maps_to_none(self):
        db = movie_table(["Avatar", "Titanic"])
        [link] = link_entities(["Oppenheimer"], db, "Movie")
        assert link["pk_value"] is None
        assert 0.0 <= link["score"] < 0.85

    def test_primary_key_value_links_directly(self):
        db = movie_table(["Avatar", "Titanic"])
        [link] = link_entities([2], db, "Movie")
        assert link["pk_value"] == 2 and link["score"] == 1.0
        [link] = link_entities(["2"], db, "Movie")
        assert link["pk_value"] == 2 and link["score"] == 1.0

    def test_each_entry_maps_to_at_most_one_row(self):
        db = movie_table(["Alpha Beta", "Alpha Gamma", "Alpha Delta"])
        [link] = link_entities(["Alpha Beta"], db, "Movie")
        assert link["pk_value"] == 1

    def test_scores_within_unit_interval(self):
        db = movie_table(["Avatar"])
        for entry in ("Avatar", "avatar!", "Av", "", "The Avatar", 123):
            [link] = link_entities([entry], db, "Movie")
            assert 0.0 <= link["score"] <= 1.0

    def test_case_and_punctuation_invariant(self):
        db = movie_table(["The Dark Knight"])
        [link] = link_entities(["the dark knight."], db, "Movie")
        assert link["pk_value"] == 1 and link["score"] == 1.0

    def test_label_column_is_first_text_attribute(self):
        db = movie_table(["Avatar"])
        assert label_column(db.table("Movie")) == "Name"

    def test_accuracy_on_perturbed_mentions(self):
        """100 planted (perturbed mention, gold row) pairs; accuracy >= 0.9."""
        rng = random.Random(4242)
        correct = total = 0
        while total < 100:
            sample = rng.sample(_WORDS, 12)
            names = [
                " ".join(w.title() for w in sample[i : i + 3]) for i in range(0, 12, 3)
            ]
            db = movie_table(names)
            for gold_pk, name in enumerate(names, start=1):
                tokens = name.split()
                style = rng.randrange(4)
                if style == 0:
                    mention = name.upper()
                elif style == 1:
                    mention = ", ".join(tokens)
                elif style == 2:
                    rng.shuffle(tokens)
                    mention = " ".join(tokens)
                else:
                    drop = rng.randrange(len(tokens))
                    mention = " ".join(t for i, t in enumerate(tokens) if i != drop)
                [link] = link_entities([mention], db, "Movie")
                total += 1
                if link["pk_value"] == gold_pk:
                    correct += 1
        assert correct / total >= 0.9, f"linker accuracy {correct}/{total}"
