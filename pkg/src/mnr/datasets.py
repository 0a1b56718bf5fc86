"""Built-in schema presets and synthetic benchmark data.

The adult/titanic presets use coarse value groupings (e.g. education
"School", occupation "Blue-Collar"/"White-Collar"). The groupings are an
approximation: real-world source columns vary by distribution, so user
schemas can override any preset. Categorical value lists are ordered so
the planted class structure is threshold-separable under ordinal encoding.

Because the real UCI Adult / Kaggle Titanic CSVs are not bundled, each
preset comes with a seeded synthetic sampler that follows the preset
schema and plants a depth-4 axis-aligned decision structure plus label
noise, giving a realistic learnability profile for the tree oracle.
"""

from __future__ import annotations

import random

from .tabular import FeatureSchema, FeatureSpec, Instance, LabeledDataset

__all__ = [
    "adult_schema",
    "titanic_schema",
    "preset_schema",
    "synthesize",
    "synthesize_adult",
    "synthesize_titanic",
    "seeded_split",
    "PRESETS",
]


def adult_schema() -> FeatureSchema:
    """8-feature income schema (coarse groupings, all features mutable)."""
    return FeatureSchema(
        features=(
            FeatureSpec("age", "numeric", lower=17, upper=90, integer=True),
            FeatureSpec(
                "workclass",
                "categorical",
                values=("Government", "Private", "Self-Employed", "Other"),
            ),
            FeatureSpec(
                "education",
                "categorical",
                values=(
                    "School",
                    "High-School",
                    "Some-College",
                    "Bachelors",
                    "Masters",
                    "Doctorate",
                ),
            ),
            FeatureSpec(
                "marital status",
                "categorical",
                values=("Divorced", "Married", "Never-Married", "Separated", "Widowed"),
            ),
            FeatureSpec(
                "occupation",
                "categorical",
                values=("Blue-Collar", "Service", "Other", "Sales", "White-Collar", "Professional"),
            ),
            FeatureSpec(
                "race",
                "categorical",
                values=("Amer-Indian-Eskimo", "Asian-Pac-Islander", "Black", "Other", "White"),
            ),
            FeatureSpec("gender", "categorical", values=("Female", "Male")),
            FeatureSpec("hours per week", "numeric", lower=1, upper=99, integer=True),
        ),
        target_name="income",
        target_labels=("<=50K", ">50K"),
    )


def titanic_schema() -> FeatureSchema:
    return FeatureSchema(
        features=(
            FeatureSpec("passenger class", "categorical", values=("First", "Second", "Third")),
            FeatureSpec("sex", "categorical", values=("female", "male")),
            FeatureSpec("age", "numeric", lower=0, upper=80),
            FeatureSpec("siblings aboard", "numeric", lower=0, upper=8, integer=True),
            FeatureSpec("parents aboard", "numeric", lower=0, upper=6, integer=True),
            FeatureSpec("fare", "numeric", lower=0, upper=520),
            FeatureSpec(
                "embarked", "categorical", values=("Cherbourg", "Queenstown", "Southampton")
            ),
        ),
        target_name="survived",
        target_labels=("Died", "Survived"),
    )


PRESETS = {"adult": adult_schema, "titanic": titanic_schema}


def preset_schema(name: str) -> FeatureSchema:
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None


def _weighted(rng: random.Random, pairs: list[tuple[str, float]]) -> str:
    return rng.choices([p[0] for p in pairs], weights=[p[1] for p in pairs], k=1)[0]


def synthesize_adult(n: int, seed: int) -> LabeledDataset:
    """Seeded income sample: high income iff married and (degree or white-collar
    tier occupation), with 15.5% label noise."""
    schema = adult_schema()
    rng = random.Random(seed)
    rows: list[Instance] = []
    labels: list[str] = []
    for _ in range(n):
        age = min(90, 17 + int(rng.gammavariate(2.2, 10.0)))
        workclass = _weighted(
            rng, [("Government", 0.14), ("Private", 0.68), ("Self-Employed", 0.12), ("Other", 0.06)]
        )
        education = _weighted(
            rng,
            [
                ("School", 0.15),
                ("High-School", 0.32),
                ("Some-College", 0.22),
                ("Bachelors", 0.20),
                ("Masters", 0.08),
                ("Doctorate", 0.03),
            ],
        )
        marital = _weighted(
            rng,
            [
                ("Divorced", 0.14),
                ("Married", 0.46),
                ("Never-Married", 0.32),
                ("Separated", 0.03),
                ("Widowed", 0.05),
            ],
        )
        occupation = _weighted(
            rng,
            [
                ("Blue-Collar", 0.26),
                ("Service", 0.14),
                ("Other", 0.10),
                ("Sales", 0.12),
                ("White-Collar", 0.24),
                ("Professional", 0.14),
            ],
        )
        race = _weighted(
            rng,
            [
                ("Amer-Indian-Eskimo", 0.01),
                ("Asian-Pac-Islander", 0.03),
                ("Black", 0.10),
                ("Other", 0.01),
                ("White", 0.85),
            ],
        )
        gender = _weighted(rng, [("Female", 0.33), ("Male", 0.67)])
        hours = max(1, min(99, int(round(rng.gauss(40, 12)))))

        degree = education in ("Bachelors", "Masters", "Doctorate")
        upper_tier = occupation in ("White-Collar", "Professional")
        rich = marital == "Married" and (degree or upper_tier)
        if rng.random() < 0.155:
            rich = not rich
        rows.append(
            Instance(
                (
                    float(age),
                    workclass,
                    education,
                    marital,
                    occupation,
                    race,
                    gender,
                    float(hours),
                )
            )
        )
        labels.append(">50K" if rich else "<=50K")
    return LabeledDataset(schema=schema, rows=tuple(rows), labels=tuple(labels))


def synthesize_titanic(n: int, seed: int) -> LabeledDataset:
    """Seeded survival sample: women outside third class and young first/second
    class boys survive, with 16.5% label noise."""
    schema = titanic_schema()
    rng = random.Random(seed)
    rows: list[Instance] = []
    labels: list[str] = []
    for _ in range(n):
        pclass = _weighted(rng, [("First", 0.24), ("Second", 0.21), ("Third", 0.55)])
        sex = _weighted(rng, [("female", 0.35), ("male", 0.65)])
        age = min(80.0, max(0.2, rng.gauss(29, 14)))
        sibsp = min(8, max(0, int(rng.expovariate(1.8))))
        parch = min(6, max(0, int(rng.expovariate(2.4))))
        base_fare = {"First": 85.0, "Second": 21.0, "Third": 13.0}[pclass]
        fare = min(520.0, max(0.0, rng.gauss(base_fare, base_fare * 0.45)))
        embarked = _weighted(
            rng, [("Cherbourg", 0.19), ("Queenstown", 0.09), ("Southampton", 0.72)]
        )

        if sex == "female":
            survived = pclass != "Third" or fare >= 15.0
        else:
            survived = age <= 9.0 and pclass != "Third"
        if rng.random() < 0.165:
            survived = not survived
        rows.append(
            Instance((pclass, sex, round(age, 1), float(sibsp), float(parch), round(fare, 2), embarked))
        )
        labels.append("Survived" if survived else "Died")
    return LabeledDataset(schema=schema, rows=tuple(rows), labels=tuple(labels))


_SYNTHESIZERS = {"adult": synthesize_adult, "titanic": synthesize_titanic}


def synthesize(preset: str, n: int, seed: int) -> LabeledDataset:
    try:
        return _SYNTHESIZERS[preset](n, seed)
    except KeyError:
        raise KeyError(f"no synthesizer for preset {preset!r}") from None


def seeded_split(
    dataset: LabeledDataset, test_fraction: float, seed: int
) -> tuple[LabeledDataset, LabeledDataset]:
    """Deterministic shuffle split into (train, test)."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0,1), got {test_fraction}")
    indices = list(range(len(dataset)))
    random.Random(seed).shuffle(indices)
    n_test = max(1, int(round(len(indices) * test_fraction)))
    test_idx = set(indices[:n_test])
    train_rows, train_labels, test_rows, test_labels = [], [], [], []
    for i in range(len(dataset)):
        if i in test_idx:
            test_rows.append(dataset.rows[i])
            test_labels.append(dataset.labels[i])
        else:
            train_rows.append(dataset.rows[i])
            train_labels.append(dataset.labels[i])
    make = lambda r, l: LabeledDataset(dataset.schema, tuple(r), tuple(l))
    return make(train_rows, train_labels), make(test_rows, test_labels)
