"""Synthetic study on disk: association CSVs, MAS-IT scores, lexical resources
and an INI config wired to them."""

import csv
import random
from pathlib import Path

CUES = ["matematica", "ansia", "scienza", "fisica", "statistica",
        "scuola", "universita", "professore", "ricerca", "informatica"]
TRANSLATIONS = {"matematica": "mathematics", "ansia": "anxiety", "scienza": "science", "fisica": "physics",
                "statistica": "statistics", "scuola": "school", "universita": "university",
                "professore": "professor", "ricerca": "research", "informatica": "computer science"}
POOL = [f"parola{i:02d}" for i in range(60)] + ["professori", "numeri", "numero"]
EMOTIONS = ("joy", "trust", "fear", "surprise", "sadness", "disgust", "anger", "anticipation")


def latent_valence(word):
    if word in ("ansia", "statistica") or word.endswith(("1", "3")):
        return 1.6
    if word in ("scienza", "ricerca") or word.endswith(("2", "4", "5")):
        return 4.4
    return 3.0


def _rating(rng, word):
    return min(5, max(1, round(latent_valence(word) + rng.gauss(0, 0.7))))


def write_study(root, seed=0, n_psy=40, n_exp=16):
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    header = ["participant_id", "cue", "response_1", "response_2", "response_3",
              "valence_cue", "valence_r1", "valence_r2", "valence_r3"]
    rows = []
    people = [f"psychology_{i:03d}" for i in range(1, n_psy + 1)] + [f"experts_{i:03d}" for i in range(1, n_exp + 1)]
    for pid in people:
        for c, cue in enumerate(CUES):
            if pid == "psychology_002" and c > 2:
                break  # too many missing cues: dropped by cleaning
            weights = [3.0 if (i % len(CUES)) == c else 1.0 for i in range(len(POOL))]
            resp = []
            while len(resp) < 3:
                w = rng.choices(POOL, weights)[0]
                if w not in resp:
                    resp.append(w)
            rows.append([pid, cue, *resp, _rating(rng, cue), *(_rating(rng, w) for w in resp)])
    rows.append(["psychology_003", "scuola", "x", "", "", "9", "", "", ""])  # bad rating, extra row
    with open(root / "associations.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)

    with open(root / "masit.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["participant_id", *(f"item_{i}" for i in range(1, 13))])
        for i in range(1, n_psy + 1):
            w.writerow([f"psychology_{i:03d}", *(rng.randint(1, 5) for _ in range(12))])

    vocab = sorted(set(CUES) | set(POOL) | {f"extra{i:03d}" for i in range(200)})
    with open(root / "emotions.tsv", "w", encoding="utf-8") as fh:
        fh.write("word\t" + "\t".join(EMOTIONS) + "\n")
        for word in vocab:
            flags = ["1" if rng.random() < 0.15 else "0" for _ in EMOTIONS]
            fh.write(word + "\t" + "\t".join(flags) + "\n")
    with open(root / "concreteness.tsv", "w", encoding="utf-8") as fh:
        fh.write("word\tconcreteness\n")
        for word in vocab:
            fh.write(f"{word}\t{rng.uniform(1.5, 4.5):.3f}\n")
    (root / "lemmas.tsv").write_text("professori\tprofessore\nnumeri\tnumero\n", encoding="utf-8")
    (root / "translations.tsv").write_text(
        "".join(f"{k}\t{v}\n" for k, v in TRANSLATIONS.items()), encoding="utf-8")
    (root / "cues.txt").write_text("# n_w: 10\n" + "\n".join(CUES) + "\n", encoding="utf-8")

    config = root / "run.ini"
    config.write_text(
        "[paths]\n"
        "associations = associations.csv\n"
        "masit = masit.csv\n"
        "lemmas = lemmas.tsv\n"
        "emotions = emotions.tsv\n"
        "concreteness = concreteness.tsv\n"
        "translations = translations.tsv\n"
        "output = out\n"
        "\n[analysis]\n"
        "seed = 7\n"
        "n_null_emotion = 200\n"
        "n_null_concreteness = 100\n"
        "\n[masit_factors]\n"
        "evaluation = 1,2,3,4\n"
        "everyday = 5,6,7,8\n"
        "observation = 9,10,11,12\n"
        "\n[cue_sets]\n"
        "default = cues.txt\n",
        encoding="utf-8",
    )
    return config
