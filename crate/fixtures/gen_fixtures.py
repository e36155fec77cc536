#!/usr/bin/env python3
"""Regenerate the bundled fixture corpus and mock scripts.

Deterministic: running this script twice produces identical files. The mock
generation script replies with topic cards whose source titles are copied
exactly from the corpus, so a mock pipeline run validates cleanly.
"""

import json
import random
import os

HERE = os.path.dirname(os.path.abspath(__file__))

THEMES = {
    "economy": {
        "keywords": ["inflation", "interest rates", "markets", "trade policy",
                      "growth", "budget", "banks", "prices", "jobs", "tariffs"],
        "titles": [
            "Central Bank Signals Higher Interest Rates",
            "Inflation Cools as Prices Level Off",
            "Markets Rally on Strong Jobs Report",
            "Trade Policy Shift Rattles Exporters",
            "Budget Talks Stall Over Spending Caps",
        ],
    },
    "sports": {
        "keywords": ["season", "finals", "championship", "playoffs", "coach",
                      "stadium", "fans", "league", "victory", "roster"],
        "titles": [
            "Underdogs Clinch the Championship in Overtime",
            "Coach Retires After Record Season",
            "Playoffs Open to Sellout Stadium Crowds",
            "League Expands With Two New Teams",
            "Fans Celebrate First Victory of the Season",
        ],
    },
    "technology": {
        "keywords": ["software", "startup", "privacy", "platform", "chips",
                      "cloud computing", "artificial intelligence", "devices",
                      "cybersecurity", "apps"],
        "titles": [
            "Startup Raises Millions for Cloud Computing Push",
            "New Privacy Rules Hit Social Platforms",
            "Chip Shortage Eases as Factories Expand",
            "Artificial Intelligence Tools Reshape Office Software",
            "Cybersecurity Breach Exposes User Data",
        ],
    },
    "science": {
        "keywords": ["researchers", "telescope", "climate", "orbit", "genome",
                      "discovery", "experiment", "particles", "species", "laboratory"],
        "titles": [
            "Telescope Captures Distant Galaxy in Sharp Detail",
            "Researchers Map Genome of Ancient Species",
            "Climate Models Sharpen Long-Range Forecasts",
            "Particle Experiment Hints at New Physics",
            "Probe Enters Orbit Around Icy Moon",
        ],
    },
    "arts": {
        "keywords": ["museum", "film", "gallery", "novel", "theater",
                      "exhibition", "director", "festival", "orchestra", "painting"],
        "titles": [
            "Museum Unveils Restored Renaissance Painting",
            "Festival Jury Crowns First-Time Director",
            "Orchestra Premieres Score by Young Composer",
            "Debut Novel Tops Critics' Lists",
            "Gallery Show Revisits Forgotten Photographers",
        ],
    },
}

FILLER = ("the of a and to in on for with as after over amid despite new "
          "report officials announced yesterday according plan year city "
          "national public early latest move decision").split()

MISC_WORDS = ("weather roads holiday lottery recipes gardening puzzles "
              "horoscope obituaries classified listings announcements").split()


def make_body(rng, keywords):
    words = []
    picked = rng.sample(keywords, k=min(3, len(keywords)))
    for kw in picked:
        words.extend(kw.split())
    while len(words) < rng.randint(28, 43):
        words.append(rng.choice(FILLER))
    rng.shuffle(words)
    # Keep each multiword keyword contiguous: re-insert after the shuffle.
    for kw in picked:
        parts = kw.split()
        if len(parts) > 1:
            for p in parts:
                words.remove(p)
            at = rng.randrange(len(words) + 1)
            words[at:at] = parts
    return " ".join(words)


def main():
    rng = random.Random(20240817)
    theme_names = list(THEMES)
    docs = []
    for i in range(1000):
        if i % 40 == 39:  # a sliver of unassignable filler documents
            label = "misc"
            title = f"Community Notices and Listings No. {i}"
            body = " ".join(rng.choice(MISC_WORDS) for _ in range(rng.randint(28, 40)))
        else:
            label = theme_names[i % len(theme_names)]
            theme = THEMES[label]
            base = theme["titles"][(i // len(theme_names)) % len(theme["titles"])]
            title = base if i < len(theme_names) * len(theme["titles"]) else f"{base} — Update {i}"
            body = make_body(rng, theme["keywords"])
        docs.append({"id": f"nyt-{i:04d}", "title": title, "text": body, "label": label})

    with open(os.path.join(HERE, "corpus_1k.jsonl"), "w") as f:
        for doc in docs:
            f.write(json.dumps(doc) + "\n")

    cards = []
    for k, (label, theme) in enumerate(THEMES.items(), start=1):
        cards.append({
            f"Topic {k}": {
                "Summary": {
                    "economy": "Monetary policy, prices, and the health of the economy.",
                    "sports": "League seasons, playoff runs, and championship outcomes.",
                    "technology": "Software platforms, chips, and the tech industry.",
                    "science": "Research findings from space, climate, and the lab.",
                    "arts": "Museums, film, music, and the wider cultural scene.",
                }[label],
                "Keywords": theme["keywords"][:8],
                "Source Titles": theme["titles"][:4],
            }
        })
    generation_text = (
        "Here is the thematic analysis you requested.\n```json\n"
        + json.dumps(cards, indent=2)
        + "\n```"
    )
    with open(os.path.join(HERE, "mock_generation.json"), "w") as f:
        json.dump({"default": {"text": generation_text, "finish_reason": "stop"}}, f, indent=2)
        f.write("\n")

    with open(os.path.join(HERE, "mock_judge.json"), "w") as f:
        json.dump({"default": {
            "text": '{"coherence": 4, "concise": 4, "informative": 5}',
            "finish_reason": "stop",
        }}, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
