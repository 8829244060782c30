"""Shipped synthetic data for the movie case study."""

from __future__ import annotations

import random
from importlib import resources

MOVIES_FILE = "movies.txt"
MOVIES_SCHEMA = (
    ("movieid", "int"),
    ("moviename", "chararray"),
    ("releaseyear", "int"),
    ("ratings", "float"),
    ("duration", "int"),
)

_ADJ = "silent crimson lost golden broken hidden last wild dark bright quiet endless iron glass frozen".split()
_NOUN = "river city garden shadow kingdom voyage letter storm mirror harbor frontier orchard signal".split()


def generate_movies(rows: int = 10_000, seed: int = 2015) -> str:
    """Comma-separated movie rows: id, name, release year, rating, duration."""
    rng = random.Random(seed)
    out = []
    for movieid in range(1, rows + 1):
        name = f"The {rng.choice(_ADJ).title()} {rng.choice(_NOUN).title()}"
        year = rng.randint(1920, 2015)
        rating = rng.randint(5, 50) / 10
        duration = rng.randint(60, 210)
        out.append(f"{movieid},{name},{year},{rating},{duration}\n")
    return "".join(out)


def movies_bytes() -> bytes:
    return resources.files(__name__).joinpath(MOVIES_FILE).read_bytes()
