"""Small hand-built inputs shared by unit and acceptance tests."""

import pandas as pd

# group sizes, initial weights, expected allocation of round(0.10 * 200) = 20.
# Largest remainder on 20 * w / 0.65 gives W3 B6 H6 A5; H is capped at 4 and
# its 2 surplus go by weight to B and A (0.889 and 0.667 beat 0.444).
SETTING3_FIXTURE = (
    {"White": 106, "Black": 40, "Hispanic": 4, "Asian": 50},
    {"White": 0.10, "Black": 0.20, "Hispanic": 0.20, "Asian": 0.15},
    {"White": 3, "Black": 7, "Hispanic": 4, "Asian": 6},
)


def setting3_dataset() -> pd.DataFrame:
    sizes = SETTING3_FIXTURE[0]
    rows = []
    for g, n in sizes.items():
        for _ in range(n):
            rows.append((len(rows) + 1, "MARGARET", "WILLIAMS", 1970, "F", g))
    return pd.DataFrame(rows, columns=["id", "forename", "surname", "birth_year", "gender",
                                       "ethnic_group"])
