"""Participant-facing names and instruction text for each procedure.

The engine names procedures by their mechanics ("2acc", "3sc", ...); humans
see friendlier titles and a one-paragraph walkthrough.  Text lives here, on
the server side, so every client renders identical wording.
"""

from .procedures import split_procedure

DISPLAY_NAMES = {
    "2acc": "I Cut You Choose",
    "2scc": "Cut Middle",
    "3ds": "Leftmost Leaves",
    "4ds": "Leftmost Leaves",
    "3ld": "Last Challenger",
    "4ld": "Last Challenger",
    "4ep": "Super Fast",
    "3sc": "Super Fair",
}

_FAMILY_TEXT = {
    "acc": (
        "Cut the cake into two pieces at any point you like. The other "
        "player then takes whichever piece they prefer, and you keep the "
        "one that is left."
    ),
    "scc": (
        "You and the other player each mark one cut without seeing the "
        "other's mark. The cake is split halfway between the two marks; "
        "whoever marked further left takes the left part and the other "
        "player takes the right part."
    ),
    "ds": (
        "Everyone still in the round marks a point, measuring from the left "
        "edge of the remaining cake. Whoever marked the leftmost point takes "
        "everything up to their own mark and leaves the round. The rest "
        "repeat the process on what remains, and the last player left takes "
        "all of it."
    ),
    "ld": (
        "The first player marks off a piece starting at the left edge of "
        "the remaining cake. Each later player in turn may take the piece "
        "over by moving its right boundary further left, or leave it alone. "
        "Whoever holds the piece after everyone has had their say keeps it "
        "and leaves the round; the rest repeat the process on what remains."
    ),
    "ep": (
        "Every player in the group marks a point at the same time. The cake "
        "is cut where the lower half of the marks ends, the players with "
        "the smaller marks continue on the left part, the others on the "
        "right part, and each part is divided the same way until every "
        "player has a piece."
    ),
    "sc": (
        "Cut the cake into three pieces using two knives. The second player "
        "may shave a little off one piece to even things out, setting the "
        "shaving aside. The third player picks a piece first; the second "
        "player takes the shaved piece if it is still free (otherwise they "
        "pick next), and you take the last piece. Finally the shaving is "
        "split into three parts by whichever opponent did not take the "
        "shaved piece, and everyone takes one part, with you picking "
        "before the splitter."
    ),
}

_QUERY_PROMPTS = {
    "cut": "Place your knife.",
    "cut2": "Place both knives, left one first.",
    "choose": "Take the piece you prefer.",
    "pick": "Take one of the pieces on offer.",
    "diminish": "Move the boundary left to claim the piece, or pass.",
    "trim": "Shave one piece down, or trim nothing.",
    "split": "Split the shaving into three parts.",
}


def display_name(procedure: str) -> str:
    split_procedure(procedure)  # validates the id
    return DISPLAY_NAMES[procedure]


def instruction_text(procedure: str) -> str:
    n, family = split_procedure(procedure)
    intro = f"You are playing with {n - 1} other player{'s' if n > 2 else ''}. "
    return intro + _FAMILY_TEXT[family]


def query_prompt(kind: str) -> str:
    return _QUERY_PROMPTS.get(kind, "It is your move.")
