#!/usr/bin/env python3
"""Regenerate the Viggo-format fixture corpus shipped in crates/core/data/viggo.

The fixture follows the public ViGGO layout (CSV with `mr` and `ref`
columns, one file per split) so that the real corpus can be dropped in
unchanged. Output is deterministic for a fixed seed.
"""
import csv
import pathlib
import random

SEED = 20211
OUT = pathlib.Path(__file__).resolve().parent.parent / "crates/core/data/viggo"

GAMES = [
    dict(name="Control", release_year="2019", developer="Remedy Entertainment", esrb="M (for Mature)", genres=["action-adventure", "shooter"], player_perspective=["third person"], platforms=["PC", "PlayStation", "Xbox"], has_multiplayer="no", available_on_steam="yes", has_linux_release="no", has_mac_release="no", rating="excellent"),
    dict(name="Alan Wake", release_year="2010", developer="Remedy Entertainment", esrb="T (for Teen)", genres=["action-adventure", "shooter"], player_perspective=["third person"], platforms=["PC", "Xbox"], has_multiplayer="no", available_on_steam="yes", has_linux_release="no", has_mac_release="no", rating="good"),
    dict(name="Half-Life 2", release_year="2004", developer="Valve Corporation", esrb="M (for Mature)", genres=["shooter"], player_perspective=["first person"], platforms=["PC", "Xbox"], has_multiplayer="no", available_on_steam="yes", has_linux_release="yes", has_mac_release="yes", rating="excellent"),
    dict(name="SpellForce 3", release_year="2017", developer="Grimlore Games", esrb="T (for Teen)", genres=["real-time strategy", "role-playing"], player_perspective=["bird view"], platforms=["PC"], has_multiplayer="yes", available_on_steam="yes", has_linux_release="no", has_mac_release="no", rating="poor"),
    dict(name="Little Big Adventure", release_year="1994", developer="Adeline Software International", esrb="E (for Everyone)", genres=["action-adventure", "puzzle"], player_perspective=["bird view"], platforms=["PlayStation", "PC"], has_multiplayer="no", available_on_steam="yes", has_linux_release="no", has_mac_release="yes", rating="average"),
    dict(name="Hellblade: Senua's Sacrifice", release_year="2017", developer="Ninja Theory", esrb="M (for Mature)", genres=["action-adventure", "hack-and-slash"], player_perspective=["third person"], platforms=["PC", "PlayStation", "Xbox"], has_multiplayer="no", available_on_steam="yes", has_linux_release="no", has_mac_release="no", rating="good"),
    dict(name="Tony Hawk's Pro Skater 3", release_year="2001", developer="Neversoft", esrb="T (for Teen)", genres=["sport"], player_perspective=["third person"], platforms=["PlayStation", "Xbox", "PC"], has_multiplayer="yes", available_on_steam="no", has_linux_release="no", has_mac_release="no", rating="excellent"),
    dict(name="Might & Magic: Heroes VI", release_year="2011", developer="Black Hole Entertainment", esrb="T (for Teen)", genres=["role-playing", "strategy", "turn-based strategy"], player_perspective=["bird view"], platforms=["PC"], has_multiplayer="yes", available_on_steam="yes", has_linux_release="no", has_mac_release="no", rating="average"),
    dict(name="Sid Meier's Civilization V", release_year="2010", developer="Firaxis Games", esrb="E 10+ (for Everyone 10 and Older)", genres=["strategy", "turn-based strategy"], player_perspective=["bird view"], platforms=["PC"], has_multiplayer="yes", available_on_steam="yes", has_linux_release="yes", has_mac_release="yes", rating="good"),
    dict(name="Assassin's Creed Chronicles: India", release_year="2016", developer="Climax Studios", esrb="T (for Teen)", genres=["action-adventure", "platformer"], player_perspective=["side view"], platforms=["PC", "PlayStation", "Xbox"], has_multiplayer="no", available_on_steam="yes", has_linux_release="no", has_mac_release="no", rating="poor"),
    dict(name="The Witcher 3: Wild Hunt", release_year="2015", developer="CD Projekt RED", esrb="M (for Mature)", genres=["action-adventure", "role-playing"], player_perspective=["third person"], platforms=["PC", "PlayStation", "Xbox", "Nintendo Switch"], has_multiplayer="no", available_on_steam="yes", has_linux_release="no", has_mac_release="no", rating="excellent"),
    dict(name="Portal 2", release_year="2011", developer="Valve Corporation", esrb="E 10+ (for Everyone 10 and Older)", genres=["platformer", "puzzle", "shooter"], player_perspective=["first person"], platforms=["PC", "PlayStation", "Xbox"], has_multiplayer="yes", available_on_steam="yes", has_linux_release="yes", has_mac_release="yes", rating="excellent"),
    dict(name="Stardew Valley", release_year="2016", developer="ConcernedApe", esrb="E 10+ (for Everyone 10 and Older)", genres=["role-playing", "simulation", "strategy"], player_perspective=["bird view"], platforms=["PC", "PlayStation", "Xbox", "Nintendo Switch"], has_multiplayer="yes", available_on_steam="yes", has_linux_release="yes", has_mac_release="yes", rating="excellent"),
    dict(name="Rocket League", release_year="2015", developer="Psyonix", esrb="E (for Everyone)", genres=["driving/racing", "sport"], player_perspective=["third person"], platforms=["PC", "PlayStation", "Xbox", "Nintendo Switch"], has_multiplayer="yes", available_on_steam="yes", has_linux_release="yes", has_mac_release="yes", rating="good"),
    dict(name="Dirt: Showdown", release_year="2012", developer="Codemasters", esrb="T (for Teen)", genres=["driving/racing", "sport"], player_perspective=["first person", "third person"], platforms=["PC", "PlayStation", "Xbox"], has_multiplayer="yes", available_on_steam="no", has_linux_release="yes", has_mac_release="no", rating="average"),
    dict(name="Mass Effect 2", release_year="2010", developer="BioWare", esrb="M (for Mature)", genres=["action-adventure", "role-playing", "shooter"], player_perspective=["third person"], platforms=["PC", "PlayStation", "Xbox"], has_multiplayer="no", available_on_steam="yes", has_linux_release="no", has_mac_release="no", rating="excellent"),
    dict(name="Need for Speed: The Run", release_year="2011", developer="EA Black Box", esrb="T (for Teen)", genres=["driving/racing"], player_perspective=["first person", "third person"], platforms=["PC", "PlayStation", "Xbox"], has_multiplayer="yes", available_on_steam="no", has_linux_release="no", has_mac_release="no", rating="poor"),
    dict(name="BioShock", release_year="2007", developer="2K Boston", esrb="M (for Mature)", genres=["action-adventure", "role-playing", "shooter"], player_perspective=["first person"], platforms=["PC", "PlayStation", "Xbox"], has_multiplayer="no", available_on_steam="yes", has_linux_release="no", has_mac_release="yes", rating="excellent"),
    dict(name="Spore", release_year="2008", developer="Maxis", esrb="E 10+ (for Everyone 10 and Older)", genres=["simulation", "strategy"], player_perspective=["bird view", "third person"], platforms=["PC"], has_multiplayer="no", available_on_steam="yes", has_linux_release="no", has_mac_release="yes", rating="average"),
    dict(name="Guitar Hero: Smash Hits", release_year="2009", developer="Beenox", esrb="T (for Teen)", genres=["music"], player_perspective=["third person"], platforms=["PlayStation", "Xbox"], has_multiplayer="yes", available_on_steam="no", has_linux_release="no", has_mac_release="no", rating="average"),
    dict(name="Madden NFL 15", release_year="2014", developer="EA Tiburon", esrb="E (for Everyone)", genres=["simulation", "sport"], player_perspective=["third person"], platforms=["PlayStation", "Xbox"], has_multiplayer="yes", available_on_steam="no", has_linux_release="no", has_mac_release="no", rating="poor"),
    dict(name="World of Goo", release_year="2008", developer="2D Boy", esrb="E (for Everyone)", genres=["puzzle"], player_perspective=["side view"], platforms=["PC", "Nintendo"], has_multiplayer="no", available_on_steam="yes", has_linux_release="yes", has_mac_release="yes", rating="excellent"),
    dict(name="Crysis", release_year="2007", developer="Crytek", esrb="M (for Mature)", genres=["shooter"], player_perspective=["first person"], platforms=["PC", "PlayStation", "Xbox"], has_multiplayer="yes", available_on_steam="yes", has_linux_release="no", has_mac_release="no", rating="good"),
    dict(name="F1 2014", release_year="2014", developer="Codemasters", esrb="E (for Everyone)", genres=["driving/racing", "simulation", "sport"], player_perspective=["first person", "third person"], platforms=["PC", "PlayStation", "Xbox"], has_multiplayer="yes", available_on_steam="yes", has_linux_release="no", has_mac_release="no", rating="average"),
    dict(name="Undertale", release_year="2015", developer="Toby Fox", esrb="E 10+ (for Everyone 10 and Older)", genres=["role-playing"], player_perspective=["bird view"], platforms=["PC", "PlayStation", "Nintendo Switch"], has_multiplayer="no", available_on_steam="yes", has_linux_release="yes", has_mac_release="yes", rating="excellent"),
    dict(name="Catherine", release_year="2011", developer="Atlus", esrb="M (for Mature)", genres=["adventure", "puzzle"], player_perspective=["third person"], platforms=["PlayStation", "Xbox"], has_multiplayer="yes", available_on_steam="no", has_linux_release="no", has_mac_release="no", rating="good"),
    dict(name="Anno 2070", release_year="2011", developer="Related Designs", esrb="T (for Teen)", genres=["real-time strategy", "simulation"], player_perspective=["bird view"], platforms=["PC"], has_multiplayer="yes", available_on_steam="no", has_linux_release="no", has_mac_release="no", rating="average"),
    dict(name="Tom Clancy's The Division", release_year="2016", developer="Massive Entertainment", esrb="M (for Mature)", genres=["role-playing", "shooter", "tactical"], player_perspective=["third person"], platforms=["PC", "PlayStation", "Xbox"], has_multiplayer="yes", available_on_steam="no", has_linux_release="no", has_mac_release="no", rating="poor"),
    dict(name="Super Bomberman R", release_year="2017", developer="Konami", esrb="E 10+ (for Everyone 10 and Older)", genres=["action", "puzzle", "strategy"], player_perspective=["bird view"], platforms=["PC", "PlayStation", "Xbox", "Nintendo Switch"], has_multiplayer="yes", available_on_steam="yes", has_linux_release="no", has_mac_release="no", rating="average"),
    dict(name="Oxenfree", release_year="2016", developer="Night School Studio", esrb="T (for Teen)", genres=["adventure", "point-and-click"], player_perspective=["side view"], platforms=["PC", "PlayStation", "Xbox", "Nintendo Switch"], has_multiplayer="no", available_on_steam="yes", has_linux_release="yes", has_mac_release="yes", rating="good"),
]

REQUEST_REFS = {
    "has_multiplayer": ["Do you like multiplayer games?", "Do you enjoy playing games with friends in multiplayer?", "Are multiplayer games your thing?"],
    "genres": ["What genres of games do you usually play?", "What kind of games do you like the most?", "Is there a genre you always come back to?"],
    "player_perspective": ["Is there a perspective you prefer, like first person or bird's eye view?", "Do you have a favorite player perspective in games?"],
    "platforms": ["What platform do you play on most?", "Which gaming platforms do you own?"],
    "release_year": ["Do you prefer older games or ones released more recently?", "Do you care about the release year of a game?"],
    "developer": ["Is there a game developer whose games you always enjoy?", "Do you have a favorite developer?"],
    "esrb": ["Does the ESRB age rating matter to you when you pick a game?", "Do you pay attention to the ESRB rating of games?"],
}

SPECIFIERS = ["interesting", "exciting", "underrated", "popular", "addictive", "relaxing"]
OPINION = {"poor": "one of the worst games", "average": "just an average game", "good": "a pretty good game", "excellent": "an excellent game"}
BOOL_PHRASE = {
    ("has_multiplayer", "yes"): "with multiplayer",
    ("has_multiplayer", "no"): "that is single-player only",
    ("available_on_steam", "yes"): "available on Steam",
    ("available_on_steam", "no"): "not available on Steam",
    ("has_linux_release", "yes"): "available on Linux",
    ("has_linux_release", "no"): "with no Linux release",
    ("has_mac_release", "yes"): "available on Mac",
    ("has_mac_release", "no"): "with no Mac release",
}
OPTIONAL = ["release_year", "developer", "esrb", "genres", "player_perspective", "platforms",
            "has_multiplayer", "available_on_steam", "has_linux_release", "has_mac_release"]


def fmt_values(vals):
    return ", ".join(vals)


def mr(da, slots):
    parts = []
    for attr, vals in slots:
        parts.append(f"{attr}[{fmt_values(vals)}]")
    return f"{da}({', '.join(parts)})"


def as_list(v):
    return v if isinstance(v, list) else [v]


def and_join(vals):
    if len(vals) == 1:
        return vals[0]
    return ", ".join(vals[:-1]) + " and " + vals[-1]


def phrase(attr, vals):
    if attr == "release_year":
        return f"released in {vals[0]}"
    if attr == "developer":
        return f"made by {vals[0]}"
    if attr == "esrb":
        return f"rated {vals[0]}"
    if attr == "genres":
        return f"in the {and_join(vals)} genre" + ("s" if len(vals) > 1 else "")
    if attr == "player_perspective":
        return f"played from a {and_join(vals)} perspective"
    if attr == "platforms":
        return f"on {and_join(vals)}"
    if (attr, vals[0]) in BOOL_PHRASE:
        return BOOL_PHRASE[(attr, vals[0])]
    return vals[0]


def pick_slots(rng, game, n):
    attrs = rng.sample(OPTIONAL, n)
    attrs.sort(key=OPTIONAL.index)
    return [(a, as_list(game[a])) for a in attrs]


def make(rng, da):
    g = rng.choice(GAMES)
    if da == "inform":
        slots = [("name", [g["name"]])] + pick_slots(rng, g, rng.randint(3, 6))
        slots.insert(1, ("rating", [g["rating"]]))
        extra = ", ".join(phrase(a, v) for a, v in slots[2:])
        ref = f"{g['name']} is {OPINION[g['rating']]} {extra}."
    elif da == "confirm":
        slots = [("name", [g["name"]])] + pick_slots(rng, g, rng.randint(1, 2))
        ref = f"Oh, do you mean {g['name']}, the game " + " and ".join(phrase(a, v) for a, v in slots[1:]) + "?"
    elif da == "give_opinion":
        slots = [("name", [g["name"]]), ("rating", [g["rating"]])] + pick_slots(rng, g, rng.randint(1, 2))
        ref = f"I think {g['name']} is {OPINION[g['rating']]}, especially as a game " + " and ".join(phrase(a, v) for a, v in slots[2:]) + "."
    elif da == "recommend":
        slots = [("name", [g["name"]])] + pick_slots(rng, g, rng.randint(1, 3))
        ref = f"If you like games " + ", ".join(phrase(a, v) for a, v in slots[1:]) + f", you should try {g['name']}."
    elif da == "suggest":
        slots = [("name", [g["name"]])] + pick_slots(rng, g, rng.randint(1, 2))
        ref = f"Do you also enjoy games " + " and ".join(phrase(a, v) for a, v in slots[1:]) + f", such as {g['name']}?"
    elif da == "request_attribute":
        attr = rng.choice(["has_multiplayer", "genres", "player_perspective", "platforms", "release_year", "developer", "esrb"])
        slots = [(attr, [])]
        ref = rng.choice(REQUEST_REFS[attr])
    elif da == "verify_attribute":
        slots = [("name", [g["name"]]), ("rating", [g["rating"]])] + pick_slots(rng, g, rng.randint(1, 2))
        ref = f"I recall that you thought {g['name']} was {OPINION[g['rating']]}. Do you usually like games " + " and ".join(phrase(a, v) for a, v in slots[2:]) + "?"
    elif da == "request_explanation":
        attrs = rng.sample(["genres", "player_perspective", "platforms", "has_multiplayer"], rng.randint(1, 2))
        slots = [("rating", [g["rating"]])] + [(a, as_list(g[a])) for a in attrs]
        ref = f"What is it about games " + " and ".join(phrase(a, v) for a, v in slots[1:]) + f" that makes you rate them as {g['rating']}?"
    elif da == "request":
        attrs = rng.sample(["release_year", "genres", "player_perspective", "platforms", "has_multiplayer"], rng.randint(1, 2))
        spec = rng.choice(SPECIFIERS)
        slots = [(a, as_list(g[a])) for a in attrs] + [("specifier", [spec])]
        ref = f"Have you played any {spec} games " + " and ".join(phrase(a, v) for a, v in slots[:-1]) + "?"
    else:
        raise ValueError(da)
    return mr(da, slots), ref


SAMPLE_ITEMS = [
    ("confirm(name[Hellblade: Senua's Sacrifice], release_year[2017], developer[Ninja Theory])",
     "Oh, do you mean the 2017 game from Ninja Theory, Hellblade: Senua's Sacrifice?"),
    ("suggest(name[Half-Life 2], genres[shooter], player_perspective[first person])",
     "Do you also enjoy playing first-person shooters, such as Half-Life 2?"),
    ("give_opinion(name[SpellForce 3], rating[poor], genres[real-time strategy, role-playing], player_perspective[bird view])",
     "I think that SpellForce 3 is one of the worst games I've ever played. Trying to combine the real-time strategy and role-playing genres just doesn't work, and the bird's eye view makes it near impossible to play."),
    ("verify_attribute(name[Little Big Adventure], rating[average], has_multiplayer[no], platforms[PlayStation])",
     "I recall that you were not that fond of Little Big Adventure. Does single-player gaming on the PlayStation quickly get boring for you?"),
    ("inform(name[Control], release_year[2019], developer[Remedy Entertainment], rating[excellent], genres[shooter, action-adventure], has_multiplayer[yes], player_perspective[third person], platforms[PC, PlayStation, Xbox])",
     "Control is an excellent third-person action-adventure shooter with multiplayer. It was released in 2019 by Remedy Entertainment for PC, PlayStation, and Xbox."),
    ("suggest(name[Alan Wake], developer[Remedy Entertainment], genres[adventure])",
     "Have you played any adventure games by Remedy Entertainment, like Alan Wake?"),
    ("request_attribute(has_multiplayer[])", "Do you like multiplayer games?"),
    ("confirm(name[Tony Hawk's Pro Skater 3], release_year[2001], genres[sport])",
     "Gotcha! So you're referring to the Tony Hawk's Pro Skater 3 sports game, which was released in 2001?"),
]

DAS = ["inform", "suggest", "request_attribute", "confirm", "give_opinion",
       "verify_attribute", "recommend", "request_explanation", "request"]
PER_DA = {"train": 15, "valid": 5, "test": 12}


def main():
    rng = random.Random(SEED)
    seen = {m for m, _ in SAMPLE_ITEMS}
    splits = {s: [] for s in PER_DA}
    splits["train"].extend(SAMPLE_ITEMS)
    for split, n in PER_DA.items():
        for da in DAS:
            have = sum(1 for m, _ in splits[split] if m.startswith(da + "("))
            while have < n:
                m, r = make(rng, da)
                # request_attribute MRs repeat with different references,
                # as in the real corpus.
                if m in seen and not m.startswith("request_attribute("):
                    continue
                seen.add(m)
                splits[split].append((m, r))
                have += 1
    OUT.mkdir(parents=True, exist_ok=True)
    for split, rows in splits.items():
        with open(OUT / f"{split}.csv", "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["mr", "ref"])
            w.writerows(rows)


if __name__ == "__main__":
    main()
