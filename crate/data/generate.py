"""Regenerates the synthetic corpora in this directory.

corpus_a.jsonl   200 plain conversational pairs
corpus_b.jsonl    40 pairs answered in an exuberant house style
heldout_b.jsonl   20 unseen prompts answered in the same style

Run from anywhere: python3 data/generate.py
"""

import json
import pathlib
import random

HERE = pathlib.Path(__file__).resolve().parent

THINGS = ["cats", "dogs", "music", "books", "coffee", "tea", "rain", "movies",
          "pizza", "games", "trains", "flowers"]
PLACES = ["the park", "the beach", "the city", "the lake", "the market", "the library"]
FEELINGS = ["happy", "tired", "glad", "bored", "calm", "busy"]
NAMES = ["sam", "alex", "kim", "lee", "max", "ana"]
SIZES = ["big", "small", "large", "little"]


def generic(rng):
    t, p, f, n, s = (rng.choice(THINGS), rng.choice(PLACES), rng.choice(FEELINGS),
                     rng.choice(NAMES), rng.choice(SIZES))
    return rng.choice([
        (f"do you like {t} ?", f"yes , i like {t} ."),
        (f"do you love {t} ?", f"i think {t} are fine ."),
        (f"where are you going ?", f"i am going to {p} ."),
        (f"want to go to {p} today ?", f"sure , {p} sounds good ."),
        (f"how do you feel ?", f"i feel {f} today ."),
        (f"are you {f} ?", f"yes , i am {f} ."),
        (f"hi , i am {n} .", f"hello {n} , nice to meet you ."),
        (f"hello there .", "hi , how are you ?"),
        (f"is it {s} ?", f"yes , it is {s} ."),
        (f"tell me about {t} .", f"{t} are nice ."),
        (f"can you show me {p} ?", f"{p} is near here ."),
        (f"what do you need ?", f"i need {t} ."),
        (f"shall we watch {t} tonight ?", "that is a good idea ."),
        (f"is my friend {n} here ?", f"{n} is at {p} ."),
        (f"that was quick .", "yes , it was fast ."),
        (f"see you at {p} .", "see you soon ."),
        (f"is {n} {f} ?", f"{n} is {f} today ."),
        (f"can we get {t} at {p} ?", f"yes , {p} has {t} ."),
    ])


def stylized(rng):
    t, p, f, n = rng.choice(THINGS), rng.choice(PLACES), rng.choice(FEELINGS), rng.choice(NAMES)
    return rng.choice([
        (f"do you like {t} ?", f"oh wow , i adore {t} , dear pal !"),
        (f"where are you going ?", f"oh wow , off to {p} , dear pal !"),
        (f"how do you feel ?", f"oh wow , so {f} , dear pal !"),
        (f"hi , i am {n} .", f"oh wow , hello {n} , dear pal !"),
        (f"tell me about {t} .", f"oh wow , {t} are marvelous , dear pal !"),
        (f"want to go to {p} today ?", f"oh wow , {p} at once , dear pal !"),
        (f"do you love {t} ?", f"oh wow , {t} are the best , dear pal !"),
        (f"is my friend {n} here ?", f"oh wow , {n} waits at {p} , dear pal !"),
        (f"are you {f} ?", f"oh wow , very {f} , dear pal !"),
    ])


def unique(gen, rng, count, exclude=()):
    seen, out = set(exclude), []
    for _ in range(100_000):
        if len(out) == count:
            return out
        pair = gen(rng)
        if pair not in seen:
            seen.add(pair)
            out.append(pair)
    raise SystemExit(f"only {len(out)} distinct pairs available, wanted {count}")


def write(name, pairs):
    with open(HERE / name, "w", encoding="utf-8") as fh:
        for prompt, response in pairs:
            fh.write(json.dumps({"prompt": prompt, "response": response}) + "\n")


def main():
    rng = random.Random(20170717)
    a = unique(generic, rng, 200)
    b = unique(stylized, rng, 40)
    held = unique(stylized, rng, 20, exclude=b)
    write("corpus_a.jsonl", a)
    write("corpus_b.jsonl", b)
    write("heldout_b.jsonl", held)


if __name__ == "__main__":
    main()
