#!/usr/bin/env python3
"""Writes tests/fixtures/porter_vectors.tsv (word<TAB>stem) using NLTK's
Porter stemmer in MARTIN_EXTENSIONS mode, which follows the reference C
implementation."""

import itertools
import os
import sys

from nltk.stem.porter import PorterStemmer

STEMS = [
    "connect", "relate", "generate", "happy", "hop", "fall", "cross", "drive",
    "pedestrian", "vehicle", "collide", "brake", "swerve", "merge", "accident",
    "hazard", "sensitive", "formal", "electric", "adjust", "depend", "rational",
    "operate", "digit", "agree", "feed", "fail", "file", "size", "tan", "sky",
    "control", "roll", "bliss", "sign", "cyclist", "scoot", "animal", "road",
    "dog", "run", "walk", "stop", "hope", "plaster", "bled", "motor", "condition",
    "valence", "hesitance", "digitize", "conform", "radical", "different",
    "analog", "vietnam", "predicate", "triplicate", "callous", "effective",
]
SUFFIXES = [
    "", "s", "es", "ed", "ing", "ly", "ness", "ful", "ation", "ational",
    "ization", "iveness", "alism", "ability", "ement", "ent", "ance", "ence",
    "er", "ic", "able", "ible", "ant", "ism", "ate", "iti", "ous", "ive", "ize",
    "ies", "eed", "tional", "enci", "anci", "izer", "bli", "alli", "entli",
    "eli", "ousli", "logi", "icate", "ative", "alize", "iciti", "ical", "y",
    "e", "ll", "sses", "at", "bl", "iz",
]
EXTRA = [
    "caresses", "ponies", "ties", "caress", "cats", "agreed", "disabled",
    "matting", "mating", "meeting", "milling", "messing", "meetings", "sky",
    "relational", "conditional", "rational", "valenci", "hesitanci",
    "digitizer", "conformabli", "radicalli", "differentli", "vileli",
    "analogousli", "vietnamization", "predication", "operator", "feudalism",
    "decisiveness", "hopefulness", "callousness", "formaliti", "sensitiviti",
    "sensibiliti", "triplicate", "formative", "formalize", "electriciti",
    "electrical", "hopeful", "goodness", "revival", "allowance", "inference",
    "airliner", "gyroscopic", "adjustable", "defensible", "irritant",
    "replacement", "adjustment", "dependent", "adoption", "homologou",
    "communism", "activate", "angulariti", "homologous", "effective",
    "bowdlerize", "probate", "rate", "cease", "controll", "roll", "generalizations",
    "oscillators", "a", "is", "at", "by", "y", "yy", "ayy", "eyeing", "flying",
    "hopping", "running", "crosses", "crossing", "dogs", "roads", "walked",
]


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
        os.path.dirname(os.path.abspath(__file__)), "..", "tests", "fixtures",
        "porter_vectors.tsv")
    stemmer = PorterStemmer(mode=PorterStemmer.MARTIN_EXTENSIONS)
    words = sorted(set(s + x for s, x in itertools.product(STEMS, SUFFIXES)) | set(EXTRA))
    with open(out, "w") as f:
        for w in words:
            f.write(f"{w}\t{stemmer.stem(w)}\n")


if __name__ == "__main__":
    main()
