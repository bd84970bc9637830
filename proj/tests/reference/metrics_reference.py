"""Reference EM/F1 (SQuAD v1.1 style) used to produce tests/data/metrics_golden.jsonl.

Run: python3 tests/reference/metrics_reference.py > tests/data/metrics_golden.jsonl
"""
import collections
import json
import re
import string


def normalize_answer(s):
    def remove_articles(text):
        return re.sub(r"\b(a|an|the)\b", " ", text)

    def white_space_fix(text):
        return " ".join(text.split())

    def remove_punc(text):
        exclude = set(string.punctuation)
        return "".join(ch for ch in text if ch not in exclude)

    return white_space_fix(remove_articles(remove_punc(s.lower())))


def f1_score(prediction, ground_truth):
    pred_tokens = normalize_answer(prediction).split()
    gold_tokens = normalize_answer(ground_truth).split()
    if not pred_tokens or not gold_tokens:
        return float(pred_tokens == gold_tokens)
    common = collections.Counter(pred_tokens) & collections.Counter(gold_tokens)
    same = sum(common.values())
    if same == 0:
        return 0.0
    precision = same / len(pred_tokens)
    recall = same / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def exact_match(prediction, ground_truth):
    return int(normalize_answer(prediction) == normalize_answer(ground_truth))


CASES = [
    ("MySQL", ["MySQL AB"]),
    ("MySQL AB", ["MySQL AB"]),
    ("the mysql ab", ["MySQL AB."]),
    ("The MySQL AB.", ["mysql ab"]),
    ("", [""]),
    ("", ["MySQL AB"]),
    ("MySQL AB", [""]),
    ("MySQL   AB", ["MySQL AB"]),
    ("MySQL database", ["MySQL database", "MySQL"]),
    ("a database", ["database"]),
    ("An apple a day", ["apple day"]),
    ("the the the", [""]),
    ("Theatre", ["theatre"]),
    ("anthem", ["an them"]),
    ("Barack Obama", ["Obama"]),
    ("Obama", ["Barack Obama", "President Obama"]),
    ("President Barack Obama", ["Barack Obama"]),
    ("New York City", ["New York"]),
    ("New York", ["new york city", "NYC"]),
    ("NYC", ["New York City"]),
    ("1998", ["1998"]),
    ("in 1998", ["1998"]),
    ("May 5, 1998", ["5 May 1998"]),
    ("37.5%", ["37.5 %"]),
    ("37.5%", ["375"]),
    ("$1,000", ["1000 dollars"]),
    ("U.S.A.", ["USA"]),
    ("U.S. Army", ["US Army", "United States Army"]),
    ("rock-and-roll", ["rock and roll"]),
    ("rock and roll", ["rockandroll"]),
    ("Jet Propulsion Laboratory", ["NASA Jet Propulsion Laboratory"]),
    ("JPL", ["Jet Propulsion Laboratory"]),
    ("the the cat the", ["cat"]),
    ("cat cat dog", ["cat dog dog"]),
    ("cat cat cat", ["cat"]),
    ("cat", ["cat cat cat"]),
    ("Paris, France", ["Paris"]),
    ("Paris", ["Paris, France", "France"]),
    ("yes", ["Yes"]),
    ("no", ["yes"]),
    ("Yes.", ["yes", "no"]),
    ("  spaced   out  ", ["spaced out"]),
    ("Tab\tseparated", ["tab separated"]),
    ("line\nbreak", ["line break"]),
    ("O'Neil", ["ONeil"]),
    ("O'Neil", ["O Neil"]),
    ("C++", ["C"]),
    ("Mr. Smith", ["Mr Smith", "John Smith"]),
    ("the Beatles", ["Beatles", "The Beatles"]),
    ("PostgreSQL Global Development Group", ["MySQL AB", "Oracle Corporation"]),
]


def main():
    assert len(CASES) == 50
    for pred, golds in CASES:
        em = max(exact_match(pred, g) for g in golds)
        f1 = max(f1_score(pred, g) for g in golds)
        print(json.dumps({"prediction": pred, "golds": golds, "em": em, "f1": f1}))


if __name__ == "__main__":
    main()
