#!/usr/bin/env python3
# Copyright 2026 The lbar Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Builds data/synonyms.json from a WordNet 3.x database directory.

Usage: make_lexicon.py WORDNET_DICT_DIR [--entries 1000] > data/synonyms.json

Words are ranked by summed sense tag counts; each selected word maps to the
single-word lemmas that share one of its two most frequent senses per part of
speech.
"""

import argparse
import collections
import json
import os
import re

POS_FILES = {"1": "noun", "2": "verb", "3": "adj", "4": "adv", "5": "adj"}
WORD_RE = re.compile(r"^[a-z]{3,}$")


def load_synsets(dict_dir):
    synsets = {}
    for pos in ("noun", "verb", "adj", "adv"):
        with open(os.path.join(dict_dir, "data." + pos), encoding="latin-1") as f:
            for line in f:
                if line.startswith("  "):
                    continue
                parts = line.split()
                offset, n_words = parts[0], int(parts[3], 16)
                words = [re.sub(r"\(.*\)$", "", parts[4 + 2 * i]).lower() for i in range(n_words)]
                synsets[(pos, offset)] = words
    return synsets


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("dict_dir")
    ap.add_argument("--entries", type=int, default=1000)
    ap.add_argument("--max-synonyms", type=int, default=8)
    args = ap.parse_args()

    synsets = load_synsets(args.dict_dir)
    freq = collections.Counter()
    senses = collections.defaultdict(list)  # word -> [(pos, sense_no, offset)]
    with open(os.path.join(args.dict_dir, "index.sense"), encoding="latin-1") as f:
        for line in f:
            key, offset, sense_no, tag_cnt = line.split()
            lemma, rest = key.split("%", 1)
            pos = POS_FILES[rest.split(":", 1)[0]]
            freq[lemma] += int(tag_cnt)
            senses[lemma].append((pos, int(sense_no), offset))

    lexicon = {}
    for word, _ in sorted(freq.items(), key=lambda kv: (-kv[1], kv[0])):
        if len(lexicon) >= args.entries:
            break
        if not WORD_RE.match(word):
            continue
        syns = []
        for pos, sense_no, offset in sorted(senses[word]):
            if sense_no > 2:
                continue
            for cand in synsets.get((pos, offset), []):
                if cand != word and WORD_RE.match(cand) and cand not in syns:
                    syns.append(cand)
        if syns:
            lexicon[word] = syns[: args.max_synonyms]

    print(json.dumps(dict(sorted(lexicon.items())), indent=1, ensure_ascii=False))


if __name__ == "__main__":
    main()
