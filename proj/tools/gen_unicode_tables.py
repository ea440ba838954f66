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
"""Regenerates include/lbar/detail/unicode_tables.hpp from Python's unicodedata."""

import sys
import unicodedata

MAX_CP = 0x110000


def ranges(pred):
    out, start = [], None
    for cp in range(MAX_CP):
        hit = pred(cp)
        if hit and start is None:
            start = cp
        elif not hit and start is not None:
            out.append((start, cp - 1))
            start = None
    if start is not None:
        out.append((start, MAX_CP - 1))
    return out


def lower_runs():
    pairs = []
    for cp in range(MAX_CP):
        low = chr(cp).lower()
        if len(low) == 1 and ord(low) != cp:
            pairs.append((cp, ord(low) - cp))
    runs = []  # (lo, hi, delta, stride)
    i = 0
    while i < len(pairs):
        lo, delta = pairs[i]
        stride = 0
        j = i
        if i + 1 < len(pairs) and pairs[i + 1][1] == delta and pairs[i + 1][0] - lo in (1, 2):
            stride = pairs[i + 1][0] - lo
            j = i + 1
            while j + 1 < len(pairs) and pairs[j + 1][1] == delta and pairs[j + 1][0] - pairs[j][0] == stride:
                j += 1
        runs.append((lo, pairs[j][0], delta, max(stride, 1)))
        i = j + 1
    return runs


def main():
    punct = ranges(lambda cp: unicodedata.category(chr(cp)).startswith("P"))
    space = ranges(lambda cp: chr(cp).isspace())
    lower = lower_runs()
    w = sys.stdout.write
    w("// Generated by tools/gen_unicode_tables.py from Unicode %s. Do not edit.\n" % unicodedata.unidata_version)
    w("#pragma once\n\n#include <array>\n#include <cstdint>\n\nnamespace lbar::detail {\n\n")
    w("struct CodepointRange {\n  char32_t lo;\n  char32_t hi;\n};\n\n")
    w("struct CaseRun {\n  char32_t lo;\n  char32_t hi;\n  std::int32_t delta;\n  std::uint32_t stride;\n};\n\n")
    for name, rs in (("kPunctuationRanges", punct), ("kWhitespaceRanges", space)):
        w("inline constexpr std::array<CodepointRange, %d> %s{{\n" % (len(rs), name))
        for lo, hi in rs:
            w("    {0x%04X, 0x%04X},\n" % (lo, hi))
        w("}};\n\n")
    w("inline constexpr std::array<CaseRun, %d> kLowercaseRuns{{\n" % len(lower))
    for lo, hi, delta, stride in lower:
        w("    {0x%04X, 0x%04X, %d, %d},\n" % (lo, hi, delta, stride))
    w("}};\n\n}  // namespace lbar::detail\n")


if __name__ == "__main__":
    main()
