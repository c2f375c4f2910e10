#!/usr/bin/env python3
"""Regenerates include/mbrfuse/unicode_tables.hpp from Python's unicodedata.

The library needs three character classes:
  * a 1:1 lowercase mapping (code point -> code point),
  * the punctuation set (Unicode general categories P* plus ASCII ispunct),
  * the whitespace set (Unicode White_Space property).

The lowercase mapping is the single-code-point mapping: every code point
whose str.lower() is one code point uses that, and U+0130 (LATIN CAPITAL
LETTER I WITH DOT ABOVE, the only multi-char lowering) maps to U+0069.
Multi-character case foldings (e.g. U+00DF -> "ss") are deliberately not
used: normalization guarantees that output length never exceeds input
length, which a 1:1 mapping preserves.

Run from the repository root:  python3 scripts/gen_unicode_tables.py
"""

import sys
import unicodedata

OUT = "include/mbrfuse/unicode_tables.hpp"

ASCII_PUNCT = set(map(ord, r"""!"#$%&'()*+,-./:;<=>?@[\]^_`{|}~"""))

# Unicode White_Space property (PropList.txt); stable across recent versions.
WHITESPACE = sorted(
    list(range(0x09, 0x0E)) + [0x20, 0x85, 0xA0, 0x1680]
    + list(range(0x2000, 0x200B)) + [0x2028, 0x2029, 0x202F, 0x205F, 0x3000]
)


def lower_map():
    pairs = []
    for cp in range(0x110000):
        if 0xD800 <= cp <= 0xDFFF:
            continue
        lo = chr(cp).lower()
        if cp == 0x0130:
            pairs.append((cp, 0x0069))
        elif len(lo) == 1 and lo != chr(cp):
            pairs.append((cp, ord(lo)))
    # Sanity: mapping must be idempotent and must not produce punctuation
    # or whitespace, otherwise normalization-step ordering breaks.
    targets = {t for _, t in pairs}
    mapped = dict(pairs)
    for t in targets:
        assert t not in mapped, f"non-idempotent lowering via {hex(t)}"
        assert unicodedata.category(chr(t))[0] != "P" and t not in ASCII_PUNCT
        assert t not in set(WHITESPACE)
    return pairs


def punct_ranges():
    cps = set(ASCII_PUNCT)
    for cp in range(0x110000):
        if 0xD800 <= cp <= 0xDFFF:
            continue
        if unicodedata.category(chr(cp)).startswith("P"):
            cps.add(cp)
    ranges = []
    for cp in sorted(cps):
        if ranges and cp == ranges[-1][1] + 1:
            ranges[-1][1] = cp
        else:
            ranges.append([cp, cp])
    return ranges


def main():
    pairs = lower_map()
    pranges = punct_ranges()
    with open(OUT, "w", encoding="utf-8") as f:
        w = f.write
        w("// Generated by scripts/gen_unicode_tables.py -- do not edit by hand.\n")
        w(f"// Source: Python unicodedata, Unicode {unicodedata.unidata_version}.\n")
        w("#pragma once\n\n#include <cstdint>\n\nnamespace mbrfuse::uni::tables {\n\n")

        w("// code point -> its single-code-point lowercase form (distinct pairs only),\n")
        w("// sorted by code point for binary search.\n")
        w(f"inline constexpr uint32_t kLowerMap[][2] = {{  // {len(pairs)} entries\n")
        for i in range(0, len(pairs), 6):
            row = ", ".join(f"{{0x{a:04X}, 0x{b:04X}}}" for a, b in pairs[i : i + 6])
            w(f"    {row},\n")
        w("};\n\n")

        w("// inclusive [lo, hi] ranges: Unicode general category P* plus ASCII ispunct,\n")
        w("// sorted by lo.\n")
        w(f"inline constexpr uint32_t kPunctRanges[][2] = {{  // {len(pranges)} ranges\n")
        for i in range(0, len(pranges), 6):
            row = ", ".join(f"{{0x{a:04X}, 0x{b:04X}}}" for a, b in pranges[i : i + 6])
            w(f"    {row},\n")
        w("};\n\n")

        w("// Unicode White_Space code points, sorted.\n")
        w("inline constexpr uint32_t kWhitespace[] = {\n    ")
        w(", ".join(f"0x{cp:04X}" for cp in WHITESPACE))
        w("\n};\n\n}  // namespace mbrfuse::uni::tables\n")
    print(f"wrote {OUT}: {len(pairs)} lower pairs, {len(pranges)} punct ranges",
          file=sys.stderr)


if __name__ == "__main__":
    main()
