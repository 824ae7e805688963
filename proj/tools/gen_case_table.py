#!/usr/bin/env python3
"""Regenerate src/case_table.inc: simple (1:1) Unicode lowercase mappings."""
import sys
import unicodedata

SPECIAL = {0x0130: 0x0069}  # simple mapping differs from the full one


def simple_lower(cp):
    if cp in SPECIAL:
        return SPECIAL[cp]
    low = chr(cp).lower()
    return ord(low) if len(low) == 1 else cp


def main(path):
    rows = []
    for cp in range(0x110000):
        if 0xD800 <= cp <= 0xDFFF:
            continue
        low = simple_lower(cp)
        if low != cp:
            rows.append((cp, low))
    with open(path, "w") as f:
        f.write("// Generated by tools/gen_case_table.py (Unicode %s). Do not edit.\n"
                % unicodedata.unidata_version)
        for cp, low in rows:
            f.write("{0x%04X, 0x%04X},\n" % (cp, low))


if __name__ == "__main__":
    main(sys.argv[1])
