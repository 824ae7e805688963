#!/usr/bin/env python3
"""Harvest English prose paragraphs from Python docstrings into a text sample.

The output is deterministic for a given set of installed packages: files are
visited in sorted order, paragraphs are deduplicated, and collection stops at
the requested size. One paragraph per line.
"""
import argparse
import ast
import os
import re
import sysconfig

ROOT_PACKAGES = ["scipy", "sklearn", "pandas", "numpy", "statsmodels", "sympy",
                 "networkx", "matplotlib", "transformers", "torch"]

WORD = re.compile(r"[A-Za-z]+")


def roots():
    out = [sysconfig.get_paths()["stdlib"]]
    purelib = sysconfig.get_paths()["purelib"]
    for base in [purelib, "/usr/local/lib/python3.10/dist-packages",
                 "/usr/lib/python3/dist-packages"]:
        for pkg in ROOT_PACKAGES:
            path = os.path.join(base, pkg)
            if os.path.isdir(path) and path not in out:
                out.append(path)
    for base in ["/usr/local/lib/python3.10/dist-packages",
                 "/usr/lib/python3/dist-packages"]:
        if not os.path.isdir(base):
            continue
        for name in sorted(os.listdir(base)):
            path = os.path.join(base, name)
            if os.path.isdir(path) and path not in out:
                out.append(path)
    return out


def is_prose(par):
    if any(l.lstrip().startswith((">>>", "...", "..", ":", "-", "*", "|", "$"))
           for l in par):
        return False
    text = " ".join(l.strip() for l in par)
    words = WORD.findall(text)
    if len(words) < 8:
        return False
    nonspace = [c for c in text if not c.isspace()]
    letters = sum(c.isalpha() for c in nonspace)
    if letters < 0.85 * len(nonspace):
        return False
    if any(tok in text for tok in ("``", "==", "->", "()", "_", "://", "\\")):
        return False
    return True


def paragraphs(doc):
    par = []
    for line in doc.splitlines():
        if line.strip():
            par.append(line)
        elif par:
            yield par
            par = []
    if par:
        yield par


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("output")
    ap.add_argument("--bytes", type=int, default=10_500_000)
    args = ap.parse_args()

    seen = set()
    size = 0
    with open(args.output, "w", encoding="utf-8", newline="\n") as out:
        for root in roots():
            for dirpath, dirnames, filenames in os.walk(root):
                dirnames.sort()
                dirnames[:] = [d for d in dirnames if d not in ("test", "tests")]
                for name in sorted(filenames):
                    if not name.endswith(".py"):
                        continue
                    try:
                        with open(os.path.join(dirpath, name), encoding="utf-8") as f:
                            tree = ast.parse(f.read())
                    except Exception:
                        continue
                    for node in ast.walk(tree):
                        if not isinstance(node, (ast.Module, ast.ClassDef,
                                                 ast.FunctionDef, ast.AsyncFunctionDef)):
                            continue
                        doc = ast.get_docstring(node)
                        if not doc:
                            continue
                        for par in paragraphs(doc):
                            if not is_prose(par):
                                continue
                            text = " ".join(l.strip() for l in par)
                            if text in seen:
                                continue
                            seen.add(text)
                            out.write(text + "\n")
                            size += len(text.encode("utf-8")) + 1
                            if size >= args.bytes:
                                return


if __name__ == "__main__":
    main()
