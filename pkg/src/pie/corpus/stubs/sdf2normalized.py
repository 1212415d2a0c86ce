"""Stub normalizer: sdf2normalized FILE [-IDIR]... -oNORM -dDEP

Inlines every ``imports NAME`` found in an include directory and writes the
list of inlined files (relative to the dep file) to DEP.
"""

import os
import sys


def main(argv):
    src = norm = dep = None
    includes = []
    for arg in argv:
        if arg.startswith("-I"):
            includes.append(arg[2:])
        elif arg.startswith("-o"):
            norm = arg[2:]
        elif arg.startswith("-d"):
            dep = arg[2:]
        else:
            src = arg
    if not (src and norm and dep):
        print("usage: sdf2normalized FILE [-IDIR]... -oNORM -dDEP", file=sys.stderr)
        return 2
    with open(src, encoding="utf-8") as fh:
        text = fh.read()
    found = []
    for line in text.splitlines():
        words = line.split()
        if not words or words[0] != "imports":
            continue
        for name in words[1:]:
            for d in includes:
                cand = os.path.join(d, name + ".sdf")
                if os.path.isfile(cand):
                    found.append(cand)
                    break
            else:
                print(f"{src}: cannot resolve import {name}", file=sys.stderr)
                return 1
    out = [f"normalized {os.path.basename(src)}", text.rstrip("\n")]
    for path in found:
        with open(path, encoding="utf-8") as fh:
            out.append(f"-- from {os.path.basename(path)}")
            out.append(fh.read().rstrip("\n"))
    with open(norm, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
    base = os.path.dirname(os.path.abspath(dep))
    with open(dep, "w", encoding="utf-8") as fh:
        fh.writelines(os.path.relpath(os.path.abspath(p), base) + "\n" for p in found)
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
