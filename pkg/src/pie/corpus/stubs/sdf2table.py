"""Stub parse table generator: sdf2table NORM... -oTABLE"""

import hashlib
import os
import sys


def main(argv):
    out = None
    inputs = []
    for arg in argv:
        if arg.startswith("-o"):
            out = arg[2:]
        else:
            inputs.append(arg)
    if not out or not inputs:
        print("usage: sdf2table NORM... -oTABLE", file=sys.stderr)
        return 2
    parts = []
    for path in inputs:
        with open(path, encoding="utf-8") as fh:
            parts.append(f"== {os.path.basename(path)}\n{fh.read()}")
    body = "".join(parts)
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()[:16]
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(f"parse-table {digest}\n{body}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
