"""Stub build tool: mvn-stub verify -f POM

Packs the POM and every .java/.scala file under src/ into
target/benchmarks.jar. Unchanged sources give a byte-identical jar.
"""

import os
import sys


def main(argv):
    if len(argv) != 3 or argv[0] != "verify" or argv[1] != "-f":
        print("usage: mvn-stub verify -f POM", file=sys.stderr)
        return 2
    pom = argv[2]
    root = os.path.dirname(os.path.abspath(pom))
    sources = []
    for dirpath, dirnames, filenames in os.walk(os.path.join(root, "src")):
        dirnames.sort()
        for name in sorted(filenames):
            if name.endswith((".java", ".scala")):
                sources.append(os.path.join(dirpath, name))
    chunks = [b"benchmarks-jar\n"]
    for path in [pom] + sources:
        with open(path, "rb") as fh:
            rel = os.path.relpath(path, root).replace(os.sep, "/")
            chunks.append(b"== " + rel.encode() + b"\n" + fh.read() + b"\n")
    target = os.path.join(root, "target")
    os.makedirs(target, exist_ok=True)
    with open(os.path.join(target, "benchmarks.jar"), "wb") as fh:
        fh.write(b"".join(chunks))
    print(f"[INFO] packed {len(sources)} source file(s)")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
