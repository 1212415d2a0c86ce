"""Stub benchmark harness: jmh-stub -jar JAR PATTERN -p subject=ID [ARGS]... -rff CSV

Writes one CSV row whose score is derived from the jar bytes and subject.
"""

import hashlib
import os
import sys


def main(argv):
    try:
        jar = argv[argv.index("-jar") + 1]
        csv = argv[argv.index("-rff") + 1]
        subject = argv[argv.index("-p") + 1].partition("=")[2]
        pattern = argv[argv.index("-jar") + 2]
    except (ValueError, IndexError):
        print("usage: jmh-stub -jar JAR PATTERN -p subject=ID [ARGS]... -rff CSV", file=sys.stderr)
        return 2
    with open(jar, "rb") as fh:
        digest = hashlib.sha256(fh.read() + subject.encode()).digest()
    score = int.from_bytes(digest[:4], "little") % 100000
    os.makedirs(os.path.dirname(os.path.abspath(csv)), exist_ok=True)
    with open(csv, "w", encoding="utf-8") as fh:
        fh.write("benchmark,subject,score\n")
        fh.write(f"{pattern},{subject},{score}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
