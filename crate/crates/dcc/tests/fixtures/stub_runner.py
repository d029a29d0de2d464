"""Minimal runner speaking the sandbox pipe protocol, for tests.

Reads one JSON request line on stdin, answers with one JSON line on stdout.
Exit codes: 0 ok, 2 syntax error, 3 runtime error, 4 resource limit.
"""
import json
import math
import struct
import sys

import numpy as np


class Graph:
    def __init__(self, path):
        with open(path, "rb") as fh:
            data = fh.read()
        magic, version, n, s, count = struct.unpack_from("<4sHHHQ", data, 0)
        if magic != b"DCCG" or version != 1:
            raise ValueError("not a graph file")
        self.n, self.s = n, s
        off = 4 + 2 + 2 + 2 + 8
        self.offsets = struct.unpack_from("<%dQ" % (count + 1), data, off)
        off += 8 * (count + 1)
        self.adj = struct.unpack_from("<%dQ" % self.offsets[-1], data, off)

    def _rank(self, v):
        return int(v, 2)

    def neighbors(self, v):
        r = self._rank(v)
        return [format(u, "0%db" % self.n) for u in self.adj[self.offsets[r]:self.offsets[r + 1]]]

    def degree(self, v):
        r = self._rank(v)
        return self.offsets[r + 1] - self.offsets[r]

    def __getitem__(self, v):
        return self.neighbors(v)


def encode(x):
    if isinstance(x, (tuple, list)):
        return [encode(c) for c in x]
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return {"nan": True}
    if math.isinf(x):
        return {"inf": 1 if x > 0 else -1}
    return x


def reply(code, **fields):
    sys.stdout.write(json.dumps(fields) + "\n")
    sys.stdout.flush()
    sys.exit(code)


def main():
    req = json.loads(sys.stdin.readline())
    src = "def f(v, G, n, s):\n" + req["source"]
    try:
        code = compile(src, "<candidate>", "exec")
    except SyntaxError as e:
        reply(2, status="error", error_kind="syntax", message=str(e))
    G = Graph(req["graph_path"]) if req.get("graph_path") else None
    scope = {"np": np, "math": math}
    sys.setrecursionlimit(200)
    try:
        exec(code, scope)
        f = scope["f"]
        out = [encode(f(v, G, req["n"], req["s"])) for v in req["vertices"]]
    except (MemoryError, RecursionError) as e:
        reply(4, status="error", error_kind="resource", message=repr(e))
    except Exception as e:
        reply(3, status="error", error_kind="runtime", message=repr(e))
    reply(0, status="ok", priorities=out)


if __name__ == "__main__":
    main()
