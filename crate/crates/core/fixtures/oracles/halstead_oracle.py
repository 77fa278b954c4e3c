"""One-time oracle: recount Halstead operators/operands and SLOC with the
standard-library tokenizer and the committed classification table.

Usage: python3 halstead_oracle.py <table> <file>... > halstead_oracle.json
"""
import io
import json
import keyword
import math
import sys
import tokenize

SKIP = {tokenize.NEWLINE, tokenize.NL, tokenize.COMMENT, tokenize.INDENT,
        tokenize.DEDENT, tokenize.ENDMARKER, tokenize.ENCODING}


def load_table(path):
    table = {}
    for line in open(path):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, cls = line.split()
        if key != "version":
            table[key] = cls
    return table


def count(path, table):
    src = open(path).read()
    ops, opnds = {}, {}
    lines = set()
    for tok in tokenize.generate_tokens(io.StringIO(src).readline):
        if tok.type in SKIP:
            continue
        if tok.type == tokenize.NAME:
            key = tok.string if keyword.iskeyword(tok.string) else "name"
        elif tok.type == tokenize.NUMBER:
            key = "number"
        elif tok.type == tokenize.STRING:
            key = "string"
        else:
            key = tok.string
        cls = table.get(key, "ignore")
        if cls == "operator":
            ops[tok.string] = ops.get(tok.string, 0) + 1
        elif cls == "operand":
            opnds[tok.string] = opnds.get(tok.string, 0) + 1
        for ln in range(tok.start[0], tok.end[0] + 1):
            lines.add(ln)
    physical = src.splitlines()
    sloc = sum(1 for ln in lines if physical[ln - 1].strip())
    n = sum(ops.values()) + sum(opnds.values())
    eta = len(ops) + len(opnds)
    volume = n * math.log2(eta) if n else 0.0
    return {
        "operators_total": sum(ops.values()),
        "operators_distinct": len(ops),
        "operands_total": sum(opnds.values()),
        "operands_distinct": len(opnds),
        "volume": volume,
        "sloc": sloc,
    }


def main():
    table = load_table(sys.argv[1])
    out = {}
    for path in sys.argv[2:]:
        out[path.split("fixtures/")[-1]] = count(path, table)
    json.dump(out, sys.stdout, indent=2, sort_keys=True)
    print()


if __name__ == "__main__":
    main()
