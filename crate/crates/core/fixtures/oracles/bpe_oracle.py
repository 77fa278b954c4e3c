"""One-time oracle: train a small byte-level BPE on the code fixtures with the
reference `tokenizers` library, save it, and record reference token counts.

Usage: python3 bpe_oracle.py <fixtures-dir>
"""
import glob
import json
import os
import sys

from tokenizers import Regex, Tokenizer, decoders, models, pre_tokenizers, trainers

PATTERN = (r"(?i:'s|'t|'re|'ve|'m|'ll|'d)|[^\r\n\p{L}\p{N}]?\p{L}+|\p{N}"
           r"| ?[^\s\p{L}\p{N}]+[\r\n]*|\s*[\r\n]+|\s+(?!\S)|\s+")

EXTRA = [
    "",
    "a b",
    "def f(x):\n    return x",
    "x = 1",
    "  indented\tand\ttabbed  \n\n\n",
    "unicode: café naïve — 数字 123456",
    "it's we'll THEY'RE",
    "<|endoftext|>def g():<|endoftext|> pass",
]


def main():
    root = sys.argv[1]
    files = sorted(glob.glob(os.path.join(root, "code", "**", "*.py"), recursive=True))
    tok = Tokenizer(models.BPE())
    tok.pre_tokenizer = pre_tokenizers.Sequence([
        pre_tokenizers.Split(Regex(PATTERN), behavior="isolated", invert=False),
        pre_tokenizers.ByteLevel(add_prefix_space=False, use_regex=False),
    ])
    tok.decoder = decoders.ByteLevel()
    trainer = trainers.BpeTrainer(
        vocab_size=700,
        min_frequency=2,
        special_tokens=["<|endoftext|>"],
        initial_alphabet=pre_tokenizers.ByteLevel.alphabet(),
        show_progress=False,
    )
    tok.train(files, trainer)
    out_dir = os.path.join(root, "tokenizer")
    tok.save(os.path.join(out_dir, "tokenizer.json"))

    counts = {"texts": [], "files": {}}
    for text in EXTRA:
        counts["texts"].append({"text": text, "count": len(tok.encode(text, add_special_tokens=False).ids)})
    for path in files:
        text = open(path).read()
        rel = os.path.relpath(path, root)
        counts["files"][rel] = len(tok.encode(text, add_special_tokens=False).ids)
    with open(os.path.join(out_dir, "counts.json"), "w") as fh:
        json.dump(counts, fh, indent=2, ensure_ascii=False, sort_keys=True)
        fh.write("\n")


if __name__ == "__main__":
    main()
