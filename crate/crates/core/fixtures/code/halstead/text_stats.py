from collections import Counter

STOP = {"the", "a", "an", "of"}


def words(text):
    out = []
    for raw in text.lower().split():
        w = raw.strip(".,;:!?'\"()")
        if w and w not in STOP:
            out.append(w)
    return out


def top(text, k=3):
    counts = Counter(words(text))
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [w for w, _ in ranked[:k]]


def longest(text):
    best = ""
    for w in words(text):
        best = w if len(w) > len(best) else best
    return best


def summary(text):
    ws = words(text)
    return {
        "n": len(ws),
        "unique": len(set(ws)),
        "top": top(text),
        "longest": longest(text),
        "ratio": len(set(ws)) / len(ws) if ws else 0.0,
    }


try:
    import sys
    data = sys.stdin.read()
except (OSError, ValueError):
    data = ""
else:
    data = data.strip()
finally:
    pass

print(summary(data))
