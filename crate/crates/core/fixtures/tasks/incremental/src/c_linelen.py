def mean(values):
    total = 0
    for v in values:
        total += v
    return total / len(values)


def lines_of(text):
    parts = []
    for part in text.split("\n"):
        if part:
            parts.append(part)
    return parts


print(mean([len(p) for p in lines_of("alpha beta,gamma delta")]))
