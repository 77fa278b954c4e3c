def mean(values):
    total = 0
    for v in values:
        total += v
    return total / len(values)


def words_of(text):
    parts = []
    for part in text.split(" "):
        if part:
            parts.append(part)
    return parts


print(mean([len(p) for p in words_of("alpha beta,gamma delta")]))
