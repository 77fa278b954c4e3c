def normalize(text):
    return text.strip().lower()


def split_words(text):
    words = []
    for part in normalize(text).split(" "):
        if part:
            words.append(part)
    return words


def count_words(text):
    return len(split_words(text))


print(count_words("  The quick brown Fox  "))
