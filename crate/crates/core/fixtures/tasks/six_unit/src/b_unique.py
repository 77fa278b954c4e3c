def normalize(text):
    return text.strip().lower()


def split_words(text):
    words = []
    for part in normalize(text).split(" "):
        if part:
            words.append(part)
    return words


def unique_words(text):
    return sorted(set(split_words(text)))


print(unique_words("to be or not to be"))
