def normalize(text):
    return text.strip().lower()


def split_words(text):
    words = []
    for part in normalize(text).split(" "):
        if part:
            words.append(part)
    return words


def longest_word(text):
    best = ""
    for word in split_words(text):
        if len(word) > len(best):
            best = word
    return best


print(longest_word("A journey of a thousand miles"))
