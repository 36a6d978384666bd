"""String helpers."""


def count_words(text):
    words = 0
    in_word = False
    for ch in text:
        if ch == " ":
            in_word = False
        elif not in_word:
            in_word = True
            words += 1
    return words


def pad_left(text, width):
    missing = width - len(text)
    if missing > 0:
        return " " * missing + text
    return text


def initials(name):
    parts = name.split()
    out = ""
    for p in parts:
        out += p[0].upper()
    return out


def is_palindrome(text):
    i = 0
    j = len(text) - 1
    while i < j:
        if text[i] != text[j]:
            return False
        i += 1
        j -= 1
    return True
