import re


normalize_char_map = {
    ord("ä"): "ae",
    ord("Ä"): "Ae",
    ord("ö"): "oe",
    ord("Ö"): "Oe",
    ord("ü"): "ue",
    ord("Ü"): "Ue",
    ord("ß"): "ss",
    ord("é"): "e",
    ord("è"): "e",
    ord("à"): "a",
    ord("ø"): "oe",
    ord("å"): "aa",
}

MPS_NAME_LENGTH = 255


def normalize_for_filename(text: str) -> str:
    """
    Normalizes a given string for use within a filename. The returned value
    is lowercase, has whitespace replaced by dashes, umlauts transliterated
    and every other char outside of `[a-z0-9-_]` removed.
    """
    text = text.lower()
    text = re.sub(r"\s+", "-", text)
    text = text.translate(normalize_char_map)
    text = re.sub(r"[^a-z0-9-_]", "", text)
    return text


def normalize_for_mps(text: str) -> str:
    """
    Normalizes a row or column label for the interchange format: whitespace
    becomes an underscore, umlauts are transliterated, remaining characters
    outside of printable ASCII are dropped and the result is cut to 255 chars.
    A leading `*` or `$` would start a comment and is prefixed with `_`.
    """
    text = re.sub(r"\s+", "_", text)
    text = text.translate(normalize_char_map)
    text = re.sub(r"[^\x21-\x7e]", "", text)
    if text == "" or text[0] in "*$":
        text = f"_{text}"
    return text[:MPS_NAME_LENGTH]
