"""Signed base-36 tokens: ``encode(-71) == "c-1z"``."""
ALPHABET = "0123456789abcdefghijklmnopqrstuvwxyz"


def encode(n: int) -> str:
    sign = "-" if n < 0 else ""
    n = abs(n)
    digits = ""
    while True:
        n, r = divmod(n, 36)
        digits = ALPHABET[r] + digits
        if n == 0:
            break
    return "c" + sign + digits


def decode(token: str) -> int:
    if not token.startswith("c"):
        raise ValueError(f"not a codec token: {token!r}")
    body = token[1:]
    sign = -1 if body.startswith("-") else 1
    return sign * int(body.lstrip("-"), 36)
