"""Encode a batch of order numbers, as the export job does."""
from codec import encode

tokens = [encode(order) for order in range(1000, 1100)]
tokens.append(encode(1000))
print(f"{len(tokens)} tokens, {len(set(tokens))} distinct")
