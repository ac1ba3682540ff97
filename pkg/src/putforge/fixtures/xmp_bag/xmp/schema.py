"""Tiny XMP-like metadata container."""
from typing import Optional


class TextItem:
    def __init__(self, ns_uri: Optional[str], prefix: str, name: str, value: str):
        self.ns_uri = ns_uri
        self.prefix = prefix
        self.name = name
        self.value = value

    def qualified_name(self) -> str:
        return f"{self.prefix}:{self.name}"


class Metadata:
    def __init__(self) -> None:
        self.items = []

    def create_text(self, ns_uri: Optional[str], prefix: str, name: str, value: str) -> TextItem:
        item = TextItem(ns_uri, prefix, name, value)
        self.items.append(item)
        return item
