"""Import three metadata packets."""
from xmp.schema import Metadata

PACKETS = [
    ("nsURI", "nsSchem", "li", "valueTwo"),
    ("http://purl.org/dc/elements/1.1/", "dc", "title", "Hello"),
    ("http://ns.adobe.com/xap/1.0/", "rdf", "Seq", "Item"),
    ("nsURI", "nsSchem", "li", "valueTwo"),
]

meta = Metadata()
for packet in PACKETS:
    meta.create_text(*packet)
print(len(meta.items), "items")
