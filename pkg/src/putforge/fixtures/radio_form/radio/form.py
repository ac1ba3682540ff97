"""A miniature interactive form holding radio button fields."""
import json
from pathlib import Path


class RadioButton:
    def __init__(self, name, options, value="Off"):
        self.name = name
        self.options = tuple(options)
        self.value = value

    def select_option(self, value: str) -> None:
        # Unknown options are stored as-is but export nothing.
        self.value = value

    def get_value(self) -> str:
        return self.value

    def get_selected_export_values(self) -> list:
        return [self.value] if self.value in self.options else []


class Form:
    def __init__(self, fields):
        self.fields = {f.name: f for f in fields}

    @classmethod
    def load(cls, path: Path) -> "Form":
        data = json.loads(Path(path).read_text())
        return cls([RadioButton(f["name"], f["options"], f.get("value", "Off")) for f in data["fields"]])

    def get_field(self, name) -> RadioButton:
        return self.fields[name]

    def save(self, path: Path) -> None:
        data = {"fields": [{"name": f.name, "options": list(f.options), "value": f.value}
                           for f in self.fields.values()]}
        Path(path).write_text(json.dumps(data))
