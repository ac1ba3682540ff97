"""Replay a recorded batch of end-user form submissions."""
from radio.form import Form

SUBMISSIONS = ["Off", "Yes", "On", "c", "d", "B", "0", "1", "", "Choice 1", "Off", "c", "b "]

form = Form.load("radio/data/radio.json")
button = form.get_field("MyRadioButton")
exported = 0
for choice in SUBMISSIONS:
    button.select_option(choice)
    exported += len(button.get_selected_export_values())
print(f"{len(SUBMISSIONS)} submissions, {exported} exported")
