"""
Talking to the language model
==============================

Three questions go to the language model: which region a window of
objects belongs to, what the user wants fetched, and in which order to
search the regions.  Here we look at the requests and replies without a
network connection.
"""

# the system prompts are fixed strings
import json

from semovmm.backend import (
    PRIORITIZATION_SYSTEM,
    RemoteBackend,
    decode_reply,
    prioritization_request,
    region_proposal_request,
    reprioritize,
)
from semovmm.scene import default_scene

print(PRIORITIZATION_SYSTEM[:200], "...")

# user messages are small JSON objects
print(json.dumps(region_proposal_request(["mug", "kettle", "sink"], ["kitchen", "bar", "office table"])))
print(json.dumps(prioritization_request(["kitchen", "bar", "washing area"], "soap")))

# replies often come wrapped in a code fence, sometimes with single quotes
print(decode_reply("```json\n{'ordered_regions': ['washing area', 'kitchen', 'bar']}\n```"))

# the mock backend answers from an affinity table, deterministically
mock = default_scene().mock_backend()
print(mock.parse_instruction("Fetch the spray cleaner from the entertainment area."))
print(mock.parse_instruction("Fetch the milk powder."))
order = mock.prioritize_regions(["entertainment area", "washing area", "kitchen", "bar", "office table"],
                                "controller")
print("controller:", order)

# a hint moves its region to the front and keeps the rest in order
print("with hint:", reprioritize(order, "washing area"))


# the remote client takes a pluggable transport; this one plays the model
def canned(url, body, headers, timeout):
    system = body["messages"][0]["content"]
    if system == PRIORITIZATION_SYSTEM:
        regions = json.loads(body["messages"][1]["content"])["regions"]
        content = json.dumps({"ordered_regions": sorted(regions)})
    else:
        content = '```json\n{"target_object": "mug", "region_hint": null}\n```'
    return {"choices": [{"message": {"content": content}}]}


remote = RemoteBackend(base_url="http://model.invalid/v1", model="demo", api_key="none", transport=canned)
print(remote.parse_instruction("bring me a mug"))
print(remote.prioritize_regions(["kitchen", "bar"], "mug"))
