import json, random, sys
M, C = "Melanie", "Caroline"
vocab = {
 "pottery": "clay bowls wheel kiln glaze studio vase mug shelf fired spin handle".split(),
 "hiking": "trail summit boots ridge backpack map sunrise muddy wind peak tent lake".split(),
 "cooking": "soup basil pasta sauce bread oven curry spice stew garlic pie butter".split(),
 "garden": "tomatoes roses soil compost fence seeds hose beds worms bloom shovel mulch".split(),
 "music": "violin piano choir guitar chords album vinyl drums rhythm concert scales songs".split(),
}
rng = random.Random(7)
def line(topic):
    return topic.capitalize() + " " + " ".join(rng.sample(vocab[topic], 3)) + "."
def ep(topic, plants=()):
    lines = [((M, C)[k % 2], line(topic)) for k in range(10)]
    for at, sp, t in plants: lines[at] = (sp, t)
    return lines
episodes = [
  ep("pottery", [(0, M, "Pottery class clay with Caroline.")]),
  ep("hiking", [(3, C, "Hiking peak Eagle Rock summit.")]),
  ep("cooking", [(5, M, "Pottery teacher Ingrid, clay wheel.")]),
  ep("pottery"),
  ep("garden", [(5, C, "Hiking guide Tomas, trail map.")]),
  ep("hiking"),
  ep("music", [(4, M, "Pottery glaze color cobalt, kiln.")]),
  ep("pottery"),
  ep("cooking", [(5, C, "Hiking tent brand Zelko, backpack.")]),
  ep("hiking"),
  ep("garden", [(6, M, "Pottery kiln nickname Bertha, vase.")]),
  ep("pottery", [(6, M, "Pottery clay shop Hollis, studio.")]),
  ep("music", [(5, C, "Hiking lake nickname Mirror, boots.")]),
  ep("hiking", [(8, C, "Hiking bottle color teal, ridge.")]),
]
conv = {"conversation_id": "ablation", "participants": [M, C], "sessions": []}
for i, lines in enumerate(episodes):
    txt = "\n".join(f"{s}: {t}" for s, t in lines)
    assert len(txt) <= 400, (i, len(txt))
    day = "2023-%02d-%02dT10:00:00Z" % (3 + i // 4, 1 + 7 * (i % 4))
    utts = [{"speaker_id": s, "text": t, "timestamp": day[:14] + "%02d:00Z" % k} for k, (s, t) in enumerate(lines)]
    conv["sessions"].append({"index": i + 1, "datetime": day, "utterances": utts})
json.dump(conv, open(sys.argv[1], "w"), indent=2)
qa = [
  ("Who is the pottery teacher?", "Ingrid", "single-hop"),
  ("Who was the hiking guide?", "Tomas", "single-hop"),
  ("Which pottery glaze color was used?", "cobalt", "single-hop"),
  ("What brand is the hiking tent?", "Zelko", "multi-hop"),
  ("What nickname does the pottery kiln have?", "Bertha", "multi-hop"),
  ("Which shop sold the pottery clay?", "Hollis", "open-domain"),
  ("What nickname has the hiking lake?", "Mirror", "open-domain"),
  ("What color is the hiking bottle?", "teal", "temporal"),
  ("Which hiking peak did Caroline reach?", "Eagle Rock", "single-hop"),
  ("Who took a pottery class with Caroline?", "Melanie", "single-hop"),
]
json.dump([{"question": q, "answer": a, "category": c, "evidence": []} for q, a, c in qa], open(sys.argv[2], "w"), indent=2)
