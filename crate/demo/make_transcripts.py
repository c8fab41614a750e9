"""Writes the hand-scripted replay transcripts used by the demo.

Answers are computed from the CSVs in data/, so regenerate after
`cadastre generate-fixture demo/data`.
"""

import json
from pathlib import Path

import pandas as pd

HERE = Path(__file__).parent
DATA = HERE / "data"

b1740 = pd.read_csv(DATA / "buildings_1740.csv")
b1808 = pd.read_csv(DATA / "buildings_1808.csv")

CODE = "```python\n{body}\nprint(f\"The answer is: [[{{answer}}]]\")\n```"


def completion(role, seed, response):
    return {"type": "completion", "role_tag": role, "seed": seed, "response": response}


def execution(seed, status, stdout="", stderr=""):
    return {"type": "execution", "seed": seed, "status": status, "stdout": stdout, "stderr": stderr}


def run(seed, refs, verdicts, plan, body, outcomes, judge_rows, debug_bodies=()):
    out = [completion("column_extractor", seed, f"Let's think step by step. Output: {refs}")]
    out += [completion("row_extractor", seed, f"Output: [[{v}]]") for v in verdicts]
    out.append(completion("planner", seed, plan))
    out.append(completion("coder", seed, CODE.format(body=body)))
    for i, (status, text) in enumerate(outcomes):
        if status == "ok":
            out.append(execution(seed, "ok", stdout=f"The answer is: [[{text}]]\n"))
        else:
            out.append(execution(seed, status, stderr=text))
            out.append(completion("debugger", seed, CODE.format(body=debug_bodies[i])))
    out.append(completion("judge", seed, f"The program filters the 1740 buildings. [[{judge_rows}]]"))
    return out


doctors = int((b1740["profession"] == "medico").sum())
lawyers = int(b1740["profession"].isin(["avocato", "avvocato"]).sum())
total = len(b1740)
families = len(set(b1740["owner_family_name"]) & set(b1808["owner_family_name"]))
top = b1808[b1808["building_functions"].str.contains("bottega")]["parish"].value_counts()
top_parish = top.index[0]
second_parish = top.index[1]

questions = [
    ("q01", "How many medical doctors are there in Venice in 1740?", "personal", "numerical"),
    ("q02", "Are there more lawyers than medical doctors in 1740?", "personal", "yes/no"),
    ("q03", "Which parish has the most workshops in 1808?", "spatial", "single textual entity name"),
    ("q04", "How many families present in Venice in 1740 still exist in 1808?", "temporal", "numerical"),
]
(HERE / "questions.jsonl").write_text(
    "".join(
        json.dumps({"id": i, "question": q, "category": c, "answer_type": t}) + "\n"
        for i, q, c, t in questions
    )
)

doctor_refs = '[("medical doctors", "profession", 1)]'
lawyer_refs = '[("lawyers", "profession", 1), ("medical doctors", "profession", 1)]'
workshop_refs = '[("workshops", "building_functions", 2), ("parish", "parish", 2)]'
family_refs = '[("families", "owner_family_name", 1), ("families", "owner_family_name", 2)]'
records = []
for seed in (1, 2, 3):
    records += run(
        seed, doctor_refs, ["True"], "1. Filter 1740 buildings whose profession is 'medico'.\n2. Count them.",
        "answer = (df_1740['profession'] == 'medico').sum()", [("ok", doctors)], doctors,
    )
for seed in (1, 2, 3):
    # seed 2 first forgets the second spelling and crashes, then recovers
    outcomes = [("ok", "yes" if lawyers > doctors else "no")]
    if seed == 2:
        outcomes = [("error", "KeyError: 'professione'")] + outcomes
    records += run(
        seed, lawyer_refs, ["True", "True"], "1. Count lawyers ('avocato', 'avvocato').\n2. Count 'medico'.\n3. Compare.",
        "answer = 'yes' if df_1740['profession'].isin(['avocato', 'avvocato']).sum() > (df_1740['profession'] == 'medico').sum() else 'no'",
        outcomes, lawyers + doctors, debug_bodies=["answer = 'yes'"],
    )
for seed, parish, rows in ((1, top_parish, 80), (2, top_parish, 80), (3, second_parish, 74)):
    records += run(
        seed, workshop_refs, ["True", "False"], "1. Keep 1808 buildings with 'bottega' among their functions.\n2. Count per parish.\n3. Take the largest.",
        "answer = df_1808[df_1808['building_functions'].str.contains('bottega')]['parish'].value_counts().idxmax()",
        [("ok", parish)], rows,
    )
for seed, answer in ((1, families), (2, families), (3, families)):
    records += run(
        seed, family_refs, ["False", "False"], "1. Collect family names of both years.\n2. Count the intersection.",
        "answer = len(set(df_1740['owner_family_name']) & set(df_1808['owner_family_name']))",
        [("ok", answer)], total if seed != 3 else total + len(b1808),
    )
(HERE / "replay.jsonl").write_text("".join(json.dumps(r) + "\n" for r in records))

ask = run(
    1, doctor_refs, ["True"], "1. Filter 1740 buildings whose profession is 'medico'.\n2. Count them.",
    "answer = (df_1740['profession'] == 'medico').sum()", [("ok", doctors)], doctors,
)
(HERE / "ask.jsonl").write_text("".join(json.dumps(r) + "\n" for r in ask))

entities = [
    completion("column_extractor", 1,
               'Output: [("houses", "building_functions", 1), ("church", "landmark_type", 3)]'),
    completion("row_extractor", 1, "Output: [[True]]"),
    completion("row_extractor", 1, "Output: [[True]]"),
]
(HERE / "entities.jsonl").write_text("".join(json.dumps(r) + "\n" for r in entities))

sql = []
for line in (HERE.parent / "crates/core/data/browse_questions.jsonl").read_text().splitlines():
    q = json.loads(line)
    for seed in (1, 2, 3, 4):
        sql.append(completion("sql_generator", seed, f"```sql\n{q['gt_sql']}\n```"))
(HERE / "sql_replay.jsonl").write_text("".join(json.dumps(r) + "\n" for r in sql))
