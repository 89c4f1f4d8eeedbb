#!/usr/bin/env python3
"""Brute-force expected results for the eight example questions.

Each query is written out here as a plain Python predicate over the seed
files; nothing is parsed. Run from any directory:

    python3 fixtures/oracle/build_e2e_oracle.py > fixtures/oracle/e2e_expected.json
"""

import json
import re
from pathlib import Path

FIXTURES = Path(__file__).resolve().parent.parent


def seed(name):
    return json.loads((FIXTURES / "seed" / name).read_text())


def table(rows_of, columns, keep):
    return {"columns": columns, "rows": [[r.get(c) for c in columns] for r in rows_of if keep(r)]}


def union_columns(docs):
    out = []
    for d in docs:
        for k in d:
            if k not in out:
                out.append(k)
    return out


def tokens(text):
    return [t.lower() for t in re.split(r"[^0-9A-Za-z]+", text) if t]


def search(docs, clauses):
    scored = []
    for pos, d in enumerate(docs):
        total = 0
        ok = True
        for field, text in clauses:
            have = tokens(str(d.get(field, "")))
            for w in tokens(text):
                tf = have.count(w)
                if tf == 0:
                    ok = False
                total += tf
        if ok:
            scored.append((-total, pos, d))
    scored.sort(key=lambda t: (t[0], t[1]))
    cols = union_columns(docs)
    return {"columns": cols, "rows": [[d.get(c) for c in cols] for _, _, d in scored]}


def main():
    sql_rows = seed("projects_sql.json")["tables"][0]["rows"]
    docs = seed("projects_docs.json")["collections"][0]["documents"]
    graph = seed("research_network.json")
    tickets = seed("support_tickets.json")["indices"][0]["documents"]
    nodes = {n["id"]: n for n in graph["nodes"]}
    rels = graph["relationships"]

    def hop(rel_type, head_ok, target_ok):
        for n in graph["nodes"]:
            if not head_ok(n):
                continue
            for r in rels:
                if r["type"] == rel_type and r["from"] == n["id"] and target_ok(nodes[r["to"]]):
                    yield n, nodes[r["to"]]

    expected = [
        {
            "question": "Find support tickets related to MySQL issues raised by Sayali Shivpuje.",
            "source": "support_search",
            **search(tickets, [("description", "MySQL"), ("raised_by", "Sayali Shivpuje")]),
        },
        {
            "question": "Retrieve all open tickets related to Neo4j raised by Aniruddha Salve.",
            "source": "support_search",
            **search(tickets, [("description", "Neo4j"), ("raised_by", "Aniruddha Salve"), ("status", "open")]),
        },
        {
            "question": "List all active projects handled by Saba Attar.",
            "source": "projects_sql",
            **table(sql_rows, ["project_name"], lambda r: r["assigned_to"] == "Saba Attar" and r["status"] == "active"),
        },
        {
            "question": "Retrieve all completed projects assigned to Mahesh Deshmukh.",
            "source": "projects_sql",
            **table(
                sql_rows, ["project_name"], lambda r: r["assigned_to"] == "Mahesh Deshmukh" and r["status"] == "completed"
            ),
        },
        {
            "question": "Find all active projects assigned to Aniruddha Salve.",
            "source": "projects_docs",
            **table(
                docs,
                union_columns(docs),
                lambda d: d.get("assigned_to") == "Aniruddha Salve" and d.get("status") == "active",
            ),
        },
        {
            "question": "Retrieve all completed projects assigned to Saba Attar.",
            "source": "projects_docs",
            **table(
                docs,
                union_columns(docs),
                lambda d: d.get("assigned_to") == "Saba Attar" and d.get("status") == "completed",
            ),
        },
        {
            "question": "List all collaborators of Arnab Mitra Utsab.",
            "source": "research_graph",
            "columns": ["collaborator.name"],
            "rows": [
                [t["properties"]["name"]]
                for _, t in hop(
                    "COLLABORATES_WITH",
                    lambda n: n["label"] == "Researcher" and n["properties"].get("name") == "Arnab Mitra Utsab",
                    lambda n: n["label"] == "Researcher",
                )
            ],
        },
        {
            "question": "Find researchers working on AI projects in the domain of healthcare.",
            "source": "research_graph",
            "columns": ["r.name"],
            "rows": [
                [h["properties"]["name"]]
                for h, _ in hop(
                    "WORKS_ON",
                    lambda n: n["label"] == "Researcher",
                    lambda n: n["properties"].get("domain") == "AI in Healthcare",
                )
            ],
        },
    ]
    print(json.dumps(expected, indent=2))


if __name__ == "__main__":
    main()
