"""Writes the scripted-LLM rules, eval cases and small word tables for the
end-to-end fixture. Run from anywhere; outputs land next to this file."""

import json
import pathlib
import random
import re

HERE = pathlib.Path(__file__).resolve().parent

CHAT_QUERY = "What ransomware did FIN8 deploy?"
CHAT_ANSWER = "FIN8 deployed White Rabbit ransomware, which is based on the Sardonic backdoor."

CASES = [
    {
        "id": "vuln-semver",
        "source_kind": "vulnerability",
        "query": "Which versions of semver are vulnerable to ReDoS?",
        "bot_answer": "semver versions before 7.5.2 are vulnerable to ReDoS through the new Range function.",
        "human_answer": "Versions of semver before 7.5.2 are vulnerable to ReDoS via new Range.",
        "ground_truth": "semver before 7.5.2 is vulnerable to ReDoS. The flaw is reached through new Range.",
        "contexts": [
            "cve_id: CVE-2022-25883\ndescription: semver before 7.5.2 is vulnerable to Regular Expression Denial of Service (ReDoS) via the function new Range when untrusted user data is supplied as a range.",
            "cve_id: CVE-2021-3749\ndescription: axios before 0.21.2 is vulnerable to Inefficient Regular Expression Complexity, allowing a ReDoS through crafted header values.",
        ],
        "questions": [
            "Which semver versions are vulnerable to ReDoS?",
            "What function in semver triggers the ReDoS flaw?",
            "Is semver 7.5.1 vulnerable to ReDoS?",
            "Which versions of semver are affected by the new Range ReDoS?",
            "What kind of vulnerability affects semver before 7.5.2?",
        ],
        "answer_statements": [
            ("semver versions before 7.5.2 are vulnerable to ReDoS.", True),
            ("The ReDoS is reached through the new Range function.", True),
        ],
        "truth_statements": [
            ("semver before 7.5.2 is vulnerable to ReDoS.", True),
            ("The flaw is reached through new Range.", True),
        ],
        "context_statements": [
            [("semver before 7.5.2 is vulnerable to ReDoS.", True),
             ("The ReDoS is triggered via new Range with untrusted input.", True)],
            [("axios before 0.21.2 is vulnerable to ReDoS.", False),
             ("The axios flaw is triggered by crafted header values.", False)],
        ],
    },
    {
        "id": "apt-fin8",
        "source_kind": "apt_report",
        "query": "What was the name of the ransomware used by FIN8?",
        "bot_answer": "FIN8 used White Rabbit ransomware, which is based on Sardonic. The group also deployed Cl0p.",
        "human_answer": "FIN8 used the White Rabbit ransomware, built on the Sardonic backdoor.",
        "ground_truth": "FIN8 deployed White Rabbit ransomware. White Rabbit is based on Sardonic.",
        "contexts": [
            "The same intrusions ended with ransomware. FIN8 was observed deploying White Rabbit ransomware, a family whose loader is based on Sardonic.",
            "Analysts reported FIN7 operators deploying Cl0p ransomware in a campaign that started in late 2021.",
            "FIN8 is a financially motivated intrusion set that has targeted hospitality, retail and financial organisations since at least 2016.",
        ],
        "questions": [
            "Which ransomware did FIN8 use?",
            "What is White Rabbit ransomware based on?",
            "Which backdoor is White Rabbit built on?",
            "What ransomware families has FIN8 deployed?",
            "Did FIN8 deploy Cl0p ransomware?",
        ],
        "answer_statements": [
            ("FIN8 used White Rabbit ransomware.", True),
            ("White Rabbit is based on Sardonic.", True),
            ("FIN8 deployed Cl0p.", False),
        ],
        "truth_statements": [
            ("FIN8 deployed White Rabbit ransomware.", True),
            ("White Rabbit is based on Sardonic.", True),
        ],
        "context_statements": [
            [("FIN8 deployed White Rabbit ransomware.", True),
             ("The White Rabbit loader is based on Sardonic.", True)],
            [("FIN7 deployed Cl0p ransomware.", False),
             ("The Cl0p campaign started in late 2021.", False)],
            [("FIN8 is financially motivated.", False),
             ("FIN8 has targeted hospitality, retail and finance since 2016.", False)],
        ],
    },
    {
        "id": "blog-jupyter",
        "source_kind": "security_blog",
        "query": "What are some aliases of the Jupyter Infostealer malware?",
        "bot_answer": "Polazert, SolarMarker, and Yellow Cockatoo",
        "human_answer": "Polazert, SolarMarker, and Yellow Cockatoo.",
        "ground_truth": "Jupyter Infostealer is also known as Polazert, SolarMarker and Yellow Cockatoo.",
        "contexts": [],
        "questions": [
            "What are the aliases of Jupyter Infostealer?",
            "What other names does the Jupyter Infostealer go by?",
            "Which malware is also called SolarMarker?",
            "Is Yellow Cockatoo an alias of Jupyter Infostealer?",
            "What are some aliases of the Jupyter Infostealer malware?",
        ],
        "answer_statements": [],
        "truth_statements": [
            ("Jupyter Infostealer is also known as Polazert.", False),
            ("Jupyter Infostealer is also known as SolarMarker.", False),
            ("Jupyter Infostealer is also known as Yellow Cockatoo.", False),
        ],
        "context_statements": [],
    },
    {
        "id": "vt-private-loader",
        "source_kind": "virustotal_report",
        "query": "List the different versions of Trojan.Win32.PRIVATE LOADER.YXCLPZ?",
        "bot_answer": "The different versions of Trojan.Win32.PRIVATE LOADER.YXCLPZ are 10.0.0.1040 and 11.0.0.1006.",
        "human_answer": "10.0.0.1040 and 11.0.0.1006.",
        "ground_truth": "Trojan.Win32.PRIVATE LOADER.YXCLPZ has versions 10.0.0.1040 and 11.0.0.1006.",
        "contexts": [
            "attributes.names[0]: Trojan.Win32.PRIVATE LOADER.YXCLPZ\nattributes.type_description: Win32 EXE\nattributes.versions[0]: 10.0.0.1040\nattributes.versions[1]: 11.0.0.1006",
        ],
        # Only four distinct questions come back, so question generation falls
        # short and the indirect and AR metrics record an error for this case.
        "questions": [
            "What versions of Trojan.Win32.PRIVATE LOADER.YXCLPZ exist?",
            "Which version numbers does PRIVATE LOADER.YXCLPZ have?",
            "Is 10.0.0.1040 a version of PRIVATE LOADER.YXCLPZ?",
            "Is 11.0.0.1006 a version of PRIVATE LOADER.YXCLPZ?",
        ],
        "answer_statements": [
            ("Trojan.Win32.PRIVATE LOADER.YXCLPZ has version 10.0.0.1040.", True),
            ("Trojan.Win32.PRIVATE LOADER.YXCLPZ has version 11.0.0.1006.", True),
        ],
        "truth_statements": [
            ("Trojan.Win32.PRIVATE LOADER.YXCLPZ has version 10.0.0.1040.", True),
            ("Trojan.Win32.PRIVATE LOADER.YXCLPZ has version 11.0.0.1006.", True),
        ],
        "context_statements": [
            [("The file is named Trojan.Win32.PRIVATE LOADER.YXCLPZ.", False),
             ("The file is a Win32 EXE.", False),
             ("The file has version 10.0.0.1040.", True),
             ("The file has version 11.0.0.1006.", True)],
        ],
    },
]

BAD_LINE = '{"query": "What does Taidoor use for command and control?", "source_kind": "apt_report"}'


def numbered(items):
    return "\n".join(f"{i}. {item}" for i, item in enumerate(items, 1))


def verdict(ok, why):
    return ("Yes. " if ok else "No. ") + why


def build_rules():
    rules = [
        {"contains": ["[User Query]\n" + CHAT_QUERY], "response": CHAT_ANSWER},
    ]
    for case in CASES:
        rules.append({"contains": ["distinct questions", "Answer:\n" + case["bot_answer"]],
                      "response": numbered(case["questions"])})
        if case["answer_statements"]:
            rules.append({"contains": ["factual statements", "Text:\n" + case["bot_answer"]],
                          "response": numbered(s for s, _ in case["answer_statements"])})
        rules.append({"contains": ["factual statements", "Text:\n" + case["ground_truth"]],
                      "response": numbered(s for s, _ in case["truth_statements"])})
        for ctx, statements in zip(case["contexts"], case["context_statements"]):
            rules.append({"contains": ["factual statements", "Text:\n" + ctx],
                          "response": numbered(s for s, _ in statements)})
        context_blob = "\n\n".join(case["contexts"])
        for s, ok in case["answer_statements"]:
            rules.append({"contains": ["directly inferred", "Context:\n" + context_blob + "\n\nStatement: " + s + "\n"],
                          "response": verdict(ok, "The context " + ("states" if ok else "does not state") + " this.")})
        for s, ok in case["truth_statements"]:
            rules.append({"contains": ["present in the context", "Context:\n" + context_blob + "\n\nStatement: " + s + "\n"],
                          "response": verdict(ok, "The context " + ("covers" if ok else "does not cover") + " this.")})
        for statements in case["context_statements"]:
            for s, ok in statements:
                rules.append({"contains": ["relevant to the ground truth",
                                           "Ground truth answer:\n" + case["ground_truth"] + "\n\nStatement: " + s + "\n"],
                              "response": verdict(ok, "It " + ("matches" if ok else "does not bear on") + " the ground truth.")})
    return rules


def write_cases():
    keys = ["id", "source_kind", "query", "bot_answer", "human_answer", "ground_truth", "contexts"]
    lines = [json.dumps({k: c[k] for k in keys}, ensure_ascii=False) for c in CASES]
    (HERE / "cases.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    # Same cases plus a blank line and one line missing bot_answer.
    lines[2:2] = [BAD_LINE, ""]
    (HERE / "cases_with_bad_line.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_tables():
    vocab = set()
    for c in CASES:
        for text in (c["bot_answer"], c["human_answer"]):
            vocab.update(t for t in re.split(r"[^0-9a-z]+", text.lower()) if t)
    words = sorted(vocab)
    rng = random.Random(20240501)
    w2v = [f"{len(words)} 16"]
    for w in words:
        w2v.append(w + " " + " ".join(f"{rng.uniform(-1, 1):.6f}" for _ in range(16)))
    # The GloVe-style table deliberately covers only half the vocabulary.
    glove = []
    for w in words[::2]:
        glove.append(w + " " + " ".join(f"{rng.uniform(-1, 1):.6f}" for _ in range(20)))
    (HERE / "tables").mkdir(exist_ok=True)
    (HERE / "tables" / "w2v_small.txt").write_text("\n".join(w2v) + "\n", encoding="utf-8")
    (HERE / "tables" / "glove_small.txt").write_text("\n".join(glove) + "\n", encoding="utf-8")


def main():
    script = {"model": "scripted-double", "rules": build_rules()}
    (HERE / "script.json").write_text(json.dumps(script, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    write_cases()
    write_tables()


if __name__ == "__main__":
    main()
