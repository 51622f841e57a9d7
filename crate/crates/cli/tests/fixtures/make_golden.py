"""Builds the end-to-end scoring fixtures and their expected breakdowns.

Format verdicts, extracted answers and evidence lists are labelled by hand
per record. Rewards are then computed here directly from the reward
definitions, independently of the Rust implementation:

    IoU        = |A n B| / |A u B|
    ROUGE-L    = 2PR / (P + R) with P = LCS/|a|, R = LCS/|b|
    w_i        = 1 - max_{j != i} IoU(i, j) * ROUGE-L(i, j)
    R_h        = sum_i w_i * p_yes_i / (p_yes_i + p_no_i) / max(0.6 + 0.8 n, n)
    R          = R_a + 0.5 R_f_t + 0.5 R_f_e + 0.2 R_h   (R_h only if R_a > 0.5)

Run from this directory:  python3 make_golden.py
"""

import json
import string
from fractions import Fraction

VIDEO_DURATION = 60.0


def tokens(text):
    text = "".join(c for c in text if c not in string.punctuation).lower()
    return text.split()


def lcs(a, b):
    dp = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a)):
        for j in range(len(b)):
            dp[i + 1][j + 1] = dp[i][j] + 1 if a[i] == b[j] else max(dp[i][j + 1], dp[i + 1][j])
    return dp[-1][-1]


def rouge_l(x, y):
    a, b = tokens(x), tokens(y)
    m = lcs(a, b)
    if m == 0:
        return 0.0
    p = m / len(a)
    r = m / len(b)
    return 2.0 * p * r / (p + r)


def iou(a, b):
    inter = max(0.0, min(a[1], b[1]) - max(a[0], b[0]))
    union = (a[1] - a[0]) + (b[1] - b[0]) - inter
    return inter / union if union > 0 else 0.0


def normalizer(n):
    return float(max(Fraction(3, 5) + Fraction(4, 5) * n, Fraction(n)))


def tag(s, e, desc):
    return f'<start="{s:.1f}",end="{e:.1f}",desc="{desc}">'


# (id, task, question, ground_truth, response, hand labels)
# labels: think_fmt, evid_fmt, r_acc (None = computed from verifier), verdict
# key for oe, flags, evidence [(s, e, desc, (p_yes, p_no) | None | "out")]
RECORDS = []
JUDGE = []
VERIFY = []


def judged(path, s, e, desc, p):
    if p not in (None, "out"):
        JUDGE.append({"video_path": path, "start_s": s, "end_s": e, "caption": desc,
                      "p_yes": p[0], "p_no": p[1]})


def add(rid, task, gt, response, *, think_fmt, evid_fmt, r_acc, evidence,
        flags=(), question="What happens in the video?"):
    path = f"videos/{rid}.mp4"
    for s, e, d, p in evidence:
        judged(path, s, e, d, p)
    RECORDS.append(dict(id=rid, task=task, question=question, path=path, gt=gt,
                        response=response, think_fmt=think_fmt, evid_fmt=evid_fmt,
                        r_acc=r_acc, evidence=evidence, flags=list(flags)))


def verifier(question, reference, answer, p_c, p_ic):
    VERIFY.append({"question": question, "reference": reference, "answer": answer,
                   "p_correct": p_c, "p_incorrect": p_ic})
    return p_c / (p_ic + p_c)


E = lambda s, e, d, p=None: (s, e, d, p)

ev = [E(2.0, 6.0, "a man cuts onions", (0.9, 0.1))]
add("r01", "mc", {"option": "B"},
    f"<think>The clip opens on a kitchen. {tag(*ev[0][:3])} He is cooking.</think><answer>B</answer>",
    think_fmt=1, evid_fmt=1, r_acc=1.0, evidence=ev)

ev = [E(0.0, 3.0, "a dog runs", (0.8, 0.2))]
add("r02", "mc", {"option": "C"},
    f"<think>{tag(*ev[0][:3])} It is unclear.</think><answer>I am not sure.</answer>",
    think_fmt=1, evid_fmt=1, r_acc=0.0, evidence=ev, flags=["unparseable_answer"])

ev = [E(0.0, 5.0, "a woman enters the room", (0.8, 0.2)),
      E(10.0, 15.0, "she sits on a red chair", (0.6, 0.4))]
add("r03", "mc", {"option": "A"},
    f"<think>First {tag(*ev[0][:3])}, then {tag(*ev[1][:3])}. So A.</think><answer>A</answer>",
    think_fmt=1, evid_fmt=1, r_acc=1.0, evidence=ev)

ev = [E(0.0, 10.0, "a boy kicks a ball", (0.7, 0.3)),
      E(5.0, 15.0, "a boy kicks the ball", (0.9, 0.1))]
add("r04", "mc", {"option": "D"},
    f"<think>{tag(*ev[0][:3])}{tag(*ev[1][:3])}</think><answer>(D)</answer>",
    think_fmt=1, evid_fmt=1, r_acc=1.0, evidence=ev)

ev = [E(12.0, 20.0, "the car stops at the light", (0.45, 0.05))]
add("r05", "vtg", {"interval": [10.0, 20.0]},
    f"<think>The car halts. {tag(*ev[0][:3])}</think><answer>[12, 20]</answer>",
    think_fmt=1, evid_fmt=1, r_acc=iou((10.0, 20.0), (12.0, 20.0)), evidence=ev)

ev = [E(15.0, 25.0, "a cyclist passes", (0.9, 0.1))]
add("r06", "vtg", {"interval": [10.0, 20.0]},
    f"<think>{tag(*ev[0][:3])}</think><answer>15 to 25</answer>",
    think_fmt=1, evid_fmt=1, r_acc=iou((10.0, 20.0), (15.0, 25.0)), evidence=ev)

ev = [E(0.0, 5.0, "a door opens", (0.9, 0.1))]
add("r07", "vtg", {"interval": [0.0, 10.0]},
    f"<think>{tag(*ev[0][:3])}</think><answer>0 - 5</answer>",
    think_fmt=1, evid_fmt=1, r_acc=iou((0.0, 10.0), (0.0, 5.0)), evidence=ev)

ev = [E(30.0, 40.0, "a bird lands on the fence", (0.75, 0.25))]
add("r08", "glue", {"option": "B", "interval": [30.0, 40.0]},
    f"<think>{tag(*ev[0][:3])} The bird is there.</think><answer>B, 30 to 40</answer>",
    think_fmt=1, evid_fmt=1, r_acc=1.0 + iou((30.0, 40.0), (30.0, 40.0)), evidence=ev)

ev = [E(22.0, 30.0, "two men shake hands", (0.2, 0.8))]
add("r09", "glue", {"option": "A", "interval": [20.0, 30.0]},
    f"<think>{tag(*ev[0][:3])}</think><answer>C, from 22 to 30</answer>",
    think_fmt=1, evid_fmt=1, r_acc=0.0 + iou((20.0, 30.0), (22.0, 30.0)), evidence=ev)

ev = [E(0.0, 20.0, "people gather outside", (0.9, 0.1)),
      E(0.0, 20.0, "people gather outside the hall", (0.6, 0.4))]
add("r10", "ro", {"order": ["1", "2", "3"]},
    f"<think>{tag(*ev[0][:3])} and {tag(*ev[1][:3])}</think><answer>1 -> 2 -> 3</answer>",
    think_fmt=1, evid_fmt=1, r_acc=1.0, evidence=ev)

ev = [E(5.0, 9.0, "a glass falls", (0.9, 0.1))]
add("r11", "ro", {"order": ["a", "b", "c"]},
    f"<think>{tag(*ev[0][:3])}</think><answer>b, a, c</answer>",
    think_fmt=1, evid_fmt=1, r_acc=0.0, evidence=ev)

q = "What does the man do?"
ev = [E(3.0, 8.0, "a man fixes a wheel", (0.7, 0.3))]
add("r12", "oe", {"answer": "he repairs a bicycle"},
    f"<think>{tag(*ev[0][:3])}</think><answer> He repairs a bike. </answer>",
    think_fmt=1, evid_fmt=1, question=q, evidence=ev,
    r_acc=verifier(q, "he repairs a bicycle", "He repairs a bike.", 0.8, 0.2))

q = "Why is the crowd cheering?"
ev = [E(40.0, 50.0, "a player scores a goal", (0.9, 0.1))]
add("r13", "oe", {"answer": "a goal was scored"},
    f"<think>{tag(*ev[0][:3])}</think><answer>the match ended</answer>",
    think_fmt=1, evid_fmt=1, question=q, evidence=ev,
    r_acc=verifier(q, "a goal was scored", "the match ended", 0.3, 0.7))

ev = [E(1.0, 2.0, "a phone rings", (0.9, 0.1))]
add("r14", "oe", {"answer": "she answers the phone"},
    f"<think>{tag(*ev[0][:3])}</think><answer>she ignores it</answer>",
    think_fmt=1, evid_fmt=1, evidence=ev, r_acc=0.5)

ev = [E(1.0, 4.0, "a man opens the door", (0.6, 0.4))]
add("r15", "mc", {"option": "B"},
    f"<think>Look {tag(*ev[0][:3])} he leaves<answer>B</answer>",
    think_fmt=0, evid_fmt=1, r_acc=1.0, evidence=ev)

add("r16", "mc", {"option": "A"},
    "<think>Only reasoning, no segments.</think><answer>A</answer>",
    think_fmt=1, evid_fmt=0, r_acc=1.0, evidence=[])

ev = [E(6.0, 9.0, "a child waves", (0.8, 0.2))]
add("r17", "mc", {"option": "C"},
    f'<think>{tag(*ev[0][:3])} then <start="5.0",end="2.0",desc="x y"></think><answer>C</answer>',
    think_fmt=1, evid_fmt=0, r_acc=1.0, evidence=ev)

ev = [E(12.0, 14.0, "a kettle boils", (0.75, 0.25))]
add("r18", "mc", {"option": "E"},
    f"<think>{tag(*ev[0][:3])}</think><answer>E</answer> trailing words",
    think_fmt=0, evid_fmt=1, r_acc=1.0, evidence=ev)

ev = [E(10.0, 20.0, "a cat sleeps", (0.8, 0.2)), E(50.0, 70.0, "a cat wakes up", "out")]
add("r19", "mc", {"option": "A"},
    f"<think>{tag(*ev[0][:3])}{tag(*ev[1][:3])}</think><answer>A</answer>",
    think_fmt=1, evid_fmt=1, r_acc=1.0, evidence=ev,
    flags=["evidence_out_of_range: [50, 70]"])

ev = [E(0.0, 2.0, "a bus arrives"), E(4.0, 6.0, "passengers step off"),
      E(8.0, 9.0, "the bus drives away")]
add("r20", "mc", {"option": "H"},
    f"<think>{''.join(tag(*x[:3]) for x in ev)}</think><answer>H</answer>",
    think_fmt=1, evid_fmt=1, r_acc=1.0, evidence=ev)


def breakdown(rec):
    ev = rec["evidence"]
    r_acc = rec["r_acc"]
    r_hallu = None
    per = []
    if ev and r_acc > 0.5:
        weights = []
        for i, (s, e, d, _) in enumerate(ev):
            overlap = 0.0
            for j, (s2, e2, d2, _) in enumerate(ev):
                if i != j:
                    overlap = max(overlap, iou((s, e), (s2, e2)) * rouge_l(d, d2))
            weights.append(1.0 - overlap)
        terms = []
        for (s, e, d, p), w in zip(ev, weights):
            if p == "out":
                terms.append(0.0)
                per.append(dict(start_s=s, end_s=e, weight=w, p_yes=None, p_no=None, score=0.0))
                continue
            py, pn = p if p is not None else (0.5, 0.5)
            ratio = py / (py + pn)
            terms.append(w * ratio)
            per.append(dict(start_s=s, end_s=e, weight=w, p_yes=py, p_no=pn, score=w * ratio))
        r_hallu = sum(sorted(terms)) / normalizer(len(ev))
    total = (1.0 * r_acc + 0.5 * rec["think_fmt"] + 0.5 * rec["evid_fmt"]
             + 0.2 * (r_hallu if r_hallu is not None else 0.0))
    return dict(id=rec["id"], task=rec["task"], r_acc=r_acc, r_think_fmt=rec["think_fmt"],
                r_evid_fmt=rec["evid_fmt"], r_hallu=r_hallu, total=total,
                per_evidence=per, flags=rec["flags"])


def dump(obj):
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def main():
    assert len(RECORDS) == 20
    with open("rollouts.jsonl", "w") as f:
        for r in RECORDS:
            f.write(dump(dict(id=r["id"], task=r["task"], question=r["question"],
                              video=dict(path=r["path"], duration_s=VIDEO_DURATION),
                              ground_truth=r["gt"], response=r["response"])) + "\n")
    with open("fixture_table.json", "w") as f:
        f.write(json.dumps({"judge": JUDGE, "verify": VERIFY}, indent=2) + "\n")
    with open("golden_breakdowns.jsonl", "w") as f:
        for r in RECORDS:
            f.write(dump(breakdown(r)) + "\n")


if __name__ == "__main__":
    main()
