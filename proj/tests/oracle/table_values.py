"""Independent reference values for the table-driven metric tests.

Plain Python with fractions where it matters; shares no code with the C++ library.
Run it to regenerate the constants frozen in test_metrics.cpp and acceptance.cpp.
"""
from fractions import Fraction
import math

F1 = {"qwen3": 60.24, "kimi": 42.51, "llama": 27.74, "deepseek": 27.59,
      "grok": 19.21, "gemini": 16.83, "gptoss": 14.42}

QWEN_ENTRY_BEFORE = {"kimi": 29.40, "deepseek": 21.00, "llama": 14.40, "grok": 13.80,
                 "gptoss": 12.80, "gemini": 8.60}
QWEN_ENTRY_AFTER = {"qwen3": 36.00, "kimi": 29.40, "deepseek": 11.60, "gemini": 6.60,
                "gptoss": 6.40, "llama": 5.60, "grok": 4.40}
DEEPSEEK_ENTRY_BEFORE = {"qwen3": 51.6, "kimi": 14.8, "llama": 10.6, "grok": 9.6,
                 "gptoss": 7.4, "gemini": 6.0}
DEEPSEEK_ENTRY_AFTER = {"qwen3": 57.8, "kimi": 15.8, "deepseek": 12.0, "llama": 4.6,
                "gptoss": 4.2, "gemini": 3.2, "grok": 2.4}


def fair_share(scores, drop=None):
    kept = {k: Fraction(str(v)) for k, v in scores.items() if k != drop}
    total = sum(kept.values())
    return {k: v / total for k, v in kept.items()}


def hhi(percent_shares):
    return sum(Fraction(str(s)) ** 2 for s in percent_shares.values())


def main():
    for label, drop in (("full", None), ("w/o qwen3", "qwen3"), ("w/o deepseek", "deepseek")):
        fs = fair_share(F1, drop)
        print(label, {k: round(float(100 * v), 4) for k, v in fs.items()})
    for label, table in (("qwen entry before", QWEN_ENTRY_BEFORE), ("qwen entry after", QWEN_ENTRY_AFTER),
                         ("deepseek entry before", DEEPSEEK_ENTRY_BEFORE), ("deepseek entry after", DEEPSEEK_ENTRY_AFTER)):
        print(label, "HHI", float(hhi(table)), "sum", sum(table.values()))

    full = fair_share(F1)
    no_qwen = fair_share(F1, "qwen3")
    cells = {
        "kimi qwen-entry before (six-model target)": Fraction("29.40") - 100 * no_qwen["kimi"],
        "qwen3 qwen-entry after": Fraction("36.00") - 100 * full["qwen3"],
        "kimi qwen-entry after": Fraction("29.40") - 100 * full["kimi"],
        "kimi deepseek-entry after": Fraction("15.80") - 100 * full["kimi"],
        "deepseek deepseek-entry after": Fraction("12.0") - 100 * full["deepseek"],
    }
    for k, v in cells.items():
        print("dFS", k, round(float(v), 4))

    ee = sum((Fraction(str(QWEN_ENTRY_AFTER[k])) / 100 - full[k]) ** 2 for k in full)
    print("EE qwen-entry after vs full", repr(float(ee)))
    print("softmax e/(e+1)", repr(math.e / (math.e + 1)))


if __name__ == "__main__":
    main()
