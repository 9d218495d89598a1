from engine.errors import UsageError

PROP_KEYWORDS = {
    "cp": ["cp", "clopper", "clopper-pearson", "clopper_pearson", "cp1", "hp1"],
    "blaker": ["blaker", "cp2", "hp2"],
    "lrt": ["lrt", "likelihood", "likelihood-ratio", "cp3", "hp3"],
    "wald": ["wald", "cp5"],
    "wilson": ["wilson", "score", "cp6"],
    "sample_prop": ["sample_prop", "sample", "phat", "point", "cp7"],
    "custom_point": ["custom_point", "custom", "cp8"],
    "identity": ["identity", "order", "x"],
}

DIFF_KEYWORDS = {
    "lrt": ["lrt", "likelihood", "likelihood-ratio", "cd1"],
    "score": ["score", "cd2"],
    "wald": ["wald", "cd3"],
    "mle": ["mle", "point", "cd4"],
}

REFINE_KEYWORDS = {
    "none": ["none", "no", "0"],
    "M": ["m", "once", "1"],
    "Minf": ["minf", "m-inf", "inf", "fixed", "fixed-point"],
}

FAMILIES = {"prop": PROP_KEYWORDS, "diff": DIFF_KEYWORDS, "refine": REFINE_KEYWORDS}


def classify_method(text, family):
    """Resolve a user-typed method name or alias to its method tag."""
    t = (text or "").strip().lower().replace(" ", "")
    for tag, keywords in FAMILIES[family].items():
        if t in keywords:
            return tag
    known = ", ".join(FAMILIES[family])
    raise UsageError(f"unknown {family} method {text!r}; expected one of {known}")
