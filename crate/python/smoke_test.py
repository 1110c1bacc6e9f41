#!/usr/bin/env python3
"""Smoke test for the placemetrics Python extension.

Build the module first, then run this script from the repository root:

    cargo build -p placemetrics-py
    python3 python/smoke_test.py
"""

import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def import_module():
    candidates = [
        ROOT / "target" / profile / "libplacemetrics_py.so"
        for profile in ("release", "debug")
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("extension not built; run: cargo build -p placemetrics-py")
    stage = Path(tempfile.mkdtemp(prefix="placemetrics-py-"))
    shutil.copy2(built, stage / "placemetrics.so")
    sys.path.insert(0, str(stage))
    import placemetrics

    return placemetrics


def main():
    pm = import_module()

    # Placement rule.
    assert pm.placement(55.0) == "college_algebra"
    assert pm.placement(56.0) == "precalculus"
    assert pm.placement(71.0) == "calculus_1"
    try:
        pm.placement(123.0)
    except ValueError:
        pass
    else:
        raise AssertionError("placement(123.0) should raise")

    # Reference cohort: fixed size and group quotas at any seed.
    cohort = pm.Matrix.reference(30)
    assert len(cohort) == 198 and cohort.item_count == 40
    assert cohort.class_counts() == {
        "college_algebra": 118,
        "precalculus": 59,
        "calculus_1": 21,
    }
    assert cohort.is_labelled
    assert pm.Matrix.reference(7).to_csv_text() == pm.Matrix.reference(7).to_csv_text()

    # The anchor item's group marginals are pinned exactly, so its ANOVA and
    # mutual information are seed-independent constants.
    a = pm.anova_f(cohort, 5)
    assert abs(a["f_stat"] - 4609.09) < 0.01, a["f_stat"]
    assert abs(a["log10_p"] + 164.16) < 0.01, a["log10_p"]
    assert abs(pm.mutual_info(cohort, 5) - 0.6474) < 0.001

    # Score summary and CTT table.
    summary = pm.describe(cohort.percent_scores())
    assert summary["n"] == 198 and 0.0 <= summary["mean"] <= 100.0
    items = pm.item_analysis(cohort)
    assert len(items) == 40
    assert all(0.0 <= it["difficulty"] <= 1.0 for it in items)
    assert {it["quality"] for it in items} <= {"excellent", "good", "marginal", "poor"}

    # Forest: fit, JSON round trip, importances.
    forest = pm.Forest.train(cohort, seed=30, trees=50)
    assert forest.accuracy(cohort) > 0.9
    mdi = forest.mdi_importance()
    assert len(mdi) == 40 and abs(sum(mdi) - 1.0) < 1e-9
    clone = pm.Forest.from_json(forest.to_json())
    assert clone.predict(cohort) == forest.predict(cohort)
    perm = forest.permutation_importance(cohort, seed=31, repeats=5)
    assert len(perm) == 40 and all("mean_drop" in p for p in perm)

    # Cross-validation: the rule baseline is exact on rule-labelled data.
    cv = pm.cross_validate(cohort, 5, seed=30, trees=50)
    assert cv["folds"] == 5 and 0.0 <= cv["mean_accuracy"] <= 1.0
    baseline = pm.rule_baseline_cv(cohort, 5, seed=30)
    assert baseline["mean_accuracy"] == 1.0

    # Competency clustering.
    comp = pm.competency_analysis(cohort, 2, 4, seed=30, bootstrap_iters=20)
    assert comp["selected_k"] >= 2
    assert len(comp["solution"]["assignments"]) == 198
    assert comp["stability"]["iterations"] == 20

    # CSV round trip and hand-built matrices.
    clone = pm.Matrix.from_csv_text(cohort.to_csv_text())
    assert clone.labels() == cohort.labels() and clone.ids() == cohort.ids()
    tiny = pm.Matrix.from_rows(["a", "b"], [[1, 0], [0, 1]])
    assert not tiny.is_labelled
    assert tiny.with_labels_from_placement().labels() == ["college_algebra"] * 2

    print("smoke test passed:", pm.__version__)


if __name__ == "__main__":
    main()
