import sys, os
from collections import Counter

import pandas as pd

# Setup paths
sys.path.append(os.path.join(os.getcwd(), "src"))
from expconcavify import settings
from expconcavify.sweep import MANIFEST_NAME


def summarize_sweep(manifest_path):
    if not os.path.exists(manifest_path):
        print(f"❌ No manifest at {manifest_path}; run `python main.py sweep` first.")
        return 1

    manifest = pd.read_csv(manifest_path)
    stats = Counter()
    for row in manifest.itertuples(index=False):
        if row.status != "ok":
            stats["Failed"] += 1
        elif row.bound_ok:
            stats["Within Bound"] += 1
        else:
            stats["Bound Exceeded"] += 1

    finished = manifest[manifest.status == "ok"]
    if not finished.empty:
        table = finished.pivot_table(
            index=["substitution", "eta"], columns="setting", values="final_regret", aggfunc="max",
        )
        print("Worst final regret per substitution and learning rate (columns: expert setting)")
        print(table.round(4).to_string())

    print("\n" + "=" * 35)
    print("📊 SWEEP SUMMARY")
    print("=" * 35)
    for k, v in stats.items():
        print(f"{k:25}: {v}")
    print("=" * 35)
    return 0 if stats["Bound Exceeded"] == 0 else 1


if __name__ == "__main__":
    path = sys.argv[1] if len(sys.argv) > 1 else os.path.join(settings.output_dir(), MANIFEST_NAME)
    sys.exit(summarize_sweep(path))
