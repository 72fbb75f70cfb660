import sys, os

from tqdm import tqdm

# Setup paths
sys.path.append(os.path.join(os.getcwd(), "src"))
from expconcavify.analysis.characterization import check_prop5
from expconcavify.errors import ExpConcavifyError
from expconcavify.links.link_functions import build_link
from expconcavify.losses.catalog import catalog_loss
from expconcavify.losses.risk import mixability_constant

LOSSES = ["log", "square_vector", "square_scalar", "boosting"]
LINKS = ["identity", "canonical", "psi_star", "geometric"]
UPPER = 64.0
BISECTIONS = 30


def largest_alpha(loss, link):
    """Bisect the largest alpha the grid test accepts; 0 when even a tiny alpha fails."""
    lo, hi = 0.0, UPPER
    if check_prop5(loss, link, hi).verdict:
        return hi
    for _ in range(BISECTIONS):
        mid = 0.5 * (lo + hi)
        if check_prop5(loss, link, mid).verdict:
            lo = mid
        else:
            hi = mid
    return lo


def build_table():
    rows = []
    for name in tqdm(LOSSES, desc="Bisecting alpha"):
        loss = catalog_loss(name)
        row = {"loss": name, "mixability": mixability_constant(loss)}
        for link_name in LINKS:
            try:
                row[link_name] = largest_alpha(loss, build_link(link_name, loss))
            except ExpConcavifyError as e:
                row[link_name] = float("nan")
                print(f"⚠️  {name}+{link_name}: {e}")
        rows.append(row)
    return rows


if __name__ == "__main__":
    rows = build_table()
    print("\n" + "=" * 35)
    print("📊 EXP-CONCAVITY CEILINGS")
    print("=" * 35)
    print(f"{'loss':15}{'beta':>10}" + "".join(f"{name:>12}" for name in LINKS))
    for row in rows:
        print(f"{row['loss']:15}{row['mixability']:>10.4g}" + "".join(f"{row[name]:>12.4g}" for name in LINKS))
    print("=" * 35)
